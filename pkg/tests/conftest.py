import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion with a one-line verdict")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _CRITERIA[number] = (title, rep.passed, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, seconds = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}  ({seconds:.1f} s)")
