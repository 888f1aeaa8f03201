import json

import pytest

from votbench.cli import main
from votbench.harness.checks import tiny_config
from votbench.harness.protocols import config_overrides

TINY = json.dumps({k: v for k, v in tiny_config("swint").to_dict().items()
                   if k in config_overrides(tiny_config("swint"))})


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["gen", "--catalog", "ball_single,ball_double", "--train", "4", "--test", "2",
                 "--seed", "1", "--out", str(out)]) == 0
    return out


def test_help_and_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    with pytest.raises(SystemExit) as exc:
        main(["train", "--bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--catalog", "ball_single", "--train", "x", "--test", "1", "--out", "o"])
    assert exc.value.code == 2


def test_gen_then_validate(dataset, capsys):
    assert main(["validate", str(dataset)]) == 0
    assert "0 violation(s)" in capsys.readouterr().out


def test_gen_refuses_to_overwrite(dataset, capsys):
    assert main(["gen", "--catalog", "ball_single", "--train", "1", "--test", "1", "--out", str(dataset)]) == 1
    assert "--force" in capsys.readouterr().err


def test_validate_reports_damage(dataset, tmp_path, capsys):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(dataset, copy)
    (copy / "ball_single" / "test" / "clip_000001_traj.csv").unlink()
    assert main(["validate", str(copy)]) == 1
    assert "1 violation(s)" in capsys.readouterr().out


def test_track_prints_csv(dataset, capsys):
    clip = dataset / "ball_single" / "train" / "clip_000000_bottom.cgpv"
    assert main(["track", "--clip", str(clip), "--color", "220,30,30", "--tol", "40"]) == 0
    out = capsys.readouterr().out.splitlines()
    truth = (dataset / "ball_single" / "train" / "clip_000000_traj.csv").read_text().splitlines()
    assert out[0] == "i,x,y" and len(out) == 51
    assert out == truth


def test_train_eval_zeroshot_finetune_report(dataset, tmp_path, capsys):
    ckpts = tmp_path / "ckpt"
    ckpts.mkdir()
    for name in ("ball_single", "ball_double"):
        assert main(["train", "--dataset", str(dataset / name), "--model", "swint", "--epochs", "1",
                     "--batch", "2", "--lr", "1e-3", "--seed", "0", "--config", TINY,
                     "--out", str(ckpts / f"{name}.votc")]) == 0
    man = json.loads((ckpts / "ball_single.votc.manifest.json").read_text())
    assert man["args"]["seed"] == 0 and man["drop_last"] is True and "numpy" in man["versions"]

    assert main(["eval", "--ckpt", str(ckpts / "ball_single.votc"), "--dataset", str(dataset / "ball_single"),
                 "--out", str(tmp_path / "pe.json")]) == 0
    pe = json.loads((tmp_path / "pe.json").read_text())["pe"]
    assert pe > 0

    rep = tmp_path / "report"
    assert main(["zeroshot", "--ckpts", str(ckpts / "*.votc"),
                 "--datasets", f"{dataset / 'ball_single'},{dataset / 'ball_double'}", "--out", str(rep)]) == 0
    capsys.readouterr()
    assert main(["report", "--in", str(rep), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "model,train_set,eval_set,pe,gp,seed,ckpt_hash" and len(lines) == 5
    assert main(["report", "--in", str(rep), "--format", "md"]) == 0
    assert "/--" in capsys.readouterr().out

    assert main(["finetune", "--ckpt", str(ckpts / "ball_single.votc"), "--dataset", str(dataset / "ball_double"),
                 "--sizes", "2,4", "--epochs", "1", "--batch", "2", "--lr", "1e-3"]) == 0
    rows = capsys.readouterr().out.split()
    assert rows[0::2] == ["0", "2", "4"]


def test_missing_checkpoint_is_an_error(tmp_path, capsys):
    assert main(["eval", "--ckpt", str(tmp_path / "none.votc"), "--dataset", str(tmp_path)]) == 1
    assert "error" in capsys.readouterr().err


def test_gradcheck_tiny_both_modes(capsys):
    assert main(["gradcheck", "--tiny", "--model", "swint"]) == 0
    assert "module groups checked" in capsys.readouterr().out
    assert main(["gradcheck", "--tiny", "--model", "swint", "--per-tensor", "1"]) == 0
    assert "tensors checked" in capsys.readouterr().out
