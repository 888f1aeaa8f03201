import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from votbench.sim.generate import generate_clip
from votbench.sim.scene import scene_from_catalog
from votbench.tracker import (
    ColorKey,
    LabelError,
    TrackingError,
    detect_centroid,
    grid_cells,
    parse_color,
    rasterize,
    track_clip,
)

RED = (220, 30, 30)


def blank(h=48, w=64):
    frame = np.empty((h, w, 3), dtype=np.uint8)
    frame[:] = (235, 235, 235)
    return frame


def test_single_pixel_centroid():
    f = blank()
    f[10, 20] = RED
    assert detect_centroid(f, ColorKey(RED)) == (10.0, 20.0)


def test_largest_component_wins():
    f = blank()
    f[0:2, 0:2] = RED
    f[30:35, 40:45] = RED
    assert detect_centroid(f, ColorKey(RED)) == (32.0, 42.0)


def test_diagonal_pixels_are_separate_components():
    f = blank()
    f[5, 5] = f[6, 6] = RED
    # two singletons, ties go to the first in scan order
    assert detect_centroid(f, ColorKey(RED)) == (5.0, 5.0)


def test_tolerance_bounds():
    f = blank()
    f[3, 4] = (220 + 0, 30 + 40, 30)
    assert detect_centroid(f, ColorKey(RED, 40)) == (3.0, 4.0)
    assert detect_centroid(f, ColorKey(RED, 39)) is None
    with pytest.raises(ValueError):
        ColorKey(RED, 128)


def test_track_carries_forward_and_back_fills():
    video = np.stack([blank() for _ in range(5)])
    video[1, 10, 12] = RED
    video[3, 20, 22] = RED
    out = track_clip(video, ColorKey(RED))
    assert out.tolist() == [[0, 10, 12], [1, 10, 12], [2, 10, 12], [3, 20, 22], [4, 20, 22]]


def test_track_never_found():
    with pytest.raises(TrackingError):
        track_clip(np.stack([blank()] * 3), ColorKey(RED))


def test_track_rounds_half_up():
    video = blank()[None].copy()
    video[0, 10, 10:12] = RED  # centroid col 10.5
    assert track_clip(video, ColorKey(RED))[0].tolist() == [0, 10, 11]


def test_grid_cell_examples():
    rows, cols = grid_cells(np.array([[0, 0, 0], [1, 48, 64], [2, 4, 4], [3, 3, 3]]), 48, 64)
    assert rows.tolist() == [0, 11, 1, 0]
    assert cols.tolist() == [0, 15, 1, 0]


def test_rasterize_values_and_errors():
    g = rasterize(np.array([[0, 0, 0], [1, 0, 1]]), 48, 64)
    assert g.shape == (12, 16) and g[0, 0] == 255.0 and g.sum() == 255.0
    assert rasterize(np.array([[0, 47, 63]]), 48, 64, fill_value=1.0)[11, 15] == 1.0
    with pytest.raises(LabelError):
        rasterize(np.array([[0, 49, 0]]), 48, 64)
    with pytest.raises(LabelError):
        rasterize(np.array([[0, 0, -1]]), 48, 64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 48), st.integers(0, 64)), min_size=1, max_size=30))
def test_rasterize_matches_direct_cells(points):
    label = np.array([(i, x, y) for i, (x, y) in enumerate(points)])
    grid = rasterize(label, 48, 64)
    want = np.zeros((12, 16))
    for x, y in points:
        want[min(x * 12 // 48, 11), min(y * 16 // 64, 15)] = 255.0
    assert np.array_equal(grid, want)
    assert set(np.unique(grid)) <= {0.0, 255.0}


def test_parse_color():
    assert parse_color("220,30,30") == RED
    with pytest.raises(ValueError):
        parse_color("1,2")


@pytest.mark.parametrize("name", ["ball_quintuple", "cube_double", "icosahedron_quintuple_static"])
def test_tracker_recovers_rendered_truth(name):
    scene = scene_from_catalog(name)
    for seed in range(3):
        rec = generate_clip(scene, seed)
        tracked = track_clip(rec.bottom, ColorKey(scene.target.color))
        assert np.abs(tracked - rec.truth).max() <= 1
        assert np.array_equal(rasterize(tracked, 48, 64), rasterize(rec.truth, 48, 64))


def test_full_resolution_cell_examples():
    g = rasterize(np.array([[0, 0, 0], [1, 479, 639]]), 480, 640)
    assert g[0, 0] == 255.0 and g[11, 15] == 255.0 and np.count_nonzero(g) == 2
    assert np.count_nonzero(rasterize(np.array([[i, 100, 200] for i in range(50)]), 480, 640)) == 1
    assert grid_cells(np.array([[0, 39, 40]]), 480, 640) == (np.array([0]), np.array([1]))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 48), st.integers(0, 64)), min_size=2, max_size=20), st.randoms())
def test_rasterize_prefix_order_and_duplicates(points, rnd):
    label = np.array([(i, x, y) for i, (x, y) in enumerate(points)])
    full = rasterize(label, 48, 64)
    prefix = rasterize(label[: len(label) // 2], 48, 64)
    assert np.all(full[prefix > 0] > 0)
    order = list(range(len(label)))
    rnd.shuffle(order)
    assert np.array_equal(rasterize(label[order], 48, 64), full)
    assert np.array_equal(rasterize(np.concatenate([label, label]), 48, 64), full)
