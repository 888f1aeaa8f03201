"""Flat-shaded rasterisers for the two camera views.

Pixel ``(r, c)`` of the bottom view samples the point ``(r, c)`` in workspace
coordinates, and objects are drawn at their centre rounded half-up, so a
rendered disc is symmetric about an integer pixel and its colour centroid is
exactly the rounded true position.
"""

from __future__ import annotations

import numpy as np

from .physics import SimState, round_half_up
from .scene import SceneConfig


def _paint(frame: np.ndarray, rows: np.ndarray, cols: np.ndarray, center, radius: float,
           square: bool, color) -> None:
    """Fill a disc or axis-aligned square given per-pixel workspace coordinates.

    ``rows``/``cols`` are 1-D workspace coordinates of the frame's pixel rows/columns.
    """
    cr, cc = center
    r_idx = np.nonzero(np.abs(rows - cr) <= radius)[0]
    c_idx = np.nonzero(np.abs(cols - cc) <= radius)[0]
    if r_idx.size == 0 or c_idx.size == 0:
        return
    r0, r1 = r_idx[0], r_idx[-1] + 1
    c0, c1 = c_idx[0], c_idx[-1] + 1
    if square:
        frame[r0:r1, c0:c1] = color
        return
    dr = (rows[r0:r1] - cr)[:, None]
    dc = (cols[c0:c1] - cc)[None, :]
    inside = dr * dr + dc * dc <= radius * radius
    frame[r0:r1, c0:c1][inside] = color


def _object_centres(state: SimState) -> np.ndarray:
    return round_half_up(state.pos).astype(np.float64)


def render_bottom(state: SimState, scene: SceneConfig) -> np.ndarray:
    """Occlusion-free view from below: background objects first, target on top."""
    h, w = scene.bottom_res
    frame = np.empty((h, w, 3), dtype=np.uint8)
    frame[:] = scene.floor_bottom
    rows = np.arange(h, dtype=np.float64)
    cols = np.arange(w, dtype=np.float64)
    # the gripper is above the plate and hidden behind any object
    _paint(frame, rows, cols, round_half_up(state.gripper), scene.gripper_radius_px, False, scene.gripper_color)
    centres = _object_centres(state)
    order = list(range(1, len(scene.objects))) + [0]
    for i in order:
        obj = scene.objects[i]
        _paint(frame, rows, cols, centres[i], obj.radius_px, obj.square, obj.color)
    return frame


def top_coordinates(scene: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """Workspace coordinates sampled by each top-view pixel row and column."""
    (hb, wb), (ht, wt) = scene.bottom_res, scene.top_res
    rows = (np.arange(ht) + 0.5) * (hb / ht) - 0.5
    cols = (np.arange(wt) + 0.5) * (wb / wt) - 0.5
    return rows, cols


def render_top(state: SimState, scene: SceneConfig) -> np.ndarray:
    """Occluded view from above: objects, then the gantry bar and gripper over them."""
    ht, wt = scene.top_res
    frame = np.empty((ht, wt, 3), dtype=np.uint8)
    frame[:] = scene.floor_top
    rows, cols = top_coordinates(scene)
    centres = _object_centres(state)
    for i in list(range(1, len(scene.objects))) + [0]:
        obj = scene.objects[i]
        _paint(frame, rows, cols, centres[i], obj.radius_px, obj.square, obj.color)
    g = state.gripper
    half = 0.6 * scene.gripper_radius_px
    bar_rows = rows <= g[0]
    bar_cols = np.abs(cols - g[1]) <= half
    frame[np.ix_(bar_rows, bar_cols)] = scene.gantry_color
    _paint(frame, rows, cols, g, scene.gripper_radius_px, False, scene.gripper_color)
    return frame


def gripper_footprint(scene: SceneConfig, state: SimState) -> np.ndarray:
    """Boolean top-view mask of pixels covered by the gripper disc."""
    rows, cols = top_coordinates(scene)
    g = state.gripper
    return ((rows[:, None] - g[0]) ** 2 + (cols[None, :] - g[1]) ** 2) <= scene.gripper_radius_px ** 2
