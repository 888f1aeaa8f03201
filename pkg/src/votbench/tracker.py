"""Colour-key target tracking on bottom-view frames and trajectory rasterisation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

GRID_ROWS = 12
GRID_COLS = 16
FILL_VALUE = 255.0

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])


class TrackingError(RuntimeError):
    """The key colour was never detected in a clip."""


class LabelError(ValueError):
    """A trajectory point lies outside the bottom frame."""


@dataclass(frozen=True)
class ColorKey:
    rgb: tuple
    tolerance: int = 40

    def __post_init__(self):
        if not 0 <= self.tolerance < 128:
            raise ValueError(f"tolerance {self.tolerance} outside [0, 128)")


def color_mask(frame: np.ndarray, key: ColorKey) -> np.ndarray:
    diff = np.abs(frame.astype(np.int16) - np.asarray(key.rgb, dtype=np.int16))
    return (diff <= key.tolerance).all(axis=-1)


def detect_centroid(frame: np.ndarray, key: ColorKey) -> Optional[tuple[float, float]]:
    """Centroid (row, col) of the largest 4-connected key-coloured region, or None."""
    mask = color_mask(frame, key)
    if not mask.any():
        return None
    labels, n = ndimage.label(mask, structure=_FOUR_CONNECTED)
    sizes = np.bincount(labels.ravel())[1:]
    best = int(np.argmax(sizes)) + 1  # ties go to the lowest label
    rows, cols = np.nonzero(labels == best)
    return float(rows.mean()), float(cols.mean())


def round_half_up(x) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def track_clip(video: np.ndarray, key: ColorKey, name: str = "clip") -> np.ndarray:
    """Per-frame centroids as integer ``(i, x, y)`` rows.

    Missed frames carry the previous position forward; leading misses take the
    first detection.
    """
    found = [detect_centroid(frame, key) for frame in video]
    first = next((p for p in found if p is not None), None)
    if first is None:
        raise TrackingError(f"key colour {key.rgb} not detected in any frame of {name}")
    out = np.zeros((len(found), 3), dtype=np.int64)
    last = first
    for i, p in enumerate(found):
        if p is not None:
            last = p
        out[i] = (i, *round_half_up(last))
    return out


def grid_cells(label: np.ndarray, h_b: int, w_b: int) -> tuple[np.ndarray, np.ndarray]:
    label = np.asarray(label, dtype=np.int64).reshape(-1, 3)
    x, y = label[:, 1], label[:, 2]
    bad = (x < 0) | (x > h_b) | (y < 0) | (y > w_b)
    if bad.any():
        i = int(np.argmax(bad))
        raise LabelError(f"point {tuple(label[i])} outside 0..{h_b} x 0..{w_b}")
    rows = np.minimum(x * GRID_ROWS // h_b, GRID_ROWS - 1)
    cols = np.minimum(y * GRID_COLS // w_b, GRID_COLS - 1)
    return rows, cols


def rasterize(label: np.ndarray, h_b: int, w_b: int, fill_value: float = FILL_VALUE) -> np.ndarray:
    """12x16 occupancy grid: ``fill_value`` where the trajectory visited, else 0."""
    rows, cols = grid_cells(label, h_b, w_b)
    grid = np.zeros((GRID_ROWS, GRID_COLS), dtype=np.float64)
    grid[rows, cols] = fill_value
    return grid


def parse_color(text: str) -> tuple:
    parts = [int(p) for p in text.split(",")]
    if len(parts) != 3 or not all(0 <= p <= 255 for p in parts):
        raise ValueError(f"colour must be R,G,B in 0..255, got {text!r}")
    return tuple(parts)
