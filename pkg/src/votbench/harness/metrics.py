"""Prediction error and generation gap."""

from __future__ import annotations

import numpy as np

GRID_SHAPE = (12, 16)


def prediction_error(r, p) -> float:
    """Mean squared cell difference between two 12x16 grids."""
    r = np.asarray(r, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if r.shape != GRID_SHAPE or p.shape != GRID_SHAPE:
        raise ValueError(f"grids must be {GRID_SHAPE}, got {r.shape} and {p.shape}")
    return float(np.mean((r - p) ** 2))


def batch_prediction_error(r, p) -> np.ndarray:
    """Per-clip PE for stacked ``[N, 12, 16]`` grids."""
    r = np.asarray(r, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    if r.shape != p.shape or r.shape[-2:] != GRID_SHAPE:
        raise ValueError(f"grid stacks must match and end in {GRID_SHAPE}, got {r.shape} and {p.shape}")
    return np.mean((r - p) ** 2, axis=(-2, -1))


def dataset_pe(r, p) -> float:
    """Unweighted mean of per-clip PE."""
    return float(np.mean(batch_prediction_error(r, p)))


def generation_gap(pe_new: float, pe_previous: float) -> float:
    """Transferred-model PE minus scratch-model PE on the same eval set."""
    return float(pe_new) - float(pe_previous)
