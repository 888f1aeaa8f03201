"""Clip synthesis and on-disk sub-dataset generation."""

from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import __version__
from ..storage import dataset as layout
from ..storage.clipfile import write_clip, write_trajectory
from .physics import round_half_up, simulate
from .render import render_bottom, render_top
from .scene import SceneConfig, preset_hash, scene_from_catalog

SPLITS = {"train": 0, "test": 1}


@dataclass
class ClipRecord:
    top: np.ndarray       # [T, H_t, W_t, 3] uint8
    bottom: np.ndarray    # [T, H_b, W_b, 3] uint8
    truth: np.ndarray     # [T, 3] int64 (i, x, y)
    scene: str
    seed: object


def generate_clip(scene: SceneConfig, seed) -> ClipRecord:
    """Simulate at the fine step and sample every frame at 5 fps from both views."""
    frames, _ = simulate(scene, seed)
    top = np.stack([render_top(s, scene) for s in frames])
    bottom = np.stack([render_bottom(s, scene) for s in frames])
    xy = round_half_up(np.array([s.pos[0] for s in frames]))
    truth = np.column_stack([np.arange(len(frames)), xy]).astype(np.int64)
    return ClipRecord(top=top, bottom=bottom, truth=truth, scene=scene.name, seed=seed)


def clip_seed(base_seed: int, split: str, index: int) -> list[int]:
    """Entropy for one clip; distinct (split, index) pairs never share a stream."""
    return [int(base_seed), SPLITS[split], int(index)]


def generate_subdataset(name: str, n_train: int, n_test: int, base_seed: int, out_dir,
                        force: bool = False, bottom_res: Sequence[int] = (48, 64),
                        top_res: Sequence[int] = (96, 96)) -> Path:
    """Write ``n_train + n_test`` clips plus a manifest under ``out_dir/<name>``."""
    if n_train <= 0 or n_test <= 0:
        raise ValueError("n_train and n_test must be positive")
    scene = scene_from_catalog(name, tuple(bottom_res), tuple(top_res))
    root = Path(out_dir) / scene.name
    if root.exists() and any(root.iterdir()):
        if not force:
            raise FileExistsError(f"{root} exists and is not empty (use --force to overwrite)")
        shutil.rmtree(root)
    for split in SPLITS:
        (root / split).mkdir(parents=True, exist_ok=True)
    for split, n in (("train", n_train), ("test", n_test)):
        for idx in range(n):
            rec = generate_clip(scene, clip_seed(base_seed, split, idx))
            paths = layout.clip_paths(root, split, idx)
            write_clip(rec.top, paths["top"], "top")
            write_clip(rec.bottom, paths["bottom"], "bottom")
            write_trajectory(rec.truth, paths["traj"])
    manifest = {
        "subdataset": scene.name,
        "catalog_entry": name,
        "counts": {"train": n_train, "test": n_test},
        "base_seed": base_seed,
        "seed_rule": "default_rng([base_seed, split_id, index]), split_id train=0 test=1",
        "physics_preset_hash": preset_hash(),
        "bottom_res": list(scene.bottom_res),
        "top_res": list(scene.top_res),
        "n_frames": scene.n_frames,
        "fps": scene.fps,
        "fill_value": 255,
        "target_color": list(scene.target.color),
        "version": __version__,
    }
    layout.write_manifest(root, manifest)
    return root
