"""Dataset directory layout, manifests and validation.

``<root>/<subdataset>/{train,test}/clip_<idx6>_{top,bottom}.cgpv``,
``clip_<idx6>_traj.csv`` and ``<root>/<subdataset>/manifest`` (JSON).
"""

from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clipfile import FormatError, atomic_write, read_clip, read_clip_header, read_trajectory

MANIFEST = "manifest"
_CLIP_RE = re.compile(r"clip_(\d{6})_(top|bottom|traj)\.(cgpv|csv)$")


def clip_paths(root, split: str, index: int) -> dict[str, Path]:
    d = Path(root) / split
    stem = f"clip_{index:06d}"
    return {"top": d / f"{stem}_top.cgpv", "bottom": d / f"{stem}_bottom.cgpv", "traj": d / f"{stem}_traj.csv"}


def write_manifest(root, manifest: dict) -> None:
    data = dict(manifest)
    data["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    atomic_write(Path(root) / MANIFEST, (json.dumps(data, indent=2, sort_keys=True) + "\n").encode())


def read_manifest(root) -> dict:
    path = Path(root) / MANIFEST
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise FileNotFoundError(f"no manifest in {root}") from None
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: {err}") from err


def resolve_subdataset(path) -> Path:
    """Accept either a sub-dataset directory or a root holding exactly one."""
    path = Path(path)
    if (path / MANIFEST).exists():
        return path
    subs = [p for p in sorted(path.iterdir()) if (p / MANIFEST).exists()] if path.is_dir() else []
    if len(subs) == 1:
        return subs[0]
    raise FileNotFoundError(f"{path} is not a sub-dataset directory ({len(subs)} candidates inside)")


def split_indices(root, split: str) -> list[int]:
    d = Path(root) / split
    if not d.is_dir():
        return []
    return sorted({int(m.group(1)) for p in d.iterdir() if (m := _CLIP_RE.match(p.name))})


@dataclass
class ValidationReport:
    root: Path
    violations: list = field(default_factory=list)
    checked: int = 0

    @property
    def clean(self) -> bool:
        return not self.violations

    def add(self, path, reason: str) -> None:
        self.violations.append((str(path), reason))

    def format(self) -> str:
        lines = [f"{p}: {r}" for p, r in self.violations]
        lines.append(f"{self.root}: {self.checked} clips checked, {len(self.violations)} violation(s)")
        return "\n".join(lines)


def _validate_subdataset(sub: Path, report: ValidationReport) -> None:
    try:
        man = read_manifest(sub)
    except (FileNotFoundError, FormatError) as err:
        report.add(sub / MANIFEST, str(err))
        return
    h_b, w_b = man.get("bottom_res", (0, 0))
    h_t, w_t = man.get("top_res", (0, 0))
    t_frames = man.get("n_frames", 50)
    if h_b % 12 or w_b % 16 or h_b <= 0 or w_b <= 0:
        report.add(sub / MANIFEST, f"bottom resolution {h_b}x{w_b} not divisible by the 12x16 grid")
    for split, expected in man.get("counts", {}).items():
        idx = split_indices(sub, split)
        if len(idx) != expected:
            report.add(sub / split, f"manifest count {expected} but {len(idx)} clip indices on disk")
        for i in idx:
            report.checked += 1
            paths = clip_paths(sub, split, i)
            for kind, path in paths.items():
                if not path.exists():
                    report.add(path, f"missing {kind} file for index {i}")
                    continue
                if kind in ("top", "bottom"):
                    try:
                        head = read_clip_header(path)
                    except FormatError as err:
                        report.add(path, str(err))
                        continue
                    size = path.stat().st_size
                    if size != head["expected_size"]:
                        report.add(path, f"size {size} != header-declared {head['expected_size']}")
                    want = (t_frames, h_b, w_b, 3) if kind == "bottom" else (t_frames, h_t, w_t, 3)
                    if head["shape"] != want:
                        report.add(path, f"shape {head['shape']} != manifest {want}")
                else:
                    try:
                        traj = read_trajectory(path)
                    except FormatError as err:
                        report.add(path, str(err))
                        continue
                    if len(traj) != t_frames:
                        report.add(path, f"{len(traj)} trajectory rows, expected {t_frames}")
                    i_, x, y = traj.T if len(traj) else (np.array([]),) * 3
                    if ((i_ < 0) | (i_ > t_frames)).any():
                        report.add(path, "frame index out of 0..T")
                    if ((x < 0) | (x > h_b)).any():
                        report.add(path, f"x out of bounds 0..{h_b}")
                    if ((y < 0) | (y > w_b)).any():
                        report.add(path, f"y out of bounds 0..{w_b}")
                    if len(i_) > 1 and (np.diff(i_) <= 0).any():
                        report.add(path, "frame indices not strictly increasing")


def validate_dataset(root) -> ValidationReport:
    """Check every sub-dataset under ``root`` (or ``root`` itself); never stops early."""
    root = Path(root)
    report = ValidationReport(root)
    if not root.exists():
        report.add(root, "path does not exist")
        return report
    if (root / MANIFEST).exists():
        subs = [root]
    else:
        subs = [p for p in sorted(root.iterdir()) if p.is_dir()]
        if not subs:
            report.add(root, "no sub-datasets found")
    for sub in subs:
        _validate_subdataset(sub, report)
    return report


@dataclass
class Split:
    """In-memory split: raw top clips, trajectories and bottom resolution."""
    name: str
    top: list
    truth: list
    bottom_res: tuple
    fill_value: float = 255.0

    def __len__(self) -> int:
        return len(self.top)


def load_split(sub, split: str) -> Split:
    sub = resolve_subdataset(sub)
    man = read_manifest(sub)
    idx = split_indices(sub, split)
    if not idx:
        raise FileNotFoundError(f"no clips in {sub / split}")
    top, truth = [], []
    for i in idx:
        paths = clip_paths(sub, split, i)
        top.append(read_clip(paths["top"]))
        truth.append(read_trajectory(paths["traj"]))
    return Split(name=man["subdataset"], top=top, truth=truth,
                 bottom_res=tuple(man["bottom_res"]), fill_value=float(man.get("fill_value", 255)))
