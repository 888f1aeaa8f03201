"""Scene description: object kinds, physics presets and the 18-entry catalog."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Optional

KINDS = ("ball", "cube", "foam", "icosahedron")
FPS = 5
N_FRAMES = 50
SIM_DT = 1.0 / 50.0
STEPS_PER_FRAME = 10


def _load(name: str) -> dict:
    return json.loads(resources.files("votbench.sim").joinpath("data", name).read_text())


@lru_cache(maxsize=None)
def physics_presets() -> dict:
    return _load("physics_presets.json")


@lru_cache(maxsize=None)
def catalog() -> dict:
    return _load("catalog.json")


def preset_hash() -> str:
    blob = json.dumps(physics_presets(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ObjectSpec:
    kind: str
    color: tuple
    radius_px: float
    linear_damping: float
    stop_threshold: float
    restitution: float

    @property
    def square(self) -> bool:
        return self.kind == "cube"


@dataclass(frozen=True)
class SceneConfig:
    name: str
    target: ObjectSpec
    background: tuple = ()
    static_background: bool = False
    bottom_res: tuple = (48, 64)
    top_res: tuple = (96, 96)
    px_per_cm: float = 48 / 18.0
    gripper_radius_px: float = 3.2
    gripper_speed_px: float = 16.0
    gripper_range_px: float = 40.0
    floor_bottom: tuple = (235, 235, 235)
    floor_top: tuple = (200, 200, 190)
    gripper_color: tuple = (30, 30, 30)
    gantry_color: tuple = (95, 95, 95)
    n_frames: int = N_FRAMES
    fps: int = FPS
    dt: float = SIM_DT

    def __post_init__(self):
        if len(self.background) not in (0, 1, 2, 4):
            raise ValueError(f"background count {len(self.background)} not in {{0, 1, 2, 4}}")

    @property
    def objects(self) -> tuple:
        """Target first, then background objects."""
        return (self.target,) + tuple(self.background)

    def gripper_box(self) -> tuple:
        """(row_lo, row_hi, col_lo, col_hi) of the centred square the gripper can reach."""
        h, w = self.bottom_res
        half = min(self.gripper_range_px, h - 1, w - 1) / 2
        cr, cc = (h - 1) / 2, (w - 1) / 2
        return cr - half, cr + half, cc - half, cc + half

    def to_dict(self) -> dict:
        from dataclasses import asdict
        return asdict(self)


def make_object(kind: str, color: str, px_per_cm: float) -> ObjectSpec:
    presets = physics_presets()
    k = presets["kinds"][kind]
    return ObjectSpec(
        kind=kind,
        color=tuple(presets["colors"][color]),
        radius_px=k["radius_cm"] * px_per_cm,
        linear_damping=k["damping"],
        stop_threshold=k["stop_threshold"] * px_per_cm,
        restitution=k["restitution"],
    )


def normalise_name(name: str) -> str:
    key = name.strip().lower()
    for e in catalog()["entries"]:
        if key in (e["name"], e["display"].lower()):
            return e["name"]
    if key.startswith("ball_red_"):
        return normalise_name("ball_" + key[len("ball_red_"):])
    raise KeyError(f"unknown sub-dataset {name!r}; known: {catalog_names()}")


def catalog_names() -> list[str]:
    return [e["name"] for e in catalog()["entries"]]


def catalog_entry(name: str) -> dict:
    key = normalise_name(name)
    return next(e for e in catalog()["entries"] if e["name"] == key)


def scene_from_catalog(name: str, bottom_res: tuple = (48, 64), top_res: tuple = (96, 96),
                       overrides: Optional[dict] = None) -> SceneConfig:
    """Build a scene for a catalog entry at the given camera resolutions."""
    entry = catalog_entry(name)
    presets = physics_presets()
    h, w = bottom_res
    if h % 12 or w % 16:
        raise ValueError(f"bottom resolution {bottom_res} must be divisible by the 12x16 grid")
    px_per_cm = h / presets["px_per_frame_height_cm"]
    grip = presets["gripper"]
    n_bg = catalog()["background_counts"][entry["background"]]
    bg = tuple(make_object(entry["background_kind"], "blue", px_per_cm) for _ in range(n_bg))
    colors = presets["colors"]
    scene = SceneConfig(
        name=entry["name"],
        target=make_object(entry["target"], entry["color"], px_per_cm),
        background=bg,
        static_background=entry["static"],
        bottom_res=tuple(bottom_res),
        top_res=tuple(top_res),
        px_per_cm=px_per_cm,
        gripper_radius_px=grip["radius_cm"] * px_per_cm,
        gripper_speed_px=grip["speed_cm_s"] * px_per_cm,
        gripper_range_px=grip["range_cm"] * px_per_cm,
        floor_bottom=tuple(colors["floor_bottom"]),
        floor_top=tuple(colors["floor_top"]),
        gripper_color=tuple(colors["gripper"]),
        gantry_color=tuple(colors["gantry"]),
    )
    return replace(scene, **(overrides or {}))


def full_scale_scene(name: str) -> SceneConfig:
    return scene_from_catalog(name, bottom_res=(480, 640), top_res=(1280, 720))
