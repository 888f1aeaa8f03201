"""Top-down planar pushing with disc collisions.

Positions are ``(row, col)`` in bottom-camera pixels, velocities in px/s.
Object 0 is always the target.  Shape only affects rendering, damping and
restitution: every collision uses the bounding disc and there is no rotation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scene import SceneConfig


@dataclass
class SimState:
    pos: np.ndarray                 # [n, 2]
    vel: np.ndarray                 # [n, 2]
    gripper: np.ndarray             # [2]
    waypoints: np.ndarray           # [k, 2]
    segment: int = 0                # index of the waypoint being approached
    gripper_vel: np.ndarray = field(default_factory=lambda: np.zeros(2))
    touched: np.ndarray = None      # [n] bool, set once gripper or target contacts the object
    frame: int = 0
    steps: int = 0

    def __post_init__(self):
        if self.touched is None:
            self.touched = np.zeros(len(self.pos), dtype=bool)
        self.touched[0] = True

    def copy(self) -> "SimState":
        return SimState(self.pos.copy(), self.vel.copy(), self.gripper.copy(), self.waypoints.copy(),
                        self.segment, self.gripper_vel.copy(), self.touched.copy(), self.frame, self.steps)

    def kinetic_energy(self) -> float:
        return 0.5 * float((self.vel ** 2).sum())


def bounds(scene: SceneConfig, radius: float) -> tuple:
    """Inclusive (lo_row, hi_row, lo_col, hi_col) for an object centre."""
    h, w = scene.bottom_res
    return radius, h - 1 - radius, radius, w - 1 - radius


def _advance_gripper(state: SimState, scene: SceneConfig, dt: float) -> None:
    budget = scene.gripper_speed_px * dt
    start = state.gripper.copy()
    while budget > 0 and state.segment < len(state.waypoints):
        target = state.waypoints[state.segment]
        delta = target - state.gripper
        dist = float(np.hypot(*delta))
        if dist <= budget:
            state.gripper = target.copy()
            budget -= dist
            state.segment += 1
        else:
            state.gripper = state.gripper + delta * (budget / dist)
            budget = 0.0
    state.gripper_vel = (state.gripper - start) / dt


def _gripper_contacts(state: SimState, scene: SceneConfig) -> bool:
    contact = False
    g, gv = state.gripper, state.gripper_vel
    for i, obj in enumerate(scene.objects):
        d = state.pos[i] - g
        reach = scene.gripper_radius_px + obj.radius_px
        dist = float(np.hypot(*d))
        if dist >= reach:
            continue
        contact = True
        if dist > 1e-12:
            n = d / dist
        else:
            speed = float(np.hypot(*gv))
            n = gv / speed if speed > 0 else np.array([1.0, 0.0])
        state.pos[i] = g + n * reach
        vn = float(state.vel[i] @ n)
        gvn = float(gv @ n)
        if vn < gvn:
            state.vel[i] = state.vel[i] + (gvn - vn) * n
        state.touched[i] = True
    return contact


def _object_collisions(state: SimState, scene: SceneConfig) -> None:
    objs = scene.objects
    n_obj = len(objs)
    for i in range(n_obj):
        for j in range(i + 1, n_obj):
            d = state.pos[j] - state.pos[i]
            reach = objs[i].radius_px + objs[j].radius_px
            dist = float(np.hypot(*d))
            if dist >= reach:
                continue
            n = d / dist if dist > 1e-12 else np.array([1.0, 0.0])
            overlap = reach - dist
            e = min(objs[i].restitution, objs[j].restitution)
            if i == 0:
                state.touched[j] = True
            frozen_i = scene.static_background and not state.touched[i]
            frozen_j = scene.static_background and not state.touched[j]
            if frozen_i and frozen_j:
                continue
            if frozen_i or frozen_j:
                # an untouched static object behaves as immovable
                k, sign = (j, 1.0) if frozen_i else (i, -1.0)
                m = sign * n          # points from the frozen object towards k
                state.pos[k] = state.pos[k] + m * overlap
                vn = float(state.vel[k] @ m)
                if vn < 0:
                    state.vel[k] = state.vel[k] - (1 + e) * vn * m
                continue
            state.pos[i] = state.pos[i] - n * (overlap / 2)
            state.pos[j] = state.pos[j] + n * (overlap / 2)
            rel = float((state.vel[j] - state.vel[i]) @ n)
            if rel < 0:
                impulse = 0.5 * (1 + e) * rel
                state.vel[i] = state.vel[i] + impulse * n
                state.vel[j] = state.vel[j] - impulse * n


def _walls(state: SimState, scene: SceneConfig) -> None:
    for i, obj in enumerate(scene.objects):
        lo_r, hi_r, lo_c, hi_c = bounds(scene, obj.radius_px)
        for axis, lo, hi in ((0, lo_r, hi_r), (1, lo_c, hi_c)):
            p = state.pos[i, axis]
            if p < lo:
                state.pos[i, axis] = lo
                if state.vel[i, axis] < 0:
                    state.vel[i, axis] = -obj.restitution * state.vel[i, axis]
            elif p > hi:
                state.pos[i, axis] = hi
                if state.vel[i, axis] > 0:
                    state.vel[i, axis] = -obj.restitution * state.vel[i, axis]


def _damping(state: SimState, scene: SceneConfig, dt: float) -> None:
    for i, obj in enumerate(scene.objects):
        state.vel[i] = state.vel[i] * max(0.0, 1.0 - obj.linear_damping * dt)
        if float(np.hypot(*state.vel[i])) < obj.stop_threshold:
            state.vel[i] = 0.0


def step(state: SimState, scene: SceneConfig, dt: float | None = None) -> SimState:
    """Advance one explicit step; returns a new state."""
    dt = scene.dt if dt is None else dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    s = state.copy()
    _advance_gripper(s, scene, dt)
    _gripper_contacts(s, scene)
    _object_collisions(s, scene)
    s.pos = s.pos + s.vel * dt
    _walls(s, scene)
    _damping(s, scene, dt)
    s.steps += 1
    return s


# -- initial conditions and push policy ---------------------------------------

def _uniform_in_box(rng: np.random.Generator, box) -> np.ndarray:
    lo_r, hi_r, lo_c, hi_c = box
    return np.array([rng.uniform(lo_r, hi_r), rng.uniform(lo_c, hi_c)])


def place_objects(rng: np.random.Generator, scene: SceneConfig, max_tries: int = 10000) -> np.ndarray:
    """Non-overlapping placements; the target starts inside the gripper range."""
    objs = scene.objects
    pos = np.zeros((len(objs), 2))
    gbox = scene.gripper_box()
    for i, obj in enumerate(objs):
        lo_r, hi_r, lo_c, hi_c = bounds(scene, obj.radius_px)
        if i == 0:
            box = (max(lo_r, gbox[0]), min(hi_r, gbox[1]), max(lo_c, gbox[2]), min(hi_c, gbox[3]))
        else:
            box = (lo_r, hi_r, lo_c, hi_c)
        for _ in range(max_tries):
            p = _uniform_in_box(rng, box)
            if all(np.hypot(*(p - pos[j])) >= obj.radius_px + objs[j].radius_px + 0.5 for j in range(i)):
                pos[i] = p
                break
        else:
            raise RuntimeError(f"could not place object {i} in scene {scene.name}")
    return pos


def sample_push_policy(rng: np.random.Generator, scene: SceneConfig, target_pos: np.ndarray) -> np.ndarray:
    """2-5 waypoints inside the gripper range; one (never the first) sits on the target."""
    box = scene.gripper_box()
    k = int(rng.integers(2, 6))
    pts = np.array([_uniform_in_box(rng, box) for _ in range(k)])
    hit = int(rng.integers(1, k))
    pts[hit] = np.clip(target_pos, [box[0], box[2]], [box[1], box[3]])
    reach = scene.gripper_radius_px + scene.target.radius_px
    # keep the approach from starting on top of the target
    for _ in range(100):
        if np.hypot(*(pts[0] - target_pos)) >= reach + 1.0:
            break
        pts[0] = _uniform_in_box(rng, box)
    return pts


def initial_state(rng: np.random.Generator, scene: SceneConfig) -> SimState:
    pos = place_objects(rng, scene)
    wps = sample_push_policy(rng, scene, pos[0])
    return SimState(pos=pos, vel=np.zeros_like(pos), gripper=wps[0].copy(), waypoints=wps, segment=1)


def contact_distance(scene: SceneConfig) -> float:
    return scene.gripper_radius_px + scene.target.radius_px


def path_length(positions: np.ndarray) -> float:
    return float(np.hypot(*np.diff(positions, axis=0).T).sum())


def round_half_up(x) -> np.ndarray:
    return np.floor(np.asarray(x) + 0.5).astype(np.int64)


def simulate(scene: SceneConfig, seed: int) -> tuple[list[SimState], np.ndarray]:
    """Run one episode; returns the sampled frame states and fine-step target path."""
    rng = np.random.default_rng(seed)
    state = initial_state(rng, scene)
    frames = [state]
    path = [state.pos[0].copy()]
    steps_per_frame = int(round(1.0 / (scene.fps * scene.dt)))
    for _ in range(scene.n_frames - 1):
        for _ in range(steps_per_frame):
            state = step(state, scene)
            path.append(state.pos[0].copy())
        state.frame += 1
        frames.append(state)
    return frames, np.array(path)

