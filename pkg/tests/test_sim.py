import numpy as np
import pytest

from votbench.sim import physics, render
from votbench.sim.generate import clip_seed, generate_clip, generate_subdataset
from votbench.sim.physics import SimState, simulate, step
from votbench.sim.scene import catalog_names, scene_from_catalog
from votbench.tracker import ColorKey, color_mask, detect_centroid


def lone(name="ball_single", **over):
    return scene_from_catalog(name, overrides=over or None)


def parked_state(scene, pos, vel=None, gripper=(2.0, 2.0)):
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    vel = np.zeros_like(pos) if vel is None else np.atleast_2d(np.asarray(vel, dtype=np.float64))
    g = np.asarray(gripper, dtype=np.float64)
    return SimState(pos=pos, vel=vel, gripper=g.copy(), waypoints=g[None].copy(), segment=1)


# -- catalog ---------------------------------------------------------------------

def test_catalog_has_18_unique_entries():
    names = catalog_names()
    assert len(names) == 18 and len(set(names)) == 18
    counts = {len(scene_from_catalog(n).background) for n in names}
    assert counts == {0, 1, 2, 4}


def test_object_presets_encode_attribute_axes():
    ball, foam = lone("ball_single").target, lone("foam_single").target
    cube, ico = lone("cube_single").target, lone("icosahedron_single").target
    assert ball.color == foam.color and ball.radius_px == foam.radius_px
    assert ball.linear_damping != foam.linear_damping
    assert cube.restitution < ball.restitution
    assert lone("ball_green_single").target.color != ball.color
    assert scene_from_catalog("icosahedron_quintuple_static").static_background


def test_display_names_resolve():
    assert scene_from_catalog("Ball_Red_Single").name == "ball_single"


# -- step ------------------------------------------------------------------------

def test_resting_objects_only_gripper_moves():
    scene = lone()
    s = parked_state(scene, [[24.0, 40.0]], gripper=(10.0, 10.0))
    s.waypoints = np.array([[10.0, 10.0], [10.0, 20.0]])
    nxt = step(s, scene)
    assert np.array_equal(nxt.pos, s.pos) and np.array_equal(nxt.vel, s.vel)
    assert not np.array_equal(nxt.gripper, s.gripper)


def test_right_wall_reflection():
    scene = lone()
    obj = scene.target
    hi = scene.bottom_res[1] - 1 - obj.radius_px
    s = parked_state(scene, [[24.0, hi - 0.5]], vel=[[0.0, 100.0]])
    s.pos = s.pos + s.vel * scene.dt
    physics._walls(s, scene)
    assert s.vel[0].tolist() == [0.0, -obj.restitution * 100.0]
    assert s.pos[0, 1] == hi
    assert obj.restitution == 0.8


@pytest.mark.parametrize("name", ["ball_single", "foam_single", "cube_single", "icosahedron_single"])
def test_damping_matches_closed_form(name):
    scene = lone(name)
    obj = scene.target
    v0 = np.array([3.0, 4.0]) * 2.0  # speed 10 px/s, inside the workspace for the whole run
    s = parked_state(scene, [[24.0, 32.0]], vel=[v0], gripper=(0.0, 0.0))
    factor = max(0.0, 1.0 - obj.linear_damping * scene.dt)
    for k in range(1, 16):
        s = step(s, scene)
        want = 10.0 * factor ** k
        speed = float(np.hypot(*s.vel[0]))
        if want < obj.stop_threshold:
            assert speed == 0.0
            break
        assert abs(speed - want) < 1e-9


def test_gripper_pushes_object_along_normal():
    scene = lone()
    s = parked_state(scene, [[24.0, 32.0]], gripper=(24.0, 25.0))
    s.waypoints = np.array([[24.0, 25.0], [24.0, 45.0]])
    for _ in range(40):
        s = step(s, scene)
    assert s.pos[0, 1] > 32.0 + 1.0
    assert abs(s.pos[0, 0] - 24.0) < 1e-9
    reach = physics.contact_distance(scene)
    assert np.hypot(*(s.pos[0] - s.gripper)) >= reach - 1e-9


def test_object_collision_conserves_momentum():
    scene = lone("ball_double")
    s = parked_state(scene, [[24.0, 30.0], [24.0, 30.0 + 2 * scene.target.radius_px - 0.1]],
                     vel=[[0.0, 20.0], [0.0, 0.0]], gripper=(0.0, 0.0))
    before = s.vel.sum(axis=0)
    physics._object_collisions(s, scene)
    np.testing.assert_allclose(s.vel.sum(axis=0), before, atol=1e-12)
    assert s.vel[1, 1] > 0 and s.vel[0, 1] < 20.0


def test_step_rejects_non_positive_dt():
    scene = lone()
    with pytest.raises(ValueError):
        step(parked_state(scene, [[24.0, 32.0]]), scene, dt=0.0)


# -- episodes ----------------------------------------------------------------------

FUZZ_SCENES = ["ball_quintuple", "foam_triple", "cube_double", "icosahedron_quintuple_static"]


@pytest.mark.parametrize("name", FUZZ_SCENES)
def test_positions_stay_in_bounds(name):
    scene = scene_from_catalog(name)
    for seed in range(25):
        frames, _ = simulate(scene, seed)
        for st in frames:
            for i, obj in enumerate(scene.objects):
                lo_r, hi_r, lo_c, hi_c = physics.bounds(scene, obj.radius_px)
                assert lo_r - 1e-9 <= st.pos[i, 0] <= hi_r + 1e-9
                assert lo_c - 1e-9 <= st.pos[i, 1] <= hi_c + 1e-9


def test_kinetic_energy_non_increasing_without_gripper_contact():
    scene = scene_from_catalog("ball_quintuple")
    rng = np.random.default_rng(0)
    for seed in range(20):
        s = physics.initial_state(np.random.default_rng(seed), scene)
        s.vel = rng.uniform(-40, 40, size=s.vel.shape)
        s.gripper = np.array([-100.0, -100.0])
        s.waypoints = s.gripper[None].copy()
        e = s.kinetic_energy()
        for _ in range(100):
            s = step(s, scene)
            assert s.kinetic_energy() <= e + 1e-9
            e = s.kinetic_energy()


def test_static_background_untouched_objects_never_move():
    scene = scene_from_catalog("icosahedron_quintuple_static")
    for seed in range(30):
        frames, _ = simulate(scene, seed)
        first, last = frames[0], frames[-1]
        for i in range(1, len(scene.objects)):
            if not last.touched[i]:
                assert np.array_equal(first.pos[i], last.pos[i])


def test_push_policy_waypoints():
    scene = lone()
    box = scene.gripper_box()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        target = physics.place_objects(rng, scene)[0]
        wps = physics.sample_push_policy(rng, scene, target)
        assert 2 <= len(wps) <= 5
        assert np.all((wps[:, 0] >= box[0]) & (wps[:, 0] <= box[1]))
        assert np.all((wps[:, 1] >= box[2]) & (wps[:, 1] <= box[3]))
        assert min(np.hypot(*(w - target)) for w in wps[1:]) <= physics.contact_distance(scene)
    a = physics.sample_push_policy(np.random.default_rng(3), scene, np.array([20.0, 30.0]))
    b = physics.sample_push_policy(np.random.default_rng(3), scene, np.array([20.0, 30.0]))
    assert np.array_equal(a, b)


def test_initial_placements_do_not_overlap():
    scene = scene_from_catalog("cube_quintuple")
    for seed in range(20):
        pos = physics.place_objects(np.random.default_rng(seed), scene)
        for i in range(len(pos)):
            for j in range(i):
                reach = scene.objects[i].radius_px + scene.objects[j].radius_px
                assert np.hypot(*(pos[i] - pos[j])) >= reach


# -- rendering ----------------------------------------------------------------------

def test_bottom_render_single_disc_centroid():
    scene = scene_from_catalog("ball_single", bottom_res=(480, 640), top_res=(96, 96))
    s = parked_state(scene, [[240.0, 320.0]], gripper=(-100.0, -100.0))
    frame = render.render_bottom(s, scene)
    c = detect_centroid(frame, ColorKey(scene.target.color))
    assert abs(c[0] - 240) <= 0.5 and abs(c[1] - 320) <= 0.5


def test_empty_region_is_uniform_background():
    scene = lone()
    s = parked_state(scene, [[-100.0, -100.0]], gripper=(-100.0, -100.0))
    frame = render.render_bottom(s, scene)
    assert np.all(frame == np.array(scene.floor_bottom, dtype=np.uint8))


def test_target_drawn_over_background_objects():
    scene = scene_from_catalog("ball_double")
    s = parked_state(scene, [[24.0, 30.0], [24.0, 33.0]], gripper=(-100.0, -100.0))
    frame = render.render_bottom(s, scene)
    key = ColorKey(scene.target.color, tolerance=0)
    alone = render.render_bottom(parked_state(lone(), [[24.0, 30.0]], gripper=(-100.0, -100.0)), lone())
    assert color_mask(frame, key).sum() == color_mask(alone, key).sum()


def test_top_render_gripper_occludes_target():
    scene = lone()
    s = parked_state(scene, [[24.0, 32.0]], gripper=(24.0, 32.0))
    frame = render.render_top(s, scene)
    assert frame.shape == (96, 96, 3)
    foot = render.gripper_footprint(scene, s)
    assert not color_mask(frame, ColorKey(scene.target.color))[foot].any()


def test_top_and_bottom_pixel_counts_agree_up_to_scale():
    scene = lone()
    s = parked_state(scene, [[24.0, 32.0]], gripper=(2.0, 2.0))
    key = ColorKey(scene.target.color)
    nb = color_mask(render.render_bottom(s, scene), key).sum()
    nt = color_mask(render.render_top(s, scene), key).sum()
    scale = (96 * 96) / (48 * 64)
    assert abs(nt / scale - nb) / nb < 0.25


# -- clips and sub-datasets ------------------------------------------------------------

def test_generate_clip_contract():
    scene = scene_from_catalog("foam_double")
    a, b = generate_clip(scene, [1, 0, 3]), generate_clip(scene, [1, 0, 3])
    assert a.top.shape == (50, 96, 96, 3) and a.bottom.shape == (50, 48, 64, 3)
    assert a.truth.shape == (50, 3)
    assert np.array_equal(a.top, b.top) and np.array_equal(a.bottom, b.bottom)
    assert np.array_equal(a.truth, b.truth)
    i, x, y = a.truth.T
    assert np.array_equal(i, np.arange(50))
    assert np.all((0 <= x) & (x <= 48) & (0 <= y) & (y <= 64))


def test_split_seed_streams_are_disjoint():
    train = {tuple(clip_seed(7, "train", i)) for i in range(100)}
    test = {tuple(clip_seed(7, "test", i)) for i in range(100)}
    assert not train & test


def test_generate_subdataset_layout_and_determinism(tmp_path):
    root = generate_subdataset("ball_single", 8, 2, 7, tmp_path / "a")
    again = generate_subdataset("ball_single", 8, 2, 7, tmp_path / "b")
    files = sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())
    assert len([f for f in files if f.suffix in (".cgpv", ".csv")]) == 30
    for rel in files:
        if rel.name != "manifest":
            assert (root / rel).read_bytes() == (again / rel).read_bytes()
    with pytest.raises(FileExistsError):
        generate_subdataset("ball_single", 8, 2, 7, tmp_path / "a")
    generate_subdataset("ball_single", 2, 1, 7, tmp_path / "a", force=True)
    with pytest.raises(ValueError):
        generate_subdataset("ball_single", 0, 1, 7, tmp_path / "c")
