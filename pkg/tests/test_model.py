import dataclasses

import numpy as np
import pytest

from votbench.harness.checks import model_directional_check, model_gradcheck, param_groups, tiny_config
from votbench.model import vot
from votbench.model.config import (
    StageConfig,
    VOTConfig,
    desk_config,
    full_config,
    param_count,
    param_shapes,
)
from votbench.numerics import ConfigurationError, Tensor, nn, precision
from votbench.numerics.optim import ParameterStore


# -- preprocessing ----------------------------------------------------------------

def test_preprocess_takes_every_second_frame_and_scales():
    clip = np.zeros((50, 8, 8, 3), dtype=np.uint8)
    clip[:, 0, 0, 0] = np.arange(50)
    out = vot.preprocess_clip(clip, 8, 25)
    assert out.shape == (25, 8, 8, 3)
    np.testing.assert_allclose(out[:, 0, 0, 0] * 255, np.arange(0, 50, 2), atol=1e-4)


def test_preprocess_constant_frame_stays_constant():
    clip = np.full((50, 20, 30, 3), (10, 200, 77), dtype=np.uint8)
    out = vot.preprocess_clip(clip, 16, 25)
    np.testing.assert_allclose(out * 255, np.broadcast_to([10, 200, 77], out.shape), atol=1e-3)


def test_preprocess_too_few_frames():
    with pytest.raises(vot.SchemaError):
        vot.preprocess_clip(np.zeros((4, 8, 8, 3), dtype=np.uint8), 8, 25)


# -- forward contracts ----------------------------------------------------------------

@pytest.mark.parametrize("variant", ["maxvit", "maxvit2", "swint"])
def test_desk_forward_shape_and_finite(variant):
    cfg = desk_config(variant)
    params = vot.init_params(cfg, 0)
    x = np.random.default_rng(0).random((2, cfg.input_frames, 64, 64, 3)).astype(np.float32)
    out = vot.model_forward(cfg, params, x).data
    assert out.shape == (2, 12, 16) and np.all(np.isfinite(out))
    clip = (np.random.default_rng(1).random((50, 96, 96, 3)) * 255).astype(np.uint8)
    assert vot.predict_clip(cfg, params, clip).shape == (12, 16)


def test_identical_clips_give_identical_grids():
    cfg = tiny_config()
    params = vot.init_params(cfg, 0)
    x = np.random.default_rng(0).random((1, cfg.input_frames, 16, 16, 3)).astype(np.float32)
    both = vot.model_forward(cfg, params, np.concatenate([x, x])).data
    assert np.array_equal(both[0], both[1])


def test_duplicated_frame_gives_duplicated_embedding():
    cfg = tiny_config()
    params = vot.init_params(cfg, 0)
    f = np.random.default_rng(2).random((1, 1, 16, 16, 3)).astype(np.float32)
    emb = vot.spatial_forward(cfg, params, Tensor(np.concatenate([f, f, f], axis=1))).data
    assert np.array_equal(emb[0, 0], emb[0, 1]) and np.array_equal(emb[0, 0], emb[0, 2])


def test_zero_head_weights_give_constant_bias_grid():
    cfg = tiny_config()
    params = vot.init_params(cfg, 0)
    params["head.weight"].data[:] = 0
    params["head.bias"].data[:] = 3.5
    x = np.random.default_rng(0).random((cfg.input_frames, 16, 16, 3)).astype(np.float32)
    np.testing.assert_array_equal(vot.model_forward(cfg, params, x).data, np.full((12, 16), 3.5 * cfg.output_scale, np.float32))


def test_single_frame_temporal_encoder():
    cfg = tiny_config()
    params = vot.init_params(cfg, 0)
    emb = Tensor(np.random.default_rng(0).standard_normal((1, 1, 16)).astype(np.float32))
    out = vot.temporal_forward(cfg, params, emb).data
    assert out.shape == (1, 1, cfg.temporal_dim) and np.all(np.isfinite(out))


def test_temporal_permuting_future_frames_leaves_prefix_unchanged():
    cfg = tiny_config()
    params = vot.init_params(cfg, 1)
    rng = np.random.default_rng(3)
    emb = rng.standard_normal((1, cfg.input_frames, 16)).astype(np.float32)
    base = vot.temporal_forward(cfg, params, Tensor(emb)).data
    for t in range(cfg.input_frames - 1):
        perm = emb.copy()
        perm[0, t + 1:] = perm[0, t + 1:][rng.permutation(cfg.input_frames - t - 1)] + 1.0
        out = vot.temporal_forward(cfg, params, Tensor(perm)).data
        assert np.array_equal(out[0, :t + 1], base[0, :t + 1])


def test_prefix_consistency():
    cfg = tiny_config()
    params = vot.init_params(cfg, 2)
    emb = np.random.default_rng(4).standard_normal((1, cfg.input_frames, 16)).astype(np.float32)
    full = vot.temporal_forward(cfg, params, Tensor(emb)).data
    for t in range(1, cfg.input_frames + 1):
        pre = vot.temporal_forward(cfg, params, Tensor(emb[:, :t])).data
        np.testing.assert_allclose(pre[0, -1], full[0, t - 1], rtol=1e-5, atol=1e-6)


def test_all_positions_mode_shapes():
    cfg = tiny_config()
    params = vot.init_params(cfg, 0)
    x = np.random.default_rng(0).random((2, cfg.input_frames, 16, 16, 3)).astype(np.float32)
    out = vot.model_forward(cfg, params, x, all_positions=True).data
    last = vot.model_forward(cfg, params, x).data
    assert out.shape == (2, cfg.input_frames, 12, 16)
    np.testing.assert_allclose(out[:, -1], last, rtol=1e-6)


def test_maxvit_with_full_partitions_matches_full_attention():
    # p = g = feature-map size: block and grid attention both see every token
    cfg = tiny_config("maxvit")
    res = cfg.stage_resolutions()
    params = vot.init_params(cfg, 0)
    x = Tensor(np.random.default_rng(0).standard_normal((1, res[0], res[0], 8)).astype(np.float32))
    a = vot._attention_sublayer(params, "spatial.stage0.block0.attn2", x, "grid", res[0], 1).data
    b = vot._attention_sublayer(params, "spatial.stage0.block0.attn2", x, "window", res[0], 1).data
    np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-6)


# -- configs and parameter counts --------------------------------------------------------

def test_param_count_single_linear():
    assert sum(int(np.prod(s)) for s in nn.linear_shapes("x", 4, 3).values()) == 15


def test_param_count_matches_allocation():
    for variant in ("maxvit", "maxvit2", "swint"):
        cfg = desk_config(variant)
        assert param_count(cfg) == vot.init_params(cfg, 0).count()


def test_maxvit_variants_share_shapes_when_p_equals_g():
    assert param_shapes(full_config("maxvit")) == param_shapes(full_config("maxvit2"))


def test_config_validation_errors():
    with pytest.raises(ConfigurationError):
        desk_config("maxvit", window=3)
    with pytest.raises(ConfigurationError):
        VOTConfig(variant="resnet")
    with pytest.raises(ConfigurationError):
        desk_config("maxvit", out_rows=10)
    with pytest.raises(ConfigurationError):
        desk_config("swint", stages=(StageConfig(1, 32), StageConfig(2, 64)))


def test_config_round_trip_and_hash():
    cfg = desk_config("swint", output_scale=255.0)
    again = VOTConfig.from_dict(cfg.to_dict())
    assert again == cfg and again.hash() == cfg.hash()
    assert desk_config("maxvit").hash() != desk_config("maxvit2").hash()


def test_spatial_input_mismatch():
    cfg = tiny_config()
    with pytest.raises(ConfigurationError):
        vot.spatial_features(cfg, vot.init_params(cfg, 0), Tensor(np.zeros((1, 8, 8, 3), np.float32)))


# -- gradients ------------------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["maxvit", "maxvit2", "swint"])
def test_tiny_model_gradcheck(variant):
    errors = model_gradcheck(tiny_config(variant), seed=0, per_tensor=1)
    assert max(errors.values()) < 1e-4, max(errors.items(), key=lambda kv: kv[1])


@pytest.mark.parametrize("variant", ["maxvit", "swint"])
def test_tiny_model_directional_check(variant):
    errors = model_directional_check(tiny_config(variant), seed=1)
    assert set(errors) == set(param_groups(param_shapes(tiny_config(variant))))
    assert max(errors.values()) < 1e-4


def test_param_groups_cover_every_tensor_once():
    names = list(param_shapes(tiny_config("maxvit")))
    groups = param_groups(names)
    assert sorted(n for g in groups.values() for n in g) == sorted(names)
    assert groups["head"] == ["head.weight", "head.bias"]


def test_head_gradcheck():
    from votbench.numerics import finite_diff_check, ops

    rng = np.random.default_rng(0)
    with precision(np.float64):
        params = ParameterStore({"head.weight": rng.standard_normal((8, 192)), "head.bias": rng.standard_normal(192)})
        last = rng.standard_normal((2, 8))
        target = rng.standard_normal((2, 12, 16))

        def f(w):
            p = dict(params)
            p["head.weight"] = w
            return ops.mse(vot.head_forward(p, Tensor(last)), target)

        assert finite_diff_check(f, params["head.weight"].data) < 1e-5


# -- input centring -------------------------------------------------------------------------

@pytest.mark.parametrize("variant", ["maxvit", "maxvit2", "swint"])
def test_centre_coloured_frame_embeds_to_zero_at_init(variant):
    center = (200 / 255, 200 / 255, 190 / 255)
    cfg = dataclasses.replace(tiny_config(variant), input_center=center)
    frames = np.broadcast_to(np.asarray(center, np.float32), (2, 16, 16, 3)).copy()
    emb = vot.spatial_features(cfg, vot.init_params(cfg, 0), Tensor(frames)).data
    assert np.all(np.abs(emb) < 1e-6)


def test_input_center_round_trips_through_dict():
    cfg = desk_config("maxvit", input_center=[0.5, 0.25, 0.125])
    assert cfg.input_center == (0.5, 0.25, 0.125)
    assert VOTConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigurationError):
        desk_config("maxvit", input_center=(0.5,))


def test_background_level_is_the_majority_colour():
    from votbench.harness.train import background_level

    x = np.zeros((2, 3, 8, 8, 3), np.float32)
    x[:] = np.float32(0.3)
    x[..., :3, :, :] = np.random.default_rng(0).random((2, 3, 3, 8, 3))
    assert background_level(x) == (float(np.float32(0.3)),) * 3
