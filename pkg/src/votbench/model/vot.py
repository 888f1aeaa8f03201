"""Video Occlusion Transformer: per-frame spatial encoder, causal temporal encoder, grid head."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..numerics import nn, ops
from ..numerics.optim import ParameterStore
from ..numerics.tensor import ConfigurationError, Tensor, get_dtype
from .config import VOTConfig, param_shapes


class SchemaError(ValueError):
    """A clip does not satisfy the input schema."""


# -- input ------------------------------------------------------------------

def bilinear_resize(frames: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Half-pixel-centred bilinear resize of ``[..., H, W, C]`` to float."""
    h, w = frames.shape[-3], frames.shape[-2]
    x = frames.astype(np.float64)
    if (h, w) == (out_h, out_w):
        return x

    def axis_weights(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        i0 = np.floor(src).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    r0, r1, rw = axis_weights(h, out_h)
    a, b = x[..., r0, :, :], x[..., r1, :, :]
    x = a + rw[:, None, None] * (b - a)
    c0, c1, cw = axis_weights(w, out_w)
    a, b = x[..., :, c0, :], x[..., :, c1, :]
    return a + cw[:, None] * (b - a)


def frame_indices(n_frames: int, t_in: int) -> np.ndarray:
    if n_frames < t_in:
        raise SchemaError(f"clip has {n_frames} frames, need at least {t_in}")
    stride = n_frames // t_in
    return np.arange(t_in) * stride


def preprocess_clip(clip: np.ndarray, res: int, t_in: int = 25) -> np.ndarray:
    """Temporal subsample (stride ``T // t_in`` from frame 0), resize, scale to [0, 1].

    For the recorded 50-frame clips and ``t_in=25`` this keeps frames 0, 2, ..., 48.
    """
    clip = np.asarray(clip)
    if clip.ndim != 4 or clip.shape[-1] != 3:
        raise SchemaError(f"expected T x H x W x 3 clip, got shape {clip.shape}")
    frames = clip[frame_indices(clip.shape[0], t_in)]
    return (bilinear_resize(frames, res, res) / 255.0).astype(get_dtype())


# -- parameters -------------------------------------------------------------

def init_params(cfg: VOTConfig, seed: int = 0, dtype=None) -> ParameterStore:
    params = ParameterStore.initialise(param_shapes(cfg), seed, dtype)
    # keep initial predictions O(1) whatever the output scale
    if cfg.output_scale != 1.0:
        w = params["head.weight"].data
        w /= w.dtype.type(cfg.output_scale)
    return params


# -- spatial encoder --------------------------------------------------------

def _attention_sublayer(params: Mapping, prefix: str, x: Tensor, kind: str, size: int,
                        heads: int, shift: int = 0, eps: float = 1e-5) -> Tensor:
    """Pre-norm partitioned self-attention plus MLP, both residual."""
    _, h, w, _ = x.shape
    y = nn.layernorm(params, f"{prefix}.norm1", x, eps)
    mask = None
    if kind == "grid":
        groups = nn.grid_partition(y, size)
    else:
        if shift:
            y = nn.cyclic_shift(y, -shift, -shift)
            win_mask = nn.shifted_window_mask(h, w, size, shift)
            mask = np.tile(win_mask[:, None], (x.shape[0], 1, 1, 1))
        groups = nn.window_partition(y, size)
    out = nn.multihead_attention(params, f"{prefix}.attn", groups, groups, groups, heads, mask)
    if kind == "grid":
        y = nn.grid_merge(out, size, h, w)
    else:
        y = nn.window_merge(out, size, h, w)
        if shift:
            y = nn.cyclic_shift(y, shift, shift)
    x = ops.add(x, y)
    return ops.add(x, nn.mlp(params, f"{prefix}.mlp", nn.layernorm(params, f"{prefix}.norm2", x, eps)))


def _patch_merge(params: Mapping, prefix: str, x: Tensor, eps: float = 1e-5) -> Tensor:
    b, h, w, c = x.shape
    x = ops.reshape(x, (b, h // 2, 2, w // 2, 2, c))
    x = ops.reshape(ops.transpose(x, (0, 1, 3, 2, 4, 5)), (b, h // 2, w // 2, 4 * c))
    return nn.linear(params, f"{prefix}.reduce", nn.layernorm(params, f"{prefix}.norm", x, eps))


def spatial_features(cfg: VOTConfig, params: Mapping, frames: Tensor) -> Tensor:
    """Encode ``[N, res, res, 3]`` frames independently to ``[N, C]``."""
    if frames.ndim != 4 or frames.shape[1:] != (cfg.input_res, cfg.input_res, 3):
        raise ConfigurationError(f"frames of shape {frames.shape} do not match input_res {cfg.input_res}")
    if cfg.input_center is not None:
        # a background equal to the centre colour stays exactly zero through the zero-bias init
        frames = ops.sub(frames, np.asarray(cfg.input_center))
    downs = cfg.stage_downsamples()
    eps = cfg.norm_eps   # per-token norms only; the pooled embedding is never all-zero
    if cfg.variant == "swint":
        p = cfg.patch_size
        x = ops.conv2d(frames, params["spatial.stem.weight"], params["spatial.stem.bias"], stride=p)
        x = nn.layernorm(params, "spatial.stem.norm", x, eps)
        for s, st in enumerate(cfg.stages):
            sp = f"spatial.stage{s}"
            if downs[s]:
                x = _patch_merge(params, f"{sp}.merge", x, eps)
            heads = cfg.heads(st.channels)
            res = x.shape[1]
            for b in range(st.depth):
                shift = cfg.swin_window // 2 if (b % 2 and res > cfg.swin_window) else 0
                x = _attention_sublayer(params, f"{sp}.block{b}", x, "window", cfg.swin_window, heads, shift, eps)
    else:
        x = ops.conv2d(frames, params["spatial.stem.weight"], params["spatial.stem.bias"], stride=2, padding=1)
        x = ops.gelu(x)
        second = "grid" if cfg.variant == "maxvit" else "window"
        second_size = cfg.grid if cfg.variant == "maxvit" else cfg.window
        for s, st in enumerate(cfg.stages):
            heads = cfg.heads(st.channels)
            for b in range(st.depth):
                bp = f"spatial.stage{s}.block{b}"
                stride = 2 if (b == 0 and downs[s]) else 1
                x = nn.conv_block(params, f"{bp}.conv", x, stride, eps)
                x = _attention_sublayer(params, f"{bp}.attn1", x, "window", cfg.window, heads, eps=eps)
                x = _attention_sublayer(params, f"{bp}.attn2", x, second, second_size, heads, eps=eps)
    pooled = ops.mean(x, axis=(1, 2))
    return nn.layernorm(params, "spatial.norm", pooled)


def spatial_forward(cfg: VOTConfig, params: Mapping, frames: Tensor) -> Tensor:
    """``[B, T, res, res, 3] -> [B, T, C]`` frame embeddings with shared weights."""
    b, t = frames.shape[:2]
    feats = spatial_features(cfg, params, ops.reshape(frames, (b * t,) + frames.shape[2:]))
    return ops.reshape(feats, (b, t, feats.shape[-1]))


# -- temporal encoder -------------------------------------------------------

def causal_mask(t: int) -> np.ndarray:
    return np.tril(np.ones((t, t), dtype=bool))


def temporal_forward(cfg: VOTConfig, params: Mapping, emb: Tensor) -> Tensor:
    """``[B, T, C] -> [B, T, D]``; position ``t`` only sees frames ``<= t``."""
    b, t, _ = emb.shape
    if t > cfg.input_frames:
        raise ConfigurationError(f"sequence length {t} exceeds input_frames {cfg.input_frames}")
    x = nn.linear(params, "temporal.in_proj", emb)
    x = ops.add(x, ops.getitem(params["temporal.pos"], slice(0, t)))
    mask = causal_mask(t)
    for layer in range(cfg.temporal_layers):
        lp = f"temporal.layer{layer}"
        y = nn.layernorm(params, f"{lp}.norm1", x)
        x = ops.add(x, nn.multihead_attention(params, f"{lp}.attn", y, y, y, cfg.temporal_heads, mask))
        x = ops.add(x, nn.mlp(params, f"{lp}.mlp", nn.layernorm(params, f"{lp}.norm2", x)))
    return nn.layernorm(params, "temporal.norm", x)


# -- head ---------------------------------------------------------------------

def head_forward(params: Mapping, last: Tensor, scale: float = 1.0,
                 rows: int = 12, cols: int = 16) -> Tensor:
    """Linear map ``D -> rows*cols`` reshaped to the occupancy grid."""
    out = nn.linear(params, "head", last)
    if scale != 1.0:
        out = ops.mul(out, scale)
    return ops.reshape(out, last.shape[:-1] + (rows, cols))


def model_forward(cfg: VOTConfig, params: Mapping, frames, all_positions: bool = False) -> Tensor:
    """Preprocessed frames ``[B, T, res, res, 3]`` (or one clip ``[T, ...]``) to grids.

    Returns ``[B, 12, 16]`` from the final temporal position, or
    ``[B, T, 12, 16]`` when ``all_positions`` is set.
    """
    if not isinstance(frames, Tensor):
        frames = Tensor(np.asarray(frames, dtype=get_dtype()))
    single = frames.ndim == 4
    if single:
        frames = ops.reshape(frames, (1,) + frames.shape)
    emb = spatial_forward(cfg, params, frames)
    seq = temporal_forward(cfg, params, emb)
    if not all_positions:
        seq = ops.getitem(seq, (slice(None), -1))
    grid = head_forward(params, seq, cfg.output_scale, cfg.out_rows, cfg.out_cols)
    if single:
        grid = ops.reshape(grid, grid.shape[1:])
    return grid


def predict_clip(cfg: VOTConfig, params: Mapping, clip: np.ndarray) -> np.ndarray:
    """Raw ``T x H x W x 3`` uint8 clip to a ``12 x 16`` grid."""
    frames = preprocess_clip(clip, cfg.input_res, cfg.input_frames)
    return model_forward(cfg, params, frames).data
