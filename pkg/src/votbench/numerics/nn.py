"""Neural building blocks assembled from :mod:`ops`.

Layers are plain functions of ``(params, prefix, x)`` where ``params`` maps
hierarchical names to tensors.  Shapes for each layer are declared by the
matching ``*_shapes`` helper so that parameter counts never need allocation.
"""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .tensor import ConfigurationError, Tensor


# -- spatial rearrangements -------------------------------------------------

def _check_div(h: int, w: int, p: int, what: str) -> None:
    if p <= 0 or h % p or w % p:
        raise ConfigurationError(f"{what} size {p} does not divide feature map {h}x{w}")


def window_partition(x: Tensor, p: int) -> Tensor:
    """``[B,H,W,C] -> [B*(H/p)*(W/p), p*p, C]``; windows and slots are row-major."""
    b, h, w, c = x.shape
    _check_div(h, w, p, "window")
    x = ops.reshape(x, (b, h // p, p, w // p, p, c))
    x = ops.transpose(x, (0, 1, 3, 2, 4, 5))
    return ops.reshape(x, (b * (h // p) * (w // p), p * p, c))


def window_merge(x: Tensor, p: int, h: int, w: int) -> Tensor:
    _check_div(h, w, p, "window")
    c = x.shape[-1]
    b = x.shape[0] // ((h // p) * (w // p))
    x = ops.reshape(x, (b, h // p, w // p, p, p, c))
    x = ops.transpose(x, (0, 1, 3, 2, 4, 5))
    return ops.reshape(x, (b, h, w, c))


def grid_partition(x: Tensor, g: int) -> Tensor:
    """``[B,H,W,C] -> [B*(H/g)*(W/g), g*g, C]``.

    Token ``(r, c)`` joins group ``(r mod H/g, c mod W/g)``; each group holds a
    ``g x g`` lattice spanning the whole map at stride ``(H/g, W/g)``.
    """
    b, h, w, c = x.shape
    _check_div(h, w, g, "grid")
    x = ops.reshape(x, (b, g, h // g, g, w // g, c))
    x = ops.transpose(x, (0, 2, 4, 1, 3, 5))
    return ops.reshape(x, (b * (h // g) * (w // g), g * g, c))


def grid_merge(x: Tensor, g: int, h: int, w: int) -> Tensor:
    _check_div(h, w, g, "grid")
    c = x.shape[-1]
    b = x.shape[0] // ((h // g) * (w // g))
    x = ops.reshape(x, (b, h // g, w // g, g, g, c))
    x = ops.transpose(x, (0, 3, 1, 4, 2, 5))
    return ops.reshape(x, (b, h, w, c))


def cyclic_shift(x: Tensor, dy: int, dx: int) -> Tensor:
    """Toroidal roll of the spatial axes of ``[B,H,W,C]``."""
    if dy == 0 and dx == 0:
        return x
    return ops.roll(x, (dy, dx), (1, 2))


def shifted_window_mask(h: int, w: int, p: int, shift: int) -> np.ndarray:
    """Boolean ``[nW, p*p, p*p]`` mask keeping only pairs from the same pre-roll region.

    After rolling by ``-shift`` the border windows contain tokens that were not
    spatially adjacent; those pairs are masked out.
    """
    region = np.zeros((h, w), dtype=np.int64)
    cuts = (slice(0, -p), slice(-p, -shift), slice(-shift, None))
    label = 0
    for rs in cuts:
        for cs in cuts:
            region[rs, cs] = label
            label += 1
    win = region.reshape(h // p, p, w // p, p).transpose(0, 2, 1, 3).reshape(-1, p * p)
    return win[:, :, None] == win[:, None, :]


# -- dense layers -----------------------------------------------------------

def linear_shapes(prefix: str, din: int, dout: int, bias: bool = True) -> dict:
    shapes = {f"{prefix}.weight": (din, dout)}
    if bias:
        shapes[f"{prefix}.bias"] = (dout,)
    return shapes


def linear(params, prefix: str, x: Tensor) -> Tensor:
    return ops.linear(x, params[f"{prefix}.weight"], params.get(f"{prefix}.bias"))


def norm_shapes(prefix: str, dim: int) -> dict:
    return {f"{prefix}.gain": (dim,), f"{prefix}.bias": (dim,)}


def layernorm(params, prefix: str, x: Tensor, eps: float = 1e-5) -> Tensor:
    return ops.layernorm(x, params[f"{prefix}.gain"], params[f"{prefix}.bias"], eps)


def mlp_shapes(prefix: str, dim: int, ratio: float) -> dict:
    hidden = int(dim * ratio)
    return {**linear_shapes(f"{prefix}.fc1", dim, hidden), **linear_shapes(f"{prefix}.fc2", hidden, dim)}


def mlp(params, prefix: str, x: Tensor) -> Tensor:
    return linear(params, f"{prefix}.fc2", ops.gelu(linear(params, f"{prefix}.fc1", x)))


# -- attention --------------------------------------------------------------

def attention_shapes(prefix: str, dim: int, tokens: int | None = None, heads: int = 1) -> dict:
    shapes = {}
    for name in ("q", "k", "v", "proj"):
        shapes.update(linear_shapes(f"{prefix}.{name}", dim, dim))
    if tokens is not None:
        shapes[f"{prefix}.rel_bias"] = (heads, tokens, tokens)
    return shapes


def multihead_attention(params, prefix: str, q_in: Tensor, k_in: Tensor, v_in: Tensor,
                        heads: int, mask=None) -> Tensor:
    """Scaled dot-product attention over token groups ``[G, n, C]``.

    ``mask`` is a boolean array broadcastable to ``[G, heads, n, n]`` with
    True marking allowed query/key pairs.
    """
    g, n, c = q_in.shape
    if c % heads:
        raise ConfigurationError(f"embedding dim {c} not divisible by {heads} heads")
    dh = c // heads

    def split(t: Tensor) -> Tensor:
        m = t.shape[1]
        return ops.transpose(ops.reshape(t, (g, m, heads, dh)), (0, 2, 1, 3))

    q = split(linear(params, f"{prefix}.q", q_in))
    k = split(linear(params, f"{prefix}.k", k_in))
    v = split(linear(params, f"{prefix}.v", v_in))
    scores = ops.mul(ops.matmul(q, ops.swap_last(k)), 1.0 / math.sqrt(dh))
    bias = params.get(f"{prefix}.rel_bias")
    if bias is not None:
        scores = ops.add(scores, bias)
    weights = ops.softmax(scores, axis=-1, mask=mask)
    out = ops.transpose(ops.matmul(weights, v), (0, 2, 1, 3))
    return linear(params, f"{prefix}.proj", ops.reshape(out, (g, n, c)))


# -- convolution block ------------------------------------------------------

def conv_block_shapes(prefix: str, cin: int, cout: int, expansion: float, stride: int) -> dict:
    hidden = int(cin * expansion)
    shapes = {
        **norm_shapes(f"{prefix}.norm", cin),
        **linear_shapes(f"{prefix}.expand", cin, hidden),
        f"{prefix}.dw.weight": (3, 3, hidden),
        f"{prefix}.dw.bias": (hidden,),
        **linear_shapes(f"{prefix}.project", hidden, cout),
    }
    if cin != cout:
        shapes.update(linear_shapes(f"{prefix}.shortcut", cin, cout))
    return shapes


def conv_block(params, prefix: str, x: Tensor, stride: int = 1, eps: float = 1e-5) -> Tensor:
    """Pointwise expand -> 3x3 depthwise -> pointwise project, with residual.

    Stride 2 halves the spatial dims; the residual path then average-pools and,
    if channel counts differ, applies a pointwise projection.
    """
    b, h, w, _ = x.shape
    if stride not in (1, 2) or h % stride or w % stride:
        raise ConfigurationError(f"conv_block stride {stride} incompatible with {h}x{w}")
    y = layernorm(params, f"{prefix}.norm", x, eps)
    y = ops.gelu(linear(params, f"{prefix}.expand", y))
    y = ops.depthwise_conv2d(y, params[f"{prefix}.dw.weight"], params[f"{prefix}.dw.bias"],
                             stride=stride, padding=1)
    y = ops.gelu(y)
    y = linear(params, f"{prefix}.project", y)
    short = ops.avg_pool2(x) if stride == 2 else x
    if f"{prefix}.shortcut.weight" in params:
        short = linear(params, f"{prefix}.shortcut", short)
    return ops.add(short, y)


# -- initialisation ---------------------------------------------------------

def init_param(name: str, shape: tuple, rng: np.random.Generator, dtype) -> np.ndarray:
    """Deterministic init keyed only on name suffix and shape."""
    leaf = name.rsplit(".", 1)[-1]
    if leaf == "gain":
        return np.ones(shape, dtype=dtype)
    if leaf in ("bias", "rel_bias"):
        return np.zeros(shape, dtype=dtype)
    if leaf == "pos":
        return (0.02 * rng.standard_normal(shape)).astype(dtype)
    fan_in = int(np.prod(shape[:-1])) if len(shape) > 1 else shape[0]
    if name.endswith("dw.weight"):
        fan_in = shape[0] * shape[1]
    std = 1.0 / math.sqrt(fan_in)
    return np.clip(rng.standard_normal(shape), -2, 2).astype(dtype) * dtype(std)
