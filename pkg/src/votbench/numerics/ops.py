"""Differentiable primitives on :class:`Tensor`.

Layout convention for images is channels-last, ``[B, H, W, C]``.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import ConfigurationError, DimensionError, Tensor, as_tensor, make


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _const(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.dtype))


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = _const(b, a)
    sa, sb = a.shape, b.shape
    return make("add", a.data + b.data, (a, b),
                lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = _const(b, a)
    sa, sb = a.shape, b.shape
    return make("sub", a.data - b.data, (a, b),
                lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        s = float(b)
        return make("scale", a.data * a.dtype.type(s), (a,), lambda g: (g * s,))
    b = _const(b, a)
    ad, bd = a.data, b.data
    return make("mul", ad * bd, (a, b),
                lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b) -> Tensor:
    a = as_tensor(a)
    if not isinstance(b, Tensor) and np.ndim(b) == 0:
        return mul(a, 1.0 / float(b))
    b = _const(b, a)
    ad, bd = a.data, b.data
    out = ad / bd
    return make("div", out, (a, b),
                lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make("exp", out, (x,), lambda g: (g * out,))


def square(x: Tensor) -> Tensor:
    xd = x.data
    return make("square", xd * xd, (x,), lambda g: (2 * g * xd,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh-approximated GELU (in-place temporaries; this op is bandwidth bound)."""
    xd = x.data
    f = xd.dtype.type
    x2 = xd * xd
    t = x2 * f(0.044715)
    t += f(1)
    t *= xd
    t *= f(_GELU_C)
    np.tanh(t, out=t)
    out = t + f(1)
    out *= xd
    out *= f(0.5)

    def vjp(g):
        d = x2 * f(3 * 0.044715)
        d += f(1)
        d *= f(_GELU_C)
        d *= xd
        sech2 = t * t
        np.subtract(f(1), sech2, out=sech2)
        d *= sech2
        d += f(1)
        d += t
        d *= f(0.5)
        d *= g
        return (d,)

    return make("gelu", out, (x,), vjp)


# -- shape ------------------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    return make("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x: Tensor, axes=None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return make("transpose", np.ascontiguousarray(x.data.transpose(axes)), (x,),
                lambda g: (g.transpose(inv),))


def swap_last(x: Tensor) -> Tensor:
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return transpose(x, tuple(axes))


def getitem(x: Tensor, index) -> Tensor:
    shape, dtype = x.shape, x.dtype

    def vjp(g):
        full = np.zeros(shape, dtype=dtype)
        if _advanced(index):
            np.add.at(full, index, g)
        else:
            full[index] = g
        return (full,)

    return make("getitem", np.array(x.data[index]), (x,), vjp)


def _advanced(index) -> bool:
    idx = index if isinstance(index, tuple) else (index,)
    return any(isinstance(i, (list, np.ndarray)) for i in idx)


def roll(x: Tensor, shifts, axes) -> Tensor:
    neg = tuple(-s for s in shifts)
    return make("roll", np.roll(x.data, shifts, axes), (x,),
                lambda g: (np.roll(g, neg, axes),))


def concat(xs, axis: int = -1) -> Tensor:
    sizes = [t.shape[axis] for t in xs]
    cuts = np.cumsum(sizes)[:-1]
    return make("concat", np.concatenate([t.data for t in xs], axis=axis), tuple(xs),
                lambda g: tuple(np.split(g, cuts, axis=axis)))


# -- reductions -------------------------------------------------------------

def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = x.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return make("sum", np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), vjp)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        n = x.data.size
    else:
        axs = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([x.shape[a] for a in axs]))
    return mul(sum(x, axis, keepdims), 1.0 / n)


# -- linear algebra ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product ``[..., m, k] @ [..., k, n]`` with broadcasting."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError as err:
        raise DimensionError(f"matmul batch dims not broadcastable: {a.shape} @ {b.shape}") from err
    ad, bd = a.data, b.data

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(bd, -1, -2)) if a.requires_grad else None
        gb = np.matmul(np.swapaxes(ad, -1, -2), g) if b.requires_grad else None
        return (None if ga is None else _unbroadcast(ga, ad.shape),
                None if gb is None else _unbroadcast(gb, bd.shape))

    return make("matmul", out, (a, b), vjp)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """``x @ w + b`` over the last axis; ``w`` is ``[in, out]``."""
    if x.shape[-1] != w.shape[0]:
        raise DimensionError(f"linear shape mismatch: {x.shape} @ {w.shape}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, x.shape[-1])
    out = x2 @ w.data
    if b is not None:
        out += b.data
    wd = w.data

    def vjp(g):
        g2 = g.reshape(-1, g.shape[-1])
        gx = (g2 @ wd.T).reshape(lead + (wd.shape[0],)) if x.requires_grad else None
        gw = x2.T @ g2
        gb = g2.sum(axis=0) if b is not None else None
        return (gx, gw, gb)

    inputs = (x, w) if b is None else (x, w, b)
    return make("linear", out.reshape(lead + (w.shape[1],)), inputs, vjp)


# -- normalisation / attention ----------------------------------------------

def softmax(x: Tensor, axis: int = -1, mask=None) -> Tensor:
    """Stable softmax; ``mask`` (bool, broadcastable, True = keep) zeroes weights."""
    xd = x.data
    if mask is not None:
        xd = np.where(mask, xd, -np.inf)
    m = np.max(xd, axis=axis, keepdims=True)
    e = np.exp(xd - m)
    out = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make("softmax", out, (x,), vjp)


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise DimensionError(f"layernorm affine shape {gain.shape} vs input {x.shape}")
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + xd.dtype.type(eps))
    xhat = xc * inv
    gd = gain.data
    out = xhat * gd + bias.data
    n = xd.shape[-1]

    def vjp(g):
        red = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=red)
        gbias = g.sum(axis=red)
        gx = None
        if x.requires_grad:
            gh = g * gd
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                        - xhat * (gh * xhat).sum(axis=-1, keepdims=True) / n)
        return (gx, ggain, gbias)

    return make("layernorm", out, (x, gain, bias), vjp)


def mse(pred: Tensor, target) -> Tensor:
    """Mean squared error over all elements."""
    t = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=pred.dtype)
    diff = pred.data - t
    n = diff.size
    return make("mse", np.asarray((diff * diff).sum() / n, dtype=pred.dtype), (pred,),
                lambda g: (g * (2.0 / n) * diff,))


# -- convolution (NHWC) -----------------------------------------------------

def _conv_geometry(x_shape, k, stride, padding):
    _, h, w, _ = x_shape
    hp, wp = h + 2 * padding, w + 2 * padding
    if hp < k or wp < k:
        raise ConfigurationError(
            f"spatial dims {h}x{w} too small for kernel {k} with padding {padding}")
    return (hp - k) // stride + 1, (wp - k) // stride + 1


def _taps(ho, wo, k, stride):
    for u in range(k):
        for v in range(k):
            yield u * k + v, (slice(None), slice(u, u + stride * (ho - 1) + 1, stride),
                              slice(v, v + stride * (wo - 1) + 1, stride))


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """Dense convolution via im2col; ``w`` is ``[k, k, Cin, Cout]``."""
    k, _, cin, cout = w.shape
    if x.shape[-1] != cin:
        raise DimensionError(f"conv2d channel mismatch: input {x.shape}, kernel {w.shape}")
    ho, wo = _conv_geometry(x.shape, k, stride, padding)
    bsz = x.shape[0]
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x.data
    cols = np.empty((bsz, ho, wo, k * k, cin), dtype=x.dtype)
    for t, sl in _taps(ho, wo, k, stride):
        cols[:, :, :, t, :] = xp[sl]
    cols = cols.reshape(-1, k * k * cin)
    wmat = w.data.reshape(k * k * cin, cout)
    out = cols @ wmat
    if b is not None:
        out += b.data

    def vjp(g):
        g2 = g.reshape(-1, cout)
        gw = (cols.T @ g2).reshape(w.shape)
        gb = g2.sum(axis=0) if b is not None else None
        gx = None
        if x.requires_grad:
            gcols = (g2 @ wmat.T).reshape(bsz, ho, wo, k * k, cin)
            gxp = np.zeros(xp.shape, dtype=x.dtype)
            for t, sl in _taps(ho, wo, k, stride):
                gxp[sl] += gcols[:, :, :, t, :]
            gx = gxp[:, padding:padding + x.shape[1], padding:padding + x.shape[2], :] if padding else gxp
        return (gx, gw, gb)

    inputs = (x, w) if b is None else (x, w, b)
    return make("conv2d", out.reshape(bsz, ho, wo, cout), inputs, vjp)


def depthwise_conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 1) -> Tensor:
    """Per-channel convolution; ``w`` is ``[k, k, C]``."""
    k = w.shape[0]
    if x.shape[-1] != w.shape[-1]:
        raise DimensionError(f"depthwise channel mismatch: input {x.shape}, kernel {w.shape}")
    ho, wo = _conv_geometry(x.shape, k, stride, padding)
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else x.data
    wd = w.data
    out = np.zeros((x.shape[0], ho, wo, x.shape[-1]), dtype=x.dtype)
    for t, sl in _taps(ho, wo, k, stride):
        out += xp[sl] * wd[t // k, t % k]
    if b is not None:
        out += b.data

    def vjp(g):
        gw = np.empty_like(wd)
        gxp = np.zeros(xp.shape, dtype=x.dtype) if x.requires_grad else None
        for t, sl in _taps(ho, wo, k, stride):
            gw[t // k, t % k] = (g * xp[sl]).sum(axis=(0, 1, 2))
            if gxp is not None:
                gxp[sl] += g * wd[t // k, t % k]
        gx = None
        if gxp is not None:
            gx = gxp[:, padding:padding + x.shape[1], padding:padding + x.shape[2], :] if padding else gxp
        gb = g.sum(axis=(0, 1, 2)) if b is not None else None
        return (gx, gw, gb)

    inputs = (x, w) if b is None else (x, w, b)
    return make("depthwise_conv2d", out, inputs, vjp)


def avg_pool2(x: Tensor) -> Tensor:
    b, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ConfigurationError(f"avg_pool2 needs even spatial dims, got {h}x{w}")
    return mean(reshape(x, (b, h // 2, 2, w // 2, 2, c)), axis=(2, 4))
