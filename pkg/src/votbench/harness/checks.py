"""Finite-difference checks of single ops and the full model."""

from __future__ import annotations

import numpy as np

from ..model import vot
from ..model.config import StageConfig, VOTConfig, desk_config
from ..numerics import ops
from ..numerics.gradcheck import finite_diff_check
from ..numerics.tensor import Tensor, precision


def _t64(a) -> Tensor:
    return Tensor(np.asarray(a, dtype=np.float64))


def op_cases() -> dict:
    """``{name: (input shape, f)}`` covering every differentiable op."""
    rng = np.random.default_rng(7)
    w = _t64(rng.standard_normal((4, 3)))
    b = _t64(rng.standard_normal(3))
    g, bb = _t64(rng.standard_normal(5)), _t64(rng.standard_normal(5))
    kern = _t64(rng.standard_normal((3, 3, 2, 3)))
    dw = _t64(rng.standard_normal((3, 3, 2)))
    other = _t64(rng.standard_normal((2, 3)))
    right = _t64(rng.standard_normal((4, 3)))
    mask = np.tril(np.ones((3, 3), dtype=bool))
    return {
        "add": ((2, 3), lambda x: ops.add(x, other)),
        "sub": ((2, 3), lambda x: ops.sub(other, x)),
        "mul": ((2, 3), lambda x: ops.mul(x, other)),
        "div": ((2, 3), lambda x: ops.div(other, ops.add(ops.square(x), 1.0))),
        "exp": ((2, 3), ops.exp),
        "square": ((2, 3), ops.square),
        "gelu": ((2, 3), ops.gelu),
        "reshape": ((2, 3), lambda x: ops.reshape(x, (3, 2))),
        "transpose": ((2, 3, 4), lambda x: ops.transpose(x, (2, 0, 1))),
        "getitem": ((4, 3), lambda x: ops.getitem(x, (slice(1, 3), -1))),
        "getitem_fancy": ((4, 3), lambda x: ops.getitem(x, np.array([0, 2, 2]))),
        "roll": ((2, 4, 4, 1), lambda x: ops.roll(x, (1, -2), (1, 2))),
        "concat": ((2, 3), lambda x: ops.concat([x, ops.square(x)], axis=0)),
        "sum": ((2, 3), lambda x: ops.sum(x, axis=1, keepdims=True)),
        "mean": ((2, 3), lambda x: ops.mean(x, axis=0)),
        "matmul": ((2, 2, 4), lambda x: ops.matmul(x, right)),
        "linear": ((2, 4), lambda x: ops.linear(x, w, b)),
        "softmax": ((2, 3), lambda x: ops.softmax(x, axis=-1)),
        "softmax_masked": ((3, 3), lambda x: ops.softmax(x, axis=-1, mask=mask)),
        "layernorm": ((3, 5), lambda x: ops.layernorm(x, g, bb)),
        "mse": ((2, 3), lambda x: ops.mse(x, other.data)),
        "conv2d": ((1, 5, 5, 2), lambda x: ops.conv2d(x, kern, stride=2, padding=1)),
        "depthwise": ((1, 4, 4, 2), lambda x: ops.depthwise_conv2d(x, dw, stride=1, padding=1)),
        "depthwise_s2": ((1, 4, 4, 2), lambda x: ops.depthwise_conv2d(x, dw, stride=2, padding=1)),
        "avg_pool2": ((1, 4, 4, 2), ops.avg_pool2),
    }


def op_gradcheck(name: str, seed: int = 0) -> float:
    """Relative error of one op under a random fixed linear read-out, in float64."""
    shape, f = op_cases()[name]
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape)
    with precision(np.float64):
        w = np.random.default_rng(seed + 100).standard_normal(f(_t64(x)).shape)
        return finite_diff_check(lambda v: ops.sum(ops.mul(f(v), Tensor(w))), x)


def tiny_config(variant: str = "maxvit") -> VOTConfig:
    """Smallest config that still exercises every layer type."""
    return desk_config(variant, input_frames=3, input_res=16, stages=(StageConfig(2, 8), StageConfig(2, 16)),
                       window=2, grid=2, swin_window=2, patch_size=2, head_dim=8,
                       mbconv_expansion=2.0, mlp_ratio=2.0, temporal_layers=1, temporal_heads=2,
                       temporal_dim=16)


def model_gradcheck(cfg: VOTConfig, seed: int = 0, per_tensor: int = 2, batch: int = 2,
                    eps: float = 1e-5) -> dict[str, float]:
    """Worst relative error per parameter tensor for forward + MSE in float64.

    ``per_tensor`` flat positions are sampled from each parameter; the input
    frames and targets are random but fixed by ``seed``.  Attention key biases
    have an exactly zero gradient (softmax ignores a shift shared by all keys),
    so gradients below ``1e-6 * max(1, loss)`` are compared in absolute terms.
    """
    rng = np.random.default_rng(seed)
    with precision(np.float64):
        params = vot.init_params(cfg, seed, np.float64)
        # non-trivial biases/gains so their gradients are not degenerate
        for name, t in params.items():
            if name.endswith((".bias", ".gain", "rel_bias")):
                t.data += 0.1 * rng.standard_normal(t.shape)
        x = rng.random((batch, cfg.input_frames, cfg.input_res, cfg.input_res, 3))
        y = rng.random((batch, cfg.out_rows, cfg.out_cols))
        # round-off in the centered difference grows with the loss value
        floor = 1e-6 * max(1.0, abs(float(ops.mse(vot.model_forward(cfg, params, x), y).data)))
        errors = {}
        for name in params:
            base = params[name]

            def loss(p, name=name, base=base):
                swapped = dict(params)
                swapped[name] = p
                return ops.mse(vot.model_forward(cfg, swapped, x), y)

            idx = rng.choice(base.data.size, size=min(per_tensor, base.data.size), replace=False)
            errors[name] = finite_diff_check(loss, base.data, eps, indices=idx, floor=floor)
    return errors



def param_groups(names, depth: int = 3) -> dict[str, list[str]]:
    """Tensors grouped by the first ``depth`` components of their module path."""
    groups: dict[str, list[str]] = {}
    for name in names:
        groups.setdefault(".".join(name.split(".")[:-1][:depth]), []).append(name)
    return groups


def model_directional_check(cfg: VOTConfig, seed: int = 0, batch: int = 1, eps: float = 1e-5,
                            depth: int = 3) -> dict[str, float]:
    """Finite-difference check of forward + MSE along one random direction per module group.

    For each group the scalar function ``t -> loss(params + t * d)`` goes
    through :func:`finite_diff_check`, so its tape derivative ``grad . d``
    meets the centered difference.  Every tensor of the group moves along its
    own unit-norm random direction and so weighs equally.  The cost is a few
    passes per group instead of per sampled element.
    """
    rng = np.random.default_rng(seed)
    with precision(np.float64):
        params = vot.init_params(cfg, seed, np.float64)
        for name, t in params.items():
            if name.endswith((".bias", ".gain", "rel_bias")):
                t.data += 0.1 * rng.standard_normal(t.shape)
        x = rng.random((batch, cfg.input_frames, cfg.input_res, cfg.input_res, 3))
        y = rng.random((batch, cfg.out_rows, cfg.out_cols))
        errors = {}
        for group, names in param_groups(params, depth).items():
            dirs = {}
            for n in names:
                d = rng.standard_normal(params[n].shape)
                dirs[n] = d / np.linalg.norm(d)

            def along(t, names=names, dirs=dirs):
                store = dict(params)
                for n in names:
                    store[n] = ops.add(params[n], ops.mul(ops.reshape(t, (1,) * params[n].ndim), dirs[n]))
                return ops.mse(vot.model_forward(cfg, store, x), y)

            errors[group] = finite_diff_check(along, np.zeros(1), eps)
    return errors
