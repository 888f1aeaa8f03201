"""Centered finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import GradientTape, Tensor, precision

FD_EPS = 1e-5


def analytic_grad(f: Callable[[Tensor], Tensor], x: np.ndarray) -> tuple[float, np.ndarray]:
    xt = Tensor(x, requires_grad=True)
    with GradientTape() as tape:
        y = f(xt)
    if y.data.size != 1:
        raise ValueError(f"f must return a scalar, got shape {y.shape}")
    return float(y.data), tape.gradient(y, [xt])[0]


def finite_diff_check(f: Callable[[Tensor], Tensor], x, eps: float = FD_EPS,
                      indices: Optional[Sequence[int]] = None, floor: float = 1e-8) -> float:
    """Max over elements of ``|a-b| / max(|a|, |b|, floor)``.

    ``a`` is the reverse-mode gradient, ``b`` the centered difference
    ``(f(x+eps e) - f(x-eps e)) / 2eps``.  Runs in float64.  ``indices``
    restricts the comparison to selected flat positions.  Raise ``floor`` for
    gradients that are exactly zero by symmetry, where the centered difference
    is pure round-off of order ``1e-16 * |f| / eps``.
    """
    with precision(np.float64):
        x0 = np.array(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
        value, grad = analytic_grad(f, x0)
        if not np.isfinite(value):
            raise FloatingPointError("f is not finite at the check point")
        flat = x0.reshape(-1)
        gflat = grad.reshape(-1)
        idx = range(flat.size) if indices is None else indices
        worst = 0.0
        for i in idx:
            old = flat[i]
            flat[i] = old + eps
            fp = float(f(Tensor(x0)).data)
            flat[i] = old - eps
            fm = float(f(Tensor(x0)).data)
            flat[i] = old
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError(f"f is not finite near element {i}")
            num = (fp - fm) / (2 * eps)
            a = float(gflat[i])
            err = abs(a - num) / max(abs(a), abs(num), floor)
            worst = max(worst, err)
        return worst
