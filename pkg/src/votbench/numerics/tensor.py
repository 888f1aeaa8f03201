"""Dense tensors with tape-based reverse-mode differentiation.

Operations executed while a :class:`GradientTape` is active are recorded in
execution order, which is already a topological order of the graph, so the
backward pass is a single reverse sweep over the record.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

_state = {"dtype": np.float32, "check_finite": False}
_tapes: list["GradientTape"] = []


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class ConfigurationError(ValueError):
    """A layer or partition was asked for an impossible layout."""


def get_dtype():
    return _state["dtype"]


def set_dtype(dtype) -> None:
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError(f"unsupported precision {dtype}")
    _state["dtype"] = dtype


@contextlib.contextmanager
def precision(dtype) -> Iterator[None]:
    """Temporarily switch the default floating dtype (float64 for gradient checks)."""
    old = _state["dtype"]
    set_dtype(dtype)
    try:
        yield
    finally:
        _state["dtype"] = old


@contextlib.contextmanager
def check_finite(enabled: bool = True) -> Iterator[None]:
    """Raise ``FloatingPointError`` naming the op as soon as any op emits NaN/Inf."""
    old = _state["check_finite"]
    _state["check_finite"] = enabled
    try:
        yield
    finally:
        _state["check_finite"] = old


class Tensor:
    """An immutable array value, optionally tracked for differentiation."""

    __slots__ = ("data", "requires_grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, np.ndarray) and data.dtype in (np.float32, np.float64):
            arr = data
        else:
            arr = np.asarray(data, dtype=get_dtype())
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    # operator sugar, implemented in ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)

    def reshape(self, *shape):
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def transpose(self, *axes):
        from . import ops
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return ops.transpose(self, axes or None)

    def sum(self, axis=None, keepdims=False):
        from . import ops
        return ops.sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        from . import ops
        return ops.mean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class _Node:
    __slots__ = ("op", "out", "inputs", "vjp")

    def __init__(self, op, out, inputs, vjp):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.vjp = vjp


class GradientTape:
    """Ordered record of executed operations.

    Use as a context manager; every op whose inputs require gradients is
    appended while the tape is active.  ``gradient`` replays the record
    backwards exactly once per node.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "GradientTape":
        _tapes.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tapes.remove(self)

    def record(self, op: str, out: Tensor, inputs: Sequence[Tensor], vjp: Callable) -> None:
        self.nodes.append(_Node(op, out, tuple(inputs), vjp))

    def gradient(self, target: Tensor, sources: Sequence[Tensor], seed=None) -> list:
        """Return d(target)/d(source) arrays; sources never reached get zeros."""
        keep = {id(s) for s in sources}
        grads: dict[int, np.ndarray] = {
            id(target): np.ones_like(target.data) if seed is None else np.asarray(seed)
        }
        for node in reversed(self.nodes):
            key = id(node.out)
            g = grads.get(key) if key in keep else grads.pop(key, None)
            if g is None:
                continue
            in_grads = node.vjp(g)
            for inp, gi in zip(node.inputs, in_grads):
                if gi is None or not inp.requires_grad:
                    continue
                k = id(inp)
                if k in grads:
                    grads[k] = grads[k] + gi
                else:
                    grads[k] = gi
        out = []
        for s in sources:
            g = grads.get(id(s))
            out.append(np.zeros_like(s.data) if g is None else g.astype(s.data.dtype, copy=False))
        return out


def make(op: str, data: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    """Wrap an op result, recording it on every active tape when needed."""
    if _state["check_finite"] and not np.all(np.isfinite(data)):
        raise FloatingPointError(f"non-finite values produced by op '{op}'")
    needs = _tapes and any(t.requires_grad for t in inputs)
    out = Tensor(data, requires_grad=bool(needs))
    if needs:
        for tape in _tapes:
            tape.record(op, out, inputs, vjp)
    return out
