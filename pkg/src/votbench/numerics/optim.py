"""Named parameter storage and the Adam update."""

from __future__ import annotations

from typing import Iterator, Mapping

import numpy as np

from .nn import init_param
from .tensor import Tensor, get_dtype

ADAM_DEFAULTS = {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8}


class ParameterStore(Mapping):
    """Hierarchically named trainable tensors plus Adam moment buffers.

    Behaves as a read-only mapping from name to :class:`Tensor` so layer
    functions can look parameters up directly.  Moments are float64: a layer
    norm fed an all-zero token has slope ``1/sqrt(eps)``, and stacked norms can
    push single gradients past 1e19, whose square overflows float32.
    """

    def __init__(self, arrays: Mapping[str, np.ndarray] | None = None):
        self._params: dict[str, Tensor] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0
        for name, arr in (arrays or {}).items():
            self.add(name, arr)

    @classmethod
    def initialise(cls, shapes: Mapping[str, tuple], seed: int, dtype=None) -> "ParameterStore":
        dtype = dtype or get_dtype()
        rng = np.random.default_rng(seed)
        return cls({name: init_param(name, tuple(shape), rng, dtype) for name, shape in shapes.items()})

    def add(self, name: str, arr: np.ndarray) -> None:
        if name in self._params:
            raise KeyError(f"parameter {name!r} registered twice")
        arr = np.ascontiguousarray(arr)
        self._params[name] = Tensor(arr, requires_grad=True, name=name)
        self.m[name] = np.zeros(arr.shape, dtype=np.float64)
        self.v[name] = np.zeros(arr.shape, dtype=np.float64)

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self._params.items()}

    def count(self) -> int:
        return int(sum(t.data.size for t in self._params.values()))

    def astype(self, dtype) -> "ParameterStore":
        """Copy with parameters cast to ``dtype`` and fresh optimiser state."""
        return ParameterStore({k: t.data.astype(dtype) for k, t in self._params.items()})

    def copy(self) -> "ParameterStore":
        out = ParameterStore({k: t.data.copy() for k, t in self._params.items()})
        out.m = {k: a.copy() for k, a in self.m.items()}
        out.v = {k: a.copy() for k, a in self.v.items()}
        out.step = self.step
        return out


def adam_step(store: ParameterStore, grads: Mapping[str, np.ndarray], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place Adam update with bias correction; increments ``store.step``."""
    missing = set(store) ^ set(grads)
    if missing:
        raise KeyError(f"gradient keys differ from parameters: {sorted(missing)}")
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, tensor in store._params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        p = tensor.data
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        mhat = m / c1
        vhat = v / c2
        p -= (lr * mhat / (np.sqrt(vhat) + eps)).astype(p.dtype, copy=False)
