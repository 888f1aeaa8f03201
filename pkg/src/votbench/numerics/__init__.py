from . import nn, ops
from .gradcheck import finite_diff_check
from .nn import (
    cyclic_shift,
    grid_merge,
    grid_partition,
    multihead_attention,
    window_merge,
    window_partition,
)
from .ops import layernorm, matmul, softmax
from .optim import ADAM_DEFAULTS, ParameterStore, adam_step
from .tensor import (
    ConfigurationError,
    DimensionError,
    GradientTape,
    Tensor,
    check_finite,
    get_dtype,
    precision,
    set_dtype,
)

__all__ = [
    "ADAM_DEFAULTS",
    "ConfigurationError",
    "DimensionError",
    "GradientTape",
    "ParameterStore",
    "Tensor",
    "adam_step",
    "check_finite",
    "cyclic_shift",
    "finite_diff_check",
    "get_dtype",
    "grid_merge",
    "grid_partition",
    "layernorm",
    "matmul",
    "multihead_attention",
    "nn",
    "ops",
    "precision",
    "set_dtype",
    "softmax",
    "window_merge",
    "window_partition",
]
