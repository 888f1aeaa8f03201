"""VOT model configuration and parameter layout."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Literal

from ..numerics import nn
from ..numerics.tensor import ConfigurationError

Variant = Literal["maxvit", "maxvit2", "swint"]
VARIANTS = ("maxvit", "maxvit2", "swint")

GRID_ROWS = 12
GRID_COLS = 16


@dataclass(frozen=True)
class StageConfig:
    depth: int
    channels: int
    downsample: bool = True


@dataclass(frozen=True)
class VOTConfig:
    variant: Variant = "maxvit"
    input_frames: int = 10
    input_res: int = 64
    stages: tuple = (StageConfig(2, 32), StageConfig(2, 64))
    window: int = 4
    grid: int = 4
    swin_window: int = 4
    patch_size: int = 4
    head_dim: int = 32
    mbconv_expansion: float = 4.0
    mlp_ratio: float = 4.0
    temporal_layers: int = 2
    temporal_heads: int = 4
    temporal_dim: int = 64
    rel_bias: bool = False
    output_scale: float = 1.0
    norm_eps: float = 1e-5             # layer-norm eps of per-token norms in the spatial encoder
    input_center: tuple | None = None   # per-channel value subtracted from [0, 1] frames
    out_rows: int = GRID_ROWS
    out_cols: int = GRID_COLS

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        stages = tuple(s if isinstance(s, StageConfig) else StageConfig(**s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        if self.input_center is not None:
            center = tuple(float(v) for v in self.input_center)
            if len(center) != 3:
                raise ConfigurationError(f"input_center needs 3 channel values, got {center}")
            object.__setattr__(self, "input_center", center)

    # ---- geometry --------------------------------------------------------
    def stage_resolutions(self) -> list[int]:
        """Feature-map side length inside each stage."""
        if self.variant == "swint":
            res, stem = self.input_res, self.patch_size
        else:
            res, stem = self.input_res, 2
        if res % stem:
            raise ConfigurationError(f"input_res {res} not divisible by stem stride {stem}")
        res //= stem
        out = []
        for i, st in enumerate(self.stages):
            down = st.downsample and (self.variant != "swint" or i > 0)
            if down:
                if res % 2:
                    raise ConfigurationError(f"stage {i} cannot halve odd resolution {res}")
                res //= 2
            out.append(res)
        return out

    def stage_downsamples(self) -> list[bool]:
        return [st.downsample and (self.variant != "swint" or i > 0) for i, st in enumerate(self.stages)]

    def heads(self, channels: int) -> int:
        if channels % self.head_dim:
            raise ConfigurationError(f"channels {channels} not divisible by head_dim {self.head_dim}")
        return channels // self.head_dim

    def validate(self) -> "VOTConfig":
        if (self.out_rows, self.out_cols) != (GRID_ROWS, GRID_COLS):
            raise ConfigurationError("output grid is fixed at 12x16")
        if self.temporal_dim % self.temporal_heads:
            raise ConfigurationError("temporal_dim not divisible by temporal_heads")
        for i, res in enumerate(self.stage_resolutions()):
            sizes = [self.swin_window] if self.variant == "swint" else [self.window, self.grid]
            for p in sizes:
                if res % p:
                    raise ConfigurationError(f"stage {i} resolution {res} not divisible by partition size {p}")
            self.heads(self.stages[i].channels)
            if self.variant == "swint" and self.stages[i].depth % 2:
                raise ConfigurationError("Swin stages need an even depth (regular/shifted pairs)")
        return self

    # ---- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VOTConfig":
        d = dict(d)
        d["stages"] = tuple(StageConfig(**s) for s in d["stages"])
        return cls(**d)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# Narrower MLP/MBConv expansions halve the CPU cost; predicting in units of
# pixel values lets the head start at O(1) weights for 0/255 targets.
DESK_DEFAULTS = {"mbconv_expansion": 2.0, "mlp_ratio": 2.0, "output_scale": 255.0}


def desk_config(variant: Variant = "maxvit", **overrides) -> VOTConfig:
    """Laptop-scale default: 10 frames at 64x64, two stages (32, 64)."""
    return dataclasses.replace(VOTConfig(variant=variant), **{**DESK_DEFAULTS, **overrides}).validate()


def full_config(variant: Variant) -> VOTConfig:
    """Full-scale configs (25 frames at 224x224) sized to the target parameter counts."""
    if variant == "swint":
        return VOTConfig(
            variant="swint", input_frames=25, input_res=224,
            stages=(StageConfig(2, 96, False), StageConfig(2, 192), StageConfig(14, 384), StageConfig(2, 768)),
            swin_window=7, patch_size=4, temporal_layers=2, temporal_heads=8, temporal_dim=512,
        ).validate()
    return VOTConfig(
        variant=variant, input_frames=25, input_res=224,
        stages=(StageConfig(2, 96), StageConfig(2, 192), StageConfig(2, 384), StageConfig(2, 768)),
        window=7, grid=7, temporal_layers=2, temporal_heads=8, temporal_dim=512,
    ).validate()


def _attn_sublayer_shapes(cfg: VOTConfig, prefix: str, dim: int, tokens: int) -> dict:
    heads = cfg.heads(dim)
    return {
        **nn.norm_shapes(f"{prefix}.norm1", dim),
        **nn.attention_shapes(f"{prefix}.attn", dim, tokens if cfg.rel_bias else None, heads),
        **nn.norm_shapes(f"{prefix}.norm2", dim),
        **nn.mlp_shapes(f"{prefix}.mlp", dim, cfg.mlp_ratio),
    }


def param_shapes(cfg: VOTConfig) -> dict[str, tuple]:
    """Ordered map of every trainable tensor name to its shape."""
    cfg.validate()
    shapes: dict[str, tuple] = {}
    c0 = cfg.stages[0].channels
    if cfg.variant == "swint":
        shapes.update({"spatial.stem.weight": (cfg.patch_size, cfg.patch_size, 3, c0), "spatial.stem.bias": (c0,)})
        shapes.update(nn.norm_shapes("spatial.stem.norm", c0))
    else:
        shapes.update({"spatial.stem.weight": (3, 3, 3, c0), "spatial.stem.bias": (c0,)})
    cin = c0
    downs = cfg.stage_downsamples()
    for s, st in enumerate(cfg.stages):
        sp = f"spatial.stage{s}"
        if cfg.variant == "swint":
            if downs[s]:
                shapes.update(nn.norm_shapes(f"{sp}.merge.norm", 4 * cin))
                shapes.update(nn.linear_shapes(f"{sp}.merge.reduce", 4 * cin, st.channels, bias=False))
            for b in range(st.depth):
                shapes.update(_attn_sublayer_shapes(cfg, f"{sp}.block{b}", st.channels, cfg.swin_window ** 2))
        else:
            for b in range(st.depth):
                bp = f"{sp}.block{b}"
                stride = 2 if (b == 0 and downs[s]) else 1
                shapes.update(nn.conv_block_shapes(f"{bp}.conv", cin if b == 0 else st.channels,
                                                   st.channels, cfg.mbconv_expansion, stride))
                shapes.update(_attn_sublayer_shapes(cfg, f"{bp}.attn1", st.channels, cfg.window ** 2))
                second = cfg.grid if cfg.variant == "maxvit" else cfg.window
                shapes.update(_attn_sublayer_shapes(cfg, f"{bp}.attn2", st.channels, second ** 2))
        cin = st.channels
    shapes.update(nn.norm_shapes("spatial.norm", cin))
    d = cfg.temporal_dim
    shapes.update(nn.linear_shapes("temporal.in_proj", cin, d))
    shapes["temporal.pos"] = (cfg.input_frames, d)
    for layer in range(cfg.temporal_layers):
        lp = f"temporal.layer{layer}"
        shapes.update(nn.norm_shapes(f"{lp}.norm1", d))
        shapes.update(nn.attention_shapes(f"{lp}.attn", d))
        shapes.update(nn.norm_shapes(f"{lp}.norm2", d))
        shapes.update(nn.mlp_shapes(f"{lp}.mlp", d, cfg.mlp_ratio))
    shapes.update(nn.norm_shapes("temporal.norm", d))
    shapes.update(nn.linear_shapes("head", d, cfg.out_rows * cfg.out_cols))
    return shapes


def param_count(cfg: VOTConfig) -> int:
    total = 0
    for shape in param_shapes(cfg).values():
        n = 1
        for s in shape:
            n *= s
        total += n
    return total
