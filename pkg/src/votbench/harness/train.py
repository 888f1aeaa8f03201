"""Training and evaluation loops."""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..model import vot
from ..model.config import VARIANTS, VOTConfig, desk_config
from ..numerics import GradientTape, ops
from ..numerics.optim import ParameterStore, adam_step
from ..numerics.tensor import check_finite, get_dtype
from ..storage.checkpoint import check_compatible, load_checkpoint, save_checkpoint
from ..storage.clipfile import atomic_write
from ..storage.dataset import Split, load_split
from ..tracker import rasterize
from .metrics import batch_prediction_error

log = logging.getLogger(__name__)

DEFAULT_LR = {"maxvit": 1e-4, "maxvit2": 1e-4, "swint": 1e-5}


class TrainingDiverged(RuntimeError):
    """Loss became NaN or infinite."""


@dataclass
class ExperimentSpec:
    model: str = "maxvit"
    train_set: str = ""
    eval_sets: tuple = ()
    epochs: int = 100
    batch_size: int = 4
    lr: Optional[float] = None
    seed: int = 0
    loss: str = "mse"
    pretrain: Optional[str] = None
    finetune_epochs: int = 10
    subset_sizes: tuple = ()
    checkpoint_every: int = 0
    config: Optional[dict] = None
    center_inputs: bool = True

    def __post_init__(self):
        if self.model not in VARIANTS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {VARIANTS}")
        if self.lr is None:
            self.lr = DEFAULT_LR[self.model]
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if not self.lr > 0:
            raise ValueError("learning rate must be > 0")
        if self.loss != "mse":
            raise ValueError("only the mse loss is supported")
        sizes = list(self.subset_sizes)
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError(f"subset sizes must be strictly increasing, got {sizes}")
        self.eval_sets = tuple(self.eval_sets)
        self.subset_sizes = tuple(sizes)

    def model_config(self) -> VOTConfig:
        return desk_config(self.model, **(self.config or {}))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class ArrayDataset:
    """Preprocessed model inputs ``x`` [N, T, res, res, 3] and grids ``y`` [N, 12, 16]."""
    name: str
    x: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.x)

    def subset(self, idx) -> "ArrayDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return ArrayDataset(self.name, self.x[idx], self.y[idx])


def prepare(split: Split, cfg: VOTConfig) -> ArrayDataset:
    x = np.stack([vot.preprocess_clip(c, cfg.input_res, cfg.input_frames) for c in split.top])
    h_b, w_b = split.bottom_res
    y = np.stack([rasterize(t, h_b, w_b, split.fill_value) for t in split.truth])
    return ArrayDataset(split.name, x, y)


def load_arrays(path, split: str, cfg: VOTConfig) -> ArrayDataset:
    return prepare(load_split(path, split), cfg)


def background_level(x: np.ndarray) -> tuple:
    """Per-channel median of preprocessed frames.

    When a uniform floor covers most pixels this is exactly the floor colour,
    which the model then maps to zero input.
    """
    x = np.asarray(x)
    return tuple(float(v) for v in np.median(x.reshape(-1, x.shape[-1]), axis=0))


@dataclass
class TrainResult:
    cfg: VOTConfig
    params: ParameterStore
    epoch_loss: list = field(default_factory=list)
    batch_loss: list = field(default_factory=list)
    train_pe: list = field(default_factory=list)   # (epoch, PE) from full evaluation passes
    epochs_run: int = 0
    wall_clock: float = 0.0
    seed: int = 0
    checkpoints: list = field(default_factory=list)

    def curve(self) -> dict:
        return {"epoch_loss": self.epoch_loss, "batch_loss": self.batch_loss,
                "train_pe": self.train_pe, "epochs_run": self.epochs_run,
                "wall_clock": self.wall_clock, "seed": self.seed}


def predict(cfg: VOTConfig, params, x: np.ndarray, batch_size: int = 8) -> np.ndarray:
    """Batched inference without a tape."""
    out = [vot.model_forward(cfg, params, x[i:i + batch_size]).data for i in range(0, len(x), batch_size)]
    return np.concatenate(out).astype(np.float64)


def evaluate_params(cfg: VOTConfig, params, data: ArrayDataset, batch_size: int = 8) -> float:
    """Dataset-level PE: unweighted mean of per-clip PE."""
    if len(data) == 0:
        raise ValueError(f"dataset {data.name!r} is empty")
    return float(np.mean(batch_prediction_error(data.y, predict(cfg, params, data.x, batch_size))))


def _loss_and_grads(cfg, params, x, y):
    with GradientTape() as tape:
        pred = vot.model_forward(cfg, params, x)
        loss = ops.mse(pred, y.astype(pred.dtype))
    grads = tape.gradient(loss, params.tensors())
    return float(loss.data), {k: g for k, g in zip(params, grads)}


def _diagnose(cfg, params, x, y) -> str:
    try:
        with check_finite(True):
            _loss_and_grads(cfg, params, x, y)
    except FloatingPointError as err:
        return str(err)
    return "no non-finite intermediate found on re-run"


def train(spec: ExperimentSpec, data: ArrayDataset, params: ParameterStore | None = None,
          out: str | Path | None = None, stop_below: float | None = None, check_every: int = 5,
          on_epoch: Callable | None = None) -> TrainResult:
    """Adam on per-batch MSE against the rasterised truth.

    Shuffling draws from ``default_rng([seed, epoch])`` and the incomplete last
    batch is dropped.  A fresh model takes its ``input_center`` from the
    training frames (see :func:`background_level`) unless the config sets one
    or ``spec.center_inputs`` is off.  With ``stop_below`` a full train-set PE
    pass runs every ``check_every`` epochs (and at the end) and training stops
    once it is below that value.  ``out`` receives the final checkpoint, intermediate ones when
    ``spec.checkpoint_every`` is set, and ``<out>.curve.json``.
    """
    n = len(data)
    if n == 0:
        raise ValueError(f"dataset {data.name!r} is empty")
    if n < spec.batch_size:
        raise ValueError(f"dataset has {n} clips, fewer than batch size {spec.batch_size}")
    cfg = spec.model_config()
    if params is None:
        if spec.center_inputs and cfg.input_center is None:
            cfg = dataclasses.replace(cfg, input_center=background_level(data.x))
        params = vot.init_params(cfg, spec.seed)
    else:
        check_compatible(cfg, params, cfg)
    res = TrainResult(cfg=cfg, params=params, seed=spec.seed)
    start = time.perf_counter()
    n_batches = n // spec.batch_size
    y_all = data.y.astype(get_dtype())
    for epoch in range(spec.epochs):
        order = np.random.default_rng([spec.seed, epoch]).permutation(n)
        losses = []
        for b in range(n_batches):
            idx = np.sort(order[b * spec.batch_size:(b + 1) * spec.batch_size])
            x, y = data.x[idx], y_all[idx]
            loss, grads = _loss_and_grads(cfg, params, x, y)
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1} batch {b + 1}: "
                                       f"{_diagnose(cfg, params, x, y)}")
            adam_step(params, grads, spec.lr)
            losses.append(loss)
        res.batch_loss.extend(losses)
        res.epoch_loss.append(float(np.mean(losses)))
        res.epochs_run = epoch + 1
        log.info("epoch %d/%d loss %.6g", epoch + 1, spec.epochs, res.epoch_loss[-1])
        if on_epoch is not None:
            on_epoch(res)
        if out is not None and spec.checkpoint_every and (epoch + 1) % spec.checkpoint_every == 0:
            path = Path(f"{out}.epoch{epoch + 1:04d}")
            save_checkpoint(path, cfg, params, _ckpt_meta(spec, data, res))
            res.checkpoints.append(str(path))
        if stop_below is not None and ((epoch + 1) % check_every == 0 or epoch + 1 == spec.epochs):
            pe = evaluate_params(cfg, params, data)
            res.train_pe.append((epoch + 1, pe))
            if pe < stop_below:
                break
    res.wall_clock = time.perf_counter() - start
    if out is not None:
        save_checkpoint(out, cfg, params, _ckpt_meta(spec, data, res))
        res.checkpoints.append(str(out))
        atomic_write(Path(f"{out}.curve.json"), (json.dumps(res.curve(), indent=1) + "\n").encode())
    return res


def _ckpt_meta(spec: ExperimentSpec, data: ArrayDataset, res: TrainResult) -> dict:
    return {"spec": spec.to_dict(), "train_set": data.name, "epochs_run": res.epochs_run,
            "adam_step": res.params.step}


def evaluate(checkpoint, data: ArrayDataset, expect: VOTConfig | None = None) -> float:
    """PE of a checkpoint (path or ``(cfg, params)``) on ``data``; parameters are never modified."""
    if isinstance(checkpoint, (str, Path)):
        cfg, params, _ = load_checkpoint(checkpoint, expect)
    else:
        cfg, params = checkpoint
        check_compatible(cfg, params, expect)
    return evaluate_params(cfg, params, data)
