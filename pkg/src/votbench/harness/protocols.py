"""Zero-shot matrices, controlled attribute pairs and fine-tuning curves."""

from __future__ import annotations

import dataclasses
import time
from typing import Mapping, Sequence

import numpy as np

from ..model.config import VOTConfig, desk_config
from ..numerics.optim import ParameterStore
from ..storage.checkpoint import file_hash, load_checkpoint
from .metrics import generation_gap
from .report import MetricRow, MetricsReport
from .train import ArrayDataset, ExperimentSpec, evaluate_params, train

# attribute -> (first, second) sub-dataset; each column's GP is the PE of the model
# trained on that column's set, tested on the other set, minus the other set's scratch PE
CONTROLLED_PAIRS = {
    "Friction": (("Foam", "foam_single"), ("Ball", "ball_single")),
    "Shape": (("Cube", "cube_single"), ("Icosahedron", "icosahedron_single")),
    "Color": (("Ball_R", "ball_single"), ("Ball_G", "ball_green_single")),
    "Background": (("Dynamic", "icosahedron_quintuple"), ("Static", "icosahedron_quintuple_static")),
}


class MissingBaseline(KeyError):
    """A zero-shot cell has no scratch PE on its eval set."""


def _load(ckpt):
    if isinstance(ckpt, tuple):
        cfg, params = ckpt
        return cfg, params, ""
    cfg, params, _ = load_checkpoint(ckpt)
    return cfg, params, file_hash(ckpt)


def pe_table(checkpoints: Mapping[str, object], eval_data: Mapping[str, ArrayDataset]) -> dict:
    """PE for every (train set, eval set) pair. Checkpoints are paths or ``(cfg, params)``."""
    out = {}
    for tr, ckpt in checkpoints.items():
        cfg, params, h = _load(ckpt)
        for ev, data in eval_data.items():
            out[(tr, ev)] = (evaluate_params(cfg, params, data), cfg.hash(), h)
    return out


def zero_shot_matrix(checkpoints: Mapping[str, object], eval_data: Mapping[str, ArrayDataset],
                     scratch: Mapping[str, float] | None = None, model: str = "vot",
                     seed: int | None = None) -> MetricsReport:
    """PE and GP for every (train, eval) cell.

    The scratch PE of an eval set comes from ``scratch`` or, failing that, from
    the checkpoint trained on that same set.
    """
    table = pe_table(checkpoints, eval_data)
    base = dict(scratch or {})
    for ev in eval_data:
        if ev not in base and (ev, ev) in table:
            base[ev] = table[(ev, ev)][0]
    missing = [(tr, ev) for tr in checkpoints for ev in eval_data if ev not in base]
    if missing:
        raise MissingBaseline(f"no scratch PE for eval set(s) of pairs {missing}")
    rep = MetricsReport()
    for (tr, ev), (pe, cfg_hash, h) in table.items():
        gp = 0.0 if tr == ev else generation_gap(pe, base[ev])
        rep.add(MetricRow(model, tr, ev, pe, gp, seed, h))
        rep.config_hashes[tr] = cfg_hash
    rep.metadata["scratch_pe"] = base
    return rep


def controlled_pairs(report: MetricsReport, model: str = "vot",
                     pairs: Mapping = CONTROLLED_PAIRS) -> dict:
    """``{attribute: {label: GP}}`` for each controlled pair present in ``report``."""
    out = {}
    for attr, ((la, sa), (lb, sb)) in pairs.items():
        try:
            out[attr] = {
                la: generation_gap(report.lookup(model, sa, sb).pe, report.lookup(model, sb, sb).pe),
                lb: generation_gap(report.lookup(model, sb, sa).pe, report.lookup(model, sa, sa).pe),
            }
        except KeyError:
            continue
    return out


def controlled_table(gps: Mapping[str, Mapping[str, float]], model: str = "vot") -> str:
    labels = [(attr, lab) for attr, cols in gps.items() for lab in cols]
    head = "| model | " + " | ".join(f"{a}: {lab}" for a, lab in labels) + " |"
    row = f"| {model} | " + " | ".join(f"{gps[a][lab]:.6g}" for a, lab in labels) + " |"
    return "\n".join([head, "|---|" + "---|" * len(labels), row])


def nested_subsets(n: int, sizes: Sequence[int], seed: int) -> dict[int, np.ndarray]:
    """Prefixes of one seeded permutation, so smaller subsets sit inside larger ones."""
    bad = [s for s in sizes if s < 0 or s > n]
    if bad:
        raise ValueError(f"subset size(s) {bad} exceed fine-tune dataset size {n}")
    perm = np.random.default_rng([seed, 0x5B5E7]).permutation(n)
    return {int(s): np.sort(perm[:s]) for s in sizes}


def finetune_curve(pretrained: tuple[VOTConfig, ParameterStore], spec: ExperimentSpec,
                   finetune_data: ArrayDataset, eval_data: ArrayDataset,
                   subset_sizes: Sequence[int]) -> list[tuple[int, float]]:
    """``(size, PE)`` points; size 0 is the pretrained model's zero-shot PE.

    Each size fine-tunes a fresh copy of the pretrained parameters (new Adam
    state) for ``spec.finetune_epochs`` epochs on a nested seeded subset.
    """
    cfg, params = pretrained
    sizes = sorted(set(int(s) for s in subset_sizes) | {0})
    subsets = nested_subsets(len(finetune_data), sizes, spec.seed)
    points = []
    for s in sizes:
        if s == 0:
            points.append((0, evaluate_params(cfg, params, eval_data)))
            continue
        fspec = dataclasses.replace(spec, model=cfg.variant, epochs=spec.finetune_epochs,
                                    batch_size=min(spec.batch_size, s), config=config_overrides(cfg))
        res = train(fspec, finetune_data.subset(subsets[s]), params=params.astype(params["head.weight"].dtype))
        points.append((s, evaluate_params(res.cfg, res.params, eval_data)))
    return points


def config_overrides(cfg: VOTConfig) -> dict:
    """Fields of ``cfg`` that differ from the desk default of its variant."""
    base = desk_config(cfg.variant)
    return {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)
            if getattr(cfg, f.name) != getattr(base, f.name)}


def pretrain_finetune(spec: ExperimentSpec, source: ArrayDataset, target_train: ArrayDataset,
                      target_test: ArrayDataset, subset_sizes: Sequence[int]) -> dict:
    """Pretrain ``spec.epochs`` on ``source`` then run :func:`finetune_curve`."""
    t0 = time.perf_counter()
    res = train(spec, source)
    points = finetune_curve((res.cfg, res.params), spec, target_train, target_test, subset_sizes)
    return {"points": points, "pretrain_curve": res.epoch_loss, "wall_clock": time.perf_counter() - t0}
