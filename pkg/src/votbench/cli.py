"""Command-line entry point: ``votbench <command> ...``."""

from __future__ import annotations

import argparse
import glob
import json
import logging
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .storage.clipfile import FormatError, atomic_write

log = logging.getLogger("votbench")


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _res(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None
    return h, w


def _json_obj(text: str) -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as err:
        raise argparse.ArgumentTypeError(f"invalid JSON: {err}") from None
    if not isinstance(obj, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return obj


def write_manifest(path, command: str, args: argparse.Namespace, **extra) -> None:
    """Run manifest: arguments, seeds, versions and a timestamp."""
    data = {
        "command": command,
        "args": {k: v for k, v in vars(args).items() if k != "func"},
        "versions": {"votbench": __version__, "numpy": np.__version__, "python": platform.python_version()},
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **extra,
    }
    atomic_write(Path(path), (json.dumps(data, indent=2, sort_keys=True, default=str) + "\n").encode())


# -- commands ------------------------------------------------------------------

def cmd_gen(args) -> int:
    from .sim.generate import generate_subdataset

    for name in args.catalog.split(","):
        root = generate_subdataset(name.strip(), args.train, args.test, args.seed, args.out,
                                   force=args.force, bottom_res=args.bottom_res, top_res=args.top_res)
        print(f"wrote {root}")
    return 0


def cmd_track(args) -> int:
    from .storage.clipfile import encode_trajectory, read_clip, write_trajectory
    from .tracker import ColorKey, parse_color, track_clip

    video = read_clip(args.clip)
    traj = track_clip(video, ColorKey(parse_color(args.color), args.tol), name=str(args.clip))
    if args.out is None:
        sys.stdout.write(encode_trajectory(traj).decode())
        return 0
    write_trajectory(traj, args.out)
    write_manifest(f"{args.out}.manifest.json", "track", args)
    print(f"wrote {args.out} ({len(traj)} frames)")
    return 0


def cmd_train(args) -> int:
    from .harness.train import ExperimentSpec, load_arrays, train

    spec = ExperimentSpec(model=args.model, train_set=str(args.dataset), epochs=args.epochs,
                          batch_size=args.batch, lr=args.lr, seed=args.seed,
                          checkpoint_every=args.checkpoint_every, config=args.config)
    cfg = spec.model_config()
    data = load_arrays(args.dataset, "train", cfg)
    res = train(spec, data, out=args.out)
    write_manifest(f"{args.out}.manifest.json", "train", args, spec=spec.to_dict(), config=res.cfg.to_dict(),
                   config_hash=res.cfg.hash(), epochs_run=res.epochs_run, final_loss=res.epoch_loss[-1:],
                   wall_clock=res.wall_clock, drop_last=True)
    print(f"wrote {args.out} after {res.epochs_run} epoch(s), final loss {res.epoch_loss[-1]:.6g}"
          if res.epoch_loss else f"wrote {args.out} (no epochs)")
    return 0


def cmd_eval(args) -> int:
    from .harness.train import evaluate_params, load_arrays
    from .storage.checkpoint import load_checkpoint

    cfg, params, _ = load_checkpoint(args.ckpt)
    pe = evaluate_params(cfg, params, load_arrays(args.dataset, args.split, cfg))
    print(f"PE {pe:.6g}")
    if args.out:
        atomic_write(Path(args.out), (json.dumps({"pe": pe, "ckpt": str(args.ckpt)}) + "\n").encode())
        write_manifest(f"{args.out}.manifest.json", "eval", args, config_hash=cfg.hash())
    return 0


def cmd_zeroshot(args) -> int:
    from .harness.protocols import zero_shot_matrix
    from .harness.train import load_arrays
    from .storage.checkpoint import load_checkpoint
    from .storage.dataset import read_manifest, resolve_subdataset

    paths = sorted(glob.glob(args.ckpts))
    if not paths:
        raise FileNotFoundError(f"no checkpoints match {args.ckpts!r}")
    ckpts, cfgs = {}, {}
    for p in paths:
        cfg, _, meta = load_checkpoint(p)
        name = Path(meta.get("train_set", p)).name
        ckpts[name] = p
        cfgs[name] = cfg
    cfg = next(iter(cfgs.values()))
    if any(c.hash() != cfg.hash() for c in cfgs.values()):
        log.warning("checkpoints use different configs; each is evaluated with its own")
    evals = {}
    for d in args.datasets.split(","):
        sub = resolve_subdataset(d.strip())
        evals[read_manifest(sub)["subdataset"]] = load_arrays(sub, "test", cfg)
    rep = zero_shot_matrix(ckpts, evals, model=cfg.variant, seed=None)
    out = rep.write(args.out)
    write_manifest(Path(args.out) / "manifest.json", "zeroshot", args, checkpoints=ckpts)
    print(rep.table("text"))
    print(f"wrote {out}")
    return 0


def cmd_finetune(args) -> int:
    from .harness.protocols import finetune_curve
    from .harness.train import ExperimentSpec, load_arrays
    from .storage.checkpoint import load_checkpoint

    cfg, params, _ = load_checkpoint(args.ckpt)
    spec = ExperimentSpec(model=cfg.variant, lr=args.lr, seed=args.seed, batch_size=args.batch,
                          finetune_epochs=args.epochs, subset_sizes=tuple(args.sizes))
    points = finetune_curve((cfg, params), spec, load_arrays(args.dataset, "train", cfg),
                            load_arrays(args.dataset, "test", cfg), args.sizes)
    for s, pe in points:
        print(f"{s}\t{pe:.6g}")
    if args.out:
        atomic_write(Path(args.out), (json.dumps({"points": points}) + "\n").encode())
        write_manifest(f"{args.out}.manifest.json", "finetune", args, config_hash=cfg.hash())
    return 0


def cmd_report(args) -> int:
    from .harness.report import MetricsReport

    rep = MetricsReport.read(args.input)
    print(rep.to_csv() if args.format == "csv" else rep.table(args.format), end="")
    return 0


def cmd_validate(args) -> int:
    from .storage.dataset import validate_dataset

    rep = validate_dataset(args.root)
    print(rep.format())
    return 0 if rep.clean else 1


def cmd_gradcheck(args) -> int:
    from .harness.checks import model_directional_check, model_gradcheck, tiny_config
    from .model.config import desk_config

    cfg = tiny_config(args.model) if args.tiny else desk_config(args.model)
    if args.per_tensor:
        errors = model_gradcheck(cfg, seed=args.seed, per_tensor=args.per_tensor)
        what = "tensors"
    else:
        errors = model_directional_check(cfg, seed=args.seed)
        what = "module groups"
    worst = max(errors, key=errors.get)
    print(f"{len(errors)} {what} checked, max relative error {errors[worst]:.3g} ({worst})")
    return 0 if errors[worst] < args.tol else 1


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="votbench", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate synthetic sub-datasets")
    g.add_argument("--catalog", required=True, help="catalog entry name(s), comma-separated")
    g.add_argument("--train", type=int, required=True)
    g.add_argument("--test", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--force", action="store_true", help="overwrite a non-empty sub-dataset directory")
    g.add_argument("--bottom-res", type=_res, default=(48, 64))
    g.add_argument("--top-res", type=_res, default=(96, 96))
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("track", help="colour-key track a bottom-view clip")
    t.add_argument("--clip", required=True)
    t.add_argument("--color", required=True, help="R,G,B")
    t.add_argument("--tol", "--tolerance", dest="tol", type=int, default=40,
                   help="max per-channel deviation from the key colour")
    t.add_argument("--out", default=None, help="CSV path; prints to stdout when omitted")
    t.set_defaults(func=cmd_track)

    tr = sub.add_parser("train", help="train a model from scratch")
    tr.add_argument("--dataset", required=True)
    tr.add_argument("--model", choices=("maxvit", "maxvit2", "swint"), default="maxvit")
    tr.add_argument("--epochs", type=int, default=100)
    tr.add_argument("--batch", type=int, default=4)
    tr.add_argument("--lr", type=float, default=None, help="default 1e-4 (MaxViT family) or 1e-5 (Swin-T)")
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--checkpoint-every", type=int, default=0)
    tr.add_argument("--config", type=_json_obj, default=None, help="JSON object of model config overrides")
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="PE of a checkpoint on a dataset split")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--dataset", required=True)
    e.add_argument("--split", choices=("train", "test"), default="test")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_eval)

    z = sub.add_parser("zeroshot", help="PE/GP matrix over checkpoints and eval sets")
    z.add_argument("--ckpts", required=True, help="glob matching one checkpoint per train set")
    z.add_argument("--datasets", required=True, help="comma-separated sub-dataset directories")
    z.add_argument("--out", required=True)
    z.set_defaults(func=cmd_zeroshot)

    f = sub.add_parser("finetune", help="fine-tuning curve over nested subset sizes")
    f.add_argument("--ckpt", required=True)
    f.add_argument("--dataset", required=True)
    f.add_argument("--sizes", type=_ints, default=[8, 32, 128])
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--epochs", type=int, default=10)
    f.add_argument("--batch", type=int, default=4)
    f.add_argument("--lr", type=float, default=None)
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_finetune)

    r = sub.add_parser("report", help="render a report directory")
    r.add_argument("--in", dest="input", required=True)
    r.add_argument("--format", choices=("csv", "md", "text"), default="md")
    r.set_defaults(func=cmd_report)

    v = sub.add_parser("validate", help="check a dataset directory")
    v.add_argument("root")
    v.set_defaults(func=cmd_validate)

    c = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    c.add_argument("--model", choices=("maxvit", "maxvit2", "swint"), default="maxvit")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--per-tensor", type=int, default=0,
                   help="sample this many elements per tensor; 0 checks one random direction per module group")
    c.add_argument("--tol", type=float, default=1e-4)
    c.add_argument("--tiny", action="store_true", help="use the tiny test config instead of the desk config")
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, FileExistsError, FormatError, ValueError, KeyError, RuntimeError) as err:
        print(f"votbench {args.command}: error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
