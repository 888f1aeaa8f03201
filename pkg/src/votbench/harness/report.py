"""Metrics reports: CSV rows plus PE/GP tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..storage.clipfile import atomic_write

CSV_FIELDS = ("model", "train_set", "eval_set", "pe", "gp", "seed", "ckpt_hash")
SPLIT_ASSUMPTION = "zero-shot PEs use the same test split as the scratch baseline on each eval set"


def fmt(x) -> str:
    """Six significant digits; blank for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.6g}"


def _parse(text: str):
    return float(text) if text != "" else None


@dataclass
class MetricRow:
    model: str
    train_set: str
    eval_set: str
    pe: float
    gp: float | None = None
    seed: int | None = None
    ckpt_hash: str = ""

    def cells(self) -> list[str]:
        return [self.model, self.train_set, self.eval_set, fmt(self.pe), fmt(self.gp),
                "" if self.seed is None else str(self.seed), self.ckpt_hash]


@dataclass
class MetricsReport:
    rows: list = field(default_factory=list)
    loss_curves: dict = field(default_factory=dict)
    wall_clock: dict = field(default_factory=dict)
    config_hashes: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=lambda: {"split_assumption": SPLIT_ASSUMPTION})

    def add(self, row: MetricRow) -> None:
        self.rows.append(row)

    def lookup(self, model: str, train_set: str, eval_set: str) -> MetricRow:
        for r in self.rows:
            if (r.model, r.train_set, r.eval_set) == (model, train_set, eval_set):
                return r
        raise KeyError((model, train_set, eval_set))

    def merge(self, other: "MetricsReport") -> "MetricsReport":
        """Union keyed by (model, train, eval, seed); later rows win."""
        keyed = {(r.model, r.train_set, r.eval_set, r.seed): r for r in self.rows + other.rows}
        out = MetricsReport(rows=list(keyed.values()))
        for name in ("loss_curves", "wall_clock", "config_hashes", "metadata"):
            getattr(out, name).update(getattr(self, name))
            getattr(out, name).update(getattr(other, name))
        return out

    # -- CSV -----------------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow(r.cells())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MetricsReport":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if tuple(header or ()) != CSV_FIELDS:
            raise ValueError(f"report header {header} != {list(CSV_FIELDS)}")
        rows = []
        for rec in reader:
            model, tr, ev, pe, gp, seed, h = rec
            rows.append(MetricRow(model, tr, ev, float(pe), _parse(gp), int(seed) if seed else None, h))
        return cls(rows=rows)

    # -- tables --------------------------------------------------------------
    def table(self, fmt_name: str = "md") -> str:
        """One grid per (model, train set): eval sets as columns, ``PE/GP`` cells."""
        out = []
        groups: dict = {}
        for r in self.rows:
            groups.setdefault((r.model, r.train_set), []).append(r)
        for (model, tr), rows in groups.items():
            evals = list(dict.fromkeys(r.eval_set for r in rows))
            cell = {}
            for r in rows:
                gp = "--" if r.gp is None or r.eval_set == tr else fmt(r.gp)
                cell[r.eval_set] = f"{fmt(r.pe)}/{gp}"
            title = f"{model} trained on {tr}"
            if fmt_name == "md":
                out.append(f"**{title}** (PE/GP)\n")
                out.append("| " + " | ".join(evals) + " |")
                out.append("|" + "---|" * len(evals))
                out.append("| " + " | ".join(cell[e] for e in evals) + " |")
            else:
                width = max(len(s) for s in evals + list(cell.values())) + 2
                out.append(f"{title} (PE/GP)")
                out.append("".join(e.rjust(width) for e in evals))
                out.append("".join(cell[e].rjust(width) for e in evals))
            out.append("")
        return "\n".join(out)

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write(out_dir / "report.csv", self.to_csv().encode())
        atomic_write(out_dir / "report.md", self.table("md").encode())
        extra = {"loss_curves": self.loss_curves, "wall_clock": self.wall_clock,
                 "config_hashes": self.config_hashes, "metadata": self.metadata}
        atomic_write(out_dir / "report.json", (json.dumps(extra, indent=1, sort_keys=True) + "\n").encode())
        return out_dir / "report.csv"

    @classmethod
    def read(cls, path) -> "MetricsReport":
        path = Path(path)
        if path.is_dir():
            path = path / "report.csv"
        rep = cls.from_csv(path.read_text())
        side = path.with_name("report.json")
        if side.exists():
            extra = json.loads(side.read_text())
            for k, v in extra.items():
                setattr(rep, k, v)
        return rep
