"""Experiment records: CSV rows plus a JSON sidecar with the config and per-record audits."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from dataclasses import dataclass, field
from typing import Optional

COLUMNS = ("process", "param", "trial", "n_points", "w2", "w2_qbound", "smooth_bound", "t_star", "ms")


@dataclass
class ExperimentRecord:
    process: str
    param: float
    trial: int
    n_points: int
    w2: Optional[float] = None
    w2_qbound: Optional[float] = None
    smooth_bound: Optional[float] = None
    t_star: Optional[float] = None
    ms: Optional[float] = None
    audit: dict = field(default_factory=dict)

    @property
    def key(self):
        return (self.param, self.trial)

    def row(self) -> list[str]:
        return [self.process, _fmt(self.param), str(self.trial), str(self.n_points),
                _fmt(self.w2), _fmt(self.w2_qbound), _fmt(self.smooth_bound), _fmt(self.t_star),
                "" if self.ms is None else f"{self.ms:.1f}"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int) or (isinstance(v, float) and v.is_integer() and abs(v) < 1e15):
        return str(int(v))
    return repr(float(v))


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _parse(v: str, cast=float):
    return None if v == "" else cast(v)


def write_records(records, path, config: Optional[dict] = None) -> None:
    """Rows sorted by (param, trial); audits and config go to the sibling ``.json`` file."""
    recs = sorted(records, key=lambda r: r.key)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in recs:
            w.writerow(r.row())
    side = {
        "config": config,
        "audit": [{"param": r.param, "trial": r.trial, **r.audit} for r in recs],
    }
    with open(sidecar_path(path), "w", encoding="utf-8") as fh:
        json.dump(side, fh, indent=1, sort_keys=True, default=str)
        fh.write("\n")


def read_records(path) -> list[ExperimentRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            param = float(row["param"])
            out.append(ExperimentRecord(
                row["process"], int(param) if param.is_integer() else param, int(row["trial"]),
                int(row["n_points"]), _parse(row["w2"]), _parse(row["w2_qbound"]),
                _parse(row["smooth_bound"]), _parse(row["t_star"]), _parse(row["ms"])))
    return out


def mean_w2(records) -> dict:
    """Per-parameter (mean W2, trials used, trials excluded for undefined W2)."""
    groups: dict = {}
    for r in records:
        groups.setdefault(r.param, []).append(r.w2)
    out = {}
    for p in sorted(groups):
        vals = [v for v in groups[p] if v is not None and math.isfinite(v)]
        mean = math.fsum(vals) / len(vals) if vals else float("nan")
        out[p] = (mean, len(vals), len(groups[p]) - len(vals))
    return out
