"""Quality metrics, phase timing and experiment records."""

from __future__ import annotations

import csv
import json
import time
import warnings
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ClusteringError, NormalizationWarning
from .metric import OUTLIER

CSV_COLUMNS = ("algorithm", "dataset", "k", "z_frac", "sample_ratio", "tau_or_zprime", "seed",
               "objective", "normalized", "precision", "purity", "t_sample_s", "t_solve_s", "t_assign_s")


def precision(out, out_truth) -> float:
    """Fraction of the ground-truth outliers among the flagged ones."""
    truth = set(np.asarray(out_truth).ravel().tolist())
    if not truth:
        raise ClusteringError("UNDEFINED_PRECISION", "no ground-truth outliers")
    found = set(np.asarray(out).ravel().tolist())
    return len(found & truth) / len(truth)


def purity(assignment, labels, z: int) -> float:
    """``sum_j max_l |C'_j & C_l| / (n - z)`` over obtained clusters ``C'_j``.

    Points flagged as outliers form no cluster and contribute nothing; ground
    truth outliers never count as overlap.
    """
    a = np.asarray(assignment).ravel()
    g = np.asarray(labels).ravel()
    if a.shape != g.shape:
        raise ClusteringError("SHAPE_MISMATCH", f"{a.shape[0]} assignments for {g.shape[0]} labels")
    n = a.shape[0]
    if not 0 <= z < n:
        raise ClusteringError("BAD_Z", f"z={z} with n={n}")
    keep = (a != OUTLIER) & (g != OUTLIER)
    if not keep.any():
        return 0.0
    _, ai = np.unique(a[keep], return_inverse=True)
    _, gi = np.unique(g[keep], return_inverse=True)
    table = np.zeros((ai.max() + 1, gi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, gi), 1)
    return float(table.max(axis=1).sum()) / (n - z)


class PhaseTimer:
    """Accumulates monotonic wall-clock time per named phase."""

    def __init__(self):
        self.phases: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - t0

    @property
    def total(self) -> float:
        return sum(self.phases.values())


def time_phases(fn, *args, **kwargs):
    """Run a pipeline and return ``(result, timings)`` with a ``total`` entry.

    The per-phase split comes from the pipeline's own ``timings``; ``total`` is
    measured around the whole call.
    """
    t0 = time.perf_counter()
    result = fn(*args, **kwargs)
    total = time.perf_counter() - t0
    timings = dict(getattr(result, "timings", {}) or {})
    timings["total"] = total
    return result, timings


@dataclass
class ExperimentRecord:
    algorithm: str
    dataset: str
    k: int
    z: int
    z_frac: float
    seed: int
    objective: float
    objective_kind: str = "kmeans"
    sample_ratio: Optional[float] = None
    tau_or_zprime: Optional[float] = None
    normalized: Optional[float] = None
    precision: Optional[float] = None
    purity: Optional[float] = None
    t_sample_s: float = 0.0
    t_solve_s: float = 0.0
    t_assign_s: float = 0.0
    cell: int = 0
    trial: int = 0
    config: dict = field(default_factory=dict)
    bounds: Optional[dict] = None
    error: Optional[str] = None

    def __post_init__(self):
        for name in ("precision", "purity"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= 1:
                raise ClusteringError("BAD_RECORD", f"{name}={v} outside [0, 1]")
        if min(self.t_sample_s, self.t_solve_s, self.t_assign_s) < 0:
            raise ClusteringError("BAD_RECORD", "negative time")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ExperimentRecord":
        return cls(**d)


def normalized_objective(records: Sequence[ExperimentRecord],
                         group_key=("dataset", "k", "z")) -> list[ExperimentRecord]:
    """Divide every objective by the minimum of its group; the minimum maps to 1.0.

    An all-zero group maps to 1.0. A group mixing zero and positive values
    keeps raw values and emits :class:`NormalizationWarning`.
    Records with an ``error`` are skipped.
    """
    groups = defaultdict(list)
    for r in records:
        if r.error is None:
            groups[tuple(getattr(r, a) for a in group_key)].append(r)
    for key, rs in groups.items():
        lo = min(r.objective for r in rs)
        if lo > 0:
            for r in rs:
                r.normalized = r.objective / lo
        elif all(r.objective == 0 for r in rs):
            for r in rs:
                r.normalized = 1.0
        else:
            warnings.warn(f"NORMALIZATION_DEGENERATE: group {key} mixes zero and positive objectives",
                          NormalizationWarning, stacklevel=2)
            for r in rs:
                r.normalized = r.objective
    return list(records)


def write_jsonl(path, records: Iterable[ExperimentRecord]) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_jsonl(path) -> list[ExperimentRecord]:
    with open(path) as fh:
        return [ExperimentRecord.from_json(json.loads(line)) for line in fh if line.strip()]


def write_records_csv(path, records: Iterable[ExperimentRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            if r.error is None:
                w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


SUMMARY_METRICS = ("objective", "normalized", "precision", "purity", "t_sample_s", "t_solve_s", "t_assign_s")


def summarize(records: Sequence[ExperimentRecord]) -> list[dict]:
    """Per-cell mean and (population) standard deviation of every metric."""
    cells = defaultdict(list)
    for r in records:
        cells[r.cell].append(r)
    rows = []
    for cell in sorted(cells):
        rs = cells[cell]
        ok = [r for r in rs if r.error is None]
        head = rs[0]
        row = {"cell": cell, "algorithm": head.algorithm, "dataset": head.dataset, "k": head.k,
               "z_frac": head.z_frac, "sample_ratio": head.sample_ratio,
               "tau_or_zprime": head.tau_or_zprime, "trials": len(rs), "failed": len(rs) - len(ok)}
        for m in SUMMARY_METRICS:
            vals = [getattr(r, m) for r in ok if getattr(r, m) is not None]
            row[f"{m}_mean"] = float(np.mean(vals)) if vals else None
            row[f"{m}_std"] = float(np.std(vals)) if vals else None
        rows.append(row)
    return rows


def write_summary_csv(path, rows: Sequence[dict]) -> None:
    if not rows:
        open(path, "w").close()
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v
