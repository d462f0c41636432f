"""Experiment grid execution and the verification suites behind the CLI."""

from __future__ import annotations

import itertools
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .datagen import GroundTruth, SyntheticSpec, generate_synthetic, load_csv
from .errors import ClusteringError
from .evaluation import (ExperimentRecord, normalized_objective, precision, purity, summarize,
                         write_jsonl, write_records_csv, write_summary_csv)
from .framework import (DEFAULT_SAMPLE_RATIO, DEFAULT_ZPRIME_MULT, FrameworkConfig, LemmaCheck,
                        SignificanceParams, Variant, bounds_for_variant, empirical_lemma_check,
                        multi_run_select)
from .metric import EUCLIDEAN, Dataset
from .objectives import Objective, assign_with_outliers, brute_force_optimal, trimmed_cost
from .solvers import charikar_outliers, gonzalez, kmeans_minus_minus, kmeanspp_lloyd

log = logging.getLogger(__name__)

FRAMEWORK_ALGOS = tuple(v.value for v in Variant)
BASELINE_ALGOS = ("gonzalez", "charikar", "kmeans--", "kmeanspp")
ALGORITHMS = FRAMEWORK_ALGOS + BASELINE_ALGOS

_BASELINE_OBJECTIVE = {"gonzalez": Objective.KCENTER, "charikar": Objective.KCENTER,
                       "kmeans--": Objective.KMEANS, "kmeanspp": Objective.KMEANS}


def thread_count() -> int:
    """Worker count from ``OCK_THREADS`` (default 1)."""
    raw = os.environ.get("OCK_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ClusteringError("BAD_PARAMS", f"OCK_THREADS={raw!r} is not an integer") from None


def trial_seed(master: int, cell: int, trial: int) -> int:
    return int(np.random.SeedSequence([master, cell, trial]).generate_state(1)[0])


@dataclass
class RunPlan:
    """A grid of cells, each run for ``trials`` repetitions.

    ``taus`` drives ``k'`` for the extra-center variants, ``zprime_mults``
    drives ``z'`` for the exactly-``k`` ones; baselines ignore both.
    ``z_fracs`` of ``None`` means the ground-truth outlier count.
    """

    algorithms: Sequence[str]
    ks: Sequence[int]
    z_fracs: Sequence[Optional[float]] = (None,)
    sample_ratios: Sequence[float] = (DEFAULT_SAMPLE_RATIO,)
    taus: Sequence[float] = (2.0,)
    zprime_mults: Sequence[float] = (DEFAULT_ZPRIME_MULT,)
    trials: int = 1
    inner_runs: Optional[int] = None
    seed: int = 0
    out: Optional[Path] = None

    def __post_init__(self):
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ClusteringError("BAD_PARAMS", f"unknown algorithm(s) {bad}")
        for name in ("algorithms", "ks", "z_fracs", "sample_ratios", "taus", "zprime_mults"):
            if len(getattr(self, name)) == 0:
                raise ClusteringError("BAD_PARAMS", f"empty grid axis {name}")
        if self.trials < 1:
            raise ClusteringError("BAD_PARAMS", "trials must be >= 1")

    def cells(self) -> list[dict]:
        out = []
        for algo, k, zf in itertools.product(self.algorithms, self.ks, self.z_fracs):
            if algo in BASELINE_ALGOS:
                out.append(dict(algorithm=algo, k=k, z_frac=zf, sample_ratio=None, knob=None))
                continue
            knobs = self.taus if Variant(algo).extra_centers else self.zprime_mults
            for ratio, knob in itertools.product(self.sample_ratios, knobs):
                out.append(dict(algorithm=algo, k=k, z_frac=zf, sample_ratio=ratio, knob=knob))
        return out


def _objective(algo: str) -> Objective:
    return _BASELINE_OBJECTIVE[algo] if algo in BASELINE_ALGOS else Variant(algo).objective


def _run_baseline(algo: str, P: Dataset, k: int, z: int, seed: int):
    if algo == "gonzalez":
        H = gonzalez(P, k, EUCLIDEAN, seed)
    elif algo == "charikar":
        H = charikar_outliers(P, k, z, EUCLIDEAN)
    elif algo == "kmeans--":
        H = kmeans_minus_minus(P, k, z, EUCLIDEAN, seed)
    else:
        H = kmeanspp_lloyd(P, k, EUCLIDEAN, seed)
    return H


def run_trial(P: Dataset, truth: Optional[GroundTruth], dataset: str, plan: RunPlan, cell_index: int,
              cell: dict, trial: int) -> ExperimentRecord:
    algo, k = cell["algorithm"], cell["k"]
    zf = cell["z_frac"]
    z = truth.z if zf is None and truth is not None else int(round((zf or 0.0) * P.n))
    seed = trial_seed(plan.seed, cell_index, trial)
    objective = _objective(algo)
    rec = ExperimentRecord(algorithm=algo, dataset=dataset, k=k, z=z, z_frac=z / P.n, seed=seed,
                           objective=math.nan, objective_kind=objective.value,
                           sample_ratio=cell["sample_ratio"], tau_or_zprime=cell["knob"],
                           cell=cell_index, trial=trial)
    try:
        if algo in BASELINE_ALGOS:
            t0 = time.perf_counter()
            H = _run_baseline(algo, P, k, z, seed)
            t1 = time.perf_counter()
            result = assign_with_outliers(P, H, z, EUCLIDEAN, objective)
            result.timings = {"sample": 0.0, "solve": t1 - t0, "assign": time.perf_counter() - t1}
        else:
            variant = Variant(algo)
            inner = plan.inner_runs or (1 if variant.extra_centers else 10)
            kw = dict(tau=cell["knob"]) if variant.extra_centers else dict(zprime_mult=cell["knob"])
            config = FrameworkConfig.practical(P.n, k, z, sample_ratio=cell["sample_ratio"],
                                               trials=inner, seed=seed, **kw)
            rec.config = config.to_json()
            result = multi_run_select(P, k, z, config, variant, EUCLIDEAN)
            if truth is not None and truth.eps2_actual > 0:
                params = SignificanceParams(truth.eps1_actual, min(truth.eps2_actual, 0.999))
                rec.bounds = bounds_for_variant(variant, params).to_json()
        rec.objective = result.cost.value
        rec.t_sample_s = result.timings["sample"]
        rec.t_solve_s = result.timings["solve"]
        rec.t_assign_s = result.timings["assign"]
        if truth is not None:
            if truth.z > 0:
                rec.precision = precision(result.outliers, truth.outliers)
            rec.purity = purity(result.assignment, truth.labels, truth.z)
    except ClusteringError as e:
        rec.error = str(e)
        log.warning("cell %d trial %d failed: %s", cell_index, trial, rec.error)
    return rec


def execute(plan: RunPlan, P: Dataset, truth: Optional[GroundTruth], dataset: str,
            workers: Optional[int] = None) -> list[ExperimentRecord]:
    """Run every (cell, trial); records come back ordered by (cell, trial)."""
    tasks = [(ci, cell, t) for ci, cell in enumerate(plan.cells()) for t in range(plan.trials)]
    workers = thread_count() if workers is None else workers

    def go(task):
        ci, cell, t = task
        return run_trial(P, truth, dataset, plan, ci, cell, t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(go, tasks))
    else:
        records = [go(task) for task in tasks]
    records.sort(key=lambda r: (r.cell, r.trial))
    normalized_objective(records, group_key=("dataset", "k", "z", "objective_kind"))
    return records


def write_outputs(out: Path, records: list[ExperimentRecord]) -> list[dict]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rows = summarize(records)
    write_jsonl(out / "records.jsonl", records)
    write_records_csv(out / "records.csv", records)
    write_summary_csv(out / "summary.csv", rows)
    return rows


def failed_cells(rows: Sequence[dict]) -> list[int]:
    return [r["cell"] for r in rows if r["failed"] == r["trials"]]


def load_dataset(path, has_labels: Optional[bool] = None) -> tuple[Dataset, Optional[GroundTruth]]:
    """CSV loader that detects a label column from the sidecar or a ``label`` header."""
    path = Path(path)
    if has_labels is None:
        from .datagen import truth_path
        has_labels = truth_path(path).exists()
        if not has_labels:
            try:
                with open(path) as fh:
                    has_labels = fh.readline().strip().split(",")[-1].strip() == "label"
            except OSError as e:
                raise ClusteringError("IO_ERROR", f"{path}: {e}") from e
    return load_csv(path, has_labels)


# --------------------------------------------------------- verification suites

@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def _ref_trimmed(points: list, centers: list, z: int, objective: Objective) -> float:
    """Plain-Python trimmed cost, sharing no code with the library."""
    d = sorted(min(math.dist(p, c) for c in centers) for p in points)
    kept = d[: len(d) - z]
    if objective is Objective.KCENTER:
        return kept[-1]
    if objective is Objective.KMEDIAN:
        return math.fsum(kept) / len(kept)
    return math.fsum(v * v for v in kept) / len(kept)


def _random_instance(rng, n_max: int):
    n = int(rng.integers(2, n_max + 1))
    d = int(rng.integers(1, 4))
    # a coarse grid makes distance ties common
    P = Dataset(rng.integers(0, 6, size=(n, d)).astype(float))
    return P


def suite_oracle(instances: int = 200, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(instances):
        P = _random_instance(rng, 10)
        k = int(rng.integers(1, min(3, P.n) + 1))
        z = int(rng.integers(0, min(3, P.n - 1) + 1))
        rows = rng.choice(P.n, size=k, replace=False)
        H = P.centers_at(rows)
        for obj in Objective:
            got = trimmed_cost(P, H, z, obj).value
            want = _ref_trimmed(P.points.tolist(), H.coords.tolist(), z, obj)
            bad += got != want
    return SuiteResult("oracle", bad == 0, f"{bad} mismatches over {instances} instances x 3 objectives")


def _approx_suite(name, factor, instances, seed, solve):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(instances):
        P = _random_instance(rng, 16)
        k = int(rng.integers(1, min(3, P.n) + 1))
        z = int(rng.integers(0, min(3, P.n - k) + 1))
        _, opt = brute_force_optimal(P, k, z, Objective.KCENTER)
        H = solve(P, k, z, int(rng.integers(1 << 30)))
        got = trimmed_cost(P, H, z, Objective.KCENTER).value
        bad += got > factor * opt.value * (1 + 1e-12)
    return SuiteResult(name, bad == 0, f"{bad} violations of {factor}x over {instances} instances")


def suite_gonzalez(instances: int = 200, seed: int = 1) -> SuiteResult:
    # vanilla k-center: z = 0 and the radius is the plain covering radius
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(instances):
        P = _random_instance(rng, 16)
        k = int(rng.integers(1, min(3, P.n) + 1))
        _, opt = brute_force_optimal(P, k, 0, Objective.KCENTER)
        H = gonzalez(P, k, EUCLIDEAN, int(rng.integers(1 << 30)))
        bad += trimmed_cost(P, H, 0).value > 2 * opt.value * (1 + 1e-12)
    return SuiteResult("gonzalez", bad == 0, f"{bad} violations of 2x over {instances} instances")


def suite_charikar(instances: int = 200, seed: int = 2) -> SuiteResult:
    return _approx_suite("charikar", 3, instances, seed,
                         lambda P, k, z, s: charikar_outliers(P, k, z, EUCLIDEAN))


def suite_lemmas(P: Dataset, truth: GroundTruth, k: int, eta: float = 0.1, delta: float = 0.5,
                 repetitions: int = 1000, seed: int = 0) -> list[SuiteResult]:
    params = SignificanceParams(truth.eps1_actual, truth.eps2_actual, eta=eta, delta=delta)
    out = []
    for i, which in enumerate(LemmaCheck):
        rate, bound = empirical_lemma_check(P, params, which, repetitions, seed=seed + i, k=k)
        limit = bound + 3 * math.sqrt(bound / repetitions)
        out.append(SuiteResult(f"lemma {which.value}", rate <= limit, f"failure rate {rate:.4f} <= {limit:.4f}"))
    return out


def default_lemma_instance(seed: int = 0) -> tuple[Dataset, GroundTruth, int]:
    spec = SyntheticSpec.from_significance(n=20000, d=10, k=5, z_frac=0.01, eps_ratio=2.0, seed=seed)
    P, truth = generate_synthetic(spec)
    return P, truth, spec.k
