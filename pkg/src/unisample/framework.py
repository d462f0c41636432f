"""Uniform-sampling framework for k-center/median/means with outliers.

Each pipeline draws a uniform sample ``S``, runs a black-box solver on it,
and then assigns the whole dataset in one pass, discarding exactly ``z``
points:

=========  ===============================  ==========================
variant    solver on the sample             centers returned
=========  ===============================  ==========================
``uc1``    Gonzalez, ``k + k'`` centers     ``k + k'``
``uc2``    Charikar, ``z'`` outliers        ``k``
``um1``    k-means++/Lloyd, ``k + k'``      ``k + k'``
``um2``    k-means--, ``z'`` outliers       ``k``
``umed1``  k-median-- with ``z' = 0``       ``k + k'``
``umed2``  k-median--, ``z'`` outliers      ``k``
=========  ===============================  ==========================

The sample-size and budget calculators use natural logarithms.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ClusteringError
from .metric import EUCLIDEAN, OUTLIER, CenterSet, Dataset, DistanceOracle
from .objectives import (ClusteringResult, Objective, assign_with_outliers, check_z,
                         result_from_distances, trimmed_cost, trimmed_value)
from .solvers import SolverKind, SolverSpec, run_solver

DEFAULT_SAMPLE_RATIO = 5e-3
DEFAULT_TRIALS = 10
DEFAULT_ZPRIME_MULT = 2.0

# absorbs floating-point noise before rounding up, e.g. 2 * 0.02 * 200 = 8.000000000000002
_CEIL_SLACK = 1e-9


def _ceil(x: float) -> int:
    return int(math.ceil(x - _CEIL_SLACK * max(1.0, abs(x))))


class Variant(str, Enum):
    UC1 = "uc1"
    UC2 = "uc2"
    UM1 = "um1"
    UM2 = "um2"
    UMED1 = "umed1"
    UMED2 = "umed2"

    @property
    def objective(self) -> Objective:
        return _VARIANTS[self][0]

    @property
    def default_solver(self) -> SolverKind:
        return _VARIANTS[self][1]

    @property
    def extra_centers(self) -> bool:
        """True for the variants that return ``k + k'`` centers."""
        return _VARIANTS[self][2]


_VARIANTS = {
    Variant.UC1: (Objective.KCENTER, SolverKind.GONZALEZ, True),
    Variant.UC2: (Objective.KCENTER, SolverKind.CHARIKAR_OUTLIERS, False),
    Variant.UM1: (Objective.KMEANS, SolverKind.KMEANSPP_LLOYD, True),
    Variant.UM2: (Objective.KMEANS, SolverKind.KMEANS_MM, False),
    Variant.UMED1: (Objective.KMEDIAN, SolverKind.KMEDIAN_MM, True),
    Variant.UMED2: (Objective.KMEDIAN, SolverKind.KMEDIAN_MM, False),
}


@dataclass(frozen=True)
class SignificanceParams:
    """Significance of an instance plus the confidence/accuracy knobs.

    The instance has ``min_j |C*_j| >= (epsilon1 / k) n`` and
    ``z = (epsilon2 / k) n``.
    """

    epsilon1: float
    epsilon2: float
    eta: float = 0.5
    delta: float = 0.5
    xi: float = 0.1

    def __post_init__(self):
        if not 0 < self.epsilon1 <= 1:
            raise ClusteringError("BAD_PARAMS", f"epsilon1={self.epsilon1} not in (0, 1]")
        if not 0 <= self.epsilon2 < 1:
            raise ClusteringError("BAD_PARAMS", f"epsilon2={self.epsilon2} not in [0, 1)")
        for name in ("eta", "delta", "xi"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ClusteringError("BAD_PARAMS", f"{name}={v} not in (0, 1)")

    @property
    def ratio(self) -> float:
        return math.inf if self.epsilon2 == 0 else self.epsilon1 / self.epsilon2


# ------------------------------------------------------ sample-size calculators

def _check_common(k, eps1, eta):
    if k < 1:
        raise ClusteringError("BAD_PARAMS", f"k={k} must be >= 1")
    if not 0 < eps1 <= 1:
        raise ClusteringError("BAD_PARAMS", f"epsilon1={eps1} not in (0, 1]")
    if not 0 < eta < 1:
        raise ClusteringError("BAD_PARAMS", f"eta={eta} not in (0, 1)")


def _check_open(name, v):
    if not 0 < v < 1:
        raise ClusteringError("BAD_PARAMS", f"{name}={v} not in (0, 1)")


def sample_size_kcenter1(k: int, eps1: float, eta: float) -> int:
    """``ceil((k / eps1) ln(k / eta))``: every optimal cluster is hit w.p. >= 1 - eta."""
    _check_common(k, eps1, eta)
    return max(1, _ceil(k / eps1 * math.log(k / eta)))


def _concentration_term(k, eps1, eta, delta):
    return 3 * k / (delta ** 2 * eps1) * math.log(2 * k / eta)


def sample_size_kcenter2(k: int, eps1: float, eta: float, delta: float) -> int:
    """``ceil((3k / (delta^2 eps1)) ln(2k / eta))``: cluster counts within ``1 +- delta``."""
    _check_common(k, eps1, eta)
    _check_open("delta", delta)
    return max(1, _ceil(_concentration_term(k, eps1, eta, delta)))


def sample_size_kmeans(k: int, eps1: float, eta: float, delta: float, xi: float) -> int:
    _check_common(k, eps1, eta)
    _check_open("delta", delta)
    _check_open("xi", xi)
    hoeffding = k / (2 * xi ** 2 * eps1 * (1 - delta)) * math.log(2 * k / eta)
    return max(1, _ceil(max(_concentration_term(k, eps1, eta, delta), hoeffding)))


def budget_kprime(sample_size: int, k: int, eps2: float, eta: float) -> int:
    """``ceil((1 / eta)(eps2 / k)|S|)``; serves as ``k'`` and as ``z'``."""
    if k < 1 or sample_size < 0:
        raise ClusteringError("BAD_PARAMS", "need k >= 1 and |S| >= 0")
    if eps2 < 0 or not 0 < eta <= 1:
        raise ClusteringError("BAD_PARAMS", f"eps2={eps2}, eta={eta}")
    return max(0, _ceil(eps2 / (k * eta) * sample_size))


def implied_eta_kcenter1(sample_size: int, k: int, eps1: float) -> float:
    """Solve ``|S| = (k / eps1) ln(k / eta)`` for ``eta``."""
    return k * math.exp(-sample_size * eps1 / k)


def sample_uniform(P, m: int, seed=None) -> np.ndarray:
    """``m`` indices drawn i.i.d. uniformly from ``[0, n)``, with replacement."""
    n = P if isinstance(P, (int, np.integer)) else len(P)
    if m < 1:
        raise ClusteringError("BAD_SAMPLE_SIZE", f"sample size {m} < 1")
    return np.random.default_rng(seed).integers(0, n, size=int(m))


# ------------------------------------------------------------- configuration

@dataclass(frozen=True)
class FrameworkConfig:
    """Inputs of one framework run.

    ``k_prime`` is the extra-center budget of ``uc1/um1/umed1``; ``z_prime``
    the sample outlier budget of ``uc2/um2/umed2``. ``trials`` is the number
    of candidates :func:`multi_run_select` draws. ``solver`` overrides the
    variant's default black box.
    """

    sample_size: int
    k_prime: int = 0
    z_prime: int = 0
    trials: int = DEFAULT_TRIALS
    objective: Optional[Objective] = None
    solver: Optional[SolverSpec] = None
    seed: int = 0

    def __post_init__(self):
        if self.sample_size < 1:
            raise ClusteringError("BAD_SAMPLE_SIZE", f"sample size {self.sample_size} < 1")
        if self.k_prime < 0 or self.z_prime < 0:
            raise ClusteringError("BAD_PARAMS", "k' and z' must be non-negative")
        if self.trials < 1:
            raise ClusteringError("BAD_PARAMS", "trials must be >= 1")
        if self.objective is not None:
            object.__setattr__(self, "objective", Objective(self.objective))

    def tau(self, k: int) -> float:
        return (k + self.k_prime) / k

    @classmethod
    def practical(cls, n: int, k: int, z: int, sample_ratio: float = DEFAULT_SAMPLE_RATIO,
                  sample_size: Optional[int] = None, tau: Optional[float] = None,
                  k_prime: Optional[int] = None, zprime_mult: float = DEFAULT_ZPRIME_MULT,
                  **kw) -> "FrameworkConfig":
        """Set ``|S|`` and ``k'``/``z'`` directly instead of through (eta, delta, xi).

        ``k' = round(tau k) - k`` and ``z' = ceil(zprime_mult (z / n) |S|)``.
        """
        if sample_size is None:
            sample_size = max(1, _ceil(sample_ratio * n))
        if k_prime is None:
            k_prime = 0 if tau is None else max(0, int(round(tau * k)) - k)
        z_prime = _ceil(zprime_mult * z / n * sample_size)
        return cls(sample_size=int(sample_size), k_prime=int(k_prime), z_prime=int(z_prime), **kw)

    @classmethod
    def theoretical(cls, variant: "Variant", k: int, params: SignificanceParams, **kw) -> "FrameworkConfig":
        """Sample size and budget exactly as the analysis prescribes."""
        variant = Variant(variant)
        p = params
        if variant is Variant.UC1:
            size = sample_size_kcenter1(k, p.epsilon1, p.eta)
        elif variant is Variant.UC2:
            size = sample_size_kcenter2(k, p.epsilon1, p.eta, p.delta)
        else:
            size = sample_size_kmeans(k, p.epsilon1, p.eta, p.delta, p.xi)
        budget = budget_kprime(size, k, p.epsilon2, p.eta)
        if variant.extra_centers:
            return cls(sample_size=size, k_prime=budget, **kw)
        return cls(sample_size=size, z_prime=budget, **kw)

    @classmethod
    def from_json(cls, d: dict) -> "FrameworkConfig":
        d = dict(d)
        if d.get("solver") is not None:
            d["solver"] = SolverSpec.from_json(d["solver"])
        return cls(**d)

    def to_json(self) -> dict:
        d = asdict(self)
        d["objective"] = None if self.objective is None else self.objective.value
        d["solver"] = None if self.solver is None else self.solver.to_json()
        return d


# ------------------------------------------------------------------ pipelines

def _resolve(variant: Variant, config: FrameworkConfig) -> tuple[Objective, SolverSpec]:
    objective = variant.objective
    spec = config.solver or SolverSpec(variant.default_solver)
    return objective, spec


def _seeds(seed):
    sample_seq, solver_seq = np.random.SeedSequence(seed).spawn(2)
    return sample_seq, solver_seq


def sample_and_solve(P: Dataset, k: int, config: FrameworkConfig, variant: Variant,
                     oracle: DistanceOracle = EUCLIDEAN, seed=None):
    """The part of a pipeline that never touches more than ``|S|`` points.

    Returns ``(centers, sample, timings)``.
    """
    variant = Variant(variant)
    if config.sample_size > P.n:
        raise ClusteringError("BAD_SAMPLE_SIZE", f"|S|={config.sample_size} exceeds n={P.n}")
    _, spec = _resolve(variant, config)
    sample_seq, solver_seq = _seeds(config.seed if seed is None else seed)

    t0 = time.perf_counter()
    idx = sample_uniform(P.n, config.sample_size, sample_seq)
    S = P.take(idx)
    t1 = time.perf_counter()
    if variant.extra_centers:
        m = k + config.k_prime
        if m > S.n:
            raise ClusteringError("K_TOO_LARGE", f"k + k' = {m} exceeds |S| = {S.n}")
        H = run_solver(spec, S, m, 0, oracle, solver_seq)
    else:
        if k > S.n:
            raise ClusteringError("K_TOO_LARGE", f"k = {k} exceeds |S| = {S.n}")
        H = run_solver(spec, S, k, config.z_prime, oracle, solver_seq)
    t2 = time.perf_counter()
    return H, S, {"sample": t1 - t0, "solve": t2 - t1}


def _sample_cost(S: Dataset, H: CenterSet, z: int, objective: Objective, oracle: DistanceOracle) -> float:
    z = min(z, S.n - 1)
    return trimmed_cost(S, H, z, objective, oracle).value


def run_variant(P: Dataset, k: int, z: int, config: FrameworkConfig, variant: Variant,
                oracle: DistanceOracle = EUCLIDEAN) -> ClusteringResult:
    """One sample-solve-assign run with seed ``config.seed``."""
    variant = Variant(variant)
    z = check_z(P.n, z)
    objective, _ = _resolve(variant, config)
    H, S, timings = sample_and_solve(P, k, config, variant, oracle)
    t0 = time.perf_counter()
    result = assign_with_outliers(P, H, z, oracle, objective)
    timings["assign"] = time.perf_counter() - t0
    result.timings = timings
    sample_z = 0 if variant.extra_centers else config.z_prime
    result.info = {
        "variant": variant.value,
        "n_centers": len(H),
        "sample_size": S.n,
        "sample_cost": _sample_cost(S, H, sample_z, objective, oracle),
        "sample_ids": S.ids.tolist(),
    }
    return result


def uni_kcenter_1(P: Dataset, k: int, z: int, config: FrameworkConfig,
                  oracle: DistanceOracle = EUCLIDEAN) -> ClusteringResult:
    """Gonzalez with ``k + k'`` centers on the sample; ``info['sample_cost']`` is its covering radius."""
    return run_variant(P, k, z, config, Variant.UC1, oracle)


def uni_kcenter_2(P: Dataset, k: int, z: int, config: FrameworkConfig,
                  oracle: DistanceOracle = EUCLIDEAN) -> ClusteringResult:
    """k-center with ``z'`` outliers on the sample (Charikar by default); exactly ``k`` centers."""
    return run_variant(P, k, z, config, Variant.UC2, oracle)


def _means_variant(config: FrameworkConfig, first: bool) -> Variant:
    median = config.objective is Objective.KMEDIAN
    if first:
        return Variant.UMED1 if median else Variant.UM1
    return Variant.UMED2 if median else Variant.UM2


def uni_kmeans_1(P: Dataset, k: int, z: int, config: FrameworkConfig,
                 oracle: DistanceOracle = EUCLIDEAN) -> ClusteringResult:
    """``(k + k')``-means on the sample. ``config.objective = KMEDIAN`` gives the k-median flavour."""
    return run_variant(P, k, z, config, _means_variant(config, True), oracle)


def uni_kmeans_2(P: Dataset, k: int, z: int, config: FrameworkConfig,
                 oracle: DistanceOracle = EUCLIDEAN) -> ClusteringResult:
    return run_variant(P, k, z, config, _means_variant(config, False), oracle)


def multi_run_select(P: Dataset, k: int, z: int, config: FrameworkConfig, variant: Variant,
                     oracle: DistanceOracle = EUCLIDEAN, workers: int = 1) -> ClusteringResult:
    """Best of ``config.trials`` candidates, chosen in a single pass over ``P``.

    Candidate ``l`` uses seed ``config.seed + l``. During the pass every point's
    distance to every candidate is computed together with its nearest center
    in that candidate, so the winner's assignment comes for free. Ties between
    candidates go to the earliest one.
    """
    variant = Variant(variant)
    z = check_z(P.n, z)
    objective, _ = _resolve(variant, config)
    m = config.trials
    seeds = [config.seed + l for l in range(m)]

    def one(s):
        return sample_and_solve(P, k, config, variant, oracle, seed=s)

    if workers > 1 and m > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, seeds))
    else:
        runs = [one(s) for s in seeds]
    candidates = [r[0] for r in runs]

    t0 = time.perf_counter()
    stacked = CenterSet.concat(candidates)
    bounds = np.cumsum([0] + [len(H) for H in candidates])
    dists = np.empty((m, P.n))
    nearest = np.empty((m, P.n), dtype=np.int32)
    for sl, D in oracle.blocks(P, stacked):
        rows = np.arange(D.shape[0])
        for l in range(m):
            block = D[:, bounds[l]:bounds[l + 1]]
            j = block.argmin(axis=1)
            nearest[l, sl] = j
            dists[l, sl] = block[rows, j]
    costs = [trimmed_value(dists[l], z, objective, oracle) for l in range(m)]
    best = int(np.argmin(costs))
    result = result_from_distances(candidates[best], dists[best], nearest[best], z, objective, oracle)
    t1 = time.perf_counter()

    result.timings = {
        "sample": sum(r[2]["sample"] for r in runs),
        "solve": sum(r[2]["solve"] for r in runs),
        "assign": t1 - t0,
    }
    S_best = runs[best][1]
    sample_z = 0 if variant.extra_centers else config.z_prime
    result.info = {
        "variant": variant.value,
        "n_centers": len(candidates[best]),
        "sample_size": config.sample_size,
        "trials": m,
        "best_trial": best,
        "best_seed": seeds[best],
        "candidate_costs": costs,
        "sample_cost": _sample_cost(S_best, candidates[best], sample_z, objective, oracle),
    }
    return result


# ---------------------------------------------------------------- guarantees

class BoundFamily(str, Enum):
    CENTER = "center"
    MEANS = "means"
    MEDIAN = "median"


class Theorem(str, Enum):
    THM1 = "thm1"
    THM2 = "thm2"
    THM3 = "thm3"
    THM4 = "thm4"


@dataclass(frozen=True)
class BoundReport:
    """Guarantee of a pipeline: ``cost <= alpha * OPT + beta * xi * L^2`` w.p. ``success_prob``.

    For k-center ``beta`` is 0 and ``alpha`` is the radius factor. ``t`` is only
    reported for the exactly-``k`` means/median bound. ``heuristic`` marks a
    black box without a worst-case factor.
    """

    t: Optional[float]
    alpha: float
    beta: float
    success_prob: float
    applicable: bool
    xi: float = 0.0
    heuristic: bool = False

    def bound(self, opt_cost: float, diameter: Optional[float] = None) -> Optional[float]:
        """Numeric bound; ``None`` when the additive term needs an unknown diameter."""
        if self.beta == 0 or self.xi == 0:
            return self.alpha * opt_cost
        if diameter is None:
            return None
        return self.alpha * opt_cost + self.beta * self.xi * diameter ** 2

    def to_json(self) -> dict:
        return asdict(self)


def theorem_bounds(family: BoundFamily, thm: Theorem, c: float = 1.0, delta: float = 0.5,
                   eta: float = 0.5, xi: float = 0.1, eps1: Optional[float] = None,
                   eps2: Optional[float] = None, heuristic: bool = False) -> BoundReport:
    """Approximation coefficients and success probability of each guarantee.

    ``thm1``/``thm2`` are the k-center bounds (factor 4 and ``c + 2``);
    ``thm3``/``thm4`` the k-means bounds with ``k + k'`` and ``k`` centers,
    whose k-median counterparts come from ``family='median'``.
    An exactly-``k`` bound that does not apply has ``applicable=False`` and
    infinite coefficients.
    """
    family, thm = BoundFamily(family), Theorem(thm)
    if c < 1:
        raise ClusteringError("BAD_PARAMS", f"c={c} < 1")
    if not 0 <= delta < 1 or not 0 < eta < 1:
        raise ClusteringError("BAD_PARAMS", f"delta={delta}, eta={eta}")

    def ratio():
        if eps1 is None or eps2 is None:
            raise ClusteringError("BAD_PARAMS", f"{thm.value} needs eps1 and eps2")
        return math.inf if eps2 == 0 else eps1 / eps2

    if family is BoundFamily.CENTER:
        if thm is Theorem.THM1:
            return BoundReport(None, 4.0, 0.0, (1 - eta) ** 2, True, heuristic=heuristic)
        if thm is Theorem.THM2:
            ok = ratio() > 1 / (eta * (1 - delta))
            return BoundReport(None, c + 2.0, 0.0, (1 - eta) ** 2, ok, heuristic=heuristic)
        raise ClusteringError("BAD_PARAMS", f"{thm.value} is not a k-center bound")

    if thm not in (Theorem.THM3, Theorem.THM4):
        raise ClusteringError("BAD_PARAMS", f"{thm.value} is not a k-means/median bound")
    spread = (1 + delta) / (1 - delta)
    t = None
    factor = 1.0
    applicable = True
    if thm is Theorem.THM4:
        t = eta * (1 - delta) * ratio()
        applicable = t > 1
        factor = t / (t - 1) if applicable else math.inf
    if family is BoundFamily.MEANS:
        base, mult = 2.0, 4 + 4 * c
    else:
        base, mult = 1.0, 1 + c
    beta = mult * factor * spread
    return BoundReport(t, base + beta, beta, (1 - eta) ** 3, applicable, xi=xi, heuristic=heuristic)


def bounds_for_variant(variant: Variant, params: SignificanceParams, spec: Optional[SolverSpec] = None) -> BoundReport:
    variant = Variant(variant)
    spec = spec or SolverSpec(variant.default_solver)
    thm = {Variant.UC1: Theorem.THM1, Variant.UC2: Theorem.THM2}.get(
        variant, Theorem.THM3 if variant.extra_centers else Theorem.THM4)
    family = {Objective.KCENTER: BoundFamily.CENTER, Objective.KMEANS: BoundFamily.MEANS,
              Objective.KMEDIAN: BoundFamily.MEDIAN}[variant.objective]
    return theorem_bounds(family, thm, spec.c, params.delta, params.eta, params.xi,
                          params.epsilon1, params.epsilon2, heuristic=spec.heuristic)


# ---------------------------------------------------- empirical lemma checks

class LemmaCheck(str, Enum):
    L1_I = "L1_I"
    L1_II = "L1_II"
    L2 = "L2"


def empirical_lemma_check(P: Dataset, params: SignificanceParams, which: LemmaCheck,
                          repetitions: int = 1000, seed=None, k: Optional[int] = None,
                          sample_size: Optional[int] = None) -> tuple[float, float]:
    """Monte-Carlo failure rate of a sampling lemma, and the lemma's bound ``eta``.

    ``L1_I``: the sample hits every ground-truth cluster.
    ``L1_II``: every cluster's sample count lies in ``(1 +- delta)(|C_j| / n)|S|``.
    ``L2``: at most ``(eps2 / (k eta))|S|`` sampled points are outliers.
    The sample size is the one the lemma asks for (``L2`` uses the ``L1_II``
    size) unless ``sample_size`` is given.
    """
    which = LemmaCheck(which)
    if P.labels is None:
        raise ClusteringError("NO_GROUND_TRUTH", "lemma checks need ground-truth labels")
    if repetitions < 100:
        raise ClusteringError("BAD_PARAMS", "need at least 100 repetitions")
    labels = P.labels
    cluster_ids = np.unique(labels[labels != OUTLIER])
    k = len(cluster_ids) if k is None else k
    p = params
    if sample_size is None:
        if which is LemmaCheck.L1_I:
            sample_size = sample_size_kcenter1(k, p.epsilon1, p.eta)
        else:
            sample_size = sample_size_kcenter2(k, p.epsilon1, p.eta, p.delta)
    # label -> dense code; outliers get code len(cluster_ids)
    code = np.searchsorted(cluster_ids, labels)
    code[labels == OUTLIER] = len(cluster_ids)
    sizes = np.bincount(code, minlength=len(cluster_ids) + 1)
    expected = sizes[:-1] / P.n * sample_size
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(repetitions):
        idx = rng.integers(0, P.n, size=sample_size)
        counts = np.bincount(code[idx], minlength=len(cluster_ids) + 1)
        if which is LemmaCheck.L1_I:
            failed = (counts[:-1] == 0).any()
        elif which is LemmaCheck.L1_II:
            c = counts[:-1]
            failed = ((c < (1 - p.delta) * expected) | (c > (1 + p.delta) * expected)).any()
        else:
            failed = counts[-1] > p.epsilon2 / (k * p.eta) * sample_size
        failures += bool(failed)
    return failures / repetitions, p.eta
