"""Approximation algorithms run on the sample.

Gonzalez farthest-first traversal (vanilla k-center), Charikar et al.'s greedy
disk cover (k-center with outliers), k-means++ seeding with Lloyd iterations,
and k-means-- (Lloyd with the farthest points trimmed every round), plus a
coordinate-median variant of the latter for k-median.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import ClusteringError
from .metric import EUCLIDEAN, OUTLIER, CenterSet, Dataset, DistanceOracle
from .objectives import discard_mask

DEFAULT_MAX_ITERS = 100
REL_TOL = 1e-9


class SolverKind(str, Enum):
    GONZALEZ = "gonzalez"
    CHARIKAR_OUTLIERS = "charikar"
    KMEANSPP_LLOYD = "kmeanspp"
    KMEANS_MM = "kmeans--"
    KMEDIAN_MM = "kmedian--"


NOMINAL_FACTOR = {
    SolverKind.GONZALEZ: 2.0,
    SolverKind.CHARIKAR_OUTLIERS: 3.0,
}


@dataclass(frozen=True)
class SolverSpec:
    """Which black-box solver to run and the factor ``c`` used in bounds.

    Lloyd-type solvers have no worst-case factor; they default to ``c = 1``
    and report ``heuristic = True``.
    """

    kind: SolverKind = SolverKind.GONZALEZ
    c: Optional[float] = None
    max_iters: int = DEFAULT_MAX_ITERS
    seed: Optional[int] = None
    medoid: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", SolverKind(self.kind))
        if self.c is None:
            object.__setattr__(self, "c", NOMINAL_FACTOR.get(self.kind, 1.0))
        if self.c < 1:
            raise ClusteringError("BAD_SOLVER", f"approximation factor c={self.c} < 1")
        if self.max_iters < 1:
            raise ClusteringError("BAD_SOLVER", "max_iters must be >= 1")

    @property
    def heuristic(self) -> bool:
        return self.kind not in NOMINAL_FACTOR

    @classmethod
    def from_json(cls, d: dict) -> "SolverSpec":
        return cls(**{k: d[k] for k in ("kind", "c", "max_iters", "seed", "medoid") if k in d})

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "c": self.c, "max_iters": self.max_iters,
                "seed": self.seed, "medoid": self.medoid, "heuristic": self.heuristic}


def _check_count(S: Dataset, m: int, what: str = "m") -> None:
    if m < 1:
        raise ClusteringError("BAD_K", f"{what}={m} must be >= 1")
    if m > S.n:
        raise ClusteringError("K_TOO_LARGE", f"{what}={m} exceeds |S|={S.n}")


def _column(oracle: DistanceOracle, S: Dataset, row: int, squared: bool = False) -> np.ndarray:
    H = S.centers_at([row])
    D = oracle.squared_distances(S, H) if squared else oracle.distances(S, H)
    return D[:, 0]


def _farthest_first(S: Dataset, chosen: list[int], m: int, oracle: DistanceOracle,
                    dist: Optional[np.ndarray] = None) -> list[int]:
    chosen = list(chosen)
    if dist is None:
        dist = np.full(S.n, np.inf)
        for c in chosen:
            np.minimum(dist, _column(oracle, S, c), out=dist)
    while len(chosen) < m:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        np.minimum(dist, _column(oracle, S, nxt), out=dist)
    return chosen


def gonzalez(S: Dataset, m: int, oracle: DistanceOracle = EUCLIDEAN, seed=None,
             first: Optional[int] = None) -> CenterSet:
    """Farthest-first traversal: ``m`` sample points as centers.

    The first center is a seeded-random point unless ``first`` is given;
    later ties go to the lowest index.
    """
    _check_count(S, m)
    if first is None:
        first = int(np.random.default_rng(seed).integers(S.n))
    elif not 0 <= first < S.n:
        raise ClusteringError("BAD_K", f"first center {first} outside [0, {S.n})")
    return S.centers_at(_farthest_first(S, [first], m, oracle))


def _greedy_cover(G: np.ndarray, E: np.ndarray, k: int) -> tuple[list[int], np.ndarray]:
    n = G.shape[0]
    uncovered = np.ones(n, dtype=np.float32)
    chosen: list[int] = []
    for _ in range(k):
        counts = G @ uncovered
        v = int(np.argmax(counts))
        if counts[v] <= 0:
            break
        chosen.append(v)
        uncovered[E[v]] = 0.0
    return chosen, uncovered.astype(bool)


def charikar_outliers(S: Dataset, k: int, z_prime: int, oracle: DistanceOracle = EUCLIDEAN,
                      return_radius: bool = False):
    """k-center with ``z_prime`` outliers by greedy disk covering.

    For a guessed radius ``r`` the greedy step picks, ``k`` times, the point
    whose ``r``-ball holds the most uncovered points and then marks everything
    within ``3r`` of it as covered. The smallest guess (binary-searched over
    the sorted pairwise distances) leaving at most ``z_prime`` uncovered points
    is used, so the trimmed radius is at most 3x the optimum over sample-point
    centers. Needs the full ``|S| x |S|`` distance matrix.
    """
    _check_count(S, k, "k")
    if not 0 <= z_prime < S.n:
        raise ClusteringError("Z_TOO_LARGE", f"z'={z_prime} with |S|={S.n}")
    D = oracle.distances(S, S.all_as_centers())
    radii = np.unique(D)

    def attempt(r):
        G = (D <= r).astype(np.float32)
        E = D <= 3.0 * r
        chosen, uncovered = _greedy_cover(G, E, k)
        return chosen, int(uncovered.sum())

    lo, hi = -1, len(radii) - 1
    best = attempt(radii[hi])
    # the largest radius covers everything with one ball
    while hi - lo > 1:
        mid = (lo + hi) // 2
        cand = attempt(radii[mid])
        if cand[1] <= z_prime:
            hi, best = mid, cand
        else:
            lo = mid
    chosen = best[0]
    if len(chosen) < k:
        # every point is already covered; spend the remaining centers farthest-first
        dist = D[:, chosen].min(axis=1)
        chosen = _farthest_first(S, chosen, k, oracle, dist=dist.copy())
    H = S.centers_at(chosen)
    return (H, float(radii[hi])) if return_radius else H


# ---------------------------------------------------------------- Lloyd family

def kmeanspp_seeding(S: Dataset, m: int, oracle: DistanceOracle = EUCLIDEAN, rng=None) -> list[int]:
    """D^2 sampling; returns sample rows. Duplicated data falls back to uniform picks."""
    rng = np.random.default_rng(rng)
    _check_count(S, m)
    first = int(rng.integers(S.n))
    chosen = [first]
    d2 = _column(oracle, S, first, squared=True)
    while len(chosen) < m:
        cum = np.cumsum(d2)
        total = cum[-1]
        if total > 0:
            nxt = int(np.searchsorted(cum, rng.random() * total, side="right"))
            nxt = min(nxt, S.n - 1)
        else:
            nxt = int(rng.integers(S.n))
        chosen.append(nxt)
        np.minimum(d2, _column(oracle, S, nxt, squared=True), out=d2)
    return chosen


def _evaluate(S: Dataset, H: CenterSet, z: int, oracle: DistanceOracle, median: bool):
    D = oracle.distances(S, H) if median else oracle.squared_distances(S, H)
    nearest = D.argmin(axis=1)
    dist = D[np.arange(S.n), nearest]
    mask = discard_mask(dist, z)
    cost = float(np.sum(dist[~mask])) / (S.n - z)
    labels = nearest.copy()
    labels[mask] = OUTLIER
    return cost, labels, dist


def _medoid(S: Dataset, members: np.ndarray, oracle: DistanceOracle, median: bool) -> int:
    sub = S.take(members)
    D = oracle.distances(sub, sub.all_as_centers()) if median else oracle.squared_distances(sub, sub.all_as_centers())
    return int(members[int(np.argmin(D.sum(axis=0)))])


def _update(S: Dataset, H: CenterSet, labels: np.ndarray, dist: np.ndarray, oracle: DistanceOracle,
            median: bool, medoid: bool) -> CenterSet:
    m = len(H)
    rows: list[Optional[int]] = [None] * m
    coords = None if medoid else np.array(H.coords, copy=True)
    empty = []
    for j in range(m):
        members = np.flatnonzero(labels == j)
        if members.size == 0:
            empty.append(j)
            continue
        if medoid:
            rows[j] = _medoid(S, members, oracle, median)
        elif median:
            coords[j] = np.median(S.points[members], axis=0)
        else:
            coords[j] = S.points[members].mean(axis=0)
    if empty:
        # re-seed empty clusters at the points farthest from the current centers
        far = dist.copy()
        for j in empty:
            p = int(np.argmax(far))
            far[p] = -np.inf
            if medoid:
                rows[j] = p
            else:
                coords[j] = S.points[p]
    if medoid:
        return S.centers_at(rows)
    return CenterSet(coords=coords)


def _trimmed_lloyd(S: Dataset, H: CenterSet, z: int, oracle: DistanceOracle, max_iters: int,
                   median: bool, medoid: bool, history: Optional[list]) -> CenterSet:
    best = None
    best_cost = np.inf
    best_labels = None
    for _ in range(max_iters + 1):
        cost, labels, dist = _evaluate(S, H, z, oracle, median)
        if best is not None and cost > best_cost:
            break
        if history is not None:
            history.append(cost)
        converged = best is not None and (
            np.array_equal(labels, best_labels) or best_cost - cost <= REL_TOL * best_cost
        )
        best, best_cost, best_labels = H, cost, labels
        if converged or cost == 0.0:
            break
        H = _update(S, H, labels, dist, oracle, median, medoid)
    return best


def _lloyd_family(S: Dataset, m: int, z_prime: int, oracle: DistanceOracle, seed, max_iters: int,
                  median: bool, medoid: bool, history: Optional[list],
                  init_rows: Optional[list] = None) -> CenterSet:
    _check_count(S, m)
    if not 0 <= z_prime < S.n:
        raise ClusteringError("Z_TOO_LARGE", f"z'={z_prime} with |S|={S.n}")
    if oracle.is_general:
        medoid = True
    if init_rows is None:
        init_rows = kmeanspp_seeding(S, m, oracle, np.random.default_rng(seed))
    elif len(init_rows) != m or not all(0 <= r < S.n for r in init_rows):
        raise ClusteringError("BAD_CENTERS", f"need {m} initial rows in [0, {S.n})")
    init = S.centers_at(init_rows)
    if not medoid:
        init = CenterSet(coords=init.coords)
    return _trimmed_lloyd(S, init, z_prime, oracle, max_iters, median, medoid, history)


def kmeanspp_lloyd(S: Dataset, m: int, oracle: DistanceOracle = EUCLIDEAN, seed=None,
                   max_iters: int = DEFAULT_MAX_ITERS, medoid: bool = False,
                   history: Optional[list] = None) -> CenterSet:
    """k-means++ seeding followed by Lloyd iterations.

    Stops at an assignment fixpoint, when the relative improvement drops below
    1e-9, or after ``max_iters`` updates. If ``history`` is a list, the cost
    of every accepted iterate is appended to it.
    """
    return _lloyd_family(S, m, 0, oracle, seed, max_iters, False, medoid, history)


def kmeans_minus_minus(S: Dataset, k: int, z_prime: int, oracle: DistanceOracle = EUCLIDEAN, seed=None,
                       max_iters: int = DEFAULT_MAX_ITERS, median: bool = False, medoid: bool = False,
                       history: Optional[list] = None, init_rows: Optional[list] = None) -> CenterSet:
    """k-means-- : each round drops the ``z_prime`` farthest points, then updates centers on the rest.

    ``median=True`` is the k-median flavour (coordinate-wise medians, costs in
    plain distances). Under a GENERAL metric, or with ``medoid=True``, each
    center moves to the cluster member with the smallest within-cluster cost.
    With ``z_prime == 0`` and ``median=False`` this is exactly
    :func:`kmeanspp_lloyd`.

    ``init_rows`` replaces the D^2 seeding with the given sample rows. D^2
    seeding readily lands on a far outlier; such a center keeps that point at
    distance 0, so it is never trimmed and the center stays put.
    """
    return _lloyd_family(S, k, z_prime, oracle, seed, max_iters, median, medoid, history, init_rows)


def run_solver(spec: SolverSpec, S: Dataset, n_centers: int, z_prime: int = 0,
               oracle: DistanceOracle = EUCLIDEAN, seed=None) -> CenterSet:
    """Dispatch to the solver named by ``spec``.

    Vanilla solvers (Gonzalez, k-means++/Lloyd) ignore ``z_prime``.
    """
    seed = spec.seed if seed is None else seed
    kind = spec.kind
    if kind is SolverKind.GONZALEZ:
        return gonzalez(S, n_centers, oracle, seed)
    if kind is SolverKind.CHARIKAR_OUTLIERS:
        return charikar_outliers(S, n_centers, z_prime, oracle)
    if kind is SolverKind.KMEANSPP_LLOYD:
        return kmeanspp_lloyd(S, n_centers, oracle, seed, spec.max_iters, spec.medoid)
    if kind is SolverKind.KMEANS_MM:
        return kmeans_minus_minus(S, n_centers, z_prime, oracle, seed, spec.max_iters, medoid=spec.medoid)
    if kind is SolverKind.KMEDIAN_MM:
        return kmeans_minus_minus(S, n_centers, z_prime, oracle, seed, spec.max_iters,
                                  median=True, medoid=spec.medoid)
    raise ClusteringError("BAD_SOLVER", f"unknown solver {kind}")  # pragma: no cover

