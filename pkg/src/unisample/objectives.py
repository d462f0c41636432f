"""Outlier-trimmed clustering objectives and outlier-aware assignment."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import ClusteringError
from .metric import EUCLIDEAN, OUTLIER, CenterSet, Dataset, DistanceOracle, Metric, all_distances_to_set

BRUTE_FORCE_MAX_N = 20


class Objective(str, Enum):
    KCENTER = "kcenter"
    KMEDIAN = "kmedian"
    KMEANS = "kmeans"


@dataclass(frozen=True)
class TrimmedCost:
    objective: Objective
    value: float
    z: int

    def to_json(self) -> dict:
        return {"objective": self.objective.value, "value": self.value, "z": self.z}


@dataclass
class ClusteringResult:
    """Centers, per-point assignment and exactly ``z`` flagged outliers.

    ``assignment[i]`` is the nearest center's index, or ``OUTLIER``.
    ``timings`` and ``info`` are filled by the sampling pipelines.
    """

    centers: CenterSet
    assignment: np.ndarray
    outliers: np.ndarray
    cost: TrimmedCost
    timings: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    @property
    def inliers(self) -> np.ndarray:
        return np.flatnonzero(self.assignment != OUTLIER)

    def to_json(self) -> dict:
        return {
            "centers": self.centers.to_json(),
            "assignment": self.assignment.tolist(),
            "outliers": self.outliers.tolist(),
            "cost": self.cost.to_json(),
        }


def check_z(n: int, z: int) -> int:
    if int(z) != z or z < 0:
        raise ClusteringError("Z_TOO_LARGE" if z >= n else "BAD_Z", f"z must be a non-negative integer, got {z}")
    if z >= n:
        raise ClusteringError("Z_TOO_LARGE", f"z={z} must be smaller than n={n}")
    return int(z)


def discard_mask(dist: np.ndarray, z: int) -> np.ndarray:
    """Boolean mask of the ``z`` largest entries of ``dist``.

    Among equal values at the cut, higher indices are discarded first.
    Runs in linear time.
    """
    n = dist.shape[0]
    mask = np.zeros(n, dtype=bool)
    if z <= 0:
        return mask
    cut = n - z
    t = np.partition(dist, cut)[cut]
    np.greater(dist, t, out=mask)
    need = z - int(np.count_nonzero(mask))
    if need > 0:
        ties = np.flatnonzero(dist == t)
        mask[ties[-need:]] = True
    return mask


def objective_value(kept: np.ndarray, objective: Objective, squared_input: bool = False) -> float:
    """Max, mean, or mean of squares of the kept distances.

    Sums use ``math.fsum`` so the result depends only on the multiset of values.
    ``squared_input`` means ``kept`` already holds squared distances.
    """
    objective = Objective(objective)
    if objective is Objective.KCENTER:
        return float(kept.max())
    if objective is Objective.KMEDIAN:
        return math.fsum(kept.tolist()) / kept.shape[0]
    sq = kept if squared_input else kept * kept
    return math.fsum(sq.tolist()) / kept.shape[0]


def _squared_input(oracle: DistanceOracle, objective: Objective) -> bool:
    # k-means under a squared-Euclidean oracle: the oracle value already is the square
    return oracle.mode is Metric.SQUARED_EUCLIDEAN and Objective(objective) is Objective.KMEANS


def trimmed_value(dist: np.ndarray, z: int, objective: Objective, oracle: DistanceOracle = EUCLIDEAN) -> float:
    """Trimmed objective of precomputed point-to-set distances."""
    mask = discard_mask(dist, z)
    return objective_value(dist[~mask], objective, _squared_input(oracle, objective))


def trimmed_cost(P: Dataset, H: CenterSet, z: int, objective: Objective = Objective.KCENTER,
                 oracle: DistanceOracle = EUCLIDEAN) -> TrimmedCost:
    """Cost of ``H`` on ``P`` after discarding the ``z`` farthest points."""
    z = check_z(P.n, z)
    objective = Objective(objective)
    dist, _ = all_distances_to_set(P, H, oracle)
    return TrimmedCost(objective, trimmed_value(dist, z, objective, oracle), z)


def result_from_distances(H: CenterSet, dist: np.ndarray, nearest: np.ndarray, z: int,
                          objective: Objective, oracle: DistanceOracle = EUCLIDEAN) -> ClusteringResult:
    mask = discard_mask(dist, z)
    assignment = np.asarray(nearest, dtype=np.int64).copy()
    assignment[mask] = OUTLIER
    value = objective_value(dist[~mask], objective, _squared_input(oracle, objective))
    return ClusteringResult(
        centers=H,
        assignment=assignment,
        outliers=np.flatnonzero(mask),
        cost=TrimmedCost(Objective(objective), value, int(z)),
    )


def assign_with_outliers(P: Dataset, H: CenterSet, z: int, oracle: DistanceOracle = EUCLIDEAN,
                         objective: Objective = Objective.KCENTER) -> ClusteringResult:
    """Flag the ``z`` points farthest from ``H`` and assign the rest to their nearest center."""
    z = check_z(P.n, z)
    dist, nearest = all_distances_to_set(P, H, oracle)
    return result_from_distances(H, dist, nearest, z, objective, oracle)


def brute_force_optimal(P: Dataset, k: int, z: int, objective: Objective = Objective.KCENTER,
                        oracle: DistanceOracle = EUCLIDEAN) -> tuple[CenterSet, TrimmedCost]:
    """Exact optimum over all ``k``-subsets of input points used as centers.

    Only meant as a test oracle; refuses ``n > 20``. In Euclidean space the
    continuous optimum can be lower than this medoid-restricted one.
    """
    if P.n > BRUTE_FORCE_MAX_N:
        raise ClusteringError("INSTANCE_TOO_LARGE", f"n={P.n} > {BRUTE_FORCE_MAX_N}")
    z = check_z(P.n, z)
    if not 1 <= k <= P.n:
        raise ClusteringError("K_TOO_LARGE", f"k={k} with n={P.n}")
    objective = Objective(objective)
    D = oracle.distances(P, P.all_as_centers())
    best: Optional[tuple] = None
    for combo in combinations(range(P.n), k):
        cols = list(combo)
        sub = D[:, cols]
        dist = sub.min(axis=1)
        value = trimmed_value(dist, z, objective, oracle)
        if best is None or value < best[0]:
            best = (value, cols)
    return P.centers_at(best[1]), TrimmedCost(objective, best[0], z)
