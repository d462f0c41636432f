"""Synthetic significant instances, CSV ingestion and outlier injection."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ClusteringError
from .metric import OUTLIER, Dataset

MAX_ATTEMPTS_PER_OUTLIER = 10 ** 6

# exact cluster diameters are computed while the pair count stays below this
EXACT_DIAMETER_PAIRS = 10 ** 8


@dataclass(frozen=True)
class SyntheticSpec:
    """Gaussian clusters in a hypercube plus ``z`` outliers outside them.

    ``min_cluster_fraction`` fixes the smallest cluster at
    ``ceil(min_cluster_fraction * n)`` points, so ``eps1 = k * that / n``.
    Left as ``None``, cluster sizes follow the size ratio only.
    """

    n: int
    d: int
    k: int
    z: int
    hypercube_side: float = 400.0
    cluster_sd: float = math.sqrt(1000.0)
    size_ratio_max: float = 50.0
    min_cluster_fraction: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.d < 1 or self.k < 1:
            raise ClusteringError("INFEASIBLE_SPEC", "n, d and k must be positive")
        if not 0 <= self.z < self.n:
            raise ClusteringError("INFEASIBLE_SPEC", f"z={self.z} must lie in [0, n)")
        if self.k > self.n - self.z:
            raise ClusteringError("INFEASIBLE_SPEC", f"k={self.k} exceeds the {self.n - self.z} inliers")
        if self.size_ratio_max < 1:
            raise ClusteringError("INFEASIBLE_SPEC", "size_ratio_max must be >= 1")

    @classmethod
    def from_significance(cls, n: int, d: int, k: int, z_frac: float, eps_ratio: float,
                          **kw) -> "SyntheticSpec":
        """Spec whose smallest cluster is ``eps_ratio * z`` points, i.e. ``eps1 / eps2 = eps_ratio``."""
        z = int(round(z_frac * n))
        frac = eps_ratio * z / n if z > 0 else None
        return cls(n=n, d=d, k=k, z=z, min_cluster_fraction=frac, **kw)


@dataclass
class GroundTruth:
    labels: np.ndarray
    true_centers: np.ndarray
    r_truth: float
    L_truth: float
    L_exact: bool
    eps1_actual: float
    eps2_actual: float
    cluster_radii: np.ndarray
    cluster_sizes: np.ndarray

    @property
    def z(self) -> int:
        return int(np.count_nonzero(self.labels == OUTLIER))

    @property
    def outliers(self) -> np.ndarray:
        return np.flatnonzero(self.labels == OUTLIER)

    def to_json(self) -> dict:
        return {
            "labels": self.labels.tolist(),
            "true_centers": self.true_centers.tolist(),
            "r_truth": self.r_truth,
            "L_truth": self.L_truth,
            "L_exact": self.L_exact,
            "eps1_actual": self.eps1_actual,
            "eps2_actual": self.eps2_actual,
            "cluster_radii": self.cluster_radii.tolist(),
            "cluster_sizes": self.cluster_sizes.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "GroundTruth":
        return cls(
            labels=np.asarray(d["labels"], dtype=np.int64),
            true_centers=np.asarray(d["true_centers"], dtype=np.float64),
            r_truth=float(d["r_truth"]),
            L_truth=float(d["L_truth"]),
            L_exact=bool(d["L_exact"]),
            eps1_actual=float(d["eps1_actual"]),
            eps2_actual=float(d["eps2_actual"]),
            cluster_radii=np.asarray(d["cluster_radii"], dtype=np.float64),
            cluster_sizes=np.asarray(d["cluster_sizes"], dtype=np.int64),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "GroundTruth":
        return cls.from_json(json.loads(Path(path).read_text()))


def truth_path(csv_path) -> Path:
    """``data.csv`` -> ``data.truth.json``."""
    return Path(csv_path).with_suffix(".truth.json")


def _diameter(X: np.ndarray) -> tuple[float, bool]:
    """Largest pairwise distance; ``(nan, False)`` when too many pairs.

    A Gram-matrix scan ranks rows by their approximate farthest partner, then
    the best few rows are rescored exactly with ``cdist``.
    """
    n = len(X)
    if n < 2:
        return 0.0, True
    if n * n > EXACT_DIAMETER_PAIRS:
        return math.nan, False
    Xc = X - X.mean(axis=0)
    sq = np.einsum("ij,ij->i", Xc, Xc)
    far = np.empty(n)
    step = max(1, 2 ** 22 // n)
    for start in range(0, n, step):
        blk = slice(start, start + step)
        d2 = sq[blk, None] + sq[None, :] - 2.0 * (Xc[blk] @ Xc.T)
        far[blk] = d2.max(axis=1)
    rows = np.argsort(far)[-8:]
    return float(cdist(X[rows], X).max()), True


def ground_truth(points: np.ndarray, labels: np.ndarray, centers: Optional[np.ndarray] = None) -> GroundTruth:
    """Ground-truth record of labeled points.

    ``centers[j]`` belongs to the j-th smallest inlier label; defaults to the
    cluster means. A cluster's diameter is computed exactly when affordable
    and otherwise bounded by twice its radius (``L_exact=False``).
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    ids = np.unique(labels[labels != OUTLIER])
    if len(ids) == 0:
        raise ClusteringError("NO_GROUND_TRUTH", "no inlier labels")
    if centers is None:
        centers = np.vstack([points[labels == c].mean(axis=0) for c in ids])
    radii = np.empty(len(ids))
    sizes = np.empty(len(ids), dtype=np.int64)
    L, exact = 0.0, True
    for j, c in enumerate(ids):
        members = points[labels == c]
        sizes[j] = len(members)
        radii[j] = float(cdist(members, centers[j:j + 1]).max())
        diam, ok = _diameter(members)
        if not ok:
            diam = 2 * radii[j]
        L = max(L, diam)
        exact &= ok
    n = len(points)
    k = len(ids)
    z = int(np.count_nonzero(labels == OUTLIER))
    return GroundTruth(
        labels=labels,
        true_centers=np.asarray(centers, dtype=np.float64),
        r_truth=float(radii.max()),
        L_truth=L,
        L_exact=exact,
        eps1_actual=k * int(sizes.min()) / n,
        eps2_actual=k * z / n,
        cluster_radii=radii,
        cluster_sizes=sizes,
    )


def _water_fill(total: int, caps: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Split ``total`` units at random over bins with capacities ``caps``."""
    alloc = np.zeros(len(caps), dtype=np.int64)
    weights = rng.uniform(size=len(caps))
    remaining = total
    while remaining > 0:
        open_ = alloc < caps
        w = np.where(open_, weights, 0.0)
        share = np.floor(remaining * w / w.sum()).astype(np.int64)
        share = np.minimum(share, caps - alloc)
        if share.sum() == 0:
            share[rng.choice(np.flatnonzero(open_))] = 1
        alloc += share
        remaining -= int(share.sum())
    return alloc


def cluster_sizes(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Inlier counts per cluster, summing to ``n - z``.

    The largest-to-smallest ratio is drawn uniformly from
    ``[1, size_ratio_max]``, raised if needed to absorb the total. The sizes
    between the extremes are random.
    """
    N, k = spec.n - spec.z, spec.k
    if k == 1:
        return np.array([N], dtype=np.int64)
    R = rng.uniform(1.0, spec.size_ratio_max)
    if spec.min_cluster_fraction is None:
        s_min = max(1, int(N / (1 + R + (k - 2) * (1 + R) / 2)))
    else:
        s_min = max(1, math.ceil(spec.min_cluster_fraction * spec.n - 1e-9))
    if k * s_min > N:
        raise ClusteringError("INFEASIBLE_SPEC", f"{k} clusters of >= {s_min} points exceed {N} inliers")
    need = math.ceil((N - s_min) / (k - 1))
    s_max = max(int(R * s_min), need)
    s_max = min(s_max, N - (k - 1) * s_min)
    if k == 2:
        s_max = N - s_min
    if s_max > spec.size_ratio_max * s_min:
        raise ClusteringError("INFEASIBLE_SPEC", f"size ratio {s_max / s_min:.3g} exceeds {spec.size_ratio_max}")
    sizes = [s_min, s_max]
    if k > 2:
        rest = N - s_min - s_max
        caps = np.full(k - 2, s_max - s_min, dtype=np.int64)
        sizes += (s_min + _water_fill(rest - (k - 2) * s_min, caps, rng)).tolist()
    sizes = np.array(sizes, dtype=np.int64)
    return sizes[rng.permutation(k)]


def _outside_balls(total: int, centers: np.ndarray, radii: np.ndarray, low: np.ndarray,
                   high: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample ``total`` points uniform in a box, strictly outside every ball."""
    d = centers.shape[1]
    out = np.empty((total, d))
    got = 0
    attempts = 0
    while got < total:
        batch = max(64, 2 * (total - got))
        cand = rng.uniform(low, high, size=(batch, d))
        attempts += batch
        ok = (cdist(cand, centers) > radii).all(axis=1)
        take = cand[ok][: total - got]
        out[got:got + len(take)] = take
        got += len(take)
        if got < total and attempts > MAX_ATTEMPTS_PER_OUTLIER * (got + 1):
            raise ClusteringError("OUTLIER_SAMPLING_STUCK",
                                  f"{attempts} attempts for {got + 1} outliers")
    return out


def generate_synthetic(spec: SyntheticSpec) -> tuple[Dataset, GroundTruth]:
    """Sample an instance: centers uniform in ``[0, side]^d``, isotropic Gaussian clusters,
    and ``z`` outliers uniform in ``[-side, 2 side]^d`` outside every cluster's ball
    (true center, radius = farthest member). Rows are shuffled.
    """
    rng = np.random.default_rng(spec.seed)
    side = spec.hypercube_side
    centers = rng.uniform(0.0, side, size=(spec.k, spec.d))
    sizes = cluster_sizes(spec, rng)
    labels = np.repeat(np.arange(spec.k), sizes)
    pts = centers[labels] + rng.normal(0.0, spec.cluster_sd, size=(len(labels), spec.d))
    radii = np.array([cdist(pts[labels == j], centers[j:j + 1]).max() for j in range(spec.k)])
    if spec.z:
        low = np.full(spec.d, -side)
        high = np.full(spec.d, 2 * side)
        outl = _outside_balls(spec.z, centers, radii, low, high, rng)
        pts = np.vstack([pts, outl])
        labels = np.concatenate([labels, np.full(spec.z, OUTLIER)])
    order = rng.permutation(spec.n)
    pts, labels = pts[order], labels[order]
    truth = ground_truth(pts, labels, centers)
    return Dataset(pts, labels=labels), truth


def add_outliers(P: Dataset, fraction: float, seed=None) -> tuple[Dataset, GroundTruth]:
    """Append ``ceil(fraction * n)`` outliers outside every labeled cluster's enclosing ball.

    Balls sit at the cluster means with the farthest member's distance as
    radius. Outliers are uniform in the data's bounding box inflated to three
    times its extent about its middle.
    """
    if P.labels is None:
        raise ClusteringError("NO_GROUND_TRUTH", "add_outliers needs labels")
    if not 0 <= fraction < 1:
        raise ClusteringError("BAD_PARAMS", f"fraction={fraction} not in [0, 1)")
    base = ground_truth(P.points, P.labels)
    count = math.ceil(fraction * P.n)
    if count == 0:
        return P, base
    rng = np.random.default_rng(seed)
    lo, hi = P.points.min(axis=0), P.points.max(axis=0)
    mid, half = (lo + hi) / 2, np.maximum((hi - lo) / 2, 1e-9)
    outl = _outside_balls(count, base.true_centers, base.cluster_radii, mid - 3 * half, mid + 3 * half, rng)
    pts = np.vstack([P.points, outl])
    labels = np.concatenate([P.labels, np.full(count, OUTLIER)])
    return Dataset(pts, labels=labels), ground_truth(pts, labels, base.true_centers)


def extreme_instance(k: int, n_outliers: int, x: float = 100.0, cluster_size: int = 50) -> Dataset:
    """Clusters of identical points plus isolated outliers, all on a line ``x`` apart.

    Cluster ``j`` sits at ``j * x``; outlier ``i`` at ``(k + i) * x``.
    The optimal radius with ``z = n_outliers`` is 0.
    """
    if k < 1 or n_outliers < 0 or cluster_size < 1 or x <= 0:
        raise ClusteringError("BAD_PARAMS", "need k, cluster_size >= 1, n_outliers >= 0, x > 0")
    pos = np.concatenate([np.repeat(np.arange(k) * x, cluster_size), (k + np.arange(n_outliers)) * x])
    labels = np.concatenate([np.repeat(np.arange(k), cluster_size), np.full(n_outliers, OUTLIER)])
    return Dataset(pos.reshape(-1, 1), labels=labels)


# ------------------------------------------------------------------------ CSV

def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _diagnose(path: Path, skip: int):
    """Find the offending row/column of a CSV that failed the fast parser."""
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        width = None
        for lineno, row in enumerate(rows, start=1):
            if lineno <= skip or not row:
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ClusteringError("MALFORMED_CSV",
                                      f"{path}:{lineno}: {len(row)} columns, expected {width}")
            for col, cell in enumerate(row, start=1):
                if not _is_number(cell.strip()):
                    raise ClusteringError("MALFORMED_CSV",
                                          f"{path}:{lineno}: column {col} is not numeric: {cell!r}")
    raise ClusteringError("MALFORMED_CSV", f"{path}: could not parse")


def load_csv(path, has_labels: bool = False) -> tuple[Dataset, Optional[GroundTruth]]:
    """Read a numeric CSV, optionally with a trailing integer label column (``-1`` = outlier).

    A non-numeric first row is taken as a header. With labels, the truth
    sidecar is used when present and otherwise derived from the labels.
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            first = next(csv.reader(fh), None)
    except OSError as e:
        raise ClusteringError("IO_ERROR", f"{path}: {e}") from e
    if first is None:
        raise ClusteringError("MALFORMED_CSV", f"{path}: empty file")
    skip = 0 if all(_is_number(c.strip()) for c in first) else 1
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2, dtype=np.float64)
    except ValueError:
        _diagnose(path, skip)
    if data.size == 0:
        raise ClusteringError("MALFORMED_CSV", f"{path}: no data rows")
    if not has_labels:
        return Dataset(data), None
    if data.shape[1] < 2:
        raise ClusteringError("MALFORMED_CSV", f"{path}: need coordinates plus a label column")
    labels = data[:, -1]
    if (labels != np.round(labels)).any():
        raise ClusteringError("MALFORMED_CSV", f"{path}: label column must hold integers")
    labels = labels.astype(np.int64)
    labels[labels < 0] = OUTLIER
    P = Dataset(data[:, :-1], labels=labels)
    sidecar = truth_path(path)
    truth = GroundTruth.load(sidecar) if sidecar.exists() else ground_truth(P.points, labels)
    return P, truth


def write_csv(path, P: Dataset, with_labels: bool = True) -> None:
    """Write coordinates (and labels, if any) with round-trip precision."""
    path = Path(path)
    cols = [f"x{j}" for j in range(P.d)]
    data = P.points
    fmt = ["%.17g"] * P.d
    if with_labels and P.labels is not None:
        data = np.column_stack([data, P.labels])
        cols.append("label")
        fmt.append("%d")
    try:
        np.savetxt(path, data, delimiter=",", fmt=fmt, header=",".join(cols), comments="")
    except OSError as e:
        raise ClusteringError("IO_ERROR", f"{path}: {e}") from e
