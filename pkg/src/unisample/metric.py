"""Point storage, center sets and distance evaluation.

Every other module goes through :class:`DistanceOracle` to measure distances,
so Euclidean data and explicit metric spaces (a distance matrix over a finite
vertex set) are handled by the same code paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ClusteringError

OUTLIER = -1

# rows per block when scanning large datasets; bounds temporary memory
BLOCK_ROWS = 32768


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable set of ``n`` points in ``d`` dimensions.

    ``ids`` maps every row to a vertex of the underlying universe. It is the
    identity for a freshly built dataset and is carried along by :meth:`take`,
    which is what lets a sample keep addressing rows of a full distance matrix.
    ``labels`` holds ground-truth cluster ids (``OUTLIER`` for outliers).
    """

    points: np.ndarray
    labels: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts is self.points and pts.flags.writeable:
            pts = pts.copy()
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ClusteringError("BAD_DATASET", f"points must be a non-empty n x d array, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise ClusteringError("BAD_DATASET", "coordinates must be finite")
        pts = np.ascontiguousarray(pts)
        object.__setattr__(self, "points", _readonly(pts))

        n = pts.shape[0]
        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64).reshape(-1)
            if labels.shape[0] != n:
                raise ClusteringError("SHAPE_MISMATCH", f"{labels.shape[0]} labels for {n} points")
            object.__setattr__(self, "labels", _readonly(labels))
        ids = np.arange(n) if self.ids is None else np.array(self.ids, dtype=np.int64).reshape(-1)
        if ids.shape[0] != n:
            raise ClusteringError("SHAPE_MISMATCH", f"{ids.shape[0]} ids for {n} points")
        object.__setattr__(self, "ids", _readonly(ids))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    @classmethod
    def for_metric(cls, n: int, labels=None) -> "Dataset":
        """Dataset over the vertices ``0..n-1`` of an explicit metric.

        The single coordinate column holds the vertex id; it is a placeholder
        and is never used to measure distances.
        """
        return cls(np.arange(n, dtype=np.float64).reshape(-1, 1), labels=labels)

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(self.points[idx], labels=labels, ids=self.ids[idx])

    def all_as_centers(self) -> "CenterSet":
        return CenterSet(coords=self.points, indices=self.ids)

    def centers_at(self, rows: Sequence[int]) -> "CenterSet":
        rows = np.asarray(rows, dtype=np.int64)
        return CenterSet(coords=self.points[rows], indices=self.ids[rows])


@dataclass(frozen=True, eq=False)
class CenterSet:
    """Ordered cluster centers: coordinates, universe indices, or both.

    Solvers that pick input points (Gonzalez, Charikar, medoid updates) fill in
    both; Lloyd-style solvers only produce coordinates. An explicit metric
    needs ``indices``.
    """

    coords: Optional[np.ndarray] = None
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.coords is None and self.indices is None:
            raise ClusteringError("EMPTY_CENTERS", "a center set needs coordinates or indices")
        if self.coords is not None:
            c = np.array(self.coords, dtype=np.float64)
            if c.ndim == 1:
                c = c.reshape(-1, 1)
            if c.shape[0] == 0:
                raise ClusteringError("EMPTY_CENTERS", "no centers")
            if not np.isfinite(c).all():
                raise ClusteringError("BAD_CENTERS", "center coordinates must be finite")
            object.__setattr__(self, "coords", _readonly(c))
        if self.indices is not None:
            i = np.array(self.indices, dtype=np.int64).reshape(-1)
            if i.shape[0] == 0:
                raise ClusteringError("EMPTY_CENTERS", "no centers")
            if (i < 0).any():
                raise ClusteringError("BAD_CENTERS", "center indices must be non-negative")
            object.__setattr__(self, "indices", _readonly(i))
        if self.coords is not None and self.indices is not None and len(self.coords) != len(self.indices):
            raise ClusteringError("SHAPE_MISMATCH", "coordinates and indices disagree in length")

    def __len__(self) -> int:
        return len(self.coords) if self.coords is not None else len(self.indices)

    def subset(self, rows) -> "CenterSet":
        rows = np.asarray(rows, dtype=np.int64)
        return CenterSet(
            coords=None if self.coords is None else self.coords[rows],
            indices=None if self.indices is None else self.indices[rows],
        )

    @staticmethod
    def concat(sets: Sequence["CenterSet"]) -> "CenterSet":
        coords = None
        indices = None
        if all(s.coords is not None for s in sets):
            coords = np.vstack([s.coords for s in sets])
        if all(s.indices is not None for s in sets):
            indices = np.concatenate([s.indices for s in sets])
        return CenterSet(coords=coords, indices=indices)

    def to_json(self) -> dict:
        out = {}
        if self.coords is not None:
            out["coords"] = self.coords.tolist()
        if self.indices is not None:
            out["indices"] = self.indices.tolist()
        return out


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    SQUARED_EUCLIDEAN = "sqeuclidean"
    GENERAL = "general"


@dataclass(frozen=True, eq=False)
class DistanceOracle:
    """Distance function over datasets and center sets.

    ``GENERAL`` mode looks distances up in an explicit symmetric matrix indexed
    by universe ids; centers must then be given as indices.
    """

    mode: Metric = Metric.EUCLIDEAN
    matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", Metric(self.mode))
        if self.mode is Metric.GENERAL:
            if self.matrix is None:
                raise ClusteringError("BAD_METRIC", "GENERAL mode needs a distance matrix")
            object.__setattr__(self, "matrix", _readonly(_check_matrix(self.matrix)))
        elif self.matrix is not None:
            raise ClusteringError("BAD_METRIC", "a distance matrix is only used in GENERAL mode")

    @classmethod
    def general(cls, matrix, check_triangle: bool = True) -> "DistanceOracle":
        m = _check_matrix(matrix)
        if check_triangle and m.shape[0] <= 300:
            _check_triangle(m)
        return cls(Metric.GENERAL, m)

    @classmethod
    def euclidean_matrix(cls, points) -> "DistanceOracle":
        """Explicit metric from Euclidean points (medoid-mode experiments)."""
        pts = np.asarray(points, dtype=np.float64).reshape(len(points), -1)
        return cls.general(cdist(pts, pts), check_triangle=False)

    @property
    def is_general(self) -> bool:
        return self.mode is Metric.GENERAL

    def _lookup(self, X: Dataset, H: CenterSet) -> np.ndarray:
        if H.indices is None:
            raise ClusteringError("BAD_CENTERS", "GENERAL metric centers must be vertex indices")
        n = self.matrix.shape[0]
        if H.indices.max() >= n or X.ids.max() >= n:
            raise ClusteringError("BAD_CENTERS", "index outside the metric's vertex set")
        return self.matrix[np.ix_(X.ids, H.indices)]

    def _coords(self, H: CenterSet, X: Dataset) -> np.ndarray:
        if H.coords is None:
            raise ClusteringError("BAD_CENTERS", "Euclidean centers need coordinates")
        if H.coords.shape[1] != X.d:
            raise ClusteringError("SHAPE_MISMATCH", f"centers have d={H.coords.shape[1]}, points d={X.d}")
        return H.coords

    def distances(self, X: Dataset, H: CenterSet) -> np.ndarray:
        """``(n, m)`` matrix of oracle distances from every point to every center."""
        if self.mode is Metric.GENERAL:
            return self._lookup(X, H)
        metric = "euclidean" if self.mode is Metric.EUCLIDEAN else "sqeuclidean"
        return cdist(X.points, self._coords(H, X), metric=metric)

    def squared_distances(self, X: Dataset, H: CenterSet) -> np.ndarray:
        """Squared Euclidean (or squared metric) distances, for k-means internals."""
        if self.mode is Metric.GENERAL:
            d = self._lookup(X, H)
            return d * d
        return cdist(X.points, self._coords(H, X), metric="sqeuclidean")

    def blocks(self, X: Dataset, H: CenterSet, rows: int = BLOCK_ROWS) -> Iterator[tuple[slice, np.ndarray]]:
        """Yield ``(row_slice, distances)`` over row blocks of ``X``."""
        n = X.n
        if n <= rows:
            yield slice(0, n), self.distances(X, H)
            return
        for start in range(0, n, rows):
            sl = slice(start, min(n, start + rows))
            yield sl, self.distances(_RowView(X, sl), H)


class _RowView:
    """Duck-typed row slice of a Dataset, avoiding validation copies."""

    def __init__(self, X: Dataset, sl: slice):
        self.points = X.points[sl]
        self.ids = X.ids[sl]
        self.d = X.d


EUCLIDEAN = DistanceOracle()


def _check_matrix(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ClusteringError("BAD_METRIC", "distance matrix must be square")
    if not np.isfinite(m).all() or (m < 0).any():
        raise ClusteringError("BAD_METRIC", "distances must be finite and non-negative")
    if not np.array_equal(m, m.T):
        raise ClusteringError("BAD_METRIC", "distance matrix must be symmetric")
    if (np.diag(m) != 0).any():
        raise ClusteringError("BAD_METRIC", "distance matrix must have a zero diagonal")
    return m


def _check_triangle(m: np.ndarray, tol: float = 1e-9) -> None:
    for j in range(m.shape[0]):
        # m[i,k] <= m[i,j] + m[j,k] for all i, k
        if (m > m[:, j:j + 1] + m[j:j + 1, :] + tol).any():
            raise ClusteringError("BAD_METRIC", "triangle inequality violated")


def point_to_set_distance(p, H: CenterSet, oracle: DistanceOracle = EUCLIDEAN) -> float:
    """``min`` over centers of the oracle distance from ``p``.

    ``p`` is a coordinate vector, or a vertex index in GENERAL mode.
    """
    if H is None or len(H) == 0:
        raise ClusteringError("EMPTY_CENTERS")
    if oracle.is_general:
        X = Dataset(np.zeros((1, 1)), ids=[int(p)])
    else:
        X = Dataset(np.asarray(p, dtype=np.float64).reshape(1, -1))
    return float(oracle.distances(X, H).min())


def all_distances_to_set(P: Dataset, H: CenterSet, oracle: DistanceOracle = EUCLIDEAN):
    """Distance from every point to its nearest center, and that center's index.

    Ties go to the lowest center index.
    """
    if H is None or len(H) == 0:
        raise ClusteringError("EMPTY_CENTERS")
    dist = np.empty(P.n)
    nearest = np.empty(P.n, dtype=np.int64)
    for sl, D in oracle.blocks(P, H):
        nearest[sl] = D.argmin(axis=1)
        dist[sl] = D[np.arange(D.shape[0]), nearest[sl]]
    return dist, nearest
