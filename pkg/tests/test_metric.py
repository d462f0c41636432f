import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import line
from unisample import (EUCLIDEAN, OUTLIER, CenterSet, ClusteringError, Dataset, DistanceOracle, Metric,
                       all_distances_to_set, point_to_set_distance)

SQ = DistanceOracle(Metric.SQUARED_EUCLIDEAN)


def test_point_to_set_examples():
    assert point_to_set_distance([0, 0], CenterSet(coords=[[0, 0], [3, 4]])) == 0
    assert point_to_set_distance([0, 0], CenterSet(coords=[[3, 4], [6, 8]])) == 5
    assert point_to_set_distance([1], CenterSet(coords=[[0], [5]]), SQ) == 1


def test_all_distances_examples():
    d, i = all_distances_to_set(line(0, 10), CenterSet(coords=[[0]]))
    assert d.tolist() == [0, 10] and i.tolist() == [0, 0]
    d, i = all_distances_to_set(line(0, 4, 10), CenterSet(coords=[[0], [10]]))
    assert d.tolist() == [0, 4, 0] and i.tolist() == [0, 0, 1]
    d, i = all_distances_to_set(line(5), CenterSet(coords=[[0], [10]]))
    assert d.tolist() == [5] and i.tolist() == [0]


def test_empty_centers():
    with pytest.raises(ClusteringError) as e:
        CenterSet(coords=np.zeros((0, 2)))
    assert e.value.code == "EMPTY_CENTERS"
    with pytest.raises(ClusteringError) as e:
        point_to_set_distance([0], None)
    assert e.value.code == "EMPTY_CENTERS"


@pytest.mark.parametrize("pts", [[[np.nan, 1.0]], [[np.inf]], np.zeros((0, 2))])
def test_bad_dataset(pts):
    with pytest.raises(ClusteringError) as e:
        Dataset(np.asarray(pts, dtype=float))
    assert e.value.code == "BAD_DATASET"


def test_label_length_mismatch():
    with pytest.raises(ClusteringError) as e:
        Dataset(np.zeros((3, 2)), labels=[0, 1])
    assert e.value.code == "SHAPE_MISMATCH"


def test_dataset_is_immutable():
    P = Dataset(np.ones((2, 2)))
    with pytest.raises(ValueError):
        P.points[0, 0] = 5


def test_take_keeps_ids():
    P = line(0, 1, 2, 3)
    S = P.take([3, 1, 1])
    assert S.ids.tolist() == [3, 1, 1]
    assert S.take([0]).ids.tolist() == [3]


def test_general_mode_lookup():
    M = np.array([[0, 1, 4], [1, 0, 3], [4, 3, 0]], dtype=float)
    oracle = DistanceOracle.general(M)
    P = Dataset.for_metric(3)
    d, i = all_distances_to_set(P, CenterSet(indices=[2]), oracle)
    assert d.tolist() == [4, 3, 0]
    assert point_to_set_distance(0, CenterSet(indices=[1, 2]), oracle) == 1
    # a sample keeps addressing the full matrix
    d, _ = all_distances_to_set(P.take([2, 0]), CenterSet(indices=[1]), oracle)
    assert d.tolist() == [3, 1]
    with pytest.raises(ClusteringError) as e:
        all_distances_to_set(P, CenterSet(coords=[[0.0]]), oracle)
    assert e.value.code == "BAD_CENTERS"


@pytest.mark.parametrize("M", [
    [[0, 1], [2, 0]],             # asymmetric
    [[1, 1], [1, 0]],             # nonzero diagonal
    [[0, -1], [-1, 0]],           # negative
    [[0, 1, 5], [1, 0, 1], [5, 1, 0]],  # triangle violation
])
def test_bad_metric(M):
    with pytest.raises(ClusteringError) as e:
        DistanceOracle.general(np.asarray(M, dtype=float))
    assert e.value.code == "BAD_METRIC"


def test_row_blocks_match_single_pass(rng):
    P = Dataset(rng.normal(size=(1000, 3)))
    H = CenterSet(coords=rng.normal(size=(7, 3)))
    whole = EUCLIDEAN.distances(P, H)
    parts = np.vstack([D for _, D in EUCLIDEAN.blocks(P, H, rows=97)])
    assert np.array_equal(whole, parts)


points = arrays(np.float64, st.tuples(st.integers(1, 12), st.just(2)),
                elements=st.floats(-100, 100, allow_nan=False, width=32))


@settings(max_examples=60, deadline=None)
@given(points, points, st.randoms(use_true_random=False))
def test_center_permutation_and_monotonicity(P, H, r):
    P, H = Dataset(P), CenterSet(coords=H)
    d, _ = all_distances_to_set(P, H)
    perm = list(range(len(H)))
    r.shuffle(perm)
    d_perm, _ = all_distances_to_set(P, H.subset(perm))
    assert np.array_equal(d, d_perm)
    bigger = CenterSet.concat([H, CenterSet(coords=P.points[:1])])
    d_more, _ = all_distances_to_set(P, bigger)
    assert (d_more <= d).all()


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 4), elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_euclidean_axioms(X):
    P = Dataset(X)
    D = EUCLIDEAN.distances(P, P.all_as_centers())
    assert np.array_equal(D, D.T)
    assert (np.diag(D) == 0).all() and (D >= 0).all()
    assert D[0, 2] <= D[0, 1] + D[1, 2] + 1e-9


def test_nearest_ties_lowest_index():
    P = line(1, 1)
    _, i = all_distances_to_set(P, CenterSet(coords=[[0], [2], [0]]))
    assert i.tolist() == [0, 0]
    assert OUTLIER == -1
