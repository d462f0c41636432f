import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from unisample import (OUTLIER, BoundFamily, ClusteringError, Dataset, FrameworkConfig, LemmaCheck,
                       Objective, SignificanceParams, SolverKind, SolverSpec, Theorem, Variant,
                       budget_kprime, empirical_lemma_check, extreme_instance, implied_eta_kcenter1,
                       kmeanspp_lloyd, multi_run_select, run_variant, sample_size_kcenter1,
                       sample_size_kcenter2, sample_size_kmeans, sample_uniform, theorem_bounds,
                       trimmed_cost, uni_kcenter_1, uni_kcenter_2, uni_kmeans_1, uni_kmeans_2)
from unisample.framework import bounds_for_variant


def blobs(rng, k=3, per=200, spread=1.0, z=6, d=2):
    centers = rng.uniform(0, 100, size=(k, d))
    X = np.vstack([rng.normal(c, spread, size=(per, d)) for c in centers] + [rng.uniform(400, 500, (z, d))])
    labels = np.concatenate([np.repeat(np.arange(k), per), np.full(z, OUTLIER)])
    return Dataset(X, labels=labels)


# ------------------------------------------------------------------ sampling

def test_sample_uniform_examples():
    assert sample_uniform(1, 5, seed=0).tolist() == [0] * 5
    assert np.array_equal(sample_uniform(100, 30, seed=4), sample_uniform(100, 30, seed=4))
    with pytest.raises(ClusteringError) as e:
        sample_uniform(10, 0)
    assert e.value.code == "BAD_SAMPLE_SIZE"


def test_sample_uniform_frequencies():
    n, m, reps = 10 ** 4, 10 ** 3, 200
    hits = np.zeros(n)
    for s in range(reps):
        hits += np.bincount(sample_uniform(n, m, seed=s), minlength=n)
    mean = reps * m / n
    sigma = math.sqrt(reps * m * (1 / n) * (1 - 1 / n))
    assert np.abs(hits - mean).max() <= 5 * sigma


def test_sample_uniform_accepts_dataset():
    P = Dataset(np.zeros((3, 1)))
    assert sample_uniform(P, 10, seed=1).max() < 3


# ------------------------------------------------------------- calculators

def test_sample_size_values():
    assert sample_size_kcenter1(8, 0.4, 0.2) == 74
    assert sample_size_kcenter1(1, 1.0, 1 / math.e) == 1
    assert sample_size_kcenter2(2, 0.5, 0.5, 0.5) == 100
    assert sample_size_kmeans(2, 0.5, 0.5, 0.5, 0.1) == 832
    assert budget_kprime(200, 8, 0.16, 0.5) == 8
    assert budget_kprime(200, 8, 0.0, 0.5) == 0


def test_sample_size_linearity():
    # doubling eps1 halves the value before rounding up
    raw = 8 / 0.2 * math.log(8 / 0.3)
    assert sample_size_kcenter1(8, 0.2, 0.3) == math.ceil(raw)
    assert sample_size_kcenter1(8, 0.4, 0.3) == math.ceil(raw / 2)


def test_kmeans_size_both_branches():
    # delta-term dominates with large xi, Hoeffding term with small xi
    assert sample_size_kmeans(4, 0.5, 0.3, 0.2, 0.9) == sample_size_kcenter2(4, 0.5, 0.3, 0.2)
    assert sample_size_kmeans(4, 0.5, 0.3, 0.9, 0.05) > sample_size_kcenter2(4, 0.5, 0.3, 0.9)


def test_calculator_ranges():
    for bad in [lambda: sample_size_kcenter1(0, 0.5, 0.5), lambda: sample_size_kcenter1(2, 0, 0.5),
                lambda: sample_size_kcenter2(2, 0.5, 1.0, 0.5), lambda: sample_size_kmeans(2, 0.5, 0.5, 0.5, 0)]:
        with pytest.raises(ClusteringError):
            bad()


unit = st.floats(0.01, 0.99)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 50), unit, unit, unit, unit, unit)
def test_sample_sizes_monotone(k, eps1, eta, delta, xi, bump):
    up = lambda v: min(0.995, v + bump * (0.995 - v))
    for f, args in [(sample_size_kcenter1, (k, eps1, eta)), (sample_size_kcenter2, (k, eps1, eta, delta)),
                    (sample_size_kmeans, (k, eps1, eta, delta, xi))]:
        base = f(*args)
        assert f(k + 1, *args[1:]) >= base
        for i in range(1, len(args)):
            if f is sample_size_kmeans and i == 3:
                continue  # the Hoeffding term grows with delta, see below
            bigger = list(args)
            bigger[i] = up(args[i])
            assert f(*bigger) <= base


def test_kmeans_size_grows_with_delta_when_hoeffding_dominates():
    assert sample_size_kmeans(1, 0.5, 0.5, 0.87, 0.5) > sample_size_kmeans(1, 0.5, 0.5, 0.5, 0.5)


def test_implied_eta_inverts_formula():
    eta = implied_eta_kcenter1(100, 5, 0.1)
    assert eta == pytest.approx(5 * math.exp(-2), rel=1e-12)
    assert (5 / 0.1) * math.log(5 / eta) == pytest.approx(100, rel=1e-12)


# ------------------------------------------------------------------- bounds

def test_theorem_bound_values():
    b = theorem_bounds(BoundFamily.MEANS, Theorem.THM3, c=1, delta=0, eta=0.5)
    assert (b.alpha, b.beta, b.t, b.applicable) == (10, 8, None, True)
    assert b.success_prob == 0.125
    # t = eta (1 - delta) eps1 / eps2 = 0.5 * 4 = 2
    b = theorem_bounds(BoundFamily.MEANS, Theorem.THM4, c=1, delta=0, eta=0.5, eps1=0.4, eps2=0.1)
    assert b.t == pytest.approx(2, abs=1e-12)
    assert b.alpha == pytest.approx(18, abs=1e-12) and b.beta == pytest.approx(16, abs=1e-12)
    b = theorem_bounds(BoundFamily.MEDIAN, Theorem.THM3, c=1, delta=0)
    assert (b.alpha, b.beta) == (3, 2)


def test_theorem_bounds_center():
    b = theorem_bounds(BoundFamily.CENTER, Theorem.THM1, eta=0.2)
    assert b.alpha == 4 and b.success_prob == pytest.approx(0.64)
    # eps1/eps2 = 4 with eta = delta = 1/2 sits exactly at the threshold 1/(eta(1-delta)) = 4
    assert not theorem_bounds(BoundFamily.CENTER, Theorem.THM2, c=3, delta=0.5, eta=0.5, eps1=0.4, eps2=0.1).applicable
    b = theorem_bounds(BoundFamily.CENTER, Theorem.THM2, c=3, delta=0.5, eta=0.5, eps1=0.41, eps2=0.1)
    assert b.applicable and b.alpha == 5


def test_thm4_not_applicable_below_one():
    b = theorem_bounds(BoundFamily.MEANS, Theorem.THM4, c=1, delta=0.5, eta=0.5, eps1=0.1, eps2=0.1)
    assert b.t == 0.25 and not b.applicable and math.isinf(b.alpha)


@pytest.mark.parametrize("family", [BoundFamily.MEANS, BoundFamily.MEDIAN])
def test_thm4_converges_to_thm3(family):
    thm3 = theorem_bounds(family, Theorem.THM3, c=2, delta=0.3, eta=0.4)
    # t = eta (1 - delta) ratio = 1e9
    ratio = 1e9 / (0.4 * 0.7)
    thm4 = theorem_bounds(family, Theorem.THM4, c=2, delta=0.3, eta=0.4, eps1=ratio * 1e-12, eps2=1e-12)
    assert thm4.t == pytest.approx(1e9)
    assert abs(thm4.alpha - thm3.alpha) <= 1e-6 * thm3.alpha
    assert abs(thm4.beta - thm3.beta) <= 1e-6 * thm3.beta
    assert thm4.alpha >= (2 if family is BoundFamily.MEANS else 1)


def test_boosted_success_probability():
    p_single = (1 - 0.8) ** 2
    assert 1 - (1 - p_single) ** 50 == pytest.approx(0.87, abs=0.005)


def test_bound_numeric_and_symbolic():
    b = theorem_bounds(BoundFamily.MEANS, Theorem.THM3, c=1, delta=0, xi=0.1)
    assert b.bound(2.0) is None
    assert b.bound(2.0, diameter=10.0) == pytest.approx(10 * 2 + 8 * 0.1 * 100)


def test_bounds_for_variant_marks_heuristics():
    p = SignificanceParams(0.32, 0.16, eta=0.5, delta=0.5)
    assert not bounds_for_variant(Variant.UC1, p).heuristic
    b = bounds_for_variant(Variant.UM2, p)
    assert b.heuristic and b.t == pytest.approx(0.5) and not b.applicable


# ----------------------------------------------------------------- pipelines

def test_config_practical_tau():
    n, k, z = 10000, 3, 100
    primes = [FrameworkConfig.practical(n, k, z, tau=t).k_prime for t in (1, 4 / 3, 5 / 3, 2)]
    assert primes == [0, 1, 2, 3]
    c = FrameworkConfig.practical(n, k, z, sample_size=200)
    # z' = 2 (eps2 / k)|S| = 2 (z / n)|S|
    assert c.z_prime == 4 and c.sample_size == 200
    assert FrameworkConfig.practical(n, k, z).sample_size == 50
    assert FrameworkConfig.practical(n, k, z, tau=2).tau(k) == 2


def test_config_theoretical_and_json():
    p = SignificanceParams(0.4, 0.1, eta=0.2, delta=0.5, xi=0.3)
    c = FrameworkConfig.theoretical(Variant.UC1, 8, p)
    assert c.sample_size == 74 and c.k_prime == budget_kprime(74, 8, 0.1, 0.2)
    c2 = FrameworkConfig.theoretical(Variant.UM2, 8, p, solver=SolverSpec(SolverKind.KMEANS_MM), trials=3)
    assert c2.z_prime > 0 and c2.k_prime == 0
    assert FrameworkConfig.from_json(c2.to_json()) == c2


def test_config_validation():
    with pytest.raises(ClusteringError):
        FrameworkConfig(sample_size=0)
    with pytest.raises(ClusteringError):
        FrameworkConfig(sample_size=5, trials=0)
    with pytest.raises(ClusteringError):
        SignificanceParams(0.0, 0.1)


def test_center_counts_and_exact_costs(rng):
    P = blobs(rng)
    k, z = 3, 6
    cfg = FrameworkConfig(sample_size=60, k_prime=3, z_prime=2, seed=5)
    for variant, n_centers, obj in [(Variant.UC1, 6, Objective.KCENTER), (Variant.UC2, 3, Objective.KCENTER),
                                    (Variant.UM1, 6, Objective.KMEANS), (Variant.UM2, 3, Objective.KMEANS),
                                    (Variant.UMED1, 6, Objective.KMEDIAN), (Variant.UMED2, 3, Objective.KMEDIAN)]:
        r = run_variant(P, k, z, cfg, variant)
        assert len(r.centers) == n_centers
        assert len(r.outliers) == z
        assert r.cost.objective is obj
        assert r.cost.value == trimmed_cost(P, r.centers, z, obj).value
        assert set(r.timings) == {"sample", "solve", "assign"}
        r2 = run_variant(P, k, z, cfg, variant)
        assert r2.cost.value == r.cost.value and np.array_equal(r2.assignment, r.assignment)


def test_named_entry_points(rng):
    P = blobs(rng)
    cfg = FrameworkConfig(sample_size=80, k_prime=2, z_prime=3, seed=1)
    assert uni_kcenter_1(P, 3, 6, cfg).info["variant"] == "uc1"
    assert uni_kcenter_2(P, 3, 6, cfg).info["variant"] == "uc2"
    assert uni_kmeans_1(P, 3, 6, cfg).info["variant"] == "um1"
    assert uni_kmeans_2(P, 3, 6, cfg).info["variant"] == "um2"
    med = FrameworkConfig(sample_size=80, k_prime=2, z_prime=3, objective=Objective.KMEDIAN)
    assert uni_kmeans_1(P, 3, 6, med).info["variant"] == "umed1"
    assert uni_kmeans_2(P, 3, 6, med).cost.objective is Objective.KMEDIAN


def test_um1_is_kmeanspp_on_the_sample(rng):
    P = blobs(rng)
    cfg = FrameworkConfig(sample_size=100, k_prime=0, seed=9)
    r = uni_kmeans_1(P, 3, 0, cfg)
    S = P.take(r.info["sample_ids"])
    solver_seed = np.random.SeedSequence(9).spawn(2)[1]
    assert np.array_equal(r.centers.coords, kmeanspp_lloyd(S, 3, seed=solver_seed).coords)


def test_zero_spread_clusters_cost_zero():
    X = np.repeat(np.array([[0.0, 0.0], [50.0, 0.0], [0.0, 50.0]]), 100, axis=0)
    P = Dataset(np.vstack([X, [[1000.0, 1000.0], [-900.0, 800.0]]]))
    for s in range(5):
        # far more than the expected single draw of an outlier
        cfg = FrameworkConfig(sample_size=150, z_prime=10, seed=s)
        assert uni_kcenter_2(P, 3, 2, cfg).cost.value == 0
        assert uni_kcenter_1(P, 3, 2, FrameworkConfig(sample_size=150, k_prime=2, seed=s)).cost.value == 0
        assert uni_kmeans_2(Dataset(X), 3, 0, FrameworkConfig(sample_size=50, seed=s)).cost.value == 0


def test_sample_size_errors(rng):
    P = blobs(rng, per=5, z=0)
    with pytest.raises(ClusteringError) as e:
        uni_kcenter_1(P, 2, 0, FrameworkConfig(sample_size=P.n + 1))
    assert e.value.code == "BAD_SAMPLE_SIZE"
    with pytest.raises(ClusteringError) as e:
        uni_kcenter_1(P, 3, 0, FrameworkConfig(sample_size=4, k_prime=2))
    assert e.value.code == "K_TOO_LARGE"


def test_multi_run_single_trial_is_single_run(rng):
    P = blobs(rng)
    for variant in Variant:
        cfg = FrameworkConfig(sample_size=70, k_prime=2, z_prime=3, trials=1, seed=13)
        a = multi_run_select(P, 3, 6, cfg, variant)
        b = run_variant(P, 3, 6, cfg, variant)
        assert a.cost.value == b.cost.value
        assert np.array_equal(a.assignment, b.assignment)
        assert np.array_equal(a.outliers, b.outliers)


def test_multi_run_picks_minimum(rng):
    P = blobs(rng, spread=5.0)
    cfg = FrameworkConfig(sample_size=40, z_prime=2, trials=6, seed=100)
    r = multi_run_select(P, 3, 6, cfg, Variant.UM2)
    singles = [run_variant(P, 3, 6, FrameworkConfig(sample_size=40, z_prime=2, seed=100 + l), Variant.UM2)
               for l in range(6)]
    costs = [trimmed_cost(P, s.centers, 6, Objective.KMEANS).value for s in singles]
    assert r.info["candidate_costs"] == costs
    assert r.cost.value == min(costs)
    assert r.info["best_trial"] == costs.index(min(costs))
    par = multi_run_select(P, 3, 6, cfg, Variant.UM2, workers=3)
    assert par.cost.value == r.cost.value and np.array_equal(par.assignment, r.assignment)


def test_extreme_instance_needs_full_budget():
    k, kp = 3, 4
    P = extreme_instance(k, kp, x=100.0, cluster_size=20)
    # the sample is the whole instance: every cluster and all k' outliers
    S = P.take(np.arange(P.n))
    from unisample import gonzalez
    assert trimmed_cost(S, gonzalez(S, k + kp, seed=0), 0).value == 0
    assert trimmed_cost(S, gonzalez(S, k + kp - 1, seed=0), 0).value >= 50


# ------------------------------------------------------------- lemma checks

def test_lemma_check_single_cluster():
    P = Dataset(np.zeros((50, 1)), labels=np.zeros(50))
    p = SignificanceParams(1.0, 0.0, eta=0.3)
    rate, bound = empirical_lemma_check(P, p, LemmaCheck.L1_I, repetitions=100, seed=0)
    assert rate == 0 and bound == 0.3


def test_lemma_check_needs_labels():
    with pytest.raises(ClusteringError) as e:
        empirical_lemma_check(Dataset(np.zeros((5, 1))), SignificanceParams(0.5, 0.1), LemmaCheck.L2)
    assert e.value.code == "NO_GROUND_TRUTH"
    P = Dataset(np.zeros((5, 1)), labels=np.zeros(5))
    with pytest.raises(ClusteringError):
        empirical_lemma_check(P, SignificanceParams(0.5, 0.1), LemmaCheck.L2, repetitions=10)


def test_lemma_checks_on_blobs(rng):
    P = blobs(rng, k=4, per=250, z=20)
    # eps1 = k min|C| / n = 4 * 250 / 1020, eps2 = 4 * 20 / 1020
    p = SignificanceParams(1000 / 1020, 80 / 1020, eta=0.5, delta=0.5)
    for which in LemmaCheck:
        rate, eta = empirical_lemma_check(P, p, which, repetitions=400, seed=3)
        assert rate <= eta + 3 * math.sqrt(eta / 400)
