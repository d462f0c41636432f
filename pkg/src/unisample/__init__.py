"""Uniform sampling for k-center, k-median and k-means clustering with outliers."""

from .datagen import (GroundTruth, SyntheticSpec, add_outliers, extreme_instance, generate_synthetic,
                      load_csv, write_csv)
from .errors import ClusteringError, NormalizationWarning
from .evaluation import ExperimentRecord, normalized_objective, precision, purity, time_phases
from .framework import (BoundFamily, BoundReport, FrameworkConfig, LemmaCheck, SignificanceParams,
                        Theorem, Variant, budget_kprime, empirical_lemma_check, implied_eta_kcenter1,
                        multi_run_select, run_variant, sample_size_kcenter1, sample_size_kcenter2,
                        sample_size_kmeans, sample_uniform, theorem_bounds, uni_kcenter_1,
                        uni_kcenter_2, uni_kmeans_1, uni_kmeans_2)
from .metric import (EUCLIDEAN, OUTLIER, CenterSet, Dataset, DistanceOracle, Metric,
                     all_distances_to_set, point_to_set_distance)
from .objectives import (ClusteringResult, Objective, TrimmedCost, assign_with_outliers,
                         brute_force_optimal, trimmed_cost)
from .solvers import (SolverKind, SolverSpec, charikar_outliers, gonzalez, kmeans_minus_minus,
                      kmeanspp_lloyd, kmeanspp_seeding, run_solver)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
