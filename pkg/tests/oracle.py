"""Independent reference computations used as test oracles.

Plain Python floats and explicit subset enumeration; nothing here calls
into the library under test.
"""

import itertools
import math


def dist(p, q):
    return math.sqrt(math.fsum((a - b) ** 2 for a, b in zip(p, q)))


def subset_trimmed(points, centers, z, objective):
    """Minimum over every size-(n - z) subset of the untrimmed objective."""
    n = len(points)
    d = [min(dist(p, c) for c in centers) for p in points]
    best = math.inf
    for keep in itertools.combinations(range(n), n - z):
        vals = [d[i] for i in keep]
        if objective == "kcenter":
            v = max(vals)
        elif objective == "kmedian":
            v = math.fsum(vals) / len(vals)
        else:
            v = math.fsum(x * x for x in vals) / len(vals)
        best = min(best, v)
    return best


def opt_radius(points, k, z):
    """Medoid-restricted optimal k-center radius with z outliers."""
    best = math.inf
    for combo in itertools.combinations(range(len(points)), k):
        d = sorted(min(dist(p, points[c]) for c in combo) for p in points)
        best = min(best, d[len(points) - z - 1])
    return best
