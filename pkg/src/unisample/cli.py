"""Command-line driver: ``generate``, ``run`` and ``verify``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .datagen import SyntheticSpec, generate_synthetic, truth_path, write_csv
from .errors import ClusteringError
from .framework import DEFAULT_SAMPLE_RATIO, DEFAULT_ZPRIME_MULT
from .runner import (ALGORITHMS, RunPlan, default_lemma_instance, execute, failed_cells,
                     load_dataset, suite_charikar, suite_gonzalez, suite_lemmas, suite_oracle,
                     write_outputs)


def _floats(s: str) -> list[float]:
    return [float(v) for v in s.split(",") if v]


def _ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v]


def _add_synthetic(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("synthetic instance")
    g.add_argument("--n", type=int, default=100_000)
    g.add_argument("--d", type=int, default=100)
    g.add_argument("--clusters", type=int, default=8, help="number of generated clusters")
    g.add_argument("--outlier-frac", type=float, default=0.02)
    g.add_argument("--eps-ratio", type=float, default=None,
                   help="smallest cluster = eps_ratio * z points (eps1/eps2)")
    g.add_argument("--side", type=float, default=400.0)
    g.add_argument("--sd", type=float, default=None, help="per-coordinate sd (default sqrt(1000))")
    g.add_argument("--ratio-max", type=float, default=50.0)
    g.add_argument("--data-seed", type=int, default=0)


def _spec(a, k=None, z_frac=None, seed=None) -> SyntheticSpec:
    k = a.clusters if k is None else k
    z_frac = a.outlier_frac if z_frac is None else z_frac
    seed = a.data_seed if seed is None else seed
    kw = dict(hypercube_side=a.side, size_ratio_max=a.ratio_max, seed=seed)
    if a.sd is not None:
        kw["cluster_sd"] = a.sd
    if a.eps_ratio is not None:
        return SyntheticSpec.from_significance(a.n, a.d, k, z_frac, a.eps_ratio, **kw)
    return SyntheticSpec(n=a.n, d=a.d, k=k, z=int(round(z_frac * a.n)), **kw)


def cmd_generate(a) -> int:
    spec = _spec(a, k=a.k, z_frac=a.z_frac, seed=a.seed)
    P, truth = generate_synthetic(spec)
    out = Path(a.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    write_csv(out, P)
    truth.save(truth_path(out))
    print(f"wrote {out} and {truth_path(out)}")
    print(f"n={P.n} d={P.d} k={spec.k} z={spec.z}")
    print(f"eps1={truth.eps1_actual:.6g} eps2={truth.eps2_actual:.6g} "
          f"r_truth={truth.r_truth:.6g} L_truth={truth.L_truth:.6g}{'' if truth.L_exact else ' (bound)'}")
    return 0


def cmd_run(a) -> int:
    if a.dataset:
        P, truth = load_dataset(a.dataset)
        name = Path(a.dataset).stem
    else:
        P, truth = generate_synthetic(_spec(a))
        name = f"synthetic-n{a.n}-d{a.d}-k{a.clusters}-s{a.data_seed}"
    plan = RunPlan(
        algorithms=a.algo,
        ks=a.k,
        z_fracs=a.z_frac if a.z_frac is not None else [None],
        sample_ratios=a.sample_ratio,
        taus=a.tau,
        zprime_mults=a.zprime_mult,
        trials=a.trials,
        inner_runs=a.inner_runs,
        seed=a.seed,
        out=Path(a.out),
    )
    records = execute(plan, P, truth, name)
    rows = write_outputs(plan.out, records)
    for row in rows:
        mean = row["objective_mean"]
        print(f"cell {row['cell']:3d} {row['algorithm']:9s} k={row['k']} "
              f"objective={'-' if mean is None else f'{mean:.6g}'} failed={row['failed']}/{row['trials']}")
    bad = failed_cells(rows)
    if bad:
        print(f"cells failed entirely: {bad}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(a) -> int:
    suites = a.suite
    if "all" in suites:
        suites = ["oracle", "gonzalez", "charikar", "lemmas"]
    results = []
    if "oracle" in suites:
        results.append(suite_oracle(a.instances, a.seed))
    if "gonzalez" in suites:
        results.append(suite_gonzalez(a.instances, a.seed + 1))
    if "charikar" in suites:
        results.append(suite_charikar(a.instances, a.seed + 2))
    if "lemmas" in suites:
        if a.dataset:
            P, truth = load_dataset(a.dataset)
            if truth is None:
                raise ClusteringError("NO_GROUND_TRUTH", f"{a.dataset} has no labels")
            k = len(truth.cluster_sizes)
        else:
            P, truth, k = default_lemma_instance(a.seed)
        results += suite_lemmas(P, truth, k, eta=a.eta, delta=a.delta, repetitions=a.repetitions, seed=a.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    if a.json:
        print(json.dumps([r.__dict__ for r in results]))
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="unisample",
                                description="Uniform-sampling clustering with outliers.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance and its truth sidecar")
    g.add_argument("--k", type=int, default=8)
    g.add_argument("--z-frac", type=float, default=0.02)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="CSV path; truth goes to <stem>.truth.json")
    _add_synthetic(g)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run an experiment grid")
    r.add_argument("--dataset", help="CSV file; omitted means a synthetic instance")
    r.add_argument("--algo", type=lambda s: s.split(","), default=["um2"],
                   help=f"comma list from {{{','.join(ALGORITHMS)}}}")
    r.add_argument("--k", type=_ints, default=[8])
    r.add_argument("--z-frac", type=_floats, default=None,
                   help="outlier fractions; default is the ground-truth count")
    r.add_argument("--sample-ratio", type=_floats, default=[DEFAULT_SAMPLE_RATIO])
    r.add_argument("--tau", type=_floats, default=[2.0])
    r.add_argument("--zprime-mult", type=_floats, default=[DEFAULT_ZPRIME_MULT])
    r.add_argument("--trials", type=int, default=20)
    r.add_argument("--inner-runs", type=int, default=None,
                   help="candidates per trial (default 10 for uc2/um2/umed2, 1 otherwise)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default="results")
    _add_synthetic(r)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run the property suites")
    v.add_argument("--suite", type=lambda s: s.split(","), default=["all"],
                   help="comma list from {oracle,gonzalez,charikar,lemmas,all}")
    v.add_argument("--instances", type=int, default=200)
    v.add_argument("--repetitions", type=int, default=1000)
    v.add_argument("--eta", type=float, default=0.1)
    v.add_argument("--delta", type=float, default=0.5)
    v.add_argument("--dataset", help="labeled CSV for the lemma suite")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--json", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return a.func(a)
    except ClusteringError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
