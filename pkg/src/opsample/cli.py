"""Batch command-line front end.

Subcommands: gen (synthetic populations), run (one technique once),
eval (Monte Carlo grid), oracle (exact expectation on tiny populations),
report (plot-ready CSVs from raw rows).  Flags mirror config-file keys
one-to-one; flags win on conflict.  Errors are emitted as JSON on stderr
with a nonzero exit code.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

from .draw import RandomStream
from .harness import (
    DEFAULT_BUDGETS,
    EvalConfig,
    enumerate_expectation,
    run_experiment,
)
from .population import (
    CLASSIFICATION,
    REGRESSION,
    LabelingOracle,
    SyntheticConfig,
    generate_synthetic,
    load_population,
    true_accuracy,
    write_population_csv,
)
from .techniques import TECHNIQUES, TechniqueConfig, run_technique


def _out_dir(args) -> str:
    out = args.out or os.environ.get("OPSAMPLE_OUT", ".")
    os.makedirs(out, exist_ok=True)
    return out


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def _float_list(text):
    return [float(x) for x in text.split(",") if x]


def cmd_gen(args) -> int:
    config = SyntheticConfig(
        task=args.task,
        N=args.n,
        target_accuracy=args.accuracy,
        chi_correlation=args.rho,
        offset_scale=args.offset_scale,
    )
    pop = generate_synthetic(config, args.seed)
    out = _out_dir(args)
    csv_path = os.path.join(out, args.name + ".csv")
    write_population_csv(pop, csv_path)
    manifest = {
        "config": asdict(config),
        "seed": args.seed,
        "realized_accuracy": true_accuracy(pop),
        "population_csv": os.path.basename(csv_path),
    }
    with open(os.path.join(out, args.name + ".manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {csv_path} (N={pop.N}, realized accuracy {manifest['realized_accuracy']:.4f})")
    return 0


def cmd_run(args) -> int:
    pop = load_population(args.population)
    tc = TechniqueConfig(
        technique=args.technique,
        aux=args.aux,
        budget=args.budget,
        r=args.r,
        threshold_quantile=args.threshold_quantile,
        ces_initial=args.ces_initial,
        ces_group=args.ces_group,
        ces_candidates=args.ces_candidates,
        ces_bins=args.ces_bins,
        k=args.k,
        failure_threshold=args.failure_threshold,
        record_trace=args.trace,
    )
    if args.aux is not None and pop.task == REGRESSION and args.aux in ("confidence", "dsa"):
        raise ValueError(f"auxiliary variable {args.aux!r} is classification-only")
    oracle = LabelingOracle(pop)
    result = run_technique(pop, oracle, tc, RandomStream(args.seed))
    print(f"xi_hat = {result.xi_hat:.6f}")
    print(f"distinct labels used = {result.distinct_labeled}")
    print(f"failures exposed = {result.failures}")
    if args.technique in ("ssrs",):
        print(f"allocation = {result.knobs['allocation']}")
    out = _out_dir(args)
    path = os.path.join(out, f"result_{args.technique}.json")
    with open(path, "w") as fh:
        fh.write(result.to_json(include_trace=args.trace))
        fh.write("\n")
    print(f"wrote {path}")
    return 0


def _eval_config_from(args) -> EvalConfig:
    file_cfg = {}
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return file_cfg.get(key, default)

    return EvalConfig(
        techniques=pick(args.techniques, "techniques", ["srs"]),
        aux=pick(args.aux, "aux", [None]),
        budgets=pick(args.budgets, "budgets", list(DEFAULT_BUDGETS)),
        repetitions=pick(args.reps, "repetitions", 30),
        master_seed=pick(args.seed, "master_seed", 0),
        offset_thresholds=pick(args.thresholds, "offset_thresholds", None)
        or [2.5 * i for i in range(11)],
        failure_threshold=pick(args.failure_threshold, "failure_threshold", 12.5),
        k=pick(args.k, "k", 10),
        technique_overrides=file_cfg.get("technique_overrides", {}),
        jobs=pick(args.jobs, "jobs", 1),
    ), file_cfg


def cmd_eval(args) -> int:
    config, file_cfg = _eval_config_from(args)
    pop_path = args.population or file_cfg.get("population")
    if not pop_path:
        raise ValueError("eval needs --population or a population key in the config file")
    pop = load_population(pop_path)
    report = run_experiment(pop, config)
    out = _out_dir(args)
    report.write_summary_csv(os.path.join(out, "summary.csv"))
    report.write_raw_csv(os.path.join(out, "raw.csv"))
    manifest_path = os.path.join(out, "manifest.json")
    report.write_manifest_json(manifest_path)
    # The manifest must be able to reproduce this run byte-for-byte.
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    manifest["population"] = os.path.abspath(pop_path)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out}/summary.csv, {out}/raw.csv, {out}/manifest.json")
    if report.skipped:
        print(f"skipped {len(report.skipped)} incompatible cell(s)")
    return 0


def cmd_oracle(args) -> int:
    pop = load_population(args.population)
    tc = TechniqueConfig(
        technique=args.technique,
        aux=args.aux,
        budget=args.budget,
        r=args.r,
        threshold_quantile=args.threshold_quantile,
        k=args.k,
    )
    expectation = enumerate_expectation(pop, tc, args.budget)
    truth = 1.0 - true_accuracy(pop)  # theta or Delta
    gap = abs(expectation - truth)
    print(f"exact E[estimator] = {expectation!r}")
    print(f"true value         = {truth!r}")
    print(f"absolute gap       = {gap!r}")
    return 0


def cmd_report(args) -> int:
    with open(args.raw, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError("empty raw file")
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    true_xi = manifest["true_xi"]

    out = _out_dir(args)
    groups = {}
    for row in rows:
        key = (row["technique"], row["aux"], int(row["budget"]))
        groups.setdefault(key, []).append(row)

    with open(os.path.join(out, "rmse_vs_budget.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["technique", "aux", "budget", "rmse", "mean_failures"])
        for (technique, aux, budget), cell_rows in sorted(groups.items()):
            errs = [(true_xi - float(r["xi_hat"])) ** 2 for r in cell_rows]
            fails = [float(r["failures"]) for r in cell_rows]
            writer.writerow(
                [technique, aux, budget,
                 repr((sum(errs) / len(errs)) ** 0.5),
                 repr(sum(fails) / len(fails))]
            )

    offset_cols = [c for c in rows[0] if c.startswith("n_offset_ge_")]
    if offset_cols:
        with open(os.path.join(out, "offset_histogram.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["technique", "aux", "budget", "threshold", "mean_count"])
            for (technique, aux, budget), cell_rows in sorted(groups.items()):
                for col in offset_cols:
                    mean = sum(float(r[col]) for r in cell_rows) / len(cell_rows)
                    writer.writerow([technique, aux, budget, col.split("_")[-1], repr(mean)])
    print(f"wrote plot-ready CSVs to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opsample",
        description="Budgeted sampling techniques for estimating model operational accuracy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic population")
    p.add_argument("--task", choices=[CLASSIFICATION, REGRESSION], default=CLASSIFICATION)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--accuracy", type=float, default=0.9)
    p.add_argument("--rho", type=float, default=0.8)
    p.add_argument("--offset-scale", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="population")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("run", help="run one technique once")
    p.add_argument("--population", required=True)
    p.add_argument("--technique", choices=TECHNIQUES, required=True)
    p.add_argument("--aux", default=None)
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--r", type=float, default=0.8)
    p.add_argument("--threshold-quantile", type=float, default=0.7)
    p.add_argument("--ces-initial", type=int, default=30)
    p.add_argument("--ces-group", type=int, default=5)
    p.add_argument("--ces-candidates", type=int, default=300)
    p.add_argument("--ces-bins", type=int, default=10)
    p.add_argument("--failure-threshold", type=float, default=12.5)
    p.add_argument("--trace", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="run a Monte Carlo experiment grid")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--population", default=None)
    p.add_argument("--techniques", type=lambda s: s.split(","), default=None)
    p.add_argument(
        "--aux",
        type=lambda s: [None if x in ("", "none") else x for x in s.split(",")],
        default=None,
    )
    p.add_argument("--budgets", type=_int_list, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--thresholds", type=_float_list, default=None)
    p.add_argument("--failure-threshold", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle", help="exact estimator expectation on a tiny population")
    p.add_argument("--population", required=True)
    p.add_argument("--technique", choices=TECHNIQUES, required=True)
    p.add_argument("--aux", default=None)
    p.add_argument("--budget", type=int, default=2)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--r", type=float, default=0.8)
    p.add_argument("--threshold-quantile", type=float, default=0.7)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("report", help="plot-ready CSVs from raw per-repetition rows")
    p.add_argument("--raw", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": str(exc), "type": type(exc).__name__}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
