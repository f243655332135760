"""Evaluation harness: metrics, the Monte Carlo grid, and the exact oracle.

The exact oracle enumerates every sample path of a technique on a tiny
population and returns the estimator's exact expectation; it is the
independent check behind the unbiasedness claims.  Everything else here is
repeated-run machinery: RMSE/RMedSE, failure statistics, offset histograms,
and budget-sensitivity summaries.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .auxvar import selection_probabilities
from .draw import RandomStream, derive_seed
from .partition import kmeans_1d
from .population import CLASSIFICATION, REGRESSION, LabelingOracle, Population, true_accuracy
from .techniques import (
    CHI_TECHNIQUES,
    TechniqueConfig,
    deepest_step_probabilities,
    run_technique,
    ssrs_allocation,
)

__all__ = [
    "EvalConfig",
    "EvalReport",
    "rmse",
    "rmedse",
    "offset_histogram",
    "run_experiment",
    "sensitivity_summary",
    "enumerate_expectation",
    "enumerate_paths",
    "NotEnumerableError",
    "IntractableError",
]

#: Auxiliary variables that only make sense for classification tasks.
CLASSIFICATION_ONLY_AUX = {"confidence", "dsa"}


def rmse(estimates, true_xi: float) -> float:
    """Root mean squared error of accuracy estimates against the truth."""
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise ValueError("empty estimate vector")
    return float(np.sqrt(np.mean((true_xi - est) ** 2)))


def rmedse(estimates, true_xi: float) -> float:
    """Root of the median squared error; robust to outlier repetitions."""
    est = np.asarray(estimates, dtype=float)
    if est.size == 0:
        raise ValueError("empty estimate vector")
    return float(np.sqrt(np.median((true_xi - est) ** 2)))


def offset_histogram(offsets, thresholds) -> np.ndarray:
    """Count of offsets >= y for each threshold y (ascending)."""
    offs = np.asarray(offsets, dtype=float)
    thr = np.asarray(thresholds, dtype=float)
    if thr.size and np.any(np.diff(thr) < 0):
        raise ValueError("thresholds must be ascending")
    return np.array([int(np.count_nonzero(offs >= y)) for y in thr])


# ---------------------------------------------------------------------------
# Exact enumeration oracle


class NotEnumerableError(ValueError):
    """Technique whose path space depends on observed data; use Monte Carlo."""


class IntractableError(ValueError):
    """Population/budget too large for exhaustive path enumeration."""


def _outcome_values(pop: Population) -> np.ndarray:
    y = pop._true_outcomes()
    return y if pop.task == CLASSIFICATION else y**2


def _chi_for(pop: Population, config: TechniqueConfig) -> np.ndarray:
    if config.aux is not None:
        return pop.aux_vector(config.aux).values
    if "chi" in pop.aux_names:
        return pop.aux_vector("chi").values
    raise ValueError("enumeration needs an auxiliary variable for this technique")


def _enum_srs(pop, n):
    y = _outcome_values(pop)
    p = (1.0 / pop.N) ** n
    for tup in itertools.product(range(pop.N), repeat=n):
        yield p, float(np.mean(y[list(tup)]))


def _enum_sups(pop, chi, n):
    y = _outcome_values(pop)
    pi = selection_probabilities(chi)
    for tup in itertools.product(range(pop.N), repeat=n):
        idx = list(tup)
        prob = float(np.prod(pi[idx]))
        est = float(np.sum(y[idx] / pi[idx])) / (n * pop.N)
        yield prob, est


def _compositions(ids, sizes):
    """All ordered set-compositions of ids with the given block sizes."""
    if not sizes:
        yield []
        return
    first, rest = sizes[0], sizes[1:]
    for block in itertools.combinations(ids, first):
        remaining = [i for i in ids if i not in block]
        for tail in _compositions(remaining, rest):
            yield [list(block)] + tail


def _enum_rhcs(pop, chi, n):
    y = _outcome_values(pop)
    pi = selection_probabilities(chi)
    N = pop.N
    base, rem = divmod(N, n)
    sizes = [base + 1] * rem + [base] * (n - rem)
    comp_prob = math.prod(math.factorial(s) for s in sizes) / math.factorial(N)
    for groups in _compositions(list(range(N)), sizes):
        per_group = []
        for group in groups:
            q_r = float(pi[group].sum())
            per_group.append([(pi[i] / q_r, y[i] * q_r / pi[i]) for i in group])
        for picks in itertools.product(*per_group):
            prob = comp_prob * math.prod(p for p, _ in picks)
            est = sum(v for _, v in picks) / N
            yield prob, est


def _enum_ssrs(pop, chi, n, config):
    y = _outcome_values(pop)
    pm = kmeans_1d(chi, config.k, config.partition_seed)
    alloc = ssrs_allocation(pm, chi, n)
    per_partition = []
    for p in range(pm.P):
        n_p = int(alloc.n_p[p])
        members = list(np.flatnonzero(pm.assignment == p))
        if n_p == 0:
            per_partition.append([(1.0, 0.0)])
            continue
        combos = list(itertools.combinations(members, n_p))
        w = 1.0 / len(combos)
        per_partition.append(
            [(w, pm.sizes[p] * float(np.mean(y[list(c)]))) for c in combos]
        )
    for picks in itertools.product(*per_partition):
        prob = math.prod(p for p, _ in picks)
        est = sum(v for _, v in picks) / pop.N
        yield prob, est


def _enum_twoups(pop, chi, n, config):
    y = _outcome_values(pop)
    pi = selection_probabilities(chi)
    pm = kmeans_1d(chi, config.k, config.partition_seed)
    members = [list(np.flatnonzero(pm.assignment == p)) for p in range(pm.P)]
    psi = np.array([float(pi[m].sum()) for m in members])
    psi = psi / psi.sum()

    def recurse(step, pools, prob, acc):
        if step == n:
            yield prob, acc / (pop.N * n)
            return
        for p in range(pm.P):
            pool = pools[p]
            if not pool:
                pool = members[p]  # exhausted pool restored
            for j, rid in enumerate(pool):
                new_pools = list(pools)
                new_pools[p] = pool[:j] + pool[j + 1 :]
                yield from recurse(
                    step + 1,
                    new_pools,
                    prob * psi[p] / len(pool),
                    acc + y[rid] * pm.sizes[p] / psi[p],
                )

    yield from recurse(0, [list(m) for m in members], 1.0, 0.0)


def _enum_deepest(pop, chi, n, config):
    y = _outcome_values(pop)
    chi_v = np.asarray(chi, dtype=float)
    threshold = float(np.quantile(chi_v, config.threshold_quantile))
    N = pop.N
    verbatim = config.deepest_verbatim_regression and pop.task == REGRESSION

    def recurse(selected, prob, step_total):
        k = len(selected) + 1
        if k > n:
            first = selected[0]
            est = (y[first] + step_total / N) / n
            yield prob, est
            return
        unselected = np.array([i for i in range(N) if i not in selected])
        q, _ = deepest_step_probabilities(
            chi_v,
            unselected,
            float(chi_v[selected].sum()),
            int(np.count_nonzero(chi_v[selected] > threshold)),
            config.r,
            threshold,
            config.deepest_transposed_weights,
        )
        sel_sum = float(y[selected].sum())
        for idx, i in enumerate(unselected):
            if q[idx] <= 0:
                continue
            if verbatim:
                term = sel_sum / (k - 1) + (y[i] / k) / q[idx]
            else:
                term = sel_sum + y[i] / q[idx]
            yield from recurse(selected + [int(i)], prob * float(q[idx]), step_total + term)

    for first in range(N):
        if n == 1:
            yield 1.0 / N, float(y[first])
        else:
            yield from recurse([first], 1.0 / N, 0.0)


def enumerate_paths(pop: Population, config: TechniqueConfig, n: int):
    """Yield (probability, estimate) for every sample path of the technique."""
    name = config.technique
    if name in ("ces", "gbs"):
        raise NotEnumerableError(f"{name} is not enumerable; use Monte Carlo")
    if name == "deepest":
        if pop.N > 8 or n > 3:
            raise IntractableError("adaptive enumeration supports N <= 8, n <= 3")
    else:
        if pop.N > 10 or n > 4:
            raise IntractableError("enumeration supports N <= 10, n <= 4")
    if name == "srs":
        return _enum_srs(pop, n)
    chi = _chi_for(pop, config)
    if name == "sups":
        return _enum_sups(pop, chi, n)
    if name == "rhcs":
        return _enum_rhcs(pop, chi, n)
    if name == "ssrs":
        return _enum_ssrs(pop, chi, n, config)
    if name == "twoups":
        return _enum_twoups(pop, chi, n, config)
    if name == "deepest":
        return _enum_deepest(pop, chi, n, config)
    raise ValueError(f"unknown technique {name!r}")


def enumerate_expectation(pop: Population, config: TechniqueConfig, n: int) -> float:
    """Exact E[estimator] over all sample paths; probabilities must sum to 1."""
    total_prob = 0.0
    expectation = 0.0
    for prob, est in enumerate_paths(pop, config, n):
        total_prob += prob
        expectation += prob * est
    if abs(total_prob - 1.0) > 1e-12:
        raise AssertionError(f"path probabilities sum to {total_prob!r}, not 1")
    return expectation


# ---------------------------------------------------------------------------
# Monte Carlo experiment grid


DEFAULT_BUDGETS = (50, 100, 200, 400, 800)
DEFAULT_THRESHOLDS = tuple(2.5 * i for i in range(11))  # 0 to 25 step 2.5


@dataclass
class EvalConfig:
    """One experiment grid: techniques x auxiliary variables x budgets."""

    techniques: list = field(default_factory=lambda: ["srs"])
    aux: list = field(default_factory=lambda: [None])
    budgets: list = field(default_factory=lambda: list(DEFAULT_BUDGETS))
    repetitions: int = 30
    master_seed: int = 0
    offset_thresholds: list = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    failure_threshold: float = 12.5
    k: int = 10
    technique_overrides: dict = field(default_factory=dict)
    jobs: int = 1

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if list(self.budgets) != sorted(self.budgets):
            raise ValueError("budgets must be ascending")
        if list(self.offset_thresholds) != sorted(self.offset_thresholds):
            raise ValueError("offset thresholds must be ascending")


@dataclass
class CellStats:
    technique: str
    aux: str | None
    budget: int
    rmse: float
    rmedse: float
    mean_failures: float
    std_failures: float
    mean_distinct: float
    mean_offset_counts: list | None
    estimates: np.ndarray
    failures: np.ndarray


@dataclass
class EvalReport:
    config: EvalConfig
    true_xi: float
    cells: list
    raw_rows: list
    skipped: list

    def cell(self, technique, aux, budget) -> CellStats | None:
        for c in self.cells:
            if (c.technique, c.aux, c.budget) == (technique, aux, budget):
                return c
        return None

    def f_ratio(self, technique, aux) -> float | None:
        """Mean failures at the largest budget over the smallest."""
        budgets = sorted({c.budget for c in self.cells if (c.technique, c.aux) == (technique, aux)})
        if len(budgets) < 2:
            return None
        low = self.cell(technique, aux, budgets[0])
        high = self.cell(technique, aux, budgets[-1])
        if low is None or high is None or low.mean_failures == 0:
            return None
        return high.mean_failures / low.mean_failures

    def write_summary_csv(self, path):
        sens = sensitivity_summary(self) if len({c.budget for c in self.cells}) >= 2 else {}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "technique", "aux", "budget", "rmse", "rmedse",
                    "mean_failures", "std_failures", "mean_distinct",
                    "f_ratio", "min_rmse_budget", "inversion",
                ]
            )
            for c in sorted(self.cells, key=lambda c: (c.technique, str(c.aux), c.budget)):
                key = (c.technique, c.aux)
                cell_sens = sens.get(key, {})
                fr = self.f_ratio(c.technique, c.aux)
                writer.writerow(
                    [
                        c.technique, c.aux if c.aux is not None else "", c.budget,
                        repr(c.rmse), repr(c.rmedse),
                        repr(c.mean_failures), repr(c.std_failures), repr(c.mean_distinct),
                        repr(fr) if fr is not None else "",
                        cell_sens.get("min_rmse_budget", ""),
                        int(cell_sens["inversion"]) if "inversion" in cell_sens else "",
                    ]
                )

    def write_raw_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            head = ["technique", "aux", "budget", "repetition", "seed", "xi_hat", "failures", "distinct"]
            thr = self.config.offset_thresholds
            if self.raw_rows and self.raw_rows[0].get("offset_counts") is not None:
                head += [f"n_offset_ge_{y}" for y in thr]
            writer.writerow(head)
            for row in self.raw_rows:
                out = [
                    row["technique"], row["aux"] if row["aux"] is not None else "",
                    row["budget"], row["repetition"], row["seed"],
                    repr(row["xi_hat"]), row["failures"], row["distinct"],
                ]
                if row.get("offset_counts") is not None:
                    out += [int(x) for x in row["offset_counts"]]
                writer.writerow(out)

    def write_manifest_json(self, path):
        manifest = {
            "config": asdict(self.config),
            "true_xi": self.true_xi,
            "skipped": self.skipped,
            "cells": [
                {"technique": c.technique, "aux": c.aux, "budget": c.budget}
                for c in self.cells
            ],
        }
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _cell_seed(master_seed, technique, aux, budget, repetition) -> int:
    return derive_seed(master_seed, technique, aux, budget, repetition)


def _make_config(config: EvalConfig, technique, aux, budget) -> TechniqueConfig:
    kwargs = dict(
        technique=technique,
        aux=aux,
        budget=budget,
        k=config.k,
        failure_threshold=config.failure_threshold,
    )
    kwargs.update(config.technique_overrides.get(technique, {}))
    return TechniqueConfig(**kwargs)


def _run_cell(pop, config: EvalConfig, technique, aux, budget, partition):
    tc = _make_config(config, technique, aux, budget)
    chi = pop.aux_vector(aux) if aux is not None else None
    rows = []
    for rep in range(config.repetitions):
        seed = _cell_seed(config.master_seed, technique, aux, budget, rep)
        oracle = LabelingOracle(pop)
        result = run_technique(pop, oracle, tc, RandomStream(seed), chi=chi, partition=partition)
        row = {
            "technique": technique,
            "aux": aux,
            "budget": budget,
            "repetition": rep,
            "seed": seed,
            "xi_hat": result.xi_hat,
            "failures": result.failures,
            "distinct": result.distinct_labeled,
            "offset_counts": None,
        }
        if pop.task == REGRESSION:
            row["offset_counts"] = offset_histogram(result.offsets, config.offset_thresholds)
        rows.append(row)
    return rows


def run_experiment(pop: Population, config: EvalConfig) -> EvalReport:
    """Execute the full grid with independently seeded repetitions."""
    xi = true_accuracy(pop)
    cells = []
    raw_rows = []
    skipped = []

    partitions = {}

    def partition_for(aux):
        if aux not in partitions:
            chi = pop.aux_vector(aux).values
            seed = derive_seed(config.master_seed, "partition", aux, config.k)
            partitions[aux] = kmeans_1d(chi, config.k, seed)
        return partitions[aux]

    grid = []
    for technique, aux, budget in itertools.product(config.techniques, config.aux, config.budgets):
        if technique in CHI_TECHNIQUES:
            if aux is None:
                skipped.append(
                    {"technique": technique, "aux": aux, "budget": budget,
                     "reason": "technique requires an auxiliary variable"}
                )
                continue
            if pop.task == REGRESSION and aux in CLASSIFICATION_ONLY_AUX:
                skipped.append(
                    {"technique": technique, "aux": aux, "budget": budget,
                     "reason": f"{aux} is classification-only"}
                )
                continue
            if aux not in pop.aux_names:
                skipped.append(
                    {"technique": technique, "aux": aux, "budget": budget,
                     "reason": f"auxiliary variable {aux!r} not present"}
                )
                continue
        elif aux is not None:
            # SRS/CES ignore chi for selection probabilities; run them once
            # under aux=None only.
            skipped.append(
                {"technique": technique, "aux": aux, "budget": budget,
                 "reason": "technique does not use an auxiliary variable"}
            )
            continue
        grid.append((technique, aux, budget))

    def execute(args):
        technique, aux, budget = args
        partition = (
            partition_for(aux) if technique in ("ssrs", "gbs", "twoups") and aux else None
        )
        return _run_cell(pop, config, technique, aux, budget, partition)

    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool_exec:
            all_rows = list(pool_exec.map(_execute_cell_worker, [
                (pop, config, technique, aux, budget) for technique, aux, budget in grid
            ]))
    else:
        all_rows = [execute(args) for args in grid]

    for (technique, aux, budget), rows in zip(grid, all_rows):
        raw_rows.extend(rows)
        estimates = np.array([r["xi_hat"] for r in rows])
        failures = np.array([r["failures"] for r in rows], dtype=float)
        distinct = np.array([r["distinct"] for r in rows], dtype=float)
        counts = None
        if pop.task == REGRESSION:
            counts = list(np.mean([r["offset_counts"] for r in rows], axis=0))
        cells.append(
            CellStats(
                technique=technique,
                aux=aux,
                budget=budget,
                rmse=rmse(estimates, xi),
                rmedse=rmedse(estimates, xi),
                mean_failures=float(failures.mean()),
                std_failures=float(failures.std()),
                mean_distinct=float(distinct.mean()),
                mean_offset_counts=counts,
                estimates=estimates,
                failures=failures,
            )
        )
    return EvalReport(config=config, true_xi=xi, cells=cells, raw_rows=raw_rows, skipped=skipped)


def _execute_cell_worker(args):
    pop, config, technique, aux, budget = args
    partition = None
    if technique in ("ssrs", "gbs", "twoups") and aux is not None:
        chi = pop.aux_vector(aux).values
        seed = derive_seed(config.master_seed, "partition", aux, config.k)
        partition = kmeans_1d(chi, config.k, seed)
    return _run_cell(pop, config, technique, aux, budget, partition)


def sensitivity_summary(report: EvalReport) -> dict:
    """Per (technique, aux): budget with minimal RMSE and the inversion flag.

    An inversion is the pathology where the smallest budget beats the
    largest one on RMSE.
    """
    budgets = sorted({c.budget for c in report.cells})
    if len(budgets) < 2:
        raise ValueError("sensitivity analysis needs at least two budgets")
    out = {}
    keys = sorted({(c.technique, c.aux) for c in report.cells}, key=lambda t: (t[0], str(t[1])))
    for key in keys:
        series = sorted(
            (c for c in report.cells if (c.technique, c.aux) == key), key=lambda c: c.budget
        )
        if len(series) < 2:
            continue
        best = min(series, key=lambda c: c.rmse)
        out[key] = {
            "min_rmse_budget": best.budget,
            "inversion": series[0].rmse < series[-1].rmse,
        }
    return out
