"""The eight sampling-and-estimation techniques.

Each technique consumes a population view (predictions and auxiliary values
only), a labeling oracle, a budget n, and a random stream, and produces a
:class:`TechniqueResult` with the selected sample, the point estimate, and
the failures it exposed.  Estimates are reported raw: the
unequal-probability estimators can leave [0, 1] on unlucky paths, and
clamping would break unbiasedness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .auxvar import ChiVector, selection_probabilities
from .draw import (
    DrawTrace,
    RandomStream,
    pps_with_replacement,
    random_grouping,
    srs_with_replacement,
    srs_without_replacement,
)
from .partition import Allocation, PartitionMap, kmeans_1d, neyman_allocation
from .population import CLASSIFICATION, LabelingOracle, Population

__all__ = [
    "TECHNIQUES",
    "TechniqueConfig",
    "TechniqueResult",
    "run_technique",
    "run_srs",
    "run_sups",
    "run_rhcs",
    "run_ces",
    "run_deepest",
    "run_ssrs",
    "ssrs_allocation",
    "run_gbs",
    "run_twoups",
    "deepest_step_probabilities",
]

TECHNIQUES = ("srs", "sups", "rhcs", "ces", "deepest", "ssrs", "gbs", "twoups")

#: Techniques that consume an auxiliary variable.
CHI_TECHNIQUES = ("sups", "rhcs", "deepest", "ssrs", "gbs", "twoups")


@dataclass
class TechniqueConfig:
    """All technique knobs with their documented defaults."""

    technique: str = "srs"
    aux: str | None = None
    budget: int = 200
    # DeepEST
    r: float = 0.8
    threshold_quantile: float = 0.7
    deepest_transposed_weights: bool = False
    deepest_verbatim_regression: bool = False
    # CES
    ces_initial: int = 30
    ces_group: int = 5
    ces_candidates: int = 300
    ces_bins: int = 10
    # Partition-based
    k: int = 10
    partition_seed: int = 0
    gbs_prior_variance: float = 0.25
    gbs_variance_floor: float = 1e-6
    # Result shaping
    failure_threshold: float = 12.5
    record_trace: bool = False

    def __post_init__(self):
        if self.technique not in TECHNIQUES:
            raise ValueError(f"unknown technique {self.technique!r}")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("r must lie in [0, 1]")
        if self.ces_initial < 1 or self.ces_group < 1 or self.ces_candidates < 1:
            raise ValueError("CES sizes must be >= 1")
        if self.technique == "ces" and self.budget < self.ces_initial:
            raise ValueError("CES budget must cover the initial set")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class TechniqueResult:
    """Outcome of one technique run."""

    technique: str
    selected_ids: np.ndarray
    distinct_labeled: int
    estimate: float  # theta-hat (classification) or Delta-hat (regression)
    xi_hat: float
    failures: int
    offsets: np.ndarray | None = None
    trace: DrawTrace | None = None
    flags: list = field(default_factory=list)
    knobs: dict = field(default_factory=dict)

    def to_json(self, include_trace: bool = False) -> str:
        payload = {
            "technique": self.technique,
            "selected_ids": [int(i) for i in self.selected_ids],
            "distinct_labeled": self.distinct_labeled,
            "estimate": self.estimate,
            "xi_hat": self.xi_hat,
            "failures": self.failures,
            "offsets": None if self.offsets is None else [float(x) for x in self.offsets],
            "flags": self.flags,
            "knobs": self.knobs,
        }
        if include_trace and self.trace is not None:
            payload["trace"] = [
                {"step": s, "id": i, "probability": p, "scheme": tag}
                for (s, i, p, tag) in self.trace.entries
            ]
        return json.dumps(payload, indent=2, sort_keys=True)


def _chi_values(chi) -> np.ndarray:
    return chi.values if isinstance(chi, ChiVector) else np.asarray(chi, dtype=float)


def _estimand(pop: Population, outcomes: np.ndarray) -> np.ndarray:
    """Per-draw estimator contributions: z for classification, delta^2 for regression."""
    if pop.task == CLASSIFICATION:
        return outcomes
    return outcomes**2


def _finalize(
    pop: Population,
    oracle: LabelingOracle,
    technique: str,
    selected: np.ndarray,
    estimate: float,
    trace: DrawTrace | None,
    flags: list,
    failure_threshold: float,
    knobs: dict,
) -> TechniqueResult:
    labeled_ids, labeled_outcomes = oracle.labeled_outcomes()
    if pop.task == CLASSIFICATION:
        failures = int(labeled_outcomes.sum())
        offsets = None
    else:
        failures = int(np.count_nonzero(labeled_outcomes >= failure_threshold))
        offsets = labeled_outcomes
    return TechniqueResult(
        technique=technique,
        selected_ids=np.asarray(selected),
        distinct_labeled=oracle.reveal_count,
        estimate=float(estimate),
        xi_hat=1.0 - float(estimate),
        failures=failures,
        offsets=offsets,
        trace=trace,
        flags=flags,
        knobs=knobs,
    )


def run_srs(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    rng: RandomStream,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """Simple random sampling with replacement; estimate is the sample mean."""
    selected = srs_with_replacement(np.arange(pop.N), n, rng)
    y = _estimand(pop, oracle.reveal_many(selected))
    trace = None
    if record_trace:
        trace = DrawTrace()
        for step, rid in enumerate(selected):
            trace.append(step, rid, 1.0 / pop.N, "srs-wr")
    return _finalize(pop, oracle, "srs", selected, y.mean(), trace, [], failure_threshold, {"n": n})


def run_sups(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    chi,
    rng: RandomStream,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """PPS with replacement; Hansen-Hurwitz estimator reweights by 1/probability."""
    pi = selection_probabilities(chi)
    selected = pps_with_replacement(np.arange(pop.N), pi, n, rng)
    y = _estimand(pop, oracle.reveal_many(selected))
    estimate = float(np.sum(y / pi[selected])) / (n * pop.N)
    trace = None
    if record_trace:
        trace = DrawTrace()
        for step, rid in enumerate(selected):
            trace.append(step, rid, float(pi[rid]), "pps-wr")
    return _finalize(pop, oracle, "sups", selected, estimate, trace, [], failure_threshold, {"n": n})


def run_rhcs(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    chi,
    rng: RandomStream,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """Random grouping, one PPS draw per group, group-total reweighting.

    The drawn unit in group r is rescaled by q_r/pi_r where q_r is the
    group's total selection probability, which makes the scheme
    without-replacement overall while keeping the estimator unbiased.
    """
    if n > pop.N:
        raise ValueError(f"budget {n} exceeds population size {pop.N}")
    pi = selection_probabilities(chi)
    groups = random_grouping(np.arange(pop.N), n, rng)
    selected = np.empty(n, dtype=np.int64)
    weights = np.empty(n)
    trace = DrawTrace() if record_trace else None
    for r, group in enumerate(groups):
        w = pi[group]
        q_r = w.sum()
        cum = np.cumsum(w)
        u = rng.random() * cum[-1]
        j = min(int(np.searchsorted(cum, u, side="right")), group.size - 1)
        selected[r] = group[j]
        weights[r] = q_r / pi[group[j]]
        if trace is not None:
            trace.append(r, group[j], float(pi[group[j]] / q_r), "rhc-pps")
    y = _estimand(pop, oracle.reveal_many(selected))
    estimate = float(np.sum(y * weights)) / pop.N
    return _finalize(pop, oracle, "rhcs", selected, estimate, trace, [], failure_threshold, {"n": n})


def _ces_features(pop: Population, chi) -> np.ndarray:
    feats = pop.features_matrix()
    if feats is not None:
        return feats
    if chi is not None:
        return _chi_values(chi)[:, None]
    if pop.aux_names:
        return np.column_stack([pop.aux_vector(a).values for a in pop.aux_names])
    raise ValueError("CES needs feature columns or at least one auxiliary variable")


def run_ces(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    rng: RandomStream,
    chi=None,
    initial: int = 30,
    group: int = 5,
    candidates: int = 300,
    bins: int = 10,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """Cross-entropy sampling: grow a sample that imitates the feature distribution.

    Starting from a random initial set, repeatedly add the candidate group
    (of ``candidates`` random proposals) that minimizes the average add-one
    smoothed cross-entropy between the operational and selected per-feature
    histograms.  The estimate is the plain sample mean.
    """
    if n < initial:
        raise ValueError(f"CES budget {n} is below the initial set size {initial}")
    X = _ces_features(pop, chi)
    n_dims = X.shape[1]
    # Equal-width bins per dimension over the operational range.
    bin_idx = np.empty((pop.N, n_dims), dtype=np.int64)
    pop_counts = np.empty((n_dims, bins))
    for dim in range(n_dims):
        lo, hi = X[:, dim].min(), X[:, dim].max()
        width = (hi - lo) or 1.0
        idx = np.minimum(((X[:, dim] - lo) / width * bins).astype(np.int64), bins - 1)
        bin_idx[:, dim] = idx
        pop_counts[dim] = np.bincount(idx, minlength=bins)
    pop_dist = pop_counts / pop.N

    unselected = np.arange(pop.N)
    pos = np.arange(pop.N)  # position of each id inside `unselected`
    n_unsel = pop.N

    def remove(ids):
        nonlocal n_unsel
        for rid in ids:
            p = pos[rid]
            last = unselected[n_unsel - 1]
            unselected[p], unselected[n_unsel - 1] = last, rid
            pos[last], pos[rid] = p, n_unsel - 1
            n_unsel -= 1

    sel_counts = np.zeros((n_dims, bins))
    selected = list(srs_without_replacement(np.arange(pop.N), initial, rng))
    remove(selected)
    for rid in selected:
        sel_counts[np.arange(n_dims), bin_idx[rid]] += 1

    trace = DrawTrace() if record_trace else None
    if trace is not None:
        for step, rid in enumerate(selected):
            trace.append(step, rid, 1.0 / pop.N, "ces-initial")

    pop_flat = pop_dist.ravel()
    sel_flat = sel_counts.ravel()
    dim_offsets = np.arange(n_dims) * bins
    flat_idx = bin_idx + dim_offsets[None, :]  # per record: flattened (dim, bin) cells

    while len(selected) < n:
        g = min(group, n - len(selected))
        pool = unselected[:n_unsel]
        # Candidate groups: iid index draws with within-group duplicates
        # redrawn, equivalent to SRS without replacement per group.
        idx = rng.integers(0, n_unsel, size=(candidates, g))
        if g > 1:
            while True:
                srt = np.sort(idx, axis=1)
                dup = (np.diff(srt, axis=1) == 0).any(axis=1)
                if not dup.any():
                    break
                idx[dup] = rng.integers(0, n_unsel, size=(int(dup.sum()), g))
        cand = pool[idx]
        cells = flat_idx[cand].reshape(candidates, -1)  # (C, g * n_dims)
        combined = (np.arange(candidates)[:, None] * (n_dims * bins) + cells).ravel()
        delta = np.bincount(combined, minlength=candidates * n_dims * bins)
        delta = delta.reshape(candidates, n_dims * bins)
        total = len(selected) + g
        q = (sel_flat[None, :] + delta + 1.0) / (total + bins)
        ce = -(pop_flat[None, :] * np.log(q)).sum(axis=1) / n_dims
        best = cand[int(np.argmin(ce))]
        for rid in best:
            sel_flat[flat_idx[rid]] += 1
            if trace is not None:
                trace.append(len(selected), rid, 1.0 / n_unsel, "ces-group")
            selected.append(int(rid))
        remove(best)

    selected = np.array(selected, dtype=np.int64)
    y = _estimand(pop, oracle.reveal_many(selected))
    knobs = {"n": n, "initial": initial, "group": group, "candidates": candidates, "bins": bins}
    return _finalize(pop, oracle, "ces", selected, y.mean(), trace, [], failure_threshold, knobs)


def deepest_step_probabilities(
    chi: np.ndarray,
    unselected: np.ndarray,
    chi_selected_sum: float,
    selected_above: int,
    r: float,
    threshold: float,
    transposed: bool,
):
    """Marginal per-step selection probabilities for the adaptive sampler.

    Returns (q over `unselected`, fell_back) where q mixes the weight-based
    branch (probability r) with the uniform branch (probability 1 - r).
    With the literal weight reading, the weight-based branch is uniform over
    the unselected records whose chi exceeds the threshold; the transposed
    reading makes it PPS on chi over all unselected records.
    """
    u = unselected.size
    uniform = np.full(u, 1.0 / u)
    if transposed:
        total = chi[unselected].sum()
        if selected_above == 0 or total <= 0:
            return uniform, True
        wbs = chi[unselected] / total
    else:
        above = chi[unselected] > threshold
        m = int(above.sum())
        if m == 0 or chi_selected_sum <= 0:
            return uniform, True
        wbs = np.where(above, 1.0 / m, 0.0)
    return r * wbs + (1.0 - r) * uniform, False


def run_deepest(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    chi,
    rng: RandomStream,
    r: float = 0.8,
    threshold_quantile: float = 0.7,
    transposed_weights: bool = False,
    verbatim_regression: bool = False,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """Adaptive failure-seeking sampler with step-by-step unbiased estimates.

    The first example is uniform; each later step uses weight-based sampling
    with probability r (guided toward high-chi regions) and uniform sampling
    otherwise, always without replacement.  Each selected example's marginal
    step probability feeds a per-step Hansen-Hurwitz style total estimate;
    the final estimate averages the step estimates.
    """
    chi_v = _chi_values(chi)
    if chi_v.sum() <= 0:
        raise ValueError("all-zero chi vector")
    threshold = float(np.quantile(chi_v, threshold_quantile))
    trace = DrawTrace() if record_trace else None
    flags = []

    # Swap-remove pools for the unselected set and its above-threshold subset.
    unsel = np.arange(pop.N)
    pos = np.arange(pop.N)
    n_unsel = pop.N
    above_ids = np.flatnonzero(chi_v > threshold)
    above = above_ids.copy()
    above_pos = np.full(pop.N, -1, dtype=np.int64)
    above_pos[above] = np.arange(above.size)
    n_above = above.size

    def remove(rid):
        nonlocal n_unsel, n_above
        p = pos[rid]
        last = unsel[n_unsel - 1]
        unsel[p], unsel[n_unsel - 1] = last, rid
        pos[last], pos[rid] = p, n_unsel - 1
        n_unsel -= 1
        ap = above_pos[rid]
        if ap >= 0:
            last_a = above[n_above - 1]
            above[ap], above[n_above - 1] = last_a, rid
            above_pos[last_a], above_pos[rid] = ap, n_above - 1
            n_above -= 1

    first = int(rng.integers(0, pop.N))
    y_first = float(_estimand(pop, np.array([oracle.reveal(first)]))[0])
    selected = [first]
    remove(first)
    if trace is not None:
        trace.append(0, first, 1.0 / pop.N, "srs-first")

    chi_sel_sum = float(chi_v[first])
    sel_above = int(chi_v[first] > threshold)
    y_sel_sum = y_first
    step_total = 0.0

    for k in range(2, n + 1):
        u = n_unsel
        if u == 0:
            raise ValueError(f"budget {n} exceeds population size {pop.N}")
        # Determine the branch, then the marginal probability of the pick.
        if transposed_weights:
            chi_unsel_total = float(chi_v[unsel[:u]].sum())
            fallback = sel_above == 0 or chi_unsel_total <= 0
        else:
            fallback = n_above == 0 or chi_sel_sum <= 0
        use_wbs = (not fallback) and (rng.random() < r)
        if use_wbs:
            if transposed_weights:
                cum = np.cumsum(chi_v[unsel[:u]])
                j = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), u - 1)
                pick = int(unsel[j])
            else:
                pick = int(above[int(rng.integers(0, n_above))])
            tag = "wbs"
        else:
            pick = int(unsel[int(rng.integers(0, u))])
            tag = "srs-step"
        if fallback:
            q = 1.0 / u
            flags.append(f"step {k}: all weights zero, uniform fallback")
        elif transposed_weights:
            q = r * chi_v[pick] / chi_unsel_total + (1.0 - r) / u
        else:
            wbs_p = (1.0 / n_above) if chi_v[pick] > threshold else 0.0
            q = r * wbs_p + (1.0 - r) / u
        if trace is not None:
            trace.append(k - 1, pick, float(q), tag)

        y_pick = float(_estimand(pop, np.array([oracle.reveal(pick)]))[0])
        if pop.task == CLASSIFICATION or not verbatim_regression:
            step_total += y_sel_sum + y_pick / q
        else:
            step_total += y_sel_sum / (k - 1) + (y_pick / k) / q

        remove(pick)
        selected.append(pick)
        chi_sel_sum += float(chi_v[pick])
        sel_above += int(chi_v[pick] > threshold)
        y_sel_sum += y_pick

    estimate = (y_first + step_total / pop.N) / n
    knobs = {
        "n": n,
        "r": r,
        "threshold_quantile": threshold_quantile,
        "threshold": threshold,
        "transposed_weights": transposed_weights,
        "verbatim_regression": verbatim_regression,
    }
    return _finalize(
        pop, oracle, "deepest", np.array(selected), estimate, trace, flags, failure_threshold, knobs
    )


def ssrs_allocation(pm: PartitionMap, chi_v: np.ndarray, n: int):
    """Neyman allocation with a one-draw floor whenever the budget allows.

    A partition allocated zero draws contributes a hard 0 to the stratified
    estimate, which biases it whenever that partition's outcomes are not all
    zero.  When n >= P the floor restores exact unbiasedness by moving one
    draw from the largest allocations into each empty partition.
    """
    alloc = neyman_allocation(pm, chi_v, n)
    n_p = alloc.n_p.copy()
    if n >= pm.P:
        for p in np.flatnonzero(n_p == 0):
            donor = int(np.argmax(n_p))
            n_p[donor] -= 1
            n_p[p] = 1
    return Allocation(n_p=n_p, total=alloc.total)


def run_ssrs(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    chi,
    k: int,
    rng: RandomStream,
    partition: PartitionMap | None = None,
    partition_seed: int = 0,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """Stratified SRS: k-means partitions, Neyman allocation, per-stratum WOR draws."""
    if n > pop.N:
        raise ValueError(f"budget {n} exceeds population size {pop.N}")
    chi_v = _chi_values(chi)
    pm = partition if partition is not None else kmeans_1d(chi_v, k, partition_seed)
    alloc = ssrs_allocation(pm, chi_v, n)
    flags = []
    trace = DrawTrace() if record_trace else None
    selected = []
    estimate = 0.0
    step = 0
    members = pm.member_lists()
    for p in range(pm.P):
        n_p = int(alloc.n_p[p])
        if n_p == 0:
            flags.append(f"partition {p}: zero allocation, contributes 0")
            continue
        draw = srs_without_replacement(members[p], n_p, rng)
        y = _estimand(pop, oracle.reveal_many(draw))
        estimate += pm.sizes[p] * y.mean()
        selected.extend(int(i) for i in draw)
        if trace is not None:
            for j, rid in enumerate(draw):
                trace.append(step, rid, 1.0 / (pm.sizes[p] - j), "ssrs-wor")
                step += 1
    estimate /= pop.N
    knobs = {"n": n, "k": k, "P": pm.P, "allocation": [int(x) for x in alloc.n_p]}
    return _finalize(
        pop, oracle, "ssrs", np.array(selected), estimate, trace, flags, failure_threshold, knobs
    )


def run_gbs(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    chi,
    k: int,
    rng: RandomStream,
    partition: PartitionMap | None = None,
    partition_seed: int = 0,
    prior_variance: float = 0.25,
    variance_floor: float = 1e-6,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """Adaptive stratified sampling chasing the steepest variance reduction.

    After a one-draw-per-partition warm-up, each step adds a with-replacement
    draw to the partition whose extra draw most reduces the estimated
    variance of the stratified estimator.  Running within-partition
    variances are smoothed with one pseudo-observation and floored so
    unexplored heterogeneity keeps every partition eligible.
    """
    chi_v = _chi_values(chi)
    pm = partition if partition is not None else kmeans_1d(chi_v, k, partition_seed)
    flags = []
    trace = DrawTrace() if record_trace else None
    members = pm.member_lists()
    weight_sq = (pm.sizes / pop.N) ** 2

    counts = np.zeros(pm.P, dtype=np.int64)
    sums = np.zeros(pm.P)
    sq_sums = np.zeros(pm.P)
    selected = []
    step = 0

    def draw_from(p):
        nonlocal step
        rid = int(members[p][int(rng.integers(0, pm.sizes[p]))])
        y = float(_estimand(pop, np.array([oracle.reveal(rid)]))[0])
        counts[p] += 1
        sums[p] += y
        sq_sums[p] += y * y
        selected.append(rid)
        if trace is not None:
            trace.append(step, rid, 1.0 / pm.sizes[p], "gbs-wr")
        step += 1

    warm = pm.P
    if n < pm.P:
        warm = n
        flags.append(f"budget {n} below partition count {pm.P}: warm-up truncated")
        order = np.argsort(-pm.sizes, kind="stable")[:warm]
    else:
        order = np.arange(pm.P)
    for p in order:
        draw_from(int(p))

    while len(selected) < n:
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        raw_var = np.where(counts > 0, sq_sums / np.maximum(counts, 1) - mean**2, 0.0)
        s2 = (counts * raw_var + prior_variance) / (counts + 1)
        s2 = np.maximum(s2, variance_floor)
        with np.errstate(divide="ignore"):
            gain = weight_sq * s2 * (1.0 / counts - 1.0 / (counts + 1))
        gain[counts == 0] = np.inf  # unexplored partitions first
        best = np.flatnonzero(gain == gain.max())
        p = int(best[int(rng.integers(0, best.size))]) if best.size > 1 else int(best[0])
        draw_from(p)

    estimate = 0.0
    for p in range(pm.P):
        if counts[p] == 0:
            flags.append(f"partition {p}: no draws, contributes 0")
            continue
        estimate += pm.sizes[p] * (sums[p] / counts[p])
    estimate /= pop.N
    knobs = {"n": n, "k": k, "P": pm.P, "prior_variance": prior_variance}
    return _finalize(
        pop, oracle, "gbs", np.array(selected), estimate, trace, flags, failure_threshold, knobs
    )


def run_twoups(
    pop: Population,
    oracle: LabelingOracle,
    n: int,
    chi,
    k: int,
    rng: RandomStream,
    partition: PartitionMap | None = None,
    partition_seed: int = 0,
    failure_threshold: float = 12.5,
    record_trace: bool = False,
) -> TechniqueResult:
    """Two-stage sampling: PPS over partitions, then WOR within the partition.

    Partition selection probability is the partition's share of total
    normalized chi.  Repeat hits on a partition keep drawing from its
    shrinking without-replacement pool; an exhausted pool is restored (and
    flagged), falling back to with-replacement reuse.
    """
    chi_v = _chi_values(chi)
    pi = selection_probabilities(chi_v)
    pm = partition if partition is not None else kmeans_1d(chi_v, k, partition_seed)
    members = pm.member_lists()
    psi = np.array([pi[m].sum() for m in members])
    psi = psi / psi.sum()

    flags = []
    trace = DrawTrace() if record_trace else None
    pools = [m.copy() for m in members]
    remaining = [m.size for m in members]
    stage_partitions = pps_with_replacement(np.arange(pm.P), psi, n, rng)
    selected = np.empty(n, dtype=np.int64)
    scale = np.empty(n)
    for step, p in enumerate(stage_partitions):
        p = int(p)
        if remaining[p] == 0:
            pools[p] = members[p].copy()
            remaining[p] = members[p].size
            flag = f"partition {p}: pool exhausted, reused with replacement"
            if flag not in flags:
                flags.append(flag)
        j = int(rng.integers(0, remaining[p]))
        rid = int(pools[p][j])
        pools[p][j], pools[p][remaining[p] - 1] = pools[p][remaining[p] - 1], rid
        remaining[p] -= 1
        selected[step] = rid
        scale[step] = pm.sizes[p] / psi[p]
        if trace is not None:
            trace.append(step, rid, float(psi[p] / (remaining[p] + 1)), "twoups")
    y = _estimand(pop, oracle.reveal_many(selected))
    estimate = float(np.sum(y * scale)) / (pop.N * n)
    knobs = {"n": n, "k": k, "P": pm.P, "psi": [float(x) for x in psi]}
    return _finalize(
        pop, oracle, "twoups", selected, estimate, trace, flags, failure_threshold, knobs
    )


def run_technique(
    pop: Population,
    oracle: LabelingOracle,
    config: TechniqueConfig,
    rng: RandomStream,
    chi=None,
    partition: PartitionMap | None = None,
) -> TechniqueResult:
    """Dispatch a configured technique run."""
    name = config.technique
    n = config.budget
    if chi is None and config.aux is not None:
        chi = pop.aux_vector(config.aux)
    if name in CHI_TECHNIQUES and chi is None:
        raise ValueError(f"technique {name!r} needs an auxiliary variable")
    common = dict(failure_threshold=config.failure_threshold, record_trace=config.record_trace)
    if name == "srs":
        return run_srs(pop, oracle, n, rng, **common)
    if name == "sups":
        return run_sups(pop, oracle, n, chi, rng, **common)
    if name == "rhcs":
        return run_rhcs(pop, oracle, n, chi, rng, **common)
    if name == "ces":
        return run_ces(
            pop,
            oracle,
            n,
            rng,
            chi=chi,
            initial=config.ces_initial,
            group=config.ces_group,
            candidates=config.ces_candidates,
            bins=config.ces_bins,
            **common,
        )
    if name == "deepest":
        return run_deepest(
            pop,
            oracle,
            n,
            chi,
            rng,
            r=config.r,
            threshold_quantile=config.threshold_quantile,
            transposed_weights=config.deepest_transposed_weights,
            verbatim_regression=config.deepest_verbatim_regression,
            **common,
        )
    if name == "ssrs":
        return run_ssrs(
            pop, oracle, n, chi, config.k, rng,
            partition=partition, partition_seed=config.partition_seed, **common,
        )
    if name == "gbs":
        return run_gbs(
            pop, oracle, n, chi, config.k, rng,
            partition=partition, partition_seed=config.partition_seed,
            prior_variance=config.gbs_prior_variance,
            variance_floor=config.gbs_variance_floor,
            **common,
        )
    if name == "twoups":
        return run_twoups(
            pop, oracle, n, chi, config.k, rng,
            partition=partition, partition_seed=config.partition_seed, **common,
        )
    raise ValueError(f"unknown technique {name!r}")
