"""Partitioning of the operational dataset on chi, and sample allocation.

Partitions come from 1-D k-means (Lloyd) on the auxiliary variable; sample
sizes per partition come from Neyman allocation with largest-remainder
rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .auxvar import ChiVector
from .draw import RandomStream

__all__ = ["PartitionMap", "Allocation", "kmeans_1d", "neyman_allocation"]


@dataclass
class PartitionMap:
    """Assignment of every record to one of P partitions, centroids ascending."""

    assignment: np.ndarray
    centroids: np.ndarray
    sizes: np.ndarray
    P: int

    def members(self, p: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == p)

    def member_lists(self) -> list:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.sizes)[:-1]
        return np.split(order, bounds)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "partition"])
            for i, p in enumerate(self.assignment):
                writer.writerow([i, int(p)])


@dataclass
class Allocation:
    """Per-partition sample sizes summing exactly to the total budget."""

    n_p: np.ndarray
    total: int


def _chi_values(chi) -> np.ndarray:
    return chi.values if isinstance(chi, ChiVector) else np.asarray(chi, dtype=float)


def kmeans_1d(chi, k: int, seed: int = 0, max_iter: int = 300) -> PartitionMap:
    """Lloyd's algorithm on scalar chi values.

    Farthest-point seeding from a seeded random start; if fewer than k
    distinct values exist, the partition count drops to the distinct count.
    Empty clusters are re-seeded to the point farthest from its centroid.
    Output labels are sorted by centroid, so partition 0 holds the smallest
    chi values.
    """
    values = _chi_values(chi)
    n = values.size
    if n == 0:
        raise ValueError("empty input")
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = np.unique(values)
    p = min(k, distinct.size)

    rng = RandomStream(seed)
    centroids = np.empty(p)
    centroids[0] = distinct[int(rng.integers(0, distinct.size))]
    for j in range(1, p):
        gaps = np.min(np.abs(distinct[:, None] - centroids[None, :j]), axis=1)
        centroids[j] = distinct[int(np.argmax(gaps))]
    centroids.sort()

    assignment = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        new_assignment = np.argmin(np.abs(values[:, None] - centroids[None, :]), axis=1)
        for j in range(p):
            mask = new_assignment == j
            if not np.any(mask):
                # Re-seed the empty cluster to the globally worst-fit point.
                dist = np.abs(values - centroids[new_assignment])
                far = int(np.argmax(dist))
                centroids[j] = values[far]
                new_assignment[far] = j
                mask = new_assignment == j
            centroids[j] = values[mask].mean()
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment

    order = np.argsort(centroids, kind="stable")
    relabel = np.empty(p, dtype=np.int64)
    relabel[order] = np.arange(p)
    assignment = relabel[assignment]
    centroids = centroids[order]
    sizes = np.bincount(assignment, minlength=p)
    return PartitionMap(assignment=assignment, centroids=centroids, sizes=sizes, P=p)


def _largest_remainder(weights: np.ndarray, n: int) -> np.ndarray:
    quota = n * weights / weights.sum()
    alloc = np.floor(quota).astype(np.int64)
    short = n - int(alloc.sum())
    if short > 0:
        frac = quota - alloc
        # Stable tie-break: larger fraction first, then lower index.
        order = np.lexsort((np.arange(frac.size), -frac))
        alloc[order[:short]] += 1
    return alloc


def neyman_allocation(pm: PartitionMap, chi, n: int) -> Allocation:
    """Allocate n draws proportionally to N_p * sigma_p of globally normalized chi.

    Largest-remainder rounding; allocations above a partition's size are
    capped with the excess redistributed among the uncapped partitions.  If
    every partition has zero chi spread, falls back to allocation
    proportional to partition size.
    """
    values = _chi_values(chi)
    if n < 1:
        raise ValueError("budget must be >= 1")
    total = values.size
    if n > total:
        raise ValueError(f"budget {n} exceeds population size {total}")
    lo, hi = values.min(), values.max()
    norm = (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)

    raw = np.empty(pm.P)
    for p in range(pm.P):
        members = norm[pm.assignment == p]
        spread = members.std()
        if spread < 1e-12:  # constant partition up to rounding noise
            spread = 0.0
        raw[p] = pm.sizes[p] * spread
    if raw.sum() <= 0:
        raw = pm.sizes.astype(float)

    caps = pm.sizes.astype(np.int64)
    alloc = np.zeros(pm.P, dtype=np.int64)
    active = raw > 0
    remaining = n
    while remaining > 0 and np.any(active):
        trial = np.zeros(pm.P, dtype=np.int64)
        trial[active] = _largest_remainder(raw[active], remaining)
        over = active & (trial > caps)
        if not np.any(over):
            alloc[active] = trial[active]
            remaining = 0
            break
        alloc[over] = caps[over]
        active &= ~over
        remaining = n - int(alloc.sum())
    if remaining > 0:
        # All positive-spread partitions capped: spill the rest into the
        # remaining capacity proportionally to partition size.
        spare = caps - alloc
        open_p = spare > 0
        extra = np.zeros(pm.P, dtype=np.int64)
        extra[open_p] = _largest_remainder(pm.sizes[open_p].astype(float), remaining)
        while np.any(extra > spare):
            bad = extra > spare
            surplus = int((extra[bad] - spare[bad]).sum())
            extra[bad] = spare[bad]
            room = spare - extra
            order = np.argsort(-room, kind="stable")
            for idx in order:
                if surplus == 0:
                    break
                take = min(surplus, int(room[idx]))
                extra[idx] += take
                surplus -= take
        alloc += extra
    return Allocation(n_p=alloc, total=n)
