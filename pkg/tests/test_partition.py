import itertools

import numpy as np
import pytest

from opsample.partition import kmeans_1d, neyman_allocation


def brute_force_best_split_sizes(values, k):
    """Minimal within-cluster SSE over all contiguous 1-D splits."""
    values = np.sort(values)
    n = len(values)
    best_sse, best_sizes = np.inf, None
    for cuts in itertools.combinations(range(1, n), k - 1):
        bounds = [0, *cuts, n]
        sse = 0.0
        sizes = []
        for a, b in zip(bounds, bounds[1:]):
            chunk = values[a:b]
            sizes.append(len(chunk))
            sse += float(np.sum((chunk - chunk.mean()) ** 2))
        if sse < best_sse:
            best_sse, best_sizes = sse, sizes
    return best_sizes


class TestKmeans1D:
    def test_separated_clusters(self):
        pm = kmeans_1d(np.array([0.0, 0.1, 0.9, 1.0]), 2, seed=0)
        assert list(pm.assignment) == [0, 0, 1, 1]
        assert list(pm.sizes) == [2, 2]

    def test_k1_single_partition(self):
        pm = kmeans_1d(np.array([3.0, 1.0, 2.0]), 1, seed=0)
        assert pm.P == 1
        assert list(pm.sizes) == [3]

    def test_matches_exhaustive_split(self):
        values = np.array([0.0, 0.0, 1.0, 1.0, 1.0])
        pm = kmeans_1d(values, 2, seed=0)
        assert sorted(pm.sizes) == sorted(brute_force_best_split_sizes(values, 2))
        assert list(pm.sizes) == [2, 3]

    def test_deterministic(self):
        values = np.random.default_rng(0).random(200)
        a = kmeans_1d(values, 10, seed=5)
        b = kmeans_1d(values, 10, seed=5)
        assert np.array_equal(a.assignment, b.assignment)
        assert np.array_equal(a.centroids, b.centroids)

    def test_reduces_k_to_distinct_count(self):
        pm = kmeans_1d(np.array([1.0, 1.0, 2.0]), 5, seed=0)
        assert pm.P == 2

    def test_empty_input_errors(self):
        with pytest.raises(ValueError):
            kmeans_1d(np.array([]), 2, seed=0)

    def test_partitions_contiguous_in_chi_order(self):
        rng = np.random.default_rng(7)
        for seed in range(5):
            values = rng.random(100)
            pm = kmeans_1d(values, 6, seed=seed)
            labels_sorted = pm.assignment[np.argsort(values, kind="stable")]
            # Non-interleaved: once a label ends it never reappears.
            changes = np.diff(labels_sorted)
            assert np.all(changes >= 0)

    def test_centroids_sorted_and_nonempty(self):
        values = np.random.default_rng(3).random(50)
        pm = kmeans_1d(values, 8, seed=1)
        assert np.all(np.diff(pm.centroids) > 0)
        assert np.all(pm.sizes > 0)
        assert pm.sizes.sum() == 50


class TestNeymanAllocation:
    def _pm(self, chi, k):
        return kmeans_1d(np.asarray(chi, dtype=float), k, seed=0)

    def test_zero_variance_stratum_gets_nothing(self):
        chi = np.array([0.5] * 50 + list(np.linspace(0, 1, 50)))
        pm = kmeans_1d(chi, 2, seed=0)
        # Identify which partition is the constant one.
        const_p = pm.assignment[0]
        alloc = neyman_allocation(pm, chi, 10)
        sigma = [chi[pm.assignment == p].std() for p in range(pm.P)]
        if sigma[const_p] == 0:
            assert alloc.n_p[const_p] == 0
        assert alloc.n_p.sum() == 10

    def test_symmetry(self):
        chi = np.array([0.0, 0.1, 0.2, 0.8, 0.9, 1.0])
        pm = self._pm(chi, 2)
        alloc = neyman_allocation(pm, chi, 10 if False else 4)
        assert list(alloc.n_p) == [2, 2]

    def test_hand_example_largest_remainder(self):
        # sizes [10, 30], sigma [0.2, 0.1] -> raw [2, 3] -> [4, 6].
        rng = np.random.default_rng(0)
        chi = np.concatenate(
            [
                0.2 + 0.2 * np.sin(np.linspace(0, 2 * np.pi, 10)),
                0.8 + 0.1 * np.sin(np.linspace(0, 2 * np.pi, 30)),
            ]
        )
        pm = kmeans_1d(chi, 2, seed=0)
        assert list(pm.sizes) == [10, 30]
        norm = (chi - chi.min()) / (chi.max() - chi.min())
        raw = [
            pm.sizes[p] * norm[pm.assignment == p].std() for p in range(2)
        ]
        alloc = neyman_allocation(pm, chi, 10)
        expected = np.round(10 * np.array(raw) / sum(raw)).astype(int)
        assert list(alloc.n_p) == list(expected)
        assert alloc.n_p.sum() == 10

    def test_sums_exactly(self):
        rng = np.random.default_rng(1)
        chi = rng.random(100)
        pm = self._pm(chi, 7)
        for n in (1, 5, 17, 99):
            assert neyman_allocation(pm, chi, n).n_p.sum() == n

    def test_scale_invariance(self):
        rng = np.random.default_rng(2)
        chi = rng.random(60) + 0.1
        pm = self._pm(chi, 4)
        a = neyman_allocation(pm, chi, 20).n_p
        b = neyman_allocation(pm, 5.0 * chi, 20).n_p
        assert np.array_equal(a, b)

    def test_caps_at_partition_size(self):
        # One tiny high-spread partition cannot absorb more than its size.
        chi = np.array([0.0, 1.0] + [0.5] * 18)
        pm = kmeans_1d(chi, 3, seed=0)
        alloc = neyman_allocation(pm, chi, 15)
        assert np.all(alloc.n_p <= pm.sizes)
        assert alloc.n_p.sum() == 15

    def test_constant_chi_falls_back_to_proportional(self):
        chi = np.array([0.3] * 30)
        pm = kmeans_1d(chi, 3, seed=0)  # collapses to one partition
        alloc = neyman_allocation(pm, chi, 6)
        assert alloc.n_p.sum() == 6

    def test_budget_above_population_errors(self):
        chi = np.array([0.1, 0.9])
        pm = self._pm(chi, 2)
        with pytest.raises(ValueError):
            neyman_allocation(pm, chi, 3)
