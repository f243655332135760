"""Auxiliary variables: per-record nonnegative scores that steer sampling.

A sampling run never sees true outcomes; it sees one of these scores
(confidence-derived, surprise adequacy, or autoencoder reconstruction error)
assumed to correlate with failure probability.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "ChiVector",
    "ActivationTraces",
    "chi_from_confidence",
    "compute_dsa",
    "compute_lsa",
    "reconstruction_error",
    "min_max_normalize",
    "shift_positive",
    "selection_probabilities",
]


@dataclass
class ChiVector:
    """Named vector of nonnegative auxiliary values, aligned to record ids."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("auxiliary values must be a flat vector")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("auxiliary values must be finite")
        if np.any(self.values < 0):
            raise ValueError("auxiliary values must be nonnegative")

    def __len__(self):
        return self.values.size


@dataclass
class ActivationTraces:
    """One activation-trace vector per record, plus predicted classes for DSA."""

    matrix: np.ndarray
    predicted_class: np.ndarray | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[1] < 1:
            raise ValueError("activation traces must be an N x L matrix with L >= 1")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("activation traces contain non-finite entries")
        if self.predicted_class is not None:
            self.predicted_class = np.asarray(self.predicted_class)
            if self.predicted_class.shape != (self.matrix.shape[0],):
                raise ValueError("one predicted class per trace required")


def chi_from_confidence(confidences) -> ChiVector:
    """chi = 1 - confidence; low confidence means high expected failure."""
    conf = np.asarray(confidences, dtype=float)
    if np.any(conf < 0) or np.any(conf > 1) or not np.all(np.isfinite(conf)):
        raise ValueError("confidence values must lie in [0, 1]")
    return ChiVector("confidence", 1.0 - conf)


def compute_dsa(ats: ActivationTraces) -> ChiVector:
    """Distance-based surprise: nearest-neighbour distance ratio sigma_A/sigma_B.

    sigma_A is the distance from a record's trace to its nearest neighbour
    with the same predicted class, sigma_B the distance to the nearest trace
    of any other class.  Records with sigma_A == 0 score 0; a degenerate
    sigma_B == 0 gets a large finite sentinel (10x the max finite score) so
    downstream PPS weights stay finite.
    """
    if ats.predicted_class is None:
        raise ValueError("DSA requires predicted classes")
    X = ats.matrix
    classes = ats.predicted_class
    n = X.shape[0]
    uniq, counts = np.unique(classes, return_counts=True)
    if uniq.size < 2:
        raise ValueError("DSA needs at least two predicted classes")
    if np.any(counts < 2):
        bad = uniq[counts < 2][0]
        raise ValueError(f"predicted class {bad!r} has a single member; sigma_A undefined")

    # Full pairwise distances; fine for the moderate N this is used at.
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    np.fill_diagonal(dist, np.inf)

    same = classes[:, None] == classes[None, :]
    sigma_a = np.min(np.where(same, dist, np.inf), axis=1)
    sigma_b = np.min(np.where(~same, dist, np.inf), axis=1)

    values = np.zeros(n)
    zero_a = sigma_a == 0
    zero_b = sigma_b == 0
    regular = ~zero_a & ~zero_b
    values[regular] = sigma_a[regular] / sigma_b[regular]
    # sigma_A == 0 means an identical same-class trace exists: zero surprise.
    degenerate = zero_b & ~zero_a
    if np.any(degenerate):
        finite_max = values[regular].max() if np.any(regular) else 1.0
        values[degenerate] = 10.0 * max(finite_max, 1e-12)
        warnings.warn(
            f"{int(degenerate.sum())} record(s) share a trace with another class; "
            "DSA set to a large sentinel",
            stacklevel=2,
        )
    return ChiVector("dsa", values)


def compute_lsa(ats: ActivationTraces, variance_floor: float = 1e-5) -> ChiVector:
    """Likelihood-based surprise: -log of a leave-one-out Gaussian KDE.

    Product Gaussian kernel with Scott's-rule bandwidth per dimension;
    dimensions whose variance falls below ``variance_floor`` are dropped.
    """
    X = ats.matrix
    n = X.shape[0]
    if n < 2:
        raise ValueError("LSA needs at least two records")
    var = X.var(axis=0)
    keep = var >= variance_floor
    if not np.any(keep):
        raise ValueError("all activation dimensions fell below the variance floor")
    X = X[:, keep]
    d = X.shape[1]
    bw = np.sqrt(var[keep]) * n ** (-1.0 / (d + 4))

    # log kernel matrix: log K(i, j) summed over dimensions, diagonal excluded.
    log_k = np.zeros((n, n))
    for dim in range(d):
        diff = (X[:, dim, None] - X[None, :, dim]) / bw[dim]
        log_k -= 0.5 * diff * diff
    log_norm = np.sum(np.log(bw * math.sqrt(2.0 * math.pi)))
    np.fill_diagonal(log_k, -np.inf)
    log_density = logsumexp(log_k, axis=1) - math.log(n - 1) - log_norm
    return ChiVector("lsa", -log_density)


def reconstruction_error(original, reconstructed) -> float:
    """Mean squared per-element difference between an image and its reconstruction."""
    a = np.asarray(original, dtype=float)
    b = np.asarray(reconstructed, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def min_max_normalize(values) -> np.ndarray:
    """Affine rescale to [0, 1]; requires a non-constant input."""
    x = np.asarray(values, dtype=float)
    lo, hi = x.min(), x.max()
    if hi <= lo:
        raise ValueError("cannot min-max normalize a constant vector")
    return (x - lo) / (hi - lo)


def shift_positive(values) -> np.ndarray:
    """Shift by ceil(|min|) when any value is negative; preserves differences."""
    x = np.asarray(values, dtype=float)
    lo = x.min() if x.size else 0.0
    if lo >= 0:
        return x.copy()
    return x + math.ceil(abs(lo))


def selection_probabilities(chi, zero_floor: float = 1e-9) -> np.ndarray:
    """Normalize chi into PPS selection probabilities summing to 1.

    If any value is exactly zero, a floor of ``zero_floor * max(chi)`` is
    added to every value first: the unequal-probability estimators are only
    unbiased over the whole population when every record is selectable.
    """
    values = chi.values if isinstance(chi, ChiVector) else np.asarray(chi, dtype=float)
    if np.any(values < 0):
        raise ValueError("chi values must be nonnegative")
    top = values.max() if values.size else 0.0
    if top <= 0:
        raise ValueError("all-zero chi vector")
    if values.min() == 0:
        values = values + zero_floor * top
    return values / values.sum()
