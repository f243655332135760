"""Operational-dataset model, file ingestion, synthetic populations, labeling oracle.

The population holds predictions plus hidden ground truth.  Sampling
techniques may only learn true outcomes through a :class:`LabelingOracle`,
which meters labeling cost per distinct example.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .auxvar import ChiVector, min_max_normalize
from .draw import RandomStream

__all__ = [
    "CLASSIFICATION",
    "REGRESSION",
    "PopulationRecord",
    "Population",
    "LabelingOracle",
    "SyntheticConfig",
    "load_population",
    "generate_synthetic",
    "true_accuracy",
]

CLASSIFICATION = "classification"
REGRESSION = "regression"


@dataclass
class PopulationRecord:
    """One operational example: prediction, hidden truth, auxiliary scores."""

    id: int
    task: str
    predicted_label: int | None = None
    true_label: int | None = None
    predicted_value: float | None = None
    true_value: float | None = None
    aux: dict = field(default_factory=dict)
    features: np.ndarray | None = None

    def __post_init__(self):
        if self.task == CLASSIFICATION:
            if self.predicted_label is None or self.true_label is None:
                raise ValueError(f"record {self.id}: classification needs a label pair")
            if self.predicted_value is not None or self.true_value is not None:
                raise ValueError(f"record {self.id}: mixed task columns")
        elif self.task == REGRESSION:
            if self.predicted_value is None or self.true_value is None:
                raise ValueError(f"record {self.id}: regression needs a value pair")
            if self.predicted_label is not None or self.true_label is not None:
                raise ValueError(f"record {self.id}: mixed task columns")
        else:
            raise ValueError(f"unknown task {self.task!r}")

    @property
    def outcome(self):
        """z (misclassification flag) or delta (absolute offset)."""
        if self.task == CLASSIFICATION:
            return int(self.predicted_label != self.true_label)
        return abs(self.true_value - self.predicted_value)


class Population:
    """The full operational dataset D; immutable after construction."""

    def __init__(self, records: list, task: str):
        if not records:
            raise ValueError("population must contain at least one record")
        self.records = list(records)
        self.task = task
        self.N = len(self.records)
        ids = np.array([r.id for r in self.records])
        if not np.array_equal(np.sort(ids), np.arange(self.N)):
            raise ValueError("record ids must be unique and dense in [0, N)")
        if np.any(ids != np.arange(self.N)):
            self.records.sort(key=lambda r: r.id)
        for r in self.records:
            if r.task != task:
                raise ValueError("mixed tasks within one population")
        self._outcomes = np.array([r.outcome for r in self.records], dtype=float)
        aux_names = set()
        for r in self.records:
            aux_names.update(r.aux)
        self._aux = {}
        for name in aux_names:
            col = np.array([r.aux.get(name, np.nan) for r in self.records], dtype=float)
            if not np.all(np.isfinite(col)):
                bad = int(np.flatnonzero(~np.isfinite(col))[0])
                raise ValueError(f"non-finite auxiliary value at row {bad}")
            self._aux[name] = col
        if self.records[0].features is not None:
            self._features = np.array([r.features for r in self.records], dtype=float)
        else:
            self._features = None

    @property
    def aux_names(self):
        return sorted(self._aux)

    def aux_vector(self, name: str) -> ChiVector:
        if name not in self._aux:
            raise KeyError(f"auxiliary variable {name!r} not present (have {self.aux_names})")
        return ChiVector(name, self._aux[name])

    def features_matrix(self) -> np.ndarray | None:
        """Feature vectors for representativeness-driven selection, if present."""
        return self._features

    def _true_outcomes(self) -> np.ndarray:
        """Full ground truth; evaluation-side only, never handed to techniques."""
        return self._outcomes


class LabelingOracle:
    """Gatekeeper for ground truth: reveals one outcome at a time, counts cost.

    Cost is counted per distinct example; re-revealing an already labeled
    example is free (a human labels each input once).
    """

    def __init__(self, population: Population):
        self.population = population
        self._mask = np.zeros(population.N, dtype=bool)
        self.reveal_count = 0

    @property
    def labeled_ids(self) -> set:
        return set(int(i) for i in np.flatnonzero(self._mask))

    def reveal(self, record_id: int):
        if not 0 <= record_id < self.population.N:
            raise IndexError(f"record id {record_id} out of range")
        if not self._mask[record_id]:
            self._mask[record_id] = True
            self.reveal_count += 1
        value = self.population._true_outcomes()[record_id]
        return int(value) if self.population.task == CLASSIFICATION else float(value)

    def reveal_many(self, record_ids) -> np.ndarray:
        ids = np.asarray(record_ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.population.N):
            raise IndexError("record id out of range")
        self._mask[ids] = True
        self.reveal_count = int(np.count_nonzero(self._mask))
        return self.population._true_outcomes()[ids]

    def labeled_outcomes(self):
        """(ids, outcomes) over everything labeled so far, id-ascending."""
        ids = np.flatnonzero(self._mask)
        return ids, self.population._true_outcomes()[ids]


@dataclass
class SyntheticConfig:
    """Knobs for ground-truth-controllable test populations."""

    task: str = CLASSIFICATION
    N: int = 10000
    target_accuracy: float = 0.9
    chi_correlation: float = 0.8
    noise_seed: int | None = None
    offset_scale: float = 0.25
    failure_slope: float = 4.0
    # Right-skew of the auxiliary variable (0 = linear latent).  Confidence
    # style scores on accurate models are heavily right-skewed; a skewed chi
    # is what makes unequal-probability sampling expose many more failures.
    chi_skew: float = 1.5

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if not 0.0 < self.target_accuracy < 1.0:
            raise ValueError("infeasible calibration: target accuracy must be in (0, 1)")
        if not -1.0 <= self.chi_correlation <= 1.0:
            raise ValueError("chi correlation must lie in [-1, 1]")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_synthetic(config: SyntheticConfig, seed: int) -> Population:
    """Population with a tunable chi-to-failure correlation.

    A latent standard normal u drives both the failure mechanism and
    (mixed with independent noise per ``chi_correlation``) the auxiliary
    variable, so the correlation knob directly controls how informative chi
    is about failures.
    """
    rng = RandomStream(seed)
    noise = RandomStream(config.noise_seed) if config.noise_seed is not None else rng.split("chi-noise")
    u = rng.standard_normal(config.N)
    g = noise.standard_normal(config.N)
    rho = config.chi_correlation
    chi_latent = rho * u + math.sqrt(max(0.0, 1.0 - rho * rho)) * g
    if config.chi_skew:
        chi_latent = np.exp(config.chi_skew * chi_latent)
    chi = min_max_normalize(chi_latent)

    records = []
    if config.task == CLASSIFICATION:
        target = 1.0 - config.target_accuracy
        v = rng.random(config.N)
        b = config.failure_slope

        def realized(a):
            return float(np.mean(v < _sigmoid(a + b * u)))

        lo, hi = -60.0, 60.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if realized(mid) < target:
                lo = mid
            else:
                hi = mid
        # Bisection lands between adjacent crossing points, so the gap is at
        # most one record (1/N <= 1/sqrt(N)); pick the closest endpoint.
        a = min((lo, 0.5 * (lo + hi), hi), key=lambda c: abs(realized(c) - target))
        if abs(realized(a) - target) > 1.0 / math.sqrt(config.N):
            raise ValueError("infeasible calibration: cannot reach target accuracy")
        z = v < _sigmoid(a + b * u)
        for i in range(config.N):
            records.append(
                PopulationRecord(
                    id=i,
                    task=CLASSIFICATION,
                    predicted_label=0,
                    true_label=int(z[i]),
                    aux={"chi": float(chi[i])},
                )
            )
    else:
        base = np.exp(config.offset_scale * u)
        scale = math.sqrt((1.0 - config.target_accuracy) / float(np.mean(base**2)))
        delta = scale * base
        sign = np.where(rng.random(config.N) < 0.5, -1.0, 1.0)
        true_vals = rng.standard_normal(config.N)
        for i in range(config.N):
            records.append(
                PopulationRecord(
                    id=i,
                    task=REGRESSION,
                    true_value=float(true_vals[i]),
                    predicted_value=float(true_vals[i] + sign[i] * delta[i]),
                    aux={"chi": float(chi[i])},
                )
            )
    return Population(records, config.task)


def true_accuracy(population: Population) -> float:
    """xi = 1 - failure rate (classification) or 1 - mean squared offset."""
    outcomes = population._true_outcomes()
    if population.task == CLASSIFICATION:
        return 1.0 - float(np.mean(outcomes))
    delta_sq = float(np.mean(outcomes**2))
    if delta_sq > 1.0:
        warnings.warn(
            "unnormalized offsets: mean squared offset exceeds 1, accuracy is negative",
            stacklevel=2,
        )
    return 1.0 - delta_sq


_CLASS_COLS = ("id", "true_label", "predicted_label")
_REG_COLS = ("id", "true_value", "predicted_value")


def _coerce_rows(rows: list, schema: dict | None) -> Population:
    schema = dict(schema or {})
    if not rows:
        raise ValueError("empty population file")
    columns = list(rows[0].keys())

    def actual(name):
        return schema.get(name, name)

    have_class = all(actual(c) in columns for c in _CLASS_COLS[1:])
    have_reg = all(actual(c) in columns for c in _REG_COLS[1:])
    if have_class and have_reg:
        raise ValueError("mixed task columns: both label and value pairs present")
    if not have_class and not have_reg:
        missing = [c for c in _CLASS_COLS[1:] + _REG_COLS[1:] if actual(c) not in columns]
        raise ValueError(f"missing column(s): no complete task pair among {missing}")
    if actual("id") not in columns:
        raise ValueError(f"missing column: {actual('id')}")
    task = CLASSIFICATION if have_class else REGRESSION
    reserved = {actual(c) for c in (_CLASS_COLS if have_class else _REG_COLS)}
    feat_cols = sorted(
        (c for c in columns if c.startswith("feat_")),
        key=lambda c: int(c.split("_", 1)[1]),
    )
    aux_cols = [c for c in columns if c not in reserved and c not in feat_cols]

    records = []
    for k, row in enumerate(rows):
        aux = {}
        for c in aux_cols:
            value = float(row[c])
            if not math.isfinite(value):
                raise ValueError(f"non-finite auxiliary value at row {k}")
            aux[c] = value
        features = np.array([float(row[c]) for c in feat_cols]) if feat_cols else None
        common = dict(id=int(row[actual("id")]), task=task, aux=aux, features=features)
        if task == CLASSIFICATION:
            records.append(
                PopulationRecord(
                    true_label=int(row[actual("true_label")]),
                    predicted_label=int(row[actual("predicted_label")]),
                    **common,
                )
            )
        else:
            records.append(
                PopulationRecord(
                    true_value=float(row[actual("true_value")]),
                    predicted_value=float(row[actual("predicted_value")]),
                    **common,
                )
            )
    return Population(records, task)


def load_population(path, schema: dict | None = None) -> Population:
    """Read a population from CSV (header row) or JSON (list of objects).

    ``schema`` maps canonical column names (id, true_label, predicted_label,
    true_value, predicted_value) to the file's actual column names.  Any
    other column is an auxiliary variable, except feat_0..feat_m which form
    the feature matrix.
    """
    path = str(path)
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            rows = json.load(fh)
        rows = [{k: v for k, v in row.items()} for row in rows]
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    return _coerce_rows(rows, schema)


def write_population_csv(population: Population, path):
    """Inverse of load_population for the canonical column layout."""
    aux_names = population.aux_names
    feats = population.features_matrix()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if population.task == CLASSIFICATION:
            head = ["id", "true_label", "predicted_label"]
        else:
            head = ["id", "true_value", "predicted_value"]
        head += aux_names
        if feats is not None:
            head += [f"feat_{j}" for j in range(feats.shape[1])]
        writer.writerow(head)
        for r in population.records:
            if population.task == CLASSIFICATION:
                row = [r.id, r.true_label, r.predicted_label]
            else:
                row = [r.id, repr(r.true_value), repr(r.predicted_value)]
            row += [repr(r.aux[a]) for a in aux_names]
            if feats is not None:
                row += [repr(float(x)) for x in feats[r.id]]
            writer.writerow(row)
