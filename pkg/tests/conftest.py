import numpy as np

from opsample.population import CLASSIFICATION, REGRESSION, Population, PopulationRecord


def make_classification(z, chi=None):
    """Tiny classification population with given failure flags and chi."""
    records = []
    for i, zi in enumerate(z):
        aux = {"chi": float(chi[i])} if chi is not None else {}
        records.append(
            PopulationRecord(
                id=i, task=CLASSIFICATION, predicted_label=0, true_label=int(zi), aux=aux
            )
        )
    return Population(records, CLASSIFICATION)


def make_regression(deltas, chi=None):
    """Tiny regression population with given absolute offsets and chi."""
    records = []
    for i, d in enumerate(deltas):
        aux = {"chi": float(chi[i])} if chi is not None else {}
        records.append(
            PopulationRecord(
                id=i, task=REGRESSION, true_value=0.0, predicted_value=float(d), aux=aux
            )
        )
    return Population(records, REGRESSION)


def random_tiny_population(rng: np.random.Generator, task=CLASSIFICATION, n_min=3, n_max=6):
    """Random tiny population with arbitrary outcomes and strictly positive chi."""
    n = int(rng.integers(n_min, n_max + 1))
    chi = rng.random(n) + 0.05
    if task == CLASSIFICATION:
        z = rng.integers(0, 2, size=n)
        return make_classification(z, chi)
    deltas = rng.random(n)
    return make_regression(deltas, chi)
