"""Sampling-based estimation of operational model accuracy from a labeling budget."""

from .auxvar import (
    ActivationTraces,
    ChiVector,
    chi_from_confidence,
    compute_dsa,
    compute_lsa,
    min_max_normalize,
    reconstruction_error,
    selection_probabilities,
    shift_positive,
)
from .draw import (
    DrawTrace,
    RandomStream,
    derive_seed,
    pps_draw,
    pps_with_replacement,
    random_grouping,
    srs_with_replacement,
    srs_without_replacement,
)
from .harness import (
    EvalConfig,
    EvalReport,
    IntractableError,
    NotEnumerableError,
    enumerate_expectation,
    enumerate_paths,
    offset_histogram,
    rmedse,
    rmse,
    run_experiment,
    sensitivity_summary,
)
from .partition import Allocation, PartitionMap, kmeans_1d, neyman_allocation
from .population import (
    CLASSIFICATION,
    REGRESSION,
    LabelingOracle,
    Population,
    PopulationRecord,
    SyntheticConfig,
    generate_synthetic,
    load_population,
    true_accuracy,
    write_population_csv,
)
from .techniques import (
    TECHNIQUES,
    TechniqueConfig,
    TechniqueResult,
    run_ces,
    run_deepest,
    run_gbs,
    run_rhcs,
    run_srs,
    run_ssrs,
    run_sups,
    run_technique,
    run_twoups,
    ssrs_allocation,
)

__version__ = "0.1.0"
