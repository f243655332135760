"""Tour of the eight sampling techniques on one synthetic population.

Generates a classification population with a failure-correlated auxiliary
score, then runs every technique once at the same labeling budget and
prints the estimated accuracy, the number of labels spent, and the number
of failures each technique surfaced.
"""

from opsample import (
    CLASSIFICATION,
    LabelingOracle,
    RandomStream,
    SyntheticConfig,
    TECHNIQUES,
    TechniqueConfig,
    generate_synthetic,
    run_technique,
    true_accuracy,
)

BUDGET = 200

config = SyntheticConfig(
    task=CLASSIFICATION, N=5000, target_accuracy=0.9, chi_correlation=0.8
)
pop = generate_synthetic(config, seed=7)
print(f"population: N={pop.N}, true accuracy {true_accuracy(pop):.4f}\n")
print(f"{'technique':<10} {'xi_hat':>8} {'labels':>7} {'failures':>9}")

for name in TECHNIQUES:
    needs_chi = name not in ("srs", "ces")
    tc = TechniqueConfig(
        technique=name,
        aux="chi" if needs_chi else None,
        budget=BUDGET,
        k=10,
    )
    result = run_technique(pop, LabelingOracle(pop), tc, RandomStream(1))
    print(
        f"{name:<10} {result.xi_hat:>8.4f} {result.distinct_labeled:>7} "
        f"{result.failures:>9}"
    )

print(
    "\nNote how the chi-guided techniques (sups, deepest, ...) surface many"
    "\nmore failures than plain srs at the same budget while their accuracy"
    "\nestimates stay centered on the truth."
)
