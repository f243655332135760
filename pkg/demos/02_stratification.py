"""Why stratifying on the auxiliary score cuts estimation error.

Builds a population with ten homogeneous groups whose failure rates rise
with the auxiliary score, partitions it with 1-D k-means, shows the sample
allocation, and compares the repeated-run RMSE of plain random sampling
against stratified sampling at the same budget.
"""

import numpy as np

from opsample import (
    CLASSIFICATION,
    LabelingOracle,
    Population,
    PopulationRecord,
    RandomStream,
    TechniqueConfig,
    kmeans_1d,
    rmse,
    run_technique,
    ssrs_allocation,
    true_accuracy,
)

rng = np.random.default_rng(0)
records = []
rid = 0
for s in range(10):
    chi_s = 0.05 + 0.1 * s
    rate = 0.05 + 0.08 * s
    for _ in range(300):
        records.append(
            PopulationRecord(
                id=rid,
                task=CLASSIFICATION,
                predicted_label=0,
                true_label=int(rng.random() < rate),
                aux={"chi": chi_s},
            )
        )
        rid += 1
pop = Population(records, CLASSIFICATION)
chi = pop.aux_vector("chi")
xi = true_accuracy(pop)
print(f"population: N={pop.N}, true accuracy {xi:.4f}")

pm = kmeans_1d(chi.values, 10)
alloc = ssrs_allocation(pm, chi.values, 200)
print(f"partition sizes: {[int(s) for s in pm.sizes]}")
print(f"allocation of 200 draws: {[int(a) for a in alloc.n_p]}  (chi is constant inside each")
print("partition, so allocation falls back to proportional-to-size)\n")

REPS = 400
results = {}
for name in ("srs", "ssrs"):
    tc = TechniqueConfig(
        technique=name, aux=None if name == "srs" else "chi", budget=200, k=10
    )
    estimates = [
        1.0
        - run_technique(pop, LabelingOracle(pop), tc, RandomStream(seed)).estimate
        for seed in range(REPS)
    ]
    results[name] = rmse(estimates, xi)
    print(f"{name:<5} RMSE over {REPS} runs: {results[name]:.5f}")

print(
    f"\nstratification cuts RMSE by "
    f"{100 * (1 - results['ssrs'] / results['srs']):.0f}% here: the between-group"
    "\nspread of failure rates is removed from the estimator's variance."
)
