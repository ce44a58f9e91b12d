"""Genetic search for a feature subset, scored by logistic-regression AUC."""
# %%
from stockselect import (GaConfig, SynthSpec, build_labeled_dataset, chronological_split, evolve,
                         make_synthetic_panel, selected_names)

panel, planted, _ = make_synthetic_panel(SynthSpec(n_stocks=100, n_dates=200, n_features=40,
                                                   n_informative=6, seed=4))
ds = build_labeled_dataset(panel, 30, 4)
train, test = chronological_split(ds, [0.8, 0.2], align_dates=True)

# %% A short run; the defaults are 100 individuals for 100 generations.
best, trace = evolve(train, test, GaConfig(population_size=40, generations=25, seed=0))
for g in range(0, 26, 5):
    print(f"gen {g:2d}: best {trace.best_fitness[g]:.4f} mean {trace.mean_fitness[g]:.4f}")
print("distinct masks evaluated:", trace.evaluations)

# %% How many planted columns survived?
kept = int((best & planted).sum())
print(f"selected {int(best.sum())} of {len(best)}; kept {kept} of {int(planted.sum())} planted")
print(selected_names(best, ds.feature_names)[:8], "...")
