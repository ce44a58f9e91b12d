"""Stacking a network and a forest under a logistic meta-learner."""
# %%
import numpy as np

from stockselect import (RFConfig, SynthSpec, auc, build_labeled_dataset, chronological_split,
                         make_synthetic_panel, train_stack)

panel, _, _ = make_synthetic_panel(SynthSpec(n_stocks=100, n_dates=200, n_features=24,
                                             n_informative=4, seed=3))
ds = build_labeled_dataset(panel, 30, 4)
train, test = chronological_split(ds, [0.8, 0.2], align_dates=True)

stack = train_stack(train, rf_cfg=RFConfig(n_trees=50))

# %% The trace records which rows each level saw.
tr = stack.trace
print("network rows:", len(tr.dnn_rows), "| forest rows:", len(tr.rf_rows),
      "| meta rows:", len(tr.meta_rows))
print("meta weights (network, forest):", np.round(stack.meta.beta, 3), "bias", round(stack.meta.b, 3))

# %% Each level on the held-out set.
print("network", round(auc(stack.base_dnn.predict(test.X), test.y), 3))
print("forest ", round(auc(stack.base_rf.predict(test.X), test.y), 3))
print("stack  ", round(auc(stack.predict(test.X), test.y), 3))
