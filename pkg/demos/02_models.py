"""The three base classifiers on a planted-signal set."""
# %%
from stockselect import (DnnConfig, RFConfig, SynthSpec, build_labeled_dataset, chronological_split,
                         confusion_metrics, make_synthetic_panel, train_dnn, train_lr, train_rf)

panel, planted, _ = make_synthetic_panel(SynthSpec(n_stocks=100, n_dates=200, n_features=24,
                                                   n_informative=4, seed=2))
ds = build_labeled_dataset(panel, 30, 4)
train, test = chronological_split(ds, [0.8, 0.2], align_dates=True)

# %% Logistic regression, random forest and the three-layer network.
models = {
    "lr": train_lr(train.X, train.y),
    "rf": train_rf(train.X, train.y, RFConfig(n_trees=50)),
    "dnn": train_dnn(train.X, train.y, DnnConfig()),
}

# %% Threshold 0.5 for the confusion counts; AUC is threshold-free.
for name, model in models.items():
    rep = confusion_metrics(model.predict(test.X), test.y)
    print(f"{name:4s} auc={rep.auc:.3f} acc={rep.accuracy:.3f} f1={rep.f1:.3f}")

# %% Restricting the LR to the planted columns.
lr_planted = train_lr(train.X, train.y, mask=planted)
print("lr on planted only:", round(confusion_metrics(lr_planted.predict(test.X), test.y).auc, 3))
