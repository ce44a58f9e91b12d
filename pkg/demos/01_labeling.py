"""Turning a price panel into a labeled classification set."""
# %%
import numpy as np

from stockselect import (SynthSpec, anchor_schedule, build_labeled_dataset, chronological_split,
                         labeled_cap, make_synthetic_panel, rv_ratio)

panel, planted, _ = make_synthetic_panel(SynthSpec(n_stocks=50, n_dates=120, n_features=12,
                                                   n_informative=3, seed=1))
print(panel.n_dates, "days,", panel.n_tickers, "stocks,", panel.n_features, "features")

# %% Score one stock over the 4 days after the first date.
print("ratio for", panel.tickers[0], "=", round(rv_ratio(panel, panel.tickers[0], 0, 4), 3))

# %% Anchors sit 1+f days apart so forward windows never overlap.
f, q = 4, 30
anchors = anchor_schedule(panel.n_dates, f)
print("anchors:", anchors[:6], "...")

ds = build_labeled_dataset(panel, q, f, anchors)
print(len(ds), "labeled rows; cap is", labeled_cap(q, panel.n_dates, panel.n_tickers, f))
print("class balance:", np.bincount(ds.y))

# %% Chronological split: every test anchor comes after every train anchor.
train, test = chronological_split(ds, [0.8, 0.2], align_dates=True)
print("train ends", train.anchor_dates.max(), "| test starts", test.anchor_dates.min())
