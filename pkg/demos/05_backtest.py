"""Trading model scores against the equal-weight market average."""
# %%
from stockselect import (BacktestConfig, SynthSpec, build_labeled_dataset, chronological_split,
                         make_synthetic_panel, run_backtest, train_lr)

panel, _, _ = make_synthetic_panel(SynthSpec(n_stocks=100, n_dates=250, n_features=24,
                                             n_informative=4, seed=5))
ds = build_labeled_dataset(panel, 30, 4)
train, test = chronological_split(ds, [0.8, 0.2], align_dates=True)
model = train_lr(train.X, train.y)

# %% Start trading on the first out-of-sample anchor, rebalancing every 4 days.
start = str(test.anchor_dates.min())
for cost in (0.0, 0.002):
    res = run_backtest(panel, model, BacktestConfig(start=start, period=4, cost_rate=cost))
    p, b = res.summary["portfolio"], res.summary["benchmark"]
    print(f"cost {cost:.3f}: portfolio {p['total_return']:+.2%} (mdd {p['max_drawdown']:.2%}), "
          f"market {b['total_return']:+.2%}")

# %% The first rebalance.
date, weights = res.rebalances[0]
top = sorted(weights.items(), key=lambda kv: -kv[1])[:5]
print(date, [(t, round(w, 3)) for t, w in top])
