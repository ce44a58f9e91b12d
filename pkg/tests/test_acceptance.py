"""Acceptance gate: one PASS/FAIL line per criterion at the stated tolerances."""
import math
import time

import numpy as np
import pytest

from stockselect.backtest import BacktestConfig, run_backtest
from stockselect.errors import EmptyDatasetError
from stockselect.ga_select import GaConfig, evolve
from stockselect.linear_model import bce_loss_and_grad, train_lr
from stockselect.metrics import auc
from stockselect.neural_net import PARAM_NAMES, init_params, loss_and_grads, one_hot, train_dnn
from stockselect.panel import (
    FeaturePanel,
    anchor_schedule,
    build_labeled_dataset,
    default_feature_names,
    labeled_cap,
)
from stockselect.pipeline import PipelineConfig, run_pipeline
from stockselect.random_forest import train_rf
from stockselect.stacking import train_stack
from stockselect.synth import SynthSpec, make_synthetic_panel

from conftest import linear_dataset

pytestmark = pytest.mark.acceptance


def brute_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    hits = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
    return hits / (len(pos) * len(neg))


def test_c1_auc_oracle(verdict):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    mismatches = 0
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, n)
        if labels.min() == labels.max():
            continue
        # coarse grid forces plenty of ties
        scores = rng.integers(0, int(rng.integers(2, 50)), n) / 7.0
        mismatches += auc(scores, labels) != brute_auc(scores, labels)
        done += 1
    elapsed = time.perf_counter() - t0
    verdict("C1 AUC equals pair counting on 1000 instances, < 10 s",
            mismatches == 0 and elapsed < 10, f"{mismatches} mismatches, {elapsed:.2f} s")


def _rel(a, b, floor):
    return np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), floor)


def test_c2_gradient_checks(verdict):
    rng = np.random.default_rng(2)
    h = 1e-5
    t0 = time.perf_counter()
    worst_lr = worst_dnn = 0.0
    for _ in range(20):
        n, d = int(rng.integers(5, 40)), int(rng.integers(1, 10))
        X = rng.standard_normal((n, d))
        y = rng.integers(0, 2, n).astype(float)
        theta = rng.standard_normal(d + 1)
        _, g, g0 = bce_loss_and_grad(theta[:-1], theta[-1], X, y)
        ana = np.append(g, g0)
        num = np.empty_like(theta)
        for i in range(len(theta)):
            e = np.zeros_like(theta)
            e[i] = h
            up = bce_loss_and_grad((theta + e)[:-1], (theta + e)[-1], X, y)[0]
            dn = bce_loss_and_grad((theta - e)[:-1], (theta - e)[-1], X, y)[0]
            num[i] = (up - dn) / (2 * h)
        worst_lr = max(worst_lr, float(_rel(ana, num, 1e-6).max()))

    for _ in range(20):
        n, B = int(rng.integers(4, 17)), int(rng.integers(4, 33))
        p = init_params(n, int(rng.integers(1 << 30)))
        p["gamma"] = p["gamma"] + 0.3 * rng.standard_normal(p["gamma"].shape)
        p["beta"] = 0.3 * rng.standard_normal(p["beta"].shape)
        # nonzero biases keep every ReLU input off its kink (zero biases put
        # rows with an all-dead first layer exactly at z2 = 0)
        for k in ("b1", "b2", "b3"):
            p[k] = 0.1 * rng.standard_normal(p[k].shape)
        X = rng.standard_normal((B, n))
        Y = one_hot(rng.integers(0, 2, B))
        _, grads, _, _ = loss_and_grads(p, X, Y, 0.01)
        for k in PARAM_NAMES:
            flat = p[k].ravel()
            for i in range(flat.size):
                old = flat[i]
                flat[i] = old + h
                up = loss_and_grads(p, X, Y, 0.01)[0]
                flat[i] = old - h
                dn = loss_and_grads(p, X, Y, 0.01)[0]
                flat[i] = old
                num = (up - dn) / (2 * h)
                worst_dnn = max(worst_dnn, float(_rel(grads[k].ravel()[i], num, 1e-6)))
    elapsed = time.perf_counter() - t0
    verdict("C2 gradients match central differences (LR 1e-5, DNN 1e-4), < 30 s",
            worst_lr < 1e-5 and worst_dnn < 1e-4 and elapsed < 30,
            f"LR worst {worst_lr:.2e}, DNN worst {worst_dnn:.2e}, {elapsed:.1f} s")


def test_c3_labeling_cap(verdict):
    rng = np.random.default_rng(3)
    worst = -math.inf
    for _ in range(50):
        q = float(rng.choice([rng.integers(1, 51), rng.uniform(0.5, 50)]))
        T, M, f = int(rng.integers(6, 80)), int(rng.integers(2, 60)), int(rng.integers(2, 8))
        if T <= f:
            T = f + 1
        closes = 30 * np.cumprod(1 + 0.02 * rng.standard_normal((T, M)), axis=0)
        dates = np.arange(np.datetime64("2019-01-01"), np.datetime64("2019-01-01") + T)
        panel = FeaturePanel(dates, [f"Z{i}" for i in range(M)], default_feature_names(1),
                             np.zeros((T, M, 1)), closes)
        try:
            n = len(build_labeled_dataset(panel, q, f, anchor_schedule(T, f)))
        except EmptyDatasetError:  # nothing labeled at small Q*M
            n = 0
        worst = max(worst, n - labeled_cap(q, T, M, f))
    verdict("C3 labeled rows <= cap on 50 configurations", worst <= 0,
            f"max(count - cap) = {worst}")


@pytest.fixture(scope="module")
def ga_runs(small_split):
    train, test = small_split
    cfg = GaConfig(seed=4)
    return [evolve(train, test, cfg) for _ in range(2)]


def test_c4_ga_mechanics(verdict, ga_runs):
    (best_a, tr_a), (best_b, tr_b) = ga_runs
    sizes_ok = tr_a.population_sizes == [100] * 101
    nonempty = all(c.any() for c in tr_a.best_chromosome) and best_a.any()
    monotone = all(b >= a for a, b in zip(tr_a.best_so_far, tr_a.best_so_far[1:]))
    same = np.array_equal(best_a, best_b) and tr_a.to_json() == tr_b.to_json()
    verdict("C4 GA: population 100, non-empty, best-so-far monotone, deterministic",
            sizes_ok and nonempty and monotone and same,
            f"sizes {sizes_ok}, non-empty {nonempty}, monotone {monotone}, identical {same}")


@pytest.fixture(scope="module")
def end_to_end(tmp_path_factory):
    t0 = time.perf_counter()
    panel, planted, _ = make_synthetic_panel(SynthSpec(seed=0))
    cfg = PipelineConfig(ga=True, seed=0, out=str(tmp_path_factory.mktemp("c5") / "out"))
    summary = run_pipeline(cfg, panel)
    return summary, planted, time.perf_counter() - t0


def _aucs(reports):
    return {k: r.auc for k, r in reports.items()}


def test_c5a_base_models(verdict, end_to_end):
    before = _aucs(end_to_end[0]["before"])
    ok = all(before[k] >= 0.85 for k in ("lr", "rf", "dnn"))
    verdict("C5 LR, RF, DNN held-out AUC >= 0.85", ok,
            ", ".join(f"{k} {v:.4f}" for k, v in before.items()))


def test_c5b_stack_vs_best(verdict, end_to_end):
    before = _aucs(end_to_end[0]["before"])
    best = max(before["lr"], before["rf"], before["dnn"])
    verdict("C5 stack AUC >= max(LR, RF, DNN) - 0.02", before["stack"] >= best - 0.02,
            f"stack {before['stack']:.4f}, best base {best:.4f}")


def test_c5c_ga_recovery(verdict, end_to_end):
    summary, planted, _ = end_to_end
    mask = summary["mask"]
    frac = (mask & planted).sum() / planted.sum()
    verdict("C5 GA keeps >= 80% of planted features", frac >= 0.8,
            f"{int((mask & planted).sum())}/{int(planted.sum())} planted, {int(mask.sum())} selected")


def test_c5d_post_selection(verdict, end_to_end):
    before, after = _aucs(end_to_end[0]["before"]), _aucs(end_to_end[0]["after"])
    diffs = {k: after[k] - before[k] for k in before}
    verdict("C5 post-selection AUCs within 0.03 of pre-selection",
            all(abs(d) <= 0.03 for d in diffs.values()),
            ", ".join(f"{k} {d:+.4f}" for k, d in diffs.items()))


def test_c5e_runtime(verdict, end_to_end):
    elapsed = end_to_end[2]
    verdict("C5 end-to-end runtime <= 15 min", elapsed <= 900, f"{elapsed:.0f} s")


def test_c6_stacking_protocol(verdict):
    ds = linear_dataset(1000, noise=0.5)
    model = train_stack(ds)
    tr = model.trace
    cfg_d, cfg_r, cfg_m = model.base_dnn.config, model.base_rf.config, model.meta.config
    dnn = train_dnn(ds.X[tr.dnn_rows], ds.y[tr.dnn_rows], cfg_d)
    rf = train_rf(ds.X[tr.train2], ds.y[tr.train2], cfg_r)
    meta_X = np.column_stack([dnn.predict(ds.X[tr.validation]), rf.predict(ds.X[tr.validation])])
    meta = train_lr(meta_X, ds.y[tr.validation], cfg_m, standardize=False)
    checks = {
        "dnn rows = T1+T2": np.array_equal(tr.dnn_rows, np.concatenate([tr.train1, tr.train2])),
        "rf rows = T2": np.array_equal(tr.rf_rows, tr.train2),
        "refit dnn identical": dnn.parameters_equal(model.base_dnn),
        "refit rf identical": rf.equals(model.base_rf),
        "meta inputs = 2 base scores": np.array_equal(meta_X, tr.meta_inputs),
        "refit meta identical": np.array_equal(meta.beta, model.meta.beta) and meta.b == model.meta.b,
        "disjoint": not (set(tr.train1) & set(tr.train2) or set(tr.train2) & set(tr.validation)
                         or set(tr.train1) & set(tr.validation)),
        "ordered": ds.anchor_dates[tr.train1].max() <= ds.anchor_dates[tr.train2].min()
                   and ds.anchor_dates[tr.train2].max() <= ds.anchor_dates[tr.validation].min(),
    }
    failed = [k for k, v in checks.items() if not v]
    verdict("C6 stacking protocol (row sets, meta inputs, disjoint and ordered parts)",
            not failed, "all hooks agree" if not failed else "failed: " + ", ".join(failed))


class _Const:
    def predict(self, X):
        return np.full(len(X), 0.5)


class _FirstColumn:
    def predict(self, X):
        return np.asarray(X)[:, 0]


def test_c7_backtest_identities(verdict):
    rng = np.random.default_rng(7)
    T, M = 80, 15
    closes = 20 * np.cumprod(1 + 0.02 * rng.standard_normal((T, M)), axis=0)
    dates = np.arange(np.datetime64("2020-01-01"), np.datetime64("2020-01-01") + T)
    panel = FeaturePanel(dates, [f"B{i:02d}" for i in range(M)], default_feature_names(2),
                         rng.random((T, M, 2)), closes)
    res = run_backtest(panel, _Const(), BacktestConfig(period=1, top_k=M, weighting="equal"))
    gap = float(np.max(np.abs(res.portfolio_nav - res.benchmark_nav)))

    two = FeaturePanel(dates[:2], ["A", "B"], default_feature_names(1),
                       np.array([[[1.0], [0.0]], [[1.0], [0.0]]]),
                       np.array([[10.0, 5.0], [20.0, 5.0]]))
    hand = run_backtest(two, _FirstColumn(), BacktestConfig(top_k=1))
    hand_ok = (hand.summary["portfolio"]["total_return"] == 1.0
               and hand.summary["benchmark"]["total_return"] == 0.5)

    cfg = BacktestConfig(period=3, top_k=5)
    full = run_backtest(panel, _FirstColumn(), cfg)
    trunc_ok = True
    for cut in (9, 40, 61):
        part = run_backtest(panel.truncate(cut), _FirstColumn(), cfg)
        trunc_ok &= np.array_equal(part.portfolio_nav, full.portfolio_nav[:cut + 1])
        trunc_ok &= part.rebalances == [r for r in full.rebalances if r[0] < dates[cut]]
    verdict("C7 backtest: constant model tracks benchmark, two-stock example, no look-ahead",
            gap <= 1e-9 and hand_ok and trunc_ok,
            f"max gap {gap:.1e}, hand example {hand_ok}, truncation {trunc_ok}")


def test_c8_run_determinism(verdict, tmp_path):
    panel, _, _ = make_synthetic_panel(SynthSpec(n_stocks=80, n_dates=150, n_features=24,
                                                 n_informative=4, seed=8))
    trees = []
    for name in ("a", "b"):
        cfg = PipelineConfig(ga=True, ga_population_size=20, ga_generations=5, backtest=True,
                             seed=123, out=str(tmp_path / name))
        run_pipeline(cfg, panel)
        root = tmp_path / name
        files = {str(p.relative_to(root)): p.read_bytes()
                 for p in sorted(root.rglob("*")) if p.is_file() and p.name != "config.ini"}
        trees.append(files)
    same = trees[0] == trees[1]
    verdict("C8 two full runs with one master seed give byte-identical reports", same,
            f"{len(trees[0])} files compared")
