"""Long-only score-driven portfolio simulation against the market average."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Protocol

import numpy as np
import pandas as pd

from .errors import ContractError, RangeError, SizingError
from .panel import FeaturePanel

log = logging.getLogger(__name__)

TRADING_DAYS = 252


class Scorer(Protocol):
    def predict(self, X) -> np.ndarray: ...


@dataclass(frozen=True)
class BacktestConfig:
    start: str | None = None  # ISO date; None means the first panel date
    end: str | None = None
    period: int = 4
    top_k: int | None = None  # None -> floor(q * M / 100)
    q: float = 30.0
    weighting: str = "score"  # "score" or "equal"
    cost_rate: float = 0.0

    def __post_init__(self):
        if self.period < 1:
            raise ContractError("rebalance period must be >= 1")
        if self.top_k is not None and self.top_k < 1:
            raise ContractError("top_k must be >= 1")
        if self.weighting not in ("score", "equal"):
            raise ContractError(f"unknown weighting {self.weighting!r}")
        if self.cost_rate < 0:
            raise ContractError("cost rate must be non-negative")

    def resolve_top_k(self, n_stocks: int) -> int:
        k = self.top_k if self.top_k is not None else math.floor(self.q * n_stocks / 100)
        return max(k, 1)


def construct_portfolio(scores: dict[str, float], cfg: BacktestConfig,
                        top_k: int | None = None) -> dict[str, float]:
    """Top-k tickers by score (ties by ticker) with equal or score weights."""
    k = top_k if top_k is not None else cfg.resolve_top_k(len(scores))
    if len(scores) < k:
        raise SizingError(f"{len(scores)} scored tickers, need {k}")
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    names = [t for t, _ in ranked]
    if cfg.weighting == "equal":
        w = np.full(k, 1.0 / k)
    else:
        s = np.array([max(v, 0.0) for _, v in ranked])
        w = s / s.sum() if s.sum() > 0 else np.full(k, 1.0 / k)
    return dict(zip(names, w.tolist()))


def max_drawdown(nav: np.ndarray) -> float:
    peak = np.maximum.accumulate(nav)
    return float(np.max(1.0 - nav / peak))


def summarize(nav: np.ndarray) -> dict[str, float]:
    nav = np.asarray(nav, dtype=float)
    rets = nav[1:] / nav[:-1] - 1.0
    sd = float(np.std(rets, ddof=1)) if len(rets) > 1 else 0.0
    return {
        "total_return": float(nav[-1] / nav[0] - 1.0),
        "annualized_volatility": sd * math.sqrt(TRADING_DAYS),
        "max_drawdown": max_drawdown(nav),
        "sharpe": float(np.mean(rets) / sd * math.sqrt(TRADING_DAYS)) if sd > 0 else 0.0,
    }


@dataclass(eq=False)
class BacktestResult:
    dates: np.ndarray
    portfolio_nav: np.ndarray
    benchmark_nav: np.ndarray
    rebalances: list[tuple[np.datetime64, dict[str, float]]] = field(default_factory=list)
    config: BacktestConfig = field(default_factory=BacktestConfig)

    @property
    def summary(self) -> dict:
        return {"portfolio": summarize(self.portfolio_nav),
                "benchmark": summarize(self.benchmark_nav)}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"date": np.datetime_as_string(self.dates, unit="D"),
                             "portfolio_nav": self.portfolio_nav,
                             "benchmark_nav": self.benchmark_nav})

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12g", lineterminator="\n")

    def summary_json(self) -> str:
        return json.dumps({**self.summary, "config": asdict(self.config)}, indent=2) + "\n"


def run_backtest(panel: FeaturePanel, model: Scorer, cfg: BacktestConfig) -> BacktestResult:
    """Simulate the strategy day by day from ``cfg.start`` to ``cfg.end``.

    Positions are bought at the close of each rebalance date and drift
    with prices until the next one. A holding whose price disappears is
    sold at its last close and kept as cash until the next rebalance.
    """
    dates = panel.dates
    s = 0 if cfg.start is None else int(np.searchsorted(dates, np.datetime64(cfg.start, "D")))
    e = len(dates) - 1 if cfg.end is None else \
        int(np.searchsorted(dates, np.datetime64(cfg.end, "D"), side="right")) - 1
    if cfg.start is not None and (s >= len(dates) or dates[s] != np.datetime64(cfg.start, "D")):
        raise RangeError(f"start date {cfg.start} not covered by the panel")
    if cfg.end is not None and (e < 0 or dates[e] != np.datetime64(cfg.end, "D")):
        raise RangeError(f"end date {cfg.end} not covered by the panel")
    if e <= s:
        raise RangeError("backtest range needs at least two dates")

    present = panel.present
    closes = panel.closes
    tickers = panel.tickers
    top_k = cfg.resolve_top_k(panel.n_tickers)

    nav = np.empty(e - s + 1)
    bench = np.empty(e - s + 1)
    nav[0] = bench[0] = 1.0
    holdings = np.zeros(panel.n_tickers)  # current value per stock
    cash = 0.0
    rebalances = []

    for step, t in enumerate(range(s, e + 1)):
        if step > 0:
            # mark to market
            ok = present[t - 1] & present[t]
            r = np.zeros(panel.n_tickers)
            r[ok] = closes[t, ok] / closes[t - 1, ok] - 1.0
            lost = (holdings > 0) & ~present[t]
            if lost.any():
                for i in np.flatnonzero(lost):
                    log.warning("%s has no price on %s; liquidated at last close",
                                tickers[i], dates[t])
                cash += holdings[lost].sum()
                holdings[lost] = 0.0
            holdings = holdings * (1.0 + r)
            nav[step] = holdings.sum() + cash
            bench[step] = bench[step - 1] * (1.0 + r[ok].mean()) if ok.any() else bench[step - 1]
        if step % cfg.period == 0 and t < e:
            valid = np.flatnonzero(present[t])
            if len(valid) < top_k:
                raise SizingError(f"only {len(valid)} stocks tradable on {dates[t]}, need {top_k}")
            scores = np.asarray(model.predict(panel.features[t, valid]), dtype=float)
            weights = construct_portfolio({tickers[i]: float(v) for i, v in zip(valid, scores)},
                                          cfg, top_k)
            target = np.zeros(panel.n_tickers)
            for name, w in weights.items():
                target[tickers.index(name)] = w
            value = nav[step]
            current = holdings / value if value > 0 else holdings
            turnover = np.abs(target - current).sum() + (cash / value if value > 0 else 0.0)
            value_after = value * (1.0 - cfg.cost_rate * turnover)
            holdings = target * value_after
            cash = 0.0
            rebalances.append((dates[t], weights))
    return BacktestResult(dates[s:e + 1].copy(), nav, bench, rebalances, cfg)
