"""Synthetic feature panels with a planted, recoverable signal.

Features follow independent AR(1) processes per (stock, feature). A fixed
linear combination of ``n_informative`` planted features drives each
stock's next-day expected return:

    r[t, i] = signal * s[t-1, i] + market[t] + noise * eps[t, i]

with ``s`` the unit-variance planted score, ``market`` a common shock and
``eps`` standard normal. Because the features are persistent, the score at
an anchor date predicts the return-to-volatility ranking over the next few
days. Observed feature columns are rescaled and shifted so that they span
very different magnitudes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ContractError
from .panel import FeaturePanel, default_feature_names


@dataclass(frozen=True)
class SynthSpec:
    n_stocks: int = 200
    n_dates: int = 500
    n_features: int = 244
    n_informative: int = 20
    noise: float = 0.01
    signal: float = 0.01
    market_vol: float = 0.01
    persistence: float = 0.98
    start: str = "2015-01-05"
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.n_informative <= self.n_features:
            raise ContractError("n_informative must lie in [0, n_features]")
        if self.n_stocks < 2 or self.n_dates < 3 or self.n_features < 1:
            raise ContractError("panel too small")
        if self.noise < 0 or self.signal < 0 or self.market_vol < 0:
            raise ContractError("scales must be non-negative")
        if not 0 <= self.persistence < 1:
            raise ContractError("persistence must lie in [0, 1)")


def make_synthetic_panel(spec: SynthSpec | None = None, **kwargs):
    """Return ``(panel, planted_mask, weights)`` for the given spec."""
    spec = spec or SynthSpec(**kwargs)
    T, M, n, k = spec.n_dates, spec.n_stocks, spec.n_features, spec.n_informative
    rng = np.random.default_rng(spec.seed)
    planted = np.sort(rng.choice(n, size=k, replace=False))
    signs = rng.choice([-1.0, 1.0], size=k)
    weights = signs / math.sqrt(k) if k else signs

    a = spec.persistence
    b = math.sqrt(1.0 - a * a)
    latent = np.empty((T, M, n))
    latent[0] = rng.standard_normal((M, n))
    for t in range(1, T):
        latent[t] = a * latent[t - 1] + b * rng.standard_normal((M, n))
    score = latent[:, :, planted] @ weights if k else np.zeros((T, M))

    market = spec.market_vol * rng.standard_normal(T)
    eps = spec.noise * rng.standard_normal((T, M))
    rets = np.zeros((T, M))
    rets[1:] = spec.signal * score[:-1] + market[1:, None] + eps[1:]
    rets = np.clip(rets, -0.5, 0.5)
    closes = 10.0 * rng.uniform(1.0, 10.0, size=M) * np.cumprod(1.0 + rets, axis=0)

    scale = np.exp(rng.normal(0.0, 2.0, size=n))
    offset = rng.normal(0.0, 5.0, size=n) * scale
    features = latent * scale + offset

    dates = pd.bdate_range(spec.start, periods=T).to_numpy().astype("datetime64[D]")
    tickers = tuple(f"S{i:04d}" for i in range(M))
    mask = np.zeros(n, dtype=bool)
    mask[planted] = True
    panel = FeaturePanel(dates, tickers, default_feature_names(n), features, closes)
    return panel, mask, weights
