"""Feature panels, return-to-volatility labeling and chronological splits.

A panel stores one feature vector and one close price per (date, ticker).
Internally everything is dense: ``features`` has shape ``(T, M, n)`` and
``closes`` has shape ``(T, M)``, with NaN marking (date, ticker) pairs that
have no row in the source file.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    ContractError,
    DataError,
    DegenerateVolatility,
    EmptyDatasetError,
    OverlapError,
    SchemaError,
    SplitError,
)

# Named factor columns; default_feature_names pads with generic names past these.
NAMED_FEATURES = (
    "AccountsPayablesTDays", "AccountsPayablesTRate", "AdminiExpenseRate", "ARTDays",
    "ARTRate", "ASSI", "BLEV", "BondsPayableToAsset", "CashRateOfSales",
    "CashToCurrentLiability", "CMRA", "CTOP", "CTP5", "CurrentAssetsRatio",
    "CurrentAssetsTRate", "CurrentRatio", "DAVOL10", "DAVOL20", "DAVOL5", "DDNBT",
    "DDNCR", "DDNSR", "DebtEquityRatio", "DebtsAssetRatio", "DHILO", "DilutedEPS",
    "DVRAT", "EBITToTOR", "EGRO", "EMA10", "EMA120", "EMA20", "EMA5", "EMA60", "EPS",
    "EquityFixedAssetRatio", "EquityToAsset", "EquityTRate", "ETOP", "ETP5",
    "FinancialExpenseRate", "FinancingCashGrowRate", "FixAssetRatio", "FixedAssetsTRate",
    "GrossIncomeRatio", "HBETA", "HSIGMA", "IntangibleAssetRatio", "InventoryTDays",
    "InventoryTRate", "InvestCashGrowRate", "LCAP", "LFLO", "LongDebtToAsset",
    "LongDebtToWorkingCapital", "LongTermDebtToAsset", "MA10", "MA120", "MA20", "MA5",
    "MA60", "MAWVAD", "MFI", "MLEV", "NetAssetGrowRate", "NetProfitGrowRate",
    "NetProfitRatio", "NOCFToOperatingNI", "NonCurrentAssetsRatio",
    "NPParentCompanyGrowRate", "NPToTOR", "OperatingExpenseRate",
    "OperatingProfitGrowRate", "OperatingProfitRatio", "OperatingProfitToTOR",
    "OperatingRevenueGrowRate", "OperCashGrowRate", "OperCashInToCurrentLiability", "PB",
    "PCF", "PE", "PS", "PSY", "QuickRatio", "REVS10", "REVS20", "REVS5", "ROA", "ROA5",
    "ROE", "ROE5", "RSI", "RSTR12", "RSTR24", "SalesCostRatio", "SaleServiceCashToOR",
    "SUE", "TaxRatio", "TOBT", "TotalAssetGrowRate", "TotalAssetsTRate",
    "TotalProfitCostRatio", "TotalProfitGrowRate", "VOL10", "VOL120", "VOL20", "VOL240",
    "VOL5", "VOL60", "WVAD", "REC", "DAREC", "GREC", "FY12P", "DAREV", "GREV", "SFY12P",
    "DASREV", "GSREV", "FEARNG", "FSALESG", "TA2EV", "CFO2EV", "ACCA",
)
N_FEATURES = 244

# Below this the window's return volatility is treated as zero.
VOL_EPS = 1e-12


def default_feature_names(n: int = N_FEATURES) -> tuple[str, ...]:
    """First ``n`` column names of the default schema.

    The named table only has 124 distinct entries, so columns past those
    are filled with ``feature_125`` ... ``feature_244``.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    names = list(NAMED_FEATURES[:n])
    names += [f"feature_{i + 1:03d}" for i in range(len(names), n)]
    return tuple(names)


@dataclass(frozen=True, eq=False)
class FeaturePanel:
    dates: np.ndarray
    tickers: tuple[str, ...]
    feature_names: tuple[str, ...]
    features: np.ndarray
    closes: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        T, M, n = len(dates), len(self.tickers), len(self.feature_names)
        if self.features.shape != (T, M, n) or self.closes.shape != (T, M):
            raise SchemaError(
                f"array shapes {self.features.shape}/{self.closes.shape} do not match "
                f"(T, M, n) = {(T, M, n)}"
            )
        if T > 1 and not np.all(np.diff(dates) > np.timedelta64(0, "D")):
            raise DataError("dates must be strictly increasing")
        if len(set(self.feature_names)) != n:
            raise SchemaError("duplicate feature names")
        if len(set(self.tickers)) != M:
            raise SchemaError("duplicate tickers")
        present = self.present
        bad_close = present & ~(self.closes > 0)
        if bad_close.any():
            t, i = np.argwhere(bad_close)[0]
            raise DataError(f"non-positive close at ({dates[t]}, {self.tickers[i]})")
        bad_feat = present & ~np.isfinite(self.features).all(axis=2)
        if bad_feat.any():
            t, i = np.argwhere(bad_feat)[0]
            raise DataError(f"non-finite feature at ({dates[t]}, {self.tickers[i]})")

    @property
    def present(self) -> np.ndarray:
        """Boolean (T, M) mask of (date, ticker) pairs that carry a row."""
        return ~np.isnan(self.closes)

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def date_index(self, date) -> int:
        d = np.datetime64(date, "D")
        idx = int(np.searchsorted(self.dates, d))
        if idx >= len(self.dates) or self.dates[idx] != d:
            raise KeyError(f"date {d} not in panel")
        return idx

    def ticker_index(self, ticker: str) -> int:
        try:
            return self.tickers.index(ticker)
        except ValueError:
            raise KeyError(f"ticker {ticker!r} not in panel") from None

    def truncate(self, last_index: int) -> "FeaturePanel":
        """Panel restricted to dates ``0..last_index`` inclusive."""
        stop = last_index + 1
        return FeaturePanel(
            self.dates[:stop], self.tickers, self.feature_names,
            self.features[:stop], self.closes[:stop],
        )

    def equals(self, other: "FeaturePanel") -> bool:
        return (
            np.array_equal(self.dates, other.dates)
            and self.tickers == other.tickers
            and self.feature_names == other.feature_names
            and np.array_equal(self.closes, other.closes, equal_nan=True)
            and np.array_equal(self.features, other.features, equal_nan=True)
        )


def load_panel(path, expected_n: int | None = None,
               feature_names: Sequence[str] | None = None) -> FeaturePanel:
    """Read a panel CSV with header ``date,ticker,close,<features...>``.

    When ``feature_names`` is given the feature columns must match it as a
    set; otherwise, when ``expected_n`` is given, they must match
    ``default_feature_names(expected_n)``.
    """
    df = pd.read_csv(path, dtype={"date": str, "ticker": str}, encoding="utf-8",
                     float_precision="round_trip")
    cols = list(df.columns)
    for req in ("date", "ticker", "close"):
        if req not in cols:
            raise SchemaError(f"missing required column {req!r}")
    feat_cols = [c for c in cols if c not in ("date", "ticker", "close")]
    if feature_names is None and expected_n is not None:
        feature_names = default_feature_names(expected_n)
    if feature_names is not None:
        expected = list(feature_names)
        missing = [c for c in expected if c not in feat_cols]
        extra = [c for c in feat_cols if c not in set(expected)]
        if missing:
            raise SchemaError(f"missing feature column {missing[0]!r}")
        if extra:
            raise SchemaError(f"unexpected feature column {extra[0]!r}")
        feat_cols = expected
    if len(set(feat_cols)) != len(feat_cols):
        raise SchemaError("duplicate feature columns")

    try:
        dates = pd.to_datetime(df["date"], format="%Y-%m-%d")
    except (ValueError, TypeError) as exc:
        raise DataError(f"unparseable date: {exc}") from None
    dup = df.duplicated(["date", "ticker"])
    if dup.any():
        r = df.loc[dup.idxmax()]
        raise DataError(f"duplicate row for ({r['date']}, {r['ticker']})")

    closes = pd.to_numeric(df["close"], errors="coerce").to_numpy(dtype=float)
    try:
        feats = df[feat_cols].to_numpy(dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric feature value: {exc}") from None
    bad = ~np.isfinite(closes) | (closes <= 0) | ~np.isfinite(feats).all(axis=1)
    if bad.any():
        r = df.loc[int(np.argmax(bad))]
        raise DataError(f"invalid close or feature value at ({r['date']}, {r['ticker']})")

    day = dates.to_numpy().astype("datetime64[D]")
    uniq_dates, d_idx = np.unique(day, return_inverse=True)
    uniq_tickers, t_idx = np.unique(df["ticker"].to_numpy(dtype=str), return_inverse=True)
    T, M, n = len(uniq_dates), len(uniq_tickers), len(feat_cols)
    F = np.full((T, M, n), np.nan)
    C = np.full((T, M), np.nan)
    F[d_idx, t_idx] = feats
    C[d_idx, t_idx] = closes
    return FeaturePanel(uniq_dates, tuple(str(t) for t in uniq_tickers), tuple(feat_cols), F, C)


def write_panel(panel: FeaturePanel, path, float_format: str = "%.12g") -> None:
    t_idx, i_idx = np.nonzero(panel.present)
    df = pd.DataFrame(panel.features[t_idx, i_idx], columns=list(panel.feature_names))
    df.insert(0, "close", panel.closes[t_idx, i_idx])
    df.insert(0, "ticker", np.asarray(panel.tickers, dtype=object)[i_idx])
    df.insert(0, "date", np.datetime_as_string(panel.dates[t_idx], unit="D"))
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\n")


def _window_stats(closes: np.ndarray, t: int, f: int):
    """Cumulative return and return std over days t+1..t+f for every column."""
    window = closes[t:t + f + 1]
    daily = window[1:] / window[:-1] - 1.0
    cum = window[-1] / window[0] - 1.0
    std = np.std(daily, axis=0, ddof=1)
    return cum, std


def rv_ratio(panel: FeaturePanel, ticker: str | int, t: int, f: int) -> float:
    """Return-to-volatility ratio of one stock over the window ``[t+1, t+f]``.

    Cumulative simple return divided by the sample standard deviation
    (ddof=1) of the ``f`` daily simple returns.
    """
    if f < 2:
        raise ContractError("forward window f must be >= 2")
    if t < 0 or t + f >= panel.n_dates:
        raise ContractError(f"window [{t}, {t + f}] exceeds panel of {panel.n_dates} days")
    i = ticker if isinstance(ticker, (int, np.integer)) else panel.ticker_index(ticker)
    col = panel.closes[t:t + f + 1, i:i + 1]
    if np.isnan(col).any():
        raise DataError(f"missing close for {panel.tickers[i]} in window starting {panel.dates[t]}")
    cum, std = _window_stats(col, 0, f)
    if std[0] <= VOL_EPS:
        raise DegenerateVolatility(f"zero volatility for {panel.tickers[i]} at {panel.dates[t]}")
    return float(cum[0] / std[0])


def anchor_schedule(n_dates: int, f: int, start: int = 0, stop: int | None = None) -> list[int]:
    """Anchor indices every ``1 + f`` days from ``start`` with ``t + f < stop``."""
    stop = n_dates if stop is None else min(stop, n_dates)
    return list(range(start, stop - f, 1 + f))


def labeled_cap(q: float, n_dates: int, n_stocks: int, f: int) -> int:
    """Upper bound floor(2QTM / (100(1+f))) on labeled rows."""
    if float(q).is_integer():
        return (2 * int(q) * n_dates * n_stocks) // (100 * (1 + f))
    return math.floor(2 * q * n_dates * n_stocks / (100 * (1 + f)))


@dataclass(eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    tickers: np.ndarray
    anchor_dates: np.ndarray
    f: int
    q: float | None = None
    feature_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.tickers = np.asarray(self.tickers, dtype=object)
        self.anchor_dates = np.asarray(self.anchor_dates, dtype="datetime64[D]")
        n = len(self.y)
        if self.X.ndim != 2 or len(self.X) != n or len(self.tickers) != n or len(self.anchor_dates) != n:
            raise SchemaError("X, y and provenance must have equal length")
        if n and not np.isin(self.y, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1")
        if not self.feature_names:
            self.feature_names = default_feature_names(self.X.shape[1])
        self.feature_names = tuple(self.feature_names)

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def provenance(self) -> list[tuple[str, np.datetime64, int]]:
        return [(t, d, self.f) for t, d in zip(self.tickers, self.anchor_dates)]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx)
        return LabeledDataset(self.X[idx], self.y[idx], self.tickers[idx],
                              self.anchor_dates[idx], self.f, self.q, self.feature_names)

    def has_both_classes(self) -> bool:
        return len(self) > 0 and 0 < self.y.sum() < len(self)

    def to_csv(self, path, float_format: str = "%.12g") -> None:
        df = pd.DataFrame(self.X, columns=list(self.feature_names))
        df.insert(0, "label", self.y)
        df.insert(0, "f", self.f)
        df.insert(0, "anchor_date", np.datetime_as_string(self.anchor_dates, unit="D"))
        df.insert(0, "ticker", self.tickers)
        df.to_csv(path, index=False, float_format=float_format, lineterminator="\n")

    @classmethod
    def from_csv(cls, path, q: float | None = None) -> "LabeledDataset":
        df = pd.read_csv(path, dtype={"ticker": str, "anchor_date": str},
                         float_precision="round_trip")
        head = ["ticker", "anchor_date", "f", "label"]
        if list(df.columns[:4]) != head:
            raise SchemaError(f"labeled CSV must start with columns {head}")
        fs = df["f"].unique()
        if len(fs) > 1:
            raise DataError("mixed forward windows in one labeled file")
        names = tuple(df.columns[4:])
        return cls(df[list(names)].to_numpy(dtype=float), df["label"].to_numpy(),
                   df["ticker"].to_numpy(dtype=object),
                   df["anchor_date"].to_numpy().astype("datetime64[D]"),
                   int(fs[0]) if len(fs) else 0, q, names)


def build_labeled_dataset(panel: FeaturePanel, q: float, f: int,
                          anchors: Sequence[int] | None = None) -> LabeledDataset:
    """Tail/head labeling over the given anchor date indices.

    At each anchor the valid stocks are ranked by return-to-volatility
    ratio (descending, ties by ticker); the top ``floor(q*M_t/100)`` get
    label 1, the bottom ``floor(q*M_t/100)`` label 0, the rest are dropped.
    Zero-volatility stocks are dropped before ranking.
    """
    if not 0 < q <= 50:
        raise ContractError("Q must lie in (0, 50]")
    if f < 2:
        raise ContractError("forward window f must be >= 2")
    if anchors is None:
        anchors = anchor_schedule(panel.n_dates, f)
    anchors = [int(a) for a in anchors]
    for a, b in zip(anchors, anchors[1:]):
        if b - a < 1 + f:
            raise OverlapError(f"anchors {a} and {b} are closer than 1+f={1 + f} days")
    for a in anchors:
        if a < 0 or a + f >= panel.n_dates:
            raise ContractError(f"anchor {a} leaves no full forward window")

    present = panel.present
    tick_arr = np.asarray(panel.tickers, dtype=object)
    rows_X, rows_y, rows_t, rows_d = [], [], [], []
    for t in anchors:
        valid = present[t:t + f + 1].all(axis=0)
        idx = np.flatnonzero(valid)
        if len(idx) == 0:
            continue
        cum, std = _window_stats(panel.closes[:, idx], t, f)
        keep = std > VOL_EPS
        idx, ratio = idx[keep], cum[keep] / std[keep]
        k = math.floor(q * len(idx) / 100)
        if k == 0:
            continue
        # Tickers are stored sorted, so column index order is lexicographic order.
        order = idx[np.lexsort((idx, -ratio))]
        chosen = np.concatenate([order[:k], order[-k:]])
        labels = np.concatenate([np.ones(k, np.int64), np.zeros(k, np.int64)])
        rows_X.append(panel.features[t, chosen])
        rows_y.append(labels)
        rows_t.append(tick_arr[chosen])
        rows_d.append(np.full(2 * k, panel.dates[t]))
    if not rows_y:
        raise EmptyDatasetError("no anchor produced any labeled rows")
    return LabeledDataset(np.concatenate(rows_X), np.concatenate(rows_y),
                          np.concatenate(rows_t), np.concatenate(rows_d),
                          f, q, panel.feature_names)


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, ...]

    def __post_init__(self):
        fr = tuple(float(x) for x in self.fractions)
        object.__setattr__(self, "fractions", fr)
        if not fr or any(x <= 0 for x in fr):
            raise SplitError("split fractions must be positive")
        if abs(sum(fr) - 1.0) > 1e-9:
            raise SplitError(f"split fractions sum to {sum(fr)}, not 1")


def chronological_split_indices(ds: LabeledDataset, spec: SplitSpec | Sequence[float],
                                align_dates: bool = False) -> list[np.ndarray]:
    """Row indices of each contiguous part after a stable sort by anchor date.

    Boundaries sit at ``floor(cumfrac * N)``. With ``align_dates`` each
    boundary is pushed forward to the next change of anchor date, so later
    parts are strictly later in time.
    """
    if not isinstance(spec, SplitSpec):
        spec = SplitSpec(tuple(spec))
    n = len(ds)
    if n == 0:
        raise SplitError("cannot split an empty dataset")
    order = np.argsort(ds.anchor_dates, kind="stable")
    cum = np.cumsum(spec.fractions)
    bounds = [0] + [math.floor(c * n) for c in cum[:-1]] + [n]
    if align_dates:
        sorted_dates = ds.anchor_dates[order]
        bounds = [0] + [int(np.searchsorted(sorted_dates, sorted_dates[b - 1], side="right"))
                        if 0 < b < n else b for b in bounds[1:-1]] + [n]
    parts = []
    for k, (lo, hi) in enumerate(zip(bounds, bounds[1:])):
        if hi <= lo:
            raise SplitError(f"split part {k} is empty")
        parts.append(order[lo:hi])
    return parts


def chronological_split(ds: LabeledDataset, spec: SplitSpec | Sequence[float],
                        align_dates: bool = False) -> list[LabeledDataset]:
    return [ds.subset(ix) for ix in chronological_split_indices(ds, spec, align_dates)]
