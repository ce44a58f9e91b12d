"""Classification indexes: AUC plus the threshold-based confusion rates."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ContractError, UndefinedAUCError


def _average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with ties replaced by their mean rank."""
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    # start index of each run of equal values
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(xs)]
    run_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(x))
    ranks[order] = np.repeat(run_rank, ends - starts)
    return ranks


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney U statistic.

    Equal scores count as half a correctly ordered pair.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ContractError("scores and labels must be 1-d and of equal length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative label")
    ranks = _average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


@dataclass(frozen=True)
class MetricsReport:
    """The seven indexes at one threshold. Undefined rates are ``None``."""
    auc: float | None
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    tpr: float | None
    fpr: float | None
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return self.tp, self.fp, self.tn, self.fn

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def confusion_metrics(scores, labels, threshold: float = 0.5) -> MetricsReport:
    """Predict 1 when ``score >= threshold`` and tabulate the rates.

    AUC is attached when both classes are present, otherwise ``None``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1 or len(scores) == 0:
        raise ContractError("scores and labels must be non-empty, 1-d and of equal length")
    pred = scores >= threshold
    truth = labels == 1
    tp = int(np.sum(pred & truth))
    fp = int(np.sum(pred & ~truth))
    tn = int(np.sum(~pred & ~truth))
    fn = int(np.sum(~pred & truth))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    try:
        auc_value = auc(scores, labels)
    except UndefinedAUCError:
        auc_value = None
    return MetricsReport(
        auc=auc_value, accuracy=(tp + tn) / len(scores), precision=precision,
        recall=recall, f1=f1, tpr=recall, fpr=_ratio(fp, fp + tn),
        threshold=float(threshold), tp=tp, fp=fp, tn=tn, fn=fn,
    )
