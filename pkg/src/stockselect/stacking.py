"""Stack of a DNN and a random forest under a logistic-regression meta-learner.

The training set is cut chronologically into Train-1, Train-2 and
Validation. The DNN sees Train-1 and Train-2, the forest sees Train-2 only,
and the meta-learner is fit on the two base scores over Validation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import StackingError
from .linear_model import LRModel, SgdConfig, train_lr
from .neural_net import DnnConfig, DnnModel, train_dnn
from .panel import LabeledDataset, SplitSpec, chronological_split_indices
from .random_forest import RFConfig, RFModel, train_rf

DEFAULT_FRACTIONS = (0.4, 0.4, 0.2)


@dataclass(eq=False)
class StackTrace:
    """Which rows fed which fit; kept in memory only, for audits."""
    train1: np.ndarray
    train2: np.ndarray
    validation: np.ndarray
    dnn_rows: np.ndarray
    rf_rows: np.ndarray
    meta_rows: np.ndarray
    meta_inputs: np.ndarray


@dataclass(eq=False)
class StackModel:
    base_dnn: DnnModel
    base_rf: RFModel
    meta: LRModel
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    trace: StackTrace | None = field(default=None, repr=False)

    kind = "stack"

    @property
    def mask(self) -> np.ndarray:
        return self.base_dnn.mask

    def base_scores(self, X) -> np.ndarray:
        return np.column_stack([self.base_dnn.predict(X), self.base_rf.predict(X)])

    def predict(self, X) -> np.ndarray:
        return self.meta.predict(self.base_scores(X))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fractions": list(self.fractions),
                "dnn": self.base_dnn.to_dict(), "rf": self.base_rf.to_dict(),
                "meta": self.meta.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> "StackModel":
        return cls(DnnModel.from_dict(d["dnn"]), RFModel.from_dict(d["rf"]),
                   LRModel.from_dict(d["meta"]), tuple(d["fractions"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "StackModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _require_both(y: np.ndarray, part: str) -> None:
    if len(y) == 0 or y.min() == y.max():
        raise StackingError(f"{part} must contain both classes")


def train_stack(train: LabeledDataset, dnn_cfg: DnnConfig | None = None,
                rf_cfg: RFConfig | None = None, meta_cfg: SgdConfig | None = None,
                mask=None, fractions=DEFAULT_FRACTIONS) -> StackModel:
    spec = fractions if isinstance(fractions, SplitSpec) else SplitSpec(tuple(fractions))
    if len(spec.fractions) != 3:
        raise StackingError("stacking needs exactly three split fractions")
    t1, t2, val = chronological_split_indices(train, spec)
    dnn_rows = np.concatenate([t1, t2])
    X, y = train.X, train.y
    _require_both(y[t2], "Train-2")
    _require_both(y[dnn_rows], "Train-1 + Train-2")
    _require_both(y[val], "Validation")

    dnn = train_dnn(X[dnn_rows], y[dnn_rows], dnn_cfg, mask)
    rf = train_rf(X[t2], y[t2], rf_cfg, mask)
    meta_X = np.column_stack([dnn.predict(X[val]), rf.predict(X[val])])
    meta = train_lr(meta_X, y[val], meta_cfg, standardize=False)
    trace = StackTrace(t1, t2, val, dnn_rows, t2, val, meta_X)
    return StackModel(dnn, rf, meta, spec.fractions, trace)


def predict_stack(model: StackModel, X) -> np.ndarray:
    return model.predict(X)
