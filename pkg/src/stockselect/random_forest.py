"""Bagged Gini decision trees with a random candidate-feature subset per split."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, ShapeError, TrainingError
from .linear_model import as_mask


@dataclass(frozen=True)
class RFConfig:
    n_trees: int = 100
    max_depth: int = 4
    min_samples_split: int = 2
    min_impurity_split: float = 1e-7
    max_features: int | None = None  # None -> ceil(sqrt(n))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1:
            raise ContractError("n_trees and max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ContractError("min_samples_split must be >= 2")


def gini(y: np.ndarray) -> float:
    if len(y) == 0:
        return 0.0
    p = float(np.mean(y))
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def best_split(X: np.ndarray, y: np.ndarray, candidate_features,
               min_samples_split: int = 2, min_impurity_split: float = 1e-7):
    """Best Gini split over ``candidate_features`` as ``(feature, threshold, decrease)``.

    Thresholds are midpoints between consecutive distinct values and rows
    with ``x <= threshold`` go left. Ties go to the lowest feature index,
    then the lowest threshold. Returns ``None`` when the node must not split.
    """
    n = len(y)
    parent = gini(y)
    if n < min_samples_split or parent <= min_impurity_split:
        return None
    y = np.asarray(y, dtype=float)
    total_pos = y.sum()
    best = None
    for j in sorted(int(c) for c in candidate_features):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        valid = np.flatnonzero(xs[1:] > xs[:-1])  # split after position i
        if len(valid) == 0:
            continue
        left_n = valid + 1.0
        right_n = n - left_n
        left_pos = np.cumsum(y[order])[valid]
        right_pos = total_pos - left_pos
        pl, pr = left_pos / left_n, right_pos / right_n
        child = (left_n * 2 * pl * (1 - pl) + right_n * 2 * pr * (1 - pr)) / n
        k = int(np.argmax(parent - child))
        dec = parent - child[k]
        if best is None or dec > best[2]:
            thr = 0.5 * (xs[valid[k]] + xs[valid[k] + 1])
            best = (j, float(thr), float(dec))
    return best


@dataclass(eq=False)
class Tree:
    """Flat-array binary tree; ``feature == -1`` marks a leaf."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    depth: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        for _ in range(int(self.depth.max()) + 1):
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                break
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_records(self) -> list[dict]:
        out = []
        for i in range(len(self.feature)):
            if self.feature[i] < 0:
                out.append({"leaf": float(self.value[i]), "n": int(self.n_samples[i])})
            else:
                out.append({"feature": int(self.feature[i]), "threshold": float(self.threshold[i]),
                            "left": int(self.left[i]), "right": int(self.right[i]),
                            "value": float(self.value[i]), "n": int(self.n_samples[i])})
        return out

    @classmethod
    def from_records(cls, records: list[dict]) -> "Tree":
        m = len(records)
        feat = np.full(m, -1, np.int64)
        thr = np.zeros(m)
        left = np.full(m, -1, np.int64)
        right = np.full(m, -1, np.int64)
        val = np.zeros(m)
        ns = np.zeros(m, np.int64)
        depth = np.zeros(m, np.int64)
        for i, r in enumerate(records):
            ns[i] = r["n"]
            if "leaf" in r:
                val[i] = r["leaf"]
            else:
                feat[i], thr[i], left[i], right[i] = r["feature"], r["threshold"], r["left"], r["right"]
                val[i] = r.get("value", 0.0)
        for i in range(m):  # children always follow their parent
            if feat[i] >= 0:
                depth[left[i]] = depth[right[i]] = depth[i] + 1
        return cls(feat, thr, left, right, val, ns, depth)

    def equals(self, other: "Tree") -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("feature", "threshold", "left", "right", "value", "n_samples"))


def grow_tree(X: np.ndarray, y: np.ndarray, cfg: RFConfig, rng: np.random.Generator) -> Tree:
    n_feat = X.shape[1]
    k = cfg.max_features or math.ceil(math.sqrt(n_feat))
    k = min(k, n_feat)
    nodes = []  # [feature, threshold, left, right, value, n, depth]

    # depth-first, children appended right after being created
    def build(rows: np.ndarray, depth: int) -> int:
        me = len(nodes)
        nodes.append([-1, 0.0, -1, -1, float(y[rows].mean()), len(rows), depth])
        if depth >= cfg.max_depth:
            return me
        cand = np.sort(rng.choice(n_feat, size=k, replace=False))
        split = best_split(X[rows], y[rows], cand, cfg.min_samples_split, cfg.min_impurity_split)
        if split is None:
            return me
        j, thr, _ = split
        go_left = X[rows, j] <= thr
        nodes[me][0], nodes[me][1] = j, thr
        nodes[me][2] = build(rows[go_left], depth + 1)
        nodes[me][3] = build(rows[~go_left], depth + 1)
        return me

    build(np.arange(len(y)), 0)
    cols = list(zip(*nodes))
    return Tree(np.array(cols[0], np.int64), np.array(cols[1], float),
                np.array(cols[2], np.int64), np.array(cols[3], np.int64),
                np.array(cols[4], float), np.array(cols[5], np.int64),
                np.array(cols[6], np.int64))


def bootstrap_indices(n: int, seed: int, tree_index: int) -> np.ndarray:
    return np.random.default_rng([seed, tree_index]).integers(0, n, size=n)


@dataclass(eq=False)
class RFModel:
    trees: list[Tree]
    mask: np.ndarray
    config: RFConfig = field(default_factory=RFConfig)

    kind = "rf"

    @property
    def n_inputs(self) -> int:
        return len(self.mask)

    def _masked(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_inputs:
            raise ShapeError(f"expected {self.n_inputs} features, got {X.shape[1]}")
        return X[:, self.mask]

    def tree_predictions(self, X) -> np.ndarray:
        Xm = self._masked(X)
        return np.array([t.predict(Xm) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        return self.tree_predictions(X).mean(axis=0)

    def equals(self, other: "RFModel") -> bool:
        return (np.array_equal(self.mask, other.mask) and len(self.trees) == len(other.trees)
                and all(a.equals(b) for a, b in zip(self.trees, other.trees)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mask": self.mask.astype(int).tolist(),
                "config": asdict(self.config),
                "trees": [t.to_records() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "RFModel":
        return cls([Tree.from_records(r) for r in d["trees"]],
                   np.asarray(d["mask"], dtype=bool), RFConfig(**d["config"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "RFModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_rf(X, y, cfg: RFConfig | None = None, mask=None) -> RFModel:
    """Grow ``n_trees`` trees, each on its own seeded bootstrap resample."""
    cfg = cfg or RFConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (len(X),):
        raise ShapeError("X must be 2-d with one label per row")
    if len(y) == 0 or y.min() == y.max():
        raise TrainingError("training data must contain both classes")
    mask = as_mask(mask, X.shape[1])
    Xm = X[:, mask]
    trees = []
    for i in range(cfg.n_trees):
        rows = bootstrap_indices(len(y), cfg.seed, i) if cfg.bootstrap else np.arange(len(y))
        rng = np.random.default_rng([cfg.seed, i, 1])
        trees.append(grow_tree(Xm[rows], y[rows], cfg, rng))
    return RFModel(trees, mask, cfg)


def predict_rf(model: RFModel, X) -> np.ndarray:
    return model.predict(X)
