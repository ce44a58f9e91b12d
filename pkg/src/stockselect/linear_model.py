"""Logistic regression trained with minibatch SGD (Nesterov momentum, lr decay).

The optimizer step and the input standardizer defined here are reused by
:mod:`stockselect.neural_net`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, DivergenceError, ShapeError, TrainingError


@dataclass(frozen=True)
class SgdConfig:
    initial_lr: float = 1e-2
    decay: float = 1e-6
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.initial_lr <= 0 or self.decay < 0 or not 0 <= self.momentum < 1:
            raise ContractError(f"invalid optimizer settings: {self}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ContractError(f"invalid epochs/batch size: {self}")

    def lr_at(self, step: int) -> float:
        return self.initial_lr / (1.0 + self.decay * step)


def sgd_nesterov_step(params, grads, velocity, lr_t: float, momentum: float):
    """One Nesterov update; returns ``(params', velocity')``.

    v' = momentum * v - lr * g
    p' = p + momentum * v' - lr * g
    """
    if lr_t <= 0:
        raise ContractError("learning rate must be positive")
    grads = np.asarray(grads, dtype=float)
    if not np.all(np.isfinite(grads)):
        raise DivergenceError("non-finite gradient")
    v_new = momentum * velocity - lr_t * grads
    return params + momentum * v_new - lr_t * grads, v_new


def batch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Row permutation for one epoch; a pure function of (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(n)


def as_mask(mask, n: int) -> np.ndarray:
    if mask is None:
        return np.ones(n, dtype=bool)
    m = np.asarray(mask).astype(bool)
    if m.shape != (n,):
        raise ShapeError(f"mask of length {m.shape} for {n} features")
    if not m.any():
        raise ContractError("feature mask selects no features")
    return m


@dataclass(eq=False)
class Standardizer:
    """Column-wise z-scoring with frozen train statistics (std 0 -> column 0)."""
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        return cls(X.mean(axis=0), X.std(axis=0))

    @classmethod
    def identity(cls, n: int) -> "Standardizer":
        return cls(np.zeros(n), np.ones(n))

    def transform(self, X: np.ndarray) -> np.ndarray:
        scale = np.divide(1.0, self.std, out=np.zeros_like(self.std), where=self.std > 0)
        return (X - self.mean) * scale


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (len(X),):
        raise ShapeError("X must be 2-d with one label per row")
    if len(y) == 0 or y.min() == y.max():
        raise TrainingError("training data must contain both classes")
    return X, y


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def bce_loss_and_grad(beta: np.ndarray, b: float, X: np.ndarray, y: np.ndarray):
    """Mean binary cross-entropy and its gradient with respect to (beta, b)."""
    z = X @ beta + b
    # log(1 + e^z) - y z is the stable form of -[y log p + (1-y) log(1-p)]
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    resid = sigmoid(z) - y
    return loss, X.T @ resid / len(y), float(resid.mean())


@dataclass(eq=False)
class LRModel:
    beta: np.ndarray
    b: float
    mask: np.ndarray
    scaler: Standardizer
    config: SgdConfig = field(default_factory=SgdConfig)
    loss_history: list[float] = field(default_factory=list)

    kind = "lr"

    @property
    def n_inputs(self) -> int:
        return len(self.mask)

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_inputs:
            raise ShapeError(f"expected {self.n_inputs} features, got {X.shape[1]}")
        return self.scaler.transform(X[:, self.mask])

    def decision_function(self, X) -> np.ndarray:
        return self.transform(X) @ self.beta + self.b

    def predict(self, X) -> np.ndarray:
        return sigmoid(self.decision_function(X))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "mask": self.mask.astype(int).tolist(),
            "mean": self.scaler.mean.tolist(),
            "std": self.scaler.std.tolist(),
            "beta": self.beta.tolist(),
            "b": self.b,
            "config": asdict(self.config),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LRModel":
        return cls(np.asarray(d["beta"], dtype=float), float(d["b"]),
                   np.asarray(d["mask"], dtype=bool),
                   Standardizer(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float)),
                   SgdConfig(**d["config"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "LRModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def train_lr(X, y, cfg: SgdConfig | None = None, mask=None, standardize: bool = True) -> LRModel:
    """Fit logistic regression by minimizing mean binary cross-entropy.

    Runs ``epochs * ceil(N / batch_size)`` Nesterov steps from zero weights.
    """
    cfg = cfg or SgdConfig()
    X, y = _check_xy(X, y)
    mask = as_mask(mask, X.shape[1])
    Xm = X[:, mask]
    scaler = Standardizer.fit(Xm) if standardize else Standardizer.identity(Xm.shape[1])
    Z = scaler.transform(Xm)

    n, d = Z.shape
    theta = np.zeros(d + 1)  # last entry is the intercept
    vel = np.zeros(d + 1)
    step = 0
    history = []
    for epoch in range(cfg.epochs):
        order = batch_order(n, cfg.seed, epoch)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            _, gb, g0 = bce_loss_and_grad(theta[:-1], theta[-1], Z[idx], y[idx])
            theta, vel = sgd_nesterov_step(theta, np.append(gb, g0), vel,
                                           cfg.lr_at(step), cfg.momentum)
            step += 1
        loss = bce_loss_and_grad(theta[:-1], theta[-1], Z, y)[0]
        if not math.isfinite(loss):
            raise DivergenceError(f"loss became {loss} in epoch {epoch}")
        history.append(loss)
    return LRModel(theta[:-1].copy(), float(theta[-1]), mask, scaler, cfg, history)


def predict_lr(model: LRModel, X) -> np.ndarray:
    return model.predict(X)


def train_lr_masks(X, y, masks, cfg: SgdConfig | None = None) -> list[LRModel]:
    """Fit one standardized LR per row of ``masks`` in lockstep.

    All models see the same batch sequence, so each result matches
    ``train_lr(X, y, cfg, mask)`` up to floating-point summation order.
    Used to evaluate a whole GA population at once.
    """
    cfg = cfg or SgdConfig()
    X, y = _check_xy(X, y)
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    if masks.shape[1] != X.shape[1]:
        raise ShapeError("mask width does not match feature count")
    if not masks.any(axis=1).all():
        raise ContractError("every mask must select at least one feature")
    scaler = Standardizer.fit(X)
    Z = scaler.transform(X)
    W = masks.T.astype(float)  # (d, P)
    B = np.zeros_like(W)
    vb = np.zeros_like(W)
    b = np.zeros(masks.shape[0])
    vbias = np.zeros_like(b)
    n = len(y)
    step = 0
    for epoch in range(cfg.epochs):
        order = batch_order(n, cfg.seed, epoch)
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            Zb = Z[idx]
            resid = sigmoid(Zb @ B + b) - y[idx, None]
            gB = (Zb.T @ resid) / len(idx) * W
            gb = resid.mean(axis=0)
            lr = cfg.lr_at(step)
            B, vb = sgd_nesterov_step(B, gB, vb, lr, cfg.momentum)
            b, vbias = sgd_nesterov_step(b, gb, vbias, lr, cfg.momentum)
            step += 1
    if not (np.all(np.isfinite(B)) and np.all(np.isfinite(b))):
        raise DivergenceError("non-finite weights after training")
    models = []
    for p, m in enumerate(masks):
        sub = Standardizer(scaler.mean[m], scaler.std[m])
        models.append(LRModel(B[m, p].copy(), float(b[p]), m.copy(), sub, cfg))
    return models
