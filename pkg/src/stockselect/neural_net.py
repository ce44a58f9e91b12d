"""Three-layer classifier: FC-ReLU-Dropout, FC-ReLU-BatchNorm, FC-softmax.

Hidden widths are ``n // 2`` and ``n // 4`` for ``n`` (masked) inputs. All
fully connected weight matrices carry an L2 penalty; training uses the
Nesterov SGD step from :mod:`stockselect.linear_model`.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ArchitectureError, ContractError, DivergenceError, ShapeError, TrainingError
from .linear_model import Standardizer, as_mask, batch_order, sgd_nesterov_step

PARAM_NAMES = ("W1", "b1", "W2", "b2", "gamma", "beta", "W3", "b3")
WEIGHT_NAMES = ("W1", "W2", "W3")


@dataclass(frozen=True)
class DnnConfig:
    initial_lr: float = 1e-3
    decay: float = 1e-6
    momentum: float = 0.9
    epochs: int = 20
    batch_size: int = 128
    dropout: float = 0.5
    l2: float = 0.01
    bn_eps: float = 1e-3
    bn_momentum: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.dropout < 1:
            raise ContractError("dropout rate must lie in [0, 1)")
        if self.initial_lr <= 0 or self.decay < 0 or not 0 <= self.momentum < 1 or self.l2 < 0:
            raise ContractError(f"invalid optimizer settings: {self}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ContractError(f"invalid epochs/batch size: {self}")

    def lr_at(self, step: int) -> float:
        return self.initial_lr / (1.0 + self.decay * step)


def layer_widths(n: int) -> tuple[int, int, int, int]:
    if n < 4:
        raise ArchitectureError(f"need at least 4 inputs for the n/2, n/4 layers, got {n}")
    return n, n // 2, n // 4, 2


def init_params(n: int, seed: int) -> dict[str, np.ndarray]:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases, unit BN scale."""
    rng = np.random.default_rng([seed, 2])
    w = layer_widths(n)
    params = {}
    for k, (fan_in, fan_out) in enumerate(zip(w, w[1:]), start=1):
        lim = math.sqrt(6.0 / fan_in)
        params[f"W{k}"] = rng.uniform(-lim, lim, size=(fan_in, fan_out))
        params[f"b{k}"] = np.zeros(fan_out)
    params["gamma"] = np.ones(w[2])
    params["beta"] = np.zeros(w[2])
    return params


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_train(p, X, eps, keep):
    """Train-mode pass; ``keep`` is the (already rescaled) dropout multiplier."""
    z1 = X @ p["W1"] + p["b1"]
    a1 = np.maximum(z1, 0.0)
    d1 = a1 * keep if keep is not None else a1
    z2 = d1 @ p["W2"] + p["b2"]
    a2 = np.maximum(z2, 0.0)
    mu = a2.mean(axis=0)
    var = a2.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (a2 - mu) * inv_std
    bn = p["gamma"] * xhat + p["beta"]
    z3 = bn @ p["W3"] + p["b3"]
    cache = dict(X=X, z1=z1, d1=d1, z2=z2, xhat=xhat, inv_std=inv_std, bn=bn, keep=keep,
                 mu=mu, var=var)
    return softmax(z3), cache


def loss_and_grads(p, X, Y, l2: float, eps: float = 1e-3, keep=None):
    """Penalized cross-entropy and its gradients for one train-mode batch.

    ``Y`` is one-hot of shape (B, 2). Returns ``(loss, grads, probs, cache)``.
    """
    probs, c = _forward_train(p, X, eps, keep)
    B = len(X)
    ce = -np.mean(np.sum(Y * np.log(np.clip(probs, 1e-300, None)), axis=1))
    penalty = l2 * sum(float(np.sum(p[w] ** 2)) for w in WEIGHT_NAMES)
    g = {}
    dz3 = (probs - Y) / B
    g["W3"] = c["bn"].T @ dz3 + 2 * l2 * p["W3"]
    g["b3"] = dz3.sum(axis=0)
    dbn = dz3 @ p["W3"].T
    g["gamma"] = np.sum(dbn * c["xhat"], axis=0)
    g["beta"] = dbn.sum(axis=0)
    dxhat = dbn * p["gamma"]
    da2 = c["inv_std"] / B * (B * dxhat - dxhat.sum(axis=0) - c["xhat"] * np.sum(dxhat * c["xhat"], axis=0))
    dz2 = da2 * (c["z2"] > 0)
    g["W2"] = c["d1"].T @ dz2 + 2 * l2 * p["W2"]
    g["b2"] = dz2.sum(axis=0)
    dd1 = dz2 @ p["W2"].T
    if c["keep"] is not None:
        dd1 = dd1 * c["keep"]
    dz1 = dd1 * (c["z1"] > 0)
    g["W1"] = c["X"].T @ dz1 + 2 * l2 * p["W1"]
    g["b1"] = dz1.sum(axis=0)
    return float(ce + penalty), g, probs, c


@dataclass(eq=False)
class DnnModel:
    params: dict[str, np.ndarray]
    running_mean: np.ndarray
    running_var: np.ndarray
    mask: np.ndarray
    scaler: Standardizer
    config: DnnConfig = field(default_factory=DnnConfig)
    loss_history: list[float] = field(default_factory=list)

    kind = "dnn"

    @classmethod
    def initial(cls, mask: np.ndarray, scaler: Standardizer, cfg: DnnConfig) -> "DnnModel":
        n = int(mask.sum())
        h2 = layer_widths(n)[2]
        return cls(init_params(n, cfg.seed), np.zeros(h2), np.ones(h2), mask, scaler, cfg)

    @property
    def widths(self) -> tuple[int, int, int, int]:
        return layer_widths(int(self.mask.sum()))

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

    def predict_proba(self, X) -> np.ndarray:
        return forward(self, self.transform(X), mode="inference")

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X)[:, 1]

    def parameters_equal(self, other: "DnnModel") -> bool:
        return (all(np.array_equal(self.params[k], other.params[k]) for k in PARAM_NAMES)
                and np.array_equal(self.running_mean, other.running_mean)
                and np.array_equal(self.running_var, other.running_var))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "widths": list(self.widths),
            "mask": self.mask.astype(int).tolist(),
            "mean": self.scaler.mean.tolist(),
            "std": self.scaler.std.tolist(),
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in self.params.items()},
            "running_mean": self.running_mean.tolist(),
            "running_var": self.running_var.tolist(),
            "config": asdict(self.config),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DnnModel":
        params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"])
                  for k, v in d["params"].items()}
        return cls(params, np.asarray(d["running_mean"], dtype=float),
                   np.asarray(d["running_var"], dtype=float),
                   np.asarray(d["mask"], dtype=bool),
                   Standardizer(np.asarray(d["mean"], dtype=float), np.asarray(d["std"], dtype=float)),
                   DnnConfig(**d["config"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DnnModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def dropout_keep(shape, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability ``rate``, else 1/(1-rate)."""
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward(model: DnnModel, batch: np.ndarray, mode: str = "inference",
            dropout_rng: np.random.Generator | None = None) -> np.ndarray:
    """Class probabilities for a standardized, masked batch.

    Train mode applies dropout (when ``dropout_rng`` is given), normalizes
    with batch statistics and updates the running statistics in place.
    """
    batch = np.asarray(batch, dtype=float)
    n = model.widths[0]
    if batch.ndim != 2 or batch.shape[1] != n or len(batch) == 0:
        raise ShapeError(f"expected a (B, {n}) batch, got {batch.shape}")
    p, cfg = model.params, model.config
    if mode == "train":
        keep = None
        if dropout_rng is not None and cfg.dropout > 0:
            keep = dropout_keep((len(batch), model.widths[1]), cfg.dropout, dropout_rng)
        probs, c = _forward_train(p, batch, cfg.bn_eps, keep)
        m = cfg.bn_momentum
        model.running_mean = m * model.running_mean + (1 - m) * c["mu"]
        model.running_var = m * model.running_var + (1 - m) * c["var"]
    elif mode == "inference":
        a1 = np.maximum(batch @ p["W1"] + p["b1"], 0.0)
        a2 = np.maximum(a1 @ p["W2"] + p["b2"], 0.0)
        bn = p["gamma"] * (a2 - model.running_mean) / np.sqrt(model.running_var + cfg.bn_eps) + p["beta"]
        probs = softmax(bn @ p["W3"] + p["b3"])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not np.all(np.isfinite(probs)):
        raise DivergenceError("non-finite network output")
    return probs


def one_hot(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    return np.eye(2)[y]


def train_dnn(X, y, cfg: DnnConfig | None = None, mask=None) -> DnnModel:
    """Train the network for ``cfg.epochs`` epochs of minibatch Nesterov SGD.

    The last batch of an epoch may be smaller than ``batch_size``; it is
    still used and batch norm normalizes it with its own statistics.
    """
    cfg = cfg or DnnConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or y.shape != (len(X),):
        raise ShapeError("X must be 2-d with one label per row")
    if len(y) == 0 or y.min() == y.max():
        raise TrainingError("training data must contain both classes")
    mask = as_mask(mask, X.shape[1])
    Xm = X[:, mask]
    layer_widths(Xm.shape[1])
    scaler = Standardizer.fit(Xm)
    Z = scaler.transform(Xm)
    Y = one_hot(y)
    model = DnnModel.initial(mask, scaler, cfg)
    p = model.params
    vel = {k: np.zeros_like(v) for k, v in p.items()}
    drop_rng = np.random.default_rng([cfg.seed, 1])
    m = cfg.bn_momentum
    n = len(y)
    step = 0
    for epoch in range(cfg.epochs):
        order = batch_order(n, cfg.seed, epoch)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            keep = None
            if cfg.dropout > 0:
                keep = dropout_keep((len(idx), model.widths[1]), cfg.dropout, drop_rng)
            loss, grads, _, c = loss_and_grads(p, Z[idx], Y[idx], cfg.l2, cfg.bn_eps, keep)
            if not math.isfinite(loss):
                raise DivergenceError(f"loss became {loss} in epoch {epoch}")
            total += loss * len(idx)
            lr = cfg.lr_at(step)
            for k in PARAM_NAMES:
                p[k], vel[k] = sgd_nesterov_step(p[k], grads[k], vel[k], lr, cfg.momentum)
            model.running_mean = m * model.running_mean + (1 - m) * c["mu"]
            model.running_var = m * model.running_var + (1 - m) * c["var"]
            step += 1
        model.loss_history.append(total / n)
    return model


def predict_dnn(model: DnnModel, X) -> np.ndarray:
    return model.predict(X)


def data_loss(model: DnnModel, X, y) -> float:
    """Mean cross-entropy of the inference-mode network (no penalty)."""
    probs = model.predict_proba(X)
    y = np.asarray(y, dtype=np.int64)
    return float(-np.mean(np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None))))
