"""Genetic-algorithm search over feature subsets.

A chromosome is a boolean mask over the feature columns. Its fitness is
the test-set AUC of a logistic regression trained on the selected columns.
One generation is fitness-proportional selection with replacement, a
crossover on consecutive pairs, single-bit mutation and a repair step
that keeps every mask non-empty.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractError
from .linear_model import SgdConfig, train_lr_masks
from .metrics import auc
from .panel import LabeledDataset

# Fixed seed for the fitness LR, independent of the GA's own stream.
FITNESS_SEED = 20180101


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 100
    generations: int = 100
    crossover_prob: float = 0.2
    mutation_prob: float = 0.1
    crossover: str = "gene"  # "gene" swaps one position, "one_point" swaps the suffix
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 1 or self.generations < 0:
            raise ContractError("population_size must be >= 1 and generations >= 0")
        if not (0 <= self.crossover_prob <= 1 and 0 <= self.mutation_prob <= 1):
            raise ContractError("probabilities must lie in [0, 1]")
        if self.crossover not in ("gene", "one_point"):
            raise ContractError(f"unknown crossover {self.crossover!r}")


@dataclass
class EvolutionTrace:
    best_fitness: list[float] = field(default_factory=list)
    mean_fitness: list[float] = field(default_factory=list)
    best_chromosome: list[np.ndarray] = field(default_factory=list)
    best_so_far: list[float] = field(default_factory=list)
    population_sizes: list[int] = field(default_factory=list)
    evaluations: int = 0

    def to_dict(self) -> dict:
        return {
            "generations": [
                {"generation": g, "best_fitness": b, "mean_fitness": m, "best_so_far": s,
                 "best_chromosome": "".join("1" if v else "0" for v in c)}
                for g, (b, m, s, c) in enumerate(zip(self.best_fitness, self.mean_fitness,
                                                     self.best_so_far, self.best_chromosome))
            ],
            "evaluations": self.evaluations,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"


def init_population(n: int, cfg: GaConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """``population_size`` fair-coin masks of length ``n``; empty draws are redrawn."""
    if n < 1:
        raise ContractError("need at least one feature")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    pop = np.empty((cfg.population_size, n), dtype=bool)
    for i in range(cfg.population_size):
        c = rng.random(n) < 0.5
        while not c.any():
            c = rng.random(n) < 0.5
        pop[i] = c
    return pop


def fitness_population(pop: np.ndarray, train: LabeledDataset, test: LabeledDataset,
                       lr_cfg: SgdConfig | None = None) -> np.ndarray:
    """Test AUC for each mask in ``pop``; LRs are trained together in one pass."""
    lr_cfg = lr_cfg or SgdConfig(seed=FITNESS_SEED)
    models = train_lr_masks(train.X, train.y, pop, lr_cfg)
    return np.array([auc(m.predict(test.X), test.y) for m in models])


def fitness(c, train: LabeledDataset, test: LabeledDataset,
            lr_cfg: SgdConfig | None = None) -> float:
    c = np.asarray(c, dtype=bool)
    if not c.any():
        raise ContractError("chromosome selects no features")
    return float(fitness_population(c[None, :], train, test, lr_cfg)[0])


def _crossover(a: np.ndarray, b: np.ndarray, pos: int, mode: str) -> None:
    if mode == "gene":
        a[pos], b[pos] = b[pos], a[pos]
    else:
        tmp = a[pos:].copy()
        a[pos:] = b[pos:]
        b[pos:] = tmp


def next_generation(pop: np.ndarray, fits, cfg: GaConfig, rng: np.random.Generator) -> np.ndarray:
    pop = np.asarray(pop, dtype=bool)
    fits = np.asarray(fits, dtype=float)
    size, n = pop.shape
    if len(fits) != size:
        raise ContractError("one fitness value per individual is required")
    if np.any(fits < 0) or not np.all(np.isfinite(fits)):
        raise ContractError("fitness values must be finite and non-negative")
    total = fits.sum()
    probs = fits / total if total > 0 else np.full(size, 1.0 / size)
    chosen = rng.choice(size, size=cfg.population_size, replace=True, p=probs)
    new = pop[chosen].copy()
    for i in range(0, len(new) - 1, 2):
        if rng.random() < cfg.crossover_prob:
            _crossover(new[i], new[i + 1], int(rng.integers(n)), cfg.crossover)
    for i in range(len(new)):
        if rng.random() < cfg.mutation_prob:
            j = int(rng.integers(n))
            new[i, j] = not new[i, j]
    for i in range(len(new)):
        if not new[i].any():
            new[i, int(rng.integers(n))] = True
    return new


FitnessFn = Callable[[np.ndarray], np.ndarray]


def _lexi_lowest(rows: np.ndarray) -> int:
    """Index of the lexicographically smallest bit pattern (0 < 1)."""
    keys = [tuple(r.astype(np.uint8)) for r in rows]
    return min(range(len(keys)), key=keys.__getitem__)


def evolve(train: LabeledDataset | None, test: LabeledDataset | None,
           cfg: GaConfig | None = None, fitness_fn: FitnessFn | None = None,
           n_features: int | None = None, lr_cfg: SgdConfig | None = None):
    """Run the GA and return ``(best_chromosome, trace)``.

    ``fitness_fn`` maps a (P, n) boolean array to P fitness values and
    replaces the LR-AUC fitness (then ``n_features`` gives the mask width).
    Fitness is cached per chromosome within the run.
    """
    cfg = cfg or GaConfig()
    if fitness_fn is None:
        def fitness_fn(p):
            return fitness_population(p, train, test, lr_cfg)
        n_features = train.n_features
    elif n_features is None:
        raise ContractError("n_features is required with a custom fitness function")

    rng = np.random.default_rng(cfg.seed)
    cache: dict[bytes, float] = {}
    trace = EvolutionTrace()

    def evaluate(pop):
        keys = [np.packbits(c).tobytes() for c in pop]
        todo, seen = [], set()
        for i, k in enumerate(keys):
            if k not in cache and k not in seen:
                todo.append(i)
                seen.add(k)
        if todo:
            vals = np.asarray(fitness_fn(pop[todo]), dtype=float)
            for i, v in zip(todo, vals):
                cache[keys[i]] = float(v)
            trace.evaluations += len(todo)
        return np.array([cache[k] for k in keys])

    pop = init_population(n_features, cfg, rng)
    best, best_fit = None, -np.inf
    for gen in range(cfg.generations + 1):
        if gen > 0:
            pop = next_generation(pop, fits, cfg, rng)
        fits = evaluate(pop)
        top = fits.max()
        tied = np.flatnonzero(fits == top)
        gen_best = pop[tied[_lexi_lowest(pop[tied])]].copy()
        if top > best_fit:
            best, best_fit = gen_best, float(top)
        trace.best_fitness.append(float(top))
        trace.mean_fitness.append(float(fits.mean()))
        trace.best_chromosome.append(gen_best)
        trace.best_so_far.append(best_fit)
        trace.population_sizes.append(len(pop))
    return best, trace


def selected_names(mask, feature_names) -> list[str]:
    return [name for name, keep in zip(feature_names, mask) if keep]


def write_selected(path, mask, feature_names) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name in selected_names(mask, feature_names):
            fh.write(name + "\n")


def read_selected(path, feature_names) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        chosen = {line.strip() for line in fh if line.strip()}
    unknown = chosen - set(feature_names)
    if unknown:
        raise ContractError(f"unknown feature name {sorted(unknown)[0]!r}")
    return np.array([name in chosen for name in feature_names], dtype=bool)
