"""End-to-end evaluation pipeline: label, split, select, train, evaluate, backtest.

Configuration is a flat INI file with a single ``[pipeline]`` section whose
keys mirror :class:`PipelineConfig`. Every stage draws its seed from the
master seed and the stage name, so one seed reproduces the whole run.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import logging
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backtest import BacktestConfig, run_backtest
from .errors import ContractError, StockSelectError
from .ga_select import GaConfig, evolve, write_selected
from .linear_model import LRModel, SgdConfig, train_lr
from .metrics import MetricsReport, confusion_metrics
from .neural_net import DnnConfig, DnnModel, train_dnn
from .panel import (
    FeaturePanel,
    LabeledDataset,
    anchor_schedule,
    build_labeled_dataset,
    chronological_split,
    load_panel,
)
from .random_forest import RFConfig, RFModel, train_rf
from .stacking import StackModel, train_stack

log = logging.getLogger(__name__)

MODEL_KINDS = ("lr", "rf", "dnn", "stack")
INDEX_NAMES = ("auc", "accuracy", "precision", "recall", "f1", "tpr", "fpr")
_MODEL_CLASSES = {"lr": LRModel, "rf": RFModel, "dnn": DnnModel, "stack": StackModel}


class PipelineError(StockSelectError):
    """A failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def stage_seed(master: int, stage: str) -> int:
    digest = hashlib.sha256(f"{master}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class PipelineConfig:
    panel: str = "panel.csv"
    expected_n: int = 0  # 0 accepts whatever feature columns the file has
    q: float = 30.0
    f: int = 4
    anchor_start: int = 0
    models: tuple = MODEL_KINDS
    test_fraction: float = 0.2
    threshold: float = 0.5
    ga: bool = False
    ga_population_size: int = 100
    ga_generations: int = 100
    ga_crossover_prob: float = 0.2
    ga_mutation_prob: float = 0.1
    ga_crossover: str = "gene"
    lr_initial_lr: float = 1e-2
    lr_decay: float = 1e-6
    lr_momentum: float = 0.9
    lr_epochs: int = 20
    lr_batch_size: int = 128
    rf_n_trees: int = 100
    rf_max_depth: int = 4
    rf_min_samples_split: int = 2
    rf_min_impurity_split: float = 1e-7
    dnn_initial_lr: float = 1e-3
    dnn_decay: float = 1e-6
    dnn_momentum: float = 0.9
    dnn_epochs: int = 20
    dnn_batch_size: int = 128
    dnn_dropout: float = 0.5
    dnn_l2: float = 0.01
    stack_fractions: tuple = (0.4, 0.4, 0.2)
    backtest: bool = False
    backtest_period: int = 0  # 0 -> f
    backtest_top_k: int = 0  # 0 -> floor(q * M / 100)
    backtest_weighting: str = "score"
    backtest_cost: float = 0.0
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        self.models = tuple(self.models)
        self.stack_fractions = tuple(float(x) for x in self.stack_fractions)
        bad = [m for m in self.models if m not in MODEL_KINDS]
        if bad or not self.models:
            raise ContractError(f"unknown model {bad[0] if bad else '(none)'}; choose from {MODEL_KINDS}")
        if not 0 < self.test_fraction < 1:
            raise ContractError("test_fraction must lie in (0, 1)")

    # sub-configs
    def lr_config(self, seed: int) -> SgdConfig:
        return SgdConfig(self.lr_initial_lr, self.lr_decay, self.lr_momentum,
                         self.lr_epochs, self.lr_batch_size, seed)

    def rf_config(self, seed: int) -> RFConfig:
        return RFConfig(self.rf_n_trees, self.rf_max_depth, self.rf_min_samples_split,
                        self.rf_min_impurity_split, seed=seed)

    def dnn_config(self, seed: int) -> DnnConfig:
        return DnnConfig(self.dnn_initial_lr, self.dnn_decay, self.dnn_momentum, self.dnn_epochs,
                         self.dnn_batch_size, self.dnn_dropout, self.dnn_l2, seed=seed)

    def ga_config(self) -> GaConfig:
        return GaConfig(self.ga_population_size, self.ga_generations, self.ga_crossover_prob,
                        self.ga_mutation_prob, self.ga_crossover, stage_seed(self.seed, "ga"))

    def backtest_config(self, start: str | None = None) -> BacktestConfig:
        return BacktestConfig(start=start, period=self.backtest_period or self.f,
                              top_k=self.backtest_top_k or None, q=self.q,
                              weighting=self.backtest_weighting, cost_rate=self.backtest_cost)

    def replace(self, **changes) -> "PipelineConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)


def _parse_value(raw: str, default):
    raw = raw.strip()
    if isinstance(default, bool):
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
            raise ContractError(f"not a boolean: {raw!r}")
        return low in ("true", "yes", "1", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    return raw


def load_config(path) -> PipelineConfig:
    """Read a ``[pipeline]`` INI file; unknown keys are rejected."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(path, encoding="utf-8"):
        raise ContractError(f"cannot read config file {path}")
    if "pipeline" not in parser:
        raise ContractError("config file needs a [pipeline] section")
    defaults = PipelineConfig()
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    values = {}
    for key, raw in parser["pipeline"].items():
        if key not in known:
            raise ContractError(f"unknown config key {key!r}")
        values[key] = _parse_value(raw, getattr(defaults, key))
    return PipelineConfig(**values)


def dump_config(cfg: PipelineConfig) -> str:
    lines = ["[pipeline]"]
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    kind = d.get("kind")
    if kind not in _MODEL_CLASSES:
        raise ContractError(f"unknown model kind {kind!r} in {path}")
    return _MODEL_CLASSES[kind].from_dict(d)


def train_model(kind: str, train: LabeledDataset, cfg: PipelineConfig, mask=None, tag: str = ""):
    seed = stage_seed(cfg.seed, f"train:{kind}{tag}")
    if kind == "lr":
        return train_lr(train.X, train.y, cfg.lr_config(seed), mask)
    if kind == "rf":
        return train_rf(train.X, train.y, cfg.rf_config(seed), mask)
    if kind == "dnn":
        return train_dnn(train.X, train.y, cfg.dnn_config(seed), mask)
    if kind == "stack":
        return train_stack(train, cfg.dnn_config(seed), cfg.rf_config(seed + 1),
                           cfg.lr_config(seed + 2), mask, cfg.stack_fractions)
    raise ContractError(f"unknown model {kind!r}")


def evaluate_model(model, test: LabeledDataset, threshold: float = 0.5) -> MetricsReport:
    return confusion_metrics(model.predict(test.X), test.y, threshold)


def indexes_table(reports: dict[str, MetricsReport]) -> str:
    """CSV with one row per index and one column per model."""
    names = list(reports)
    lines = ["index," + ",".join(names)]
    for idx in INDEX_NAMES:
        cells = []
        for n in names:
            v = getattr(reports[n], idx)
            cells.append("" if v is None else f"{v:.6f}")
        lines.append(idx + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def label_panel(panel: FeaturePanel, cfg: PipelineConfig) -> LabeledDataset:
    anchors = anchor_schedule(panel.n_dates, cfg.f, start=cfg.anchor_start)
    return build_labeled_dataset(panel, cfg.q, cfg.f, anchors)


def split_train_test(ds: LabeledDataset, test_fraction: float):
    return chronological_split(ds, [1.0 - test_fraction, test_fraction], align_dates=True)


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def run_pipeline(cfg: PipelineConfig, panel: FeaturePanel | None = None) -> dict:
    """Execute the full pipeline and write every report under ``cfg.out``.

    Files are first written to a scratch directory next to ``cfg.out`` and
    moved into place only if every stage succeeds. Returns a summary dict
    with the metric reports and the selected mask.
    """
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".partial-", dir=out.parent))
    try:
        result = _run(cfg, panel, scratch)
        out.mkdir(parents=True, exist_ok=True)
        for item in sorted(scratch.rglob("*")):
            if item.is_file():
                dest = out / item.relative_to(scratch)
                dest.parent.mkdir(parents=True, exist_ok=True)
                shutil.move(str(item), dest)
        return result
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _run(cfg: PipelineConfig, panel: FeaturePanel | None, out: Path) -> dict:
    with _Stage("load"):
        if panel is None:
            panel = load_panel(cfg.panel, cfg.expected_n or None)
    with _Stage("label"):
        ds = label_panel(panel, cfg)
    with _Stage("split"):
        train, test = split_train_test(ds, cfg.test_fraction)
    (out / "metrics").mkdir()
    (out / "models").mkdir()
    (out / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
    (out / "split.json").write_text(json.dumps({
        "n_labeled": len(ds), "n_train": len(train), "n_test": len(test),
        "train_dates": [str(train.anchor_dates.min()), str(train.anchor_dates.max())],
        "test_dates": [str(test.anchor_dates.min()), str(test.anchor_dates.max())],
    }, indent=2) + "\n", encoding="utf-8")

    summary = {"before": {}, "after": {}, "mask": None}
    final_models = {}
    for kind in cfg.models:
        with _Stage(f"train:{kind}"):
            model = train_model(kind, train, cfg)
        with _Stage(f"evaluate:{kind}"):
            rep = evaluate_model(model, test, cfg.threshold)
        (out / "metrics" / f"{kind}_before.json").write_text(rep.to_json(), encoding="utf-8")
        summary["before"][kind] = rep
        final_models[kind] = model
    (out / "indexes_before.csv").write_text(indexes_table(summary["before"]), encoding="utf-8")

    if cfg.ga:
        with _Stage("ga-select"):
            mask, trace = evolve(train, test, cfg.ga_config())
        write_selected(out / "selected_features.txt", mask, ds.feature_names)
        (out / "ga_trace.json").write_text(trace.to_json(), encoding="utf-8")
        summary["mask"] = mask
        for kind in cfg.models:
            with _Stage(f"train:{kind}:selected"):
                model = train_model(kind, train, cfg, mask, tag=":selected")
            with _Stage(f"evaluate:{kind}:selected"):
                rep = evaluate_model(model, test, cfg.threshold)
            (out / "metrics" / f"{kind}_after.json").write_text(rep.to_json(), encoding="utf-8")
            summary["after"][kind] = rep
            final_models[kind] = model
        (out / "indexes_after.csv").write_text(indexes_table(summary["after"]), encoding="utf-8")

    for kind, model in final_models.items():
        save_model(model, out / "models" / f"{kind}.json")

    if cfg.backtest:
        (out / "backtest").mkdir()
        start = str(test.anchor_dates.min())
        for kind, model in final_models.items():
            with _Stage(f"backtest:{kind}"):
                res = run_backtest(panel, model, cfg.backtest_config(start))
            res.write_csv(out / "backtest" / f"{kind}_equity.csv")
            (out / "backtest" / f"{kind}_summary.json").write_text(res.summary_json(), encoding="utf-8")
            summary.setdefault("backtest", {})[kind] = res
    return summary

