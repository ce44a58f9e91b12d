"""Command-line entry point: ``stockselect <subcommand> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .backtest import run_backtest
from .errors import StockSelectError
from .ga_select import evolve, read_selected, write_selected
from .panel import LabeledDataset, load_panel, write_panel
from .pipeline import (
    MODEL_KINDS,
    PipelineConfig,
    PipelineError,
    evaluate_model,
    label_panel,
    load_config,
    load_model,
    run_pipeline,
    save_model,
    split_train_test,
    train_model,
)
from .synth import SynthSpec, make_synthetic_panel

log = logging.getLogger("stockselect")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with a [pipeline] section")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stockselect", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic panel with planted signal")
    _common(p)
    p.add_argument("--stocks", type=int, default=200)
    p.add_argument("--dates", type=int, default=500)
    p.add_argument("--features", type=int, default=244)
    p.add_argument("--informative", type=int, default=20)
    p.add_argument("--noise", type=float, default=SynthSpec.noise)
    p.add_argument("--signal", type=float, default=SynthSpec.signal)
    p.add_argument("--start", default=SynthSpec.start)

    p = sub.add_parser("label", help="build the tail/head labeled dataset")
    _common(p)
    p.add_argument("--panel")
    p.add_argument("--q", type=float)
    p.add_argument("--f", type=int)

    p = sub.add_parser("ga-select", help="GA feature-subset search on a labeled file")
    _common(p)
    p.add_argument("--labeled", required=True)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--population", type=int, dest="ga_population_size")
    p.add_argument("--generations", type=int, dest="ga_generations")
    p.add_argument("--crossover-prob", type=float, dest="ga_crossover_prob")
    p.add_argument("--mutation-prob", type=float, dest="ga_mutation_prob")
    p.add_argument("--crossover", choices=("gene", "one_point"), dest="ga_crossover")

    p = sub.add_parser("train", help="train one model on a labeled file")
    _common(p)
    p.add_argument("--labeled", required=True)
    p.add_argument("--model", choices=MODEL_KINDS, required=True)
    p.add_argument("--features", help="selected-feature list (one name per line)")

    p = sub.add_parser("evaluate", help="score a labeled file with a saved model")
    _common(p)
    p.add_argument("--labeled", required=True)
    p.add_argument("--model-file", required=True)
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("backtest", help="backtest a saved model on a panel")
    _common(p)
    p.add_argument("--panel")
    p.add_argument("--model-file", required=True)
    p.add_argument("--start")
    p.add_argument("--end")
    p.add_argument("--period", type=int, dest="backtest_period")
    p.add_argument("--top-k", type=int, dest="backtest_top_k")
    p.add_argument("--weighting", choices=("score", "equal"), dest="backtest_weighting")
    p.add_argument("--cost", type=float, dest="backtest_cost")

    p = sub.add_parser("run", help="full label/select/train/evaluate/backtest pipeline")
    _common(p)
    return parser


_OVERRIDES = ("seed", "out", "panel", "q", "f", "test_fraction", "threshold",
              "ga_population_size", "ga_generations", "ga_crossover_prob", "ga_mutation_prob",
              "ga_crossover", "backtest_period", "backtest_top_k", "backtest_weighting",
              "backtest_cost")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return cfg.replace(**{k: getattr(args, k, None) for k in _OVERRIDES})


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> None:
    seed = args.seed if args.seed is not None else 0
    spec = SynthSpec(args.stocks, args.dates, args.features, args.informative, noise=args.noise,
                     signal=args.signal, start=args.start, seed=seed)
    panel, mask, _ = make_synthetic_panel(spec)
    out = Path(args.out or "synth")
    out.mkdir(parents=True, exist_ok=True)
    write_panel(panel, out / "panel.csv")
    write_selected(out / "planted_features.txt", mask, panel.feature_names)
    print(out / "panel.csv")


def cmd_label(args) -> None:
    cfg = _config(args)
    panel = load_panel(cfg.panel, cfg.expected_n or None)
    ds = label_panel(panel, cfg)
    path = _out(cfg) / "labeled.csv"
    ds.to_csv(path)
    print(f"{path}: {len(ds)} rows")


def cmd_ga_select(args) -> None:
    cfg = _config(args)
    ds = LabeledDataset.from_csv(args.labeled, cfg.q)
    train, test = split_train_test(ds, cfg.test_fraction)
    best, trace = evolve(train, test, cfg.ga_config())
    out = _out(cfg)
    write_selected(out / "selected_features.txt", best, ds.feature_names)
    (out / "ga_trace.json").write_text(trace.to_json(), encoding="utf-8")
    print(f"selected {int(best.sum())} of {len(best)} features, fitness {trace.best_so_far[-1]:.4f}")


def cmd_train(args) -> None:
    cfg = _config(args)
    ds = LabeledDataset.from_csv(args.labeled, cfg.q)
    mask = read_selected(args.features, ds.feature_names) if args.features else None
    model = train_model(args.model, ds, cfg, mask)
    path = _out(cfg) / f"{args.model}.json"
    save_model(model, path)
    print(path)


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    ds = LabeledDataset.from_csv(args.labeled, cfg.q)
    model = load_model(args.model_file)
    rep = evaluate_model(model, ds, cfg.threshold)
    path = _out(cfg) / "metrics.json"
    path.write_text(rep.to_json(), encoding="utf-8")
    print(rep.to_json(), end="")


def cmd_backtest(args) -> None:
    cfg = _config(args)
    panel = load_panel(cfg.panel, cfg.expected_n or None)
    model = load_model(args.model_file)
    bt = cfg.backtest_config(args.start)
    if args.end:
        bt = dataclasses.replace(bt, end=args.end)
    res = run_backtest(panel, model, bt)
    out = _out(cfg)
    res.write_csv(out / "equity.csv")
    (out / "summary.json").write_text(res.summary_json(), encoding="utf-8")
    print(res.summary_json(), end="")


def cmd_run(args) -> None:
    cfg = _config(args)
    summary = run_pipeline(cfg)
    for phase in ("before", "after"):
        for kind, rep in summary[phase].items():
            shown = "n/a" if rep.auc is None else f"{rep.auc:.4f}"
            print(f"{phase:6s} {kind:5s} auc={shown} accuracy={rep.accuracy:.4f}")


COMMANDS = {"synth": cmd_synth, "label": cmd_label, "ga-select": cmd_ga_select,
            "train": cmd_train, "evaluate": cmd_evaluate, "backtest": cmd_backtest,
            "run": cmd_run}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"stockselect {args.command}: error {exc}", file=sys.stderr)
        return 1
    except (StockSelectError, OSError, ValueError) as exc:
        print(f"stockselect {args.command}: error [{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
