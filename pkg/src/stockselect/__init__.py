"""Stock selection with tail/head labeling, GA feature search and four classifiers."""
from .backtest import BacktestConfig, BacktestResult, construct_portfolio, run_backtest
from .ga_select import (
    EvolutionTrace,
    GaConfig,
    evolve,
    fitness,
    init_population,
    next_generation,
    selected_names,
)
from .linear_model import LRModel, SgdConfig, predict_lr, sgd_nesterov_step, train_lr
from .metrics import MetricsReport, auc, confusion_metrics
from .neural_net import DnnConfig, DnnModel, forward, predict_dnn, train_dnn
from .panel import (
    FeaturePanel,
    LabeledDataset,
    SplitSpec,
    anchor_schedule,
    build_labeled_dataset,
    chronological_split,
    default_feature_names,
    labeled_cap,
    load_panel,
    rv_ratio,
    write_panel,
)
from .pipeline import PipelineConfig, load_config, run_pipeline
from .random_forest import RFConfig, RFModel, best_split, predict_rf, train_rf
from .stacking import StackModel, predict_stack, train_stack
from .synth import SynthSpec, make_synthetic_panel

__version__ = "0.1.0"
