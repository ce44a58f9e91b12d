"""The whole pipeline from one config, as the command line runs it."""
# %%
import tempfile
from pathlib import Path

from stockselect import PipelineConfig, SynthSpec, make_synthetic_panel, run_pipeline

panel, _, _ = make_synthetic_panel(SynthSpec(n_stocks=80, n_dates=160, n_features=20,
                                             n_informative=4, seed=6))
out = Path(tempfile.mkdtemp()) / "report"
cfg = PipelineConfig(ga=True, ga_population_size=20, ga_generations=5, rf_n_trees=30,
                     backtest=True, seed=42, out=str(out))
summary = run_pipeline(cfg, panel)

# %% Indexes before and after feature selection.
print((out / "indexes_before.csv").read_text())
print((out / "indexes_after.csv").read_text())

# %% Everything written to the report directory.
for p in sorted(out.rglob("*")):
    if p.is_file():
        print(p.relative_to(out))
