import numpy as np
import pytest

_VERDICTS = pytest.StashKey[list]()

from stockselect.panel import LabeledDataset, build_labeled_dataset, chronological_split
from stockselect.synth import SynthSpec, make_synthetic_panel


@pytest.fixture(scope="session")
def small_synth():
    """A compact planted-signal panel: 80 stocks, 160 days, 16 features, 4 planted."""
    spec = SynthSpec(n_stocks=80, n_dates=160, n_features=16, n_informative=4,
                     signal=0.02, seed=11)
    return make_synthetic_panel(spec)


@pytest.fixture(scope="session")
def small_labeled(small_synth):
    panel, _, _ = small_synth
    return build_labeled_dataset(panel, 30, 4)


@pytest.fixture(scope="session")
def small_split(small_labeled):
    return chronological_split(small_labeled, [0.8, 0.2], align_dates=True)


def linear_dataset(n, d=8, seed=0, noise=0.0, distinct_dates=True):
    """Rows on distinct consecutive days; label is a noisy linear threshold."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = np.linspace(1.0, -1.0, d)
    y = (X @ w + noise * rng.standard_normal(n) > 0).astype(int)
    days = np.arange(n) if distinct_dates else np.arange(n) // 10
    dates = np.datetime64("2010-01-01") + days
    return LabeledDataset(X, y, [f"S{i % 50:02d}" for i in range(n)], dates, 4, 30.0)


@pytest.fixture(scope="session")
def benchmark():
    """Default-size planted benchmark (200 stocks, 500 days, 244 features, 20 planted)."""
    panel, planted, _ = make_synthetic_panel(SynthSpec(seed=0))
    ds = build_labeled_dataset(panel, 30, 4)
    train, test = chronological_split(ds, [0.8, 0.2], align_dates=True)
    return panel, planted, train, test


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""
    lines = request.config.stash[_VERDICTS]

    def record(label: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else "")
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
