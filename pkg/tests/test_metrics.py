import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stockselect.errors import ContractError, UndefinedAUCError
from stockselect.metrics import MetricsReport, auc, confusion_metrics


def brute_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    hits = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return hits / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.9, 0.1], [1, 0]) == 1.0
    assert auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5
    assert auc([0.8, 0.3, 0.5, 0.1], [1, 1, 0, 0]) == 0.75


def test_auc_errors():
    with pytest.raises(UndefinedAUCError):
        auc([0.1, 0.2], [1, 1])
    with pytest.raises(ContractError):
        auc([0.1, 0.2, 0.3], [1, 0])


labelled = st.integers(2, 200).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 20).map(lambda v: v / 20), min_size=n, max_size=n),
        st.lists(st.integers(0, 1), min_size=n, max_size=n),
    )
).filter(lambda sl: 0 < sum(sl[1]) < len(sl[1]))


@settings(max_examples=200, deadline=None)
@given(labelled)
def test_auc_matches_pair_count(sl):
    scores, labels = sl
    # both sides are ratios of the same integer half-counts, so equality is exact
    assert auc(scores, labels) == brute_auc(scores, labels)


@settings(max_examples=100, deadline=None)
@given(labelled)
def test_auc_monotone_invariance_and_flip(sl):
    s, labels = np.asarray(sl[0]), np.asarray(sl[1])
    a = auc(s, labels)
    assert auc(2 * s + 1, labels) == a
    assert auc(s ** 3, labels) == a
    assert auc(s, 1 - labels) == pytest.approx(1 - a, abs=1e-12)


def test_confusion_hand_example():
    rep = confusion_metrics([0.9, 0.4, 0.6, 0.2], [1, 1, 0, 0], 0.5)
    assert rep.counts == (1, 1, 1, 1)
    for name in ("accuracy", "precision", "recall", "f1", "tpr", "fpr"):
        assert getattr(rep, name) == 0.5


def test_confusion_perfect_and_degenerate():
    labels = np.array([1, 0, 0, 1, 1])
    rep = confusion_metrics(labels.astype(float), labels)
    assert rep.accuracy == 1.0 and rep.fpr == 0.0 and rep.auc == 1.0
    rng = np.random.default_rng(0)
    rep = confusion_metrics(rng.random(5), labels, threshold=0.0)
    assert rep.recall == 1.0


def test_undefined_rates_are_none():
    rep = confusion_metrics([0.1, 0.2], [1, 1])
    assert rep.precision is None and rep.fpr is None and rep.auc is None
    assert rep.recall == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60),
       st.floats(0, 1))
def test_report_invariants(pairs, thr):
    s, labels = zip(*pairs)
    rep = confusion_metrics(list(s), list(labels), thr)
    assert sum(rep.counts) == len(pairs)
    assert rep.recall == rep.tpr
    for v in (rep.accuracy, rep.precision, rep.recall, rep.f1, rep.fpr, rep.auc):
        assert v is None or 0 <= v <= 1
    if rep.f1 is not None:
        assert rep.f1 == pytest.approx(2 * rep.precision * rep.recall / (rep.precision + rep.recall))


def test_report_json_roundtrip():
    rep = confusion_metrics([0.9, 0.4, 0.6, 0.2], [1, 1, 0, 0])
    d = json.loads(rep.to_json())
    assert {"auc", "accuracy", "precision", "recall", "f1", "tpr", "fpr",
            "threshold", "tp", "fp", "tn", "fn"} == set(d)
    assert MetricsReport.from_dict(d) == rep
