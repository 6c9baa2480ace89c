import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seesim.learn.metrics import LengthMismatch, Metrics, confusion, roc
from seesim.learn.svm import SingleClassDataset


def test_table_example():
    m = Metrics(tp=61, tn=90, fp=9, fn=12)
    assert 100 * m.tpr == pytest.approx(83.6, abs=0.1)
    assert 100 * m.tnr == pytest.approx(90.9, abs=0.1)
    assert 100 * m.precision == pytest.approx(87.1, abs=0.1)
    assert 100 * m.accuracy == pytest.approx(87.8, abs=0.1)
    # 122/143 = 0.8531; the reference value is quoted to two decimals
    assert m.f1 == pytest.approx(122 / 143, abs=1e-12)
    assert round(m.f1, 2) == 0.85


def test_confusion_counts():
    pred = [1, 1, -1, -1, 1]
    true = [1, -1, -1, 1, 1]
    assert confusion(pred, true) == Metrics(tp=2, tn=1, fp=1, fn=1)
    with pytest.raises(LengthMismatch):
        confusion([1], [1, -1])


def test_perfect():
    y = [1, -1, 1, -1]
    m = confusion(y, y)
    assert (m.tpr, m.tnr, m.precision, m.accuracy, m.f1) == (1.0, 1.0, 1.0, 1.0, 1.0)
    _, auc = roc([0.9, 0.1, 0.8, 0.2], y)
    assert auc == 1.0


def test_inverted():
    _, auc = roc([0.1, 0.9, 0.2, 0.8], [1, -1, 1, -1])
    assert auc == 0.0


def test_ties_are_grouped():
    pts, auc = roc([0.5, 0.5, 0.5, 0.5], [1, -1, 1, -1])
    assert pts == [(0.0, 0.0), (1.0, 1.0)]
    assert auc == 0.5


def test_roc_needs_both_classes():
    with pytest.raises(SingleClassDataset):
        roc([0.1, 0.2], [1, 1])


def test_sum():
    assert Metrics(1, 2, 3, 4) + Metrics(1, 1, 1, 1) == Metrics(2, 3, 4, 5)


scores = st.lists(st.tuples(st.integers(-5, 5).map(float), st.sampled_from([-1, 1])), min_size=2, max_size=40)


@settings(deadline=None)
@given(scores)
def test_roc_properties(data):
    s, y = map(np.array, zip(*data))
    if len(set(y)) < 2:
        return
    pts, auc = roc(s, y)
    assert pts[0] == (0.0, 0.0) and pts[-1] == (1.0, 1.0)
    assert all(a[0] <= b[0] and a[1] <= b[1] for a, b in zip(pts, pts[1:]))
    assert 0.0 <= auc <= 1.0
    sk = pytest.importorskip("sklearn.metrics")
    assert auc == pytest.approx(sk.roc_auc_score(y, s), abs=1e-12)
