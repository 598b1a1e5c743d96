import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csiorient.errors import MetricError
from csiorient.metrics import (
    ConfusionMatrix,
    RunReport,
    TaskMetrics,
    accuracy,
    aggregate,
    balanced_accuracy,
    f1_macro,
    format_percent,
    mcc,
    per_class_accuracy,
)

from oracles import metrics_from_pairs


def cm(rows):
    rows = np.asarray(rows)
    return ConfusionMatrix(rows, tuple(range(rows.shape[0])))


def test_diagonal_is_perfect():
    c = cm(np.diag([5, 3, 7, 2]))
    assert accuracy(c) == balanced_accuracy(c) == f1_macro(c) == mcc(c) == 1.0


def test_two_by_two_fixture():
    c = cm([[2, 1], [1, 2]])
    assert accuracy(c) == pytest.approx(0.6667, abs=1e-4)
    assert accuracy(c) == pytest.approx(4 / 6, abs=1e-9)
    assert balanced_accuracy(c) == pytest.approx(4 / 6, abs=1e-9)
    assert mcc(c) == pytest.approx(1 / 3, abs=1e-9)


def test_constant_predictions():
    c = cm([[10, 0, 0, 0]] * 4)
    assert accuracy(c) == 0.25
    assert balanced_accuracy(c) == 0.25
    assert mcc(c) == 0.0


def test_balanced_truth_acc_equals_bacc():
    c = cm([[7, 2, 1], [3, 5, 2], [0, 1, 9]])
    assert accuracy(c) == pytest.approx(balanced_accuracy(c), abs=1e-12)


def test_per_class_is_recall():
    c = cm([[3, 1], [0, 0]])
    pc = per_class_accuracy(c)
    assert pc[0] == 0.75
    assert np.isnan(pc[1])
    with pytest.raises(MetricError):
        balanced_accuracy(c)


def test_f1_excludes_absent_classes():
    # class 2 never occurs and is never predicted
    c = cm([[2, 1, 0], [0, 3, 0], [0, 0, 0]])
    expected = np.mean([2 * 2 / (3 + 2), 2 * 3 / (3 + 4)])
    assert f1_macro(c) == pytest.approx(expected, abs=1e-12)
    # class 2 predicted but never true counts as 0
    c = cm([[2, 0, 1], [0, 3, 0], [0, 0, 0]])
    assert f1_macro(c) == pytest.approx(np.mean([2 * 2 / (3 + 2), 1.0, 0.0]), abs=1e-12)


def test_empty_matrix():
    with pytest.raises(MetricError):
        accuracy(cm(np.zeros((3, 3), dtype=int)))


def test_from_labels_counts():
    c = ConfusionMatrix.from_labels(["a", "b", "b"], ["a", "a", "b"], ("a", "b"))
    assert c.counts.tolist() == [[1, 0], [1, 1]]
    assert c.total == 3


def _report(acc):
    tm = TaskMetrics(acc=acc, bacc=acc, f1_macro=acc, mcc=acc, per_class_acc=[acc, 1.0])
    return RunReport(run_seed=0, activity=tm, orientation=tm)


def test_aggregate_fixtures():
    s = aggregate([_report(0.7), _report(0.9)])["activity"]["acc"]
    assert s["mean"] == pytest.approx(0.8, abs=1e-12)
    assert s["std"] == pytest.approx(0.1, abs=1e-12)
    one = aggregate([_report(0.42)])["orientation"]
    assert one["mcc"]["std"] == 0.0
    ten = aggregate([_report(0.55)] * 10)["activity"]
    assert ten["bacc"] == {"mean": 0.55, "std": 0.0}
    assert ten["per_class_acc"][1] == {"mean": 1.0, "std": 0.0}
    assert format_percent({"mean": 0.9137, "std": 0.0142}) == "91.4±1.4"


def test_report_round_trip():
    r = _report(0.3)
    assert RunReport.from_dict(r.to_dict()) == r


labels = st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60)


@settings(max_examples=200, deadline=None)
@given(pairs=labels)
def test_matches_per_sample_oracle(pairs):
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    c = ConfusionMatrix.from_labels(y_true, y_pred, range(4))
    acc, bacc, f1, m = metrics_from_pairs(y_true, y_pred, range(4))
    assert accuracy(c) == pytest.approx(acc, abs=1e-12)
    if set(y_true) == {0, 1, 2, 3}:
        assert balanced_accuracy(c) == pytest.approx(bacc, abs=1e-12)
    else:
        with pytest.raises(MetricError):
            balanced_accuracy(c)
    assert f1_macro(c) == pytest.approx(f1, abs=1e-12)
    assert mcc(c) == pytest.approx(m, abs=1e-12)
    assert -1 - 1e-12 <= mcc(c) <= 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(pairs=labels, perm=st.permutations(range(4)))
def test_invariant_under_class_relabeling(pairs, perm):
    c = ConfusionMatrix.from_labels([t for t, _ in pairs], [p for _, p in pairs], range(4))
    P = np.asarray(perm)
    c2 = cm(c.counts[np.ix_(P, P)])
    for f in (accuracy, f1_macro, mcc):
        assert f(c) == pytest.approx(f(c2), abs=1e-12)
    assert mcc(c) == pytest.approx(mcc(cm(c.counts.T)), abs=1e-12)


def test_mcc_one_only_for_diagonal():
    assert mcc(cm([[3, 0], [0, 4]])) == 1.0
    assert mcc(cm([[3, 1], [0, 4]])) < 1.0


def test_agrees_with_sklearn():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(0)
    t = rng.integers(0, 4, 300)
    p = np.where(rng.random(300) < 0.6, t, rng.integers(0, 4, 300))
    c = ConfusionMatrix.from_labels(t, p, range(4))
    assert mcc(c) == pytest.approx(sk.matthews_corrcoef(t, p), abs=1e-12)
    assert f1_macro(c) == pytest.approx(sk.f1_score(t, p, average="macro"), abs=1e-12)
    assert balanced_accuracy(c) == pytest.approx(sk.balanced_accuracy_score(t, p), abs=1e-12)
