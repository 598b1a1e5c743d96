"""Confusion-matrix metrics and multi-run aggregation."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import MetricError

SCALAR_METRICS = ("acc", "bacc", "f1_macro", "mcc")


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class
    class_order: tuple

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] != len(self.class_order):
            raise MetricError(f"confusion matrix must be square over class_order, got {c.shape}")
        if np.any(c < 0):
            raise MetricError("confusion matrix counts must be non-negative")

    @classmethod
    def from_labels(cls, y_true, y_pred, class_order) -> "ConfusionMatrix":
        index = {c: i for i, c in enumerate(class_order)}
        counts = np.zeros((len(class_order),) * 2, dtype=np.int64)
        for t, p in zip(np.asarray(y_true).tolist(), np.asarray(y_pred).tolist()):
            try:
                counts[index[t], index[p]] += 1
            except KeyError as exc:
                raise MetricError(f"label {exc.args[0]!r} not in class order") from None
        return cls(counts, tuple(class_order))

    @property
    def total(self) -> int:
        return int(np.sum(self.counts))


def _counts(cm: ConfusionMatrix) -> np.ndarray:
    c = np.asarray(cm.counts, dtype=np.float64)
    if c.sum() == 0:
        raise MetricError("confusion matrix is empty")
    return c


def accuracy(cm: ConfusionMatrix) -> float:
    c = _counts(cm)
    return float(np.trace(c) / c.sum())


def per_class_accuracy(cm: ConfusionMatrix) -> list[float]:
    """Recall of each class; NaN for classes without true samples."""
    c = _counts(cm)
    rows = c.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return (np.diag(c) / rows).tolist()


def balanced_accuracy(cm: ConfusionMatrix) -> float:
    c = _counts(cm)
    rows = c.sum(axis=1)
    if np.any(rows == 0):
        missing = [cm.class_order[i] for i in np.flatnonzero(rows == 0)]
        raise MetricError(f"balanced accuracy needs true samples of every class, missing {missing}")
    return float(np.mean(np.diag(c) / rows))


def f1_macro(cm: ConfusionMatrix) -> float:
    """Unweighted mean F1; classes never seen nor predicted are left out."""
    c = _counts(cm)
    tp = np.diag(c)
    denom = c.sum(axis=0) + c.sum(axis=1)
    present = denom > 0
    return float(np.mean(2 * tp[present] / denom[present]))


def mcc(cm: ConfusionMatrix) -> float:
    """Multiclass Matthews correlation; 0 when either marginal is constant."""
    c = _counts(cm)
    s = c.sum()
    pred = c.sum(axis=0)
    true = c.sum(axis=1)
    cov_pt = np.trace(c) * s - pred @ true
    cov_pp = s * s - pred @ pred
    cov_tt = s * s - true @ true
    if cov_pp == 0 or cov_tt == 0:
        return 0.0
    return float(cov_pt / np.sqrt(cov_pp * cov_tt))


@dataclass
class TaskMetrics:
    acc: float
    bacc: float
    f1_macro: float
    mcc: float
    per_class_acc: list[float]

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "TaskMetrics":
        return cls(
            acc=accuracy(cm),
            bacc=balanced_accuracy(cm),
            f1_macro=f1_macro(cm),
            mcc=mcc(cm),
            per_class_acc=per_class_accuracy(cm),
        )


@dataclass
class RunReport:
    run_seed: int
    activity: TaskMetrics
    orientation: TaskMetrics
    extras: dict = field(default_factory=dict)

    def task(self, name: str) -> TaskMetrics:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            run_seed=d["run_seed"],
            activity=TaskMetrics(**d["activity"]),
            orientation=TaskMetrics(**d["orientation"]),
            extras=d.get("extras", {}),
        )


def _mean_std(values) -> dict:
    v = np.asarray(values, dtype=np.float64)
    return {"mean": float(v.mean()), "std": float(v.std())}


def aggregate(reports: list[RunReport]) -> dict:
    """Mean and population std of every metric, per task.

    ``per_class_acc`` is aggregated element-wise into lists of the same shape.
    """
    if not reports:
        raise MetricError("nothing to aggregate")
    out = {}
    for task in ("activity", "orientation"):
        rows = [r.task(task) for r in reports]
        summary = {m: _mean_std([getattr(r, m) for r in rows]) for m in SCALAR_METRICS}
        per_class = np.array([r.per_class_acc for r in rows], dtype=np.float64)
        summary["per_class_acc"] = [_mean_std(per_class[:, k]) for k in range(per_class.shape[1])]
        out[task] = summary
    return out


def format_percent(stat: dict) -> str:
    return f"{100 * stat['mean']:.1f}±{100 * stat['std']:.1f}"
