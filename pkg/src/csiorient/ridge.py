"""One-vs-rest Ridge classifier with cross-validated regularization.

Features are standardized with training statistics, labels become +1/-1
target columns, and each column is solved as a regularized least-squares
problem. When there are more features than samples the solve goes through
the ``N x N`` Gram matrix, otherwise through the ``D x D`` normal equations;
both give the same minimizer. Large feature matrices are processed in column
blocks so a standardized copy of the whole matrix is never held in memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DataError, FitError, ShapeError

DEFAULT_ALPHAS = (0.001, 0.01, 0.1, 1.0)
_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class RidgeModel:
    class_labels: tuple
    weights: np.ndarray  # (C, D') in standardized feature space
    intercepts: np.ndarray  # (C,)
    feature_means: np.ndarray
    feature_scales: np.ndarray
    alpha: float
    cv_accuracy: dict = field(default_factory=dict)

    @property
    def num_features(self) -> int:
        return self.weights.shape[1]


def solve_ridge(F, Y, alpha: float, form: str = "auto") -> np.ndarray:
    """Minimize ``||F W - Y||^2 + alpha ||W||^2`` by Cholesky factorization.

    ``form`` is ``"primal"`` (factor ``F^T F + alpha I``), ``"dual"`` (factor
    ``F F^T + alpha I``) or ``"auto"``, which picks the smaller system.
    """
    F = np.asarray(F, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n, dim = F.shape
    if form == "auto":
        form = "dual" if dim > n else "primal"
    if form == "primal":
        G = F.T @ F
        G[np.diag_indices_from(G)] += alpha
        return cho_solve(cho_factor(G), F.T @ Y)
    if form == "dual":
        K = F @ F.T
        K[np.diag_indices_from(K)] += alpha
        return F.T @ cho_solve(cho_factor(K), Y)
    raise ValueError(f"unknown form {form!r}")


def standardization_stats(F: np.ndarray, rows=None) -> tuple[np.ndarray, np.ndarray]:
    """Column means and population std over ``rows``; flat columns get scale 1."""
    rows = np.arange(F.shape[0]) if rows is None else rows
    means = np.empty(F.shape[1])
    scales = np.empty(F.shape[1])
    for c0 in range(0, F.shape[1], _BLOCK):
        block = F[rows, c0:c0 + _BLOCK]
        means[c0:c0 + _BLOCK] = block.mean(axis=0)
        scales[c0:c0 + _BLOCK] = block.std(axis=0)
    flat = scales <= 1e-12 * np.maximum(1.0, np.abs(means))
    scales[flat] = 1.0
    return means, scales


def one_vs_rest_targets(y: np.ndarray, classes: np.ndarray) -> np.ndarray:
    return np.where(y[:, None] == classes[None, :], 1.0, -1.0)


def stratified_folds(y, n_folds: int, seed: int) -> np.ndarray:
    """Fold id per sample; each class is shuffled and dealt round-robin."""
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.shape[0], dtype=np.int64)
    start = 0
    for label in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == label))
        fold_of[idx] = (start + np.arange(idx.shape[0])) % n_folds
        start = (start + idx.shape[0]) % n_folds
    return fold_of


class _StandardizedBlocks:
    """Column blocks of ``(F[rows] - mean) / scale`` with stats from ``rows``."""

    def __init__(self, F, rows, means, scales):
        self.F = F
        self.rows = rows
        self.means = means
        self.scales = scales

    def __iter__(self):
        for c0 in range(0, self.F.shape[1], _BLOCK):
            sl = slice(c0, c0 + _BLOCK)
            yield sl, (self.F[self.rows, sl] - self.means[sl]) / self.scales[sl]

    def block(self, other_rows, sl):
        return (self.F[other_rows, sl] - self.means[sl]) / self.scales[sl]


def _fit_rows(F, rows, Y, alphas, eval_rows=None):
    """Fit on ``rows`` for every alpha.

    Returns ``(means, scales, intercepts, [W per alpha])`` and, when
    ``eval_rows`` is given, the decision scores on those rows per alpha.
    """
    means, scales = standardization_stats(F, rows)
    Y = Y[rows]
    y_mean = Y.mean(axis=0)
    Yc = Y - y_mean
    n, dim = len(rows), F.shape[1]
    blocks = _StandardizedBlocks(F, rows, means, scales)

    weights, val_scores = [], []
    if dim > n:
        K = np.zeros((n, n))
        Kv = None if eval_rows is None else np.zeros((len(eval_rows), n))
        for sl, Z in blocks:
            K += Z @ Z.T
            if Kv is not None:
                Kv += blocks.block(eval_rows, sl) @ Z.T
        duals = []
        for alpha in alphas:
            Ka = K.copy()
            Ka[np.diag_indices_from(Ka)] += alpha
            A = cho_solve(cho_factor(Ka), Yc)
            duals.append(A)
            if Kv is not None:
                val_scores.append(Kv @ A + y_mean)
        if eval_rows is None:
            for A in duals:
                W = np.empty((dim, Y.shape[1]))
                for sl, Z in blocks:
                    W[sl] = Z.T @ A
                weights.append(W)
    else:
        Z = np.concatenate([Zb for _, Zb in blocks], axis=1)
        G = Z.T @ Z
        rhs = Z.T @ Yc
        Zv = None if eval_rows is None else (F[eval_rows] - means) / scales
        for alpha in alphas:
            Ga = G.copy()
            Ga[np.diag_indices_from(Ga)] += alpha
            W = cho_solve(cho_factor(Ga), rhs)
            weights.append(W)
            if Zv is not None:
                val_scores.append(Zv @ W + y_mean)
    return means, scales, y_mean, weights, val_scores


def _validate(F, y, n_folds):
    if F.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {F.shape}")
    if y.shape[0] != F.shape[0]:
        raise ShapeError(f"{F.shape[0]} feature rows but {y.shape[0]} labels")
    if not np.all(np.isfinite(F)):
        raise DataError("feature matrix contains non-finite values")
    classes, counts = np.unique(y, return_counts=True)
    if classes.shape[0] < 2:
        raise FitError("need at least two distinct labels to fit a classifier")
    if n_folds < 2:
        raise FitError(f"need at least 2 cross-validation folds, got {n_folds}")
    if F.shape[0] < n_folds or counts.min() < n_folds:
        raise FitError(
            f"every class needs at least {n_folds} samples for {n_folds}-fold "
            f"cross-validation; smallest class has {counts.min()}"
        )
    return classes


def fit(F, y, alphas=DEFAULT_ALPHAS, folds: int = 5, seed: int = 0) -> RidgeModel:
    """Fit a one-vs-rest Ridge classifier, choosing alpha by stratified k-fold CV.

    The alpha with the best mean validation accuracy wins; ties go to the
    largest alpha. The winner is refit on all rows.
    """
    F = np.asarray(F, dtype=np.float64)
    y = np.asarray(y)
    classes = _validate(F, y, folds)
    alphas = tuple(float(a) for a in alphas)
    if not alphas:
        raise FitError("alpha grid is empty")
    Y = one_vs_rest_targets(y, classes)

    fold_of = stratified_folds(y, folds, seed)
    acc = np.zeros(len(alphas))
    for f in range(folds):
        tr = np.flatnonzero(fold_of != f)
        va = np.flatnonzero(fold_of == f)
        *_, scores = _fit_rows(F, tr, Y, alphas, eval_rows=va)
        for i, s in enumerate(scores):
            acc[i] += np.mean(classes[np.argmax(s, axis=1)] == y[va]) / folds

    order = sorted(range(len(alphas)), key=lambda i: (acc[i], alphas[i]))
    best = order[-1]
    means, scales, y_mean, weights, _ = _fit_rows(
        F, np.arange(F.shape[0]), Y, (alphas[best],)
    )
    return RidgeModel(
        class_labels=tuple(classes.tolist()),
        weights=np.ascontiguousarray(weights[0].T),
        intercepts=y_mean,
        feature_means=means,
        feature_scales=scales,
        alpha=alphas[best],
        cv_accuracy={a: float(s) for a, s in zip(alphas, acc)},
    )


def decision_scores(model: RidgeModel, F) -> np.ndarray:
    """Per-class scores; a 1-D input gives a 1-D result."""
    F = np.asarray(F, dtype=np.float64)
    single = F.ndim == 1
    F2 = F[None] if single else F
    if F2.ndim != 2 or F2.shape[1] != model.num_features:
        raise ShapeError(
            f"expected feature length {model.num_features}, got shape {F.shape}"
        )
    scores = ((F2 - model.feature_means) / model.feature_scales) @ model.weights.T
    scores += model.intercepts
    return scores[0] if single else scores


def predict(model: RidgeModel, F):
    """Argmax class; ties go to the earliest class in ``class_labels``."""
    scores = decision_scores(model, F)
    labels = np.asarray(model.class_labels)
    idx = np.argmax(scores, axis=-1)
    return labels[idx] if scores.ndim == 2 else labels[idx].item()
