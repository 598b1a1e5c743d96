"""Dilated convolution, channel summation and PPV pooling.

A sample is an ``S x T`` matrix of non-negative CSI amplitudes. For every
(kernel, dilation) pair of the plan the subcarrier rows are convolved and
summed, a small set of bias values is subtracted, and each biased series is
pooled to the fraction of its entries that are strictly positive.

Because the kernels are linear, summing the subcarriers first and convolving
once gives the same series as convolving each subcarrier and summing; the
batch transform relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import FitError, ShapeError
from .kernel_bank import DilationPlan, KernelBankConfig, build_dilation_plan, generate_kernels

GOLDEN_RATIO = (np.sqrt(5.0) + 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class FittedBank:
    config: KernelBankConfig
    plan: DilationPlan
    kernels: np.ndarray
    biases: np.ndarray  # length D, laid out in feature order
    subcarrier_count: int

    def __post_init__(self):
        self.kernels.setflags(write=False)
        self.biases.setflags(write=False)

    @property
    def input_length(self) -> int:
        return self.plan.input_length

    @property
    def num_features(self) -> int:
        return self.biases.shape[0]

    def pair_offsets(self) -> np.ndarray:
        """Start index in the feature vector of each (kernel, dilation) pair."""
        counts = np.tile(np.asarray(self.plan.num_biases), self.plan.num_kernels)
        return np.concatenate([[0], np.cumsum(counts)[:-1]])

    def pair_biases(self, pair_index: int) -> np.ndarray:
        n_dil = len(self.plan.dilations)
        j = self.plan.num_biases[pair_index % n_dil]
        start = self.pair_offsets()[pair_index]
        return self.biases[start:start + j]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    ap_id: int = 0

    def __len__(self):
        return self.values.shape[0]


def _as_kernel(w) -> np.ndarray:
    w = np.asarray(w)
    if w.ndim != 1 or w.shape[0] < 3 or w.shape[0] % 2 == 0:
        raise ShapeError(f"kernel must be 1-D with odd length >= 3, got shape {w.shape}")
    return w


def pad_width(kernel_length: int, dilation: int) -> int:
    return (kernel_length - 1) * dilation // 2


def convolve_dilated(x, w, d: int, padded: bool) -> np.ndarray:
    """Dilated sliding dot product along the last axis.

    ``out[t] = sum_m w[m] * x[t + m*d]``. Padded outputs keep length T by
    repeating the edge values; unpadded outputs have length
    ``T - (len(w) - 1) * d``.

    Each series is shifted by its first value before the dot product. The
    kernels sum to zero, so this leaves the result unchanged mathematically
    and makes a constant input give exactly 0.0.
    """
    w = _as_kernel(w)
    x = np.asarray(x, dtype=np.float64)
    if d < 1:
        raise ShapeError(f"dilation must be >= 1, got {d}")
    n = w.shape[0]
    T = x.shape[-1]
    x = x - x[..., :1]
    if padded:
        p = pad_width(n, d)
        x = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(p, p)], mode="edge")
    elif (n - 1) * d > T - 1:
        raise ShapeError(
            f"receptive field {(n - 1) * d + 1} exceeds input length {T}"
        )
    out_len = x.shape[-1] - (n - 1) * d
    out = np.zeros(x.shape[:-1] + (out_len,))
    for m in range(n):
        out += w[m] * x[..., m * d:m * d + out_len]
    return out


def channel_sum(X, w, d: int, padded: bool) -> np.ndarray:
    """Sum over subcarriers of the per-subcarrier dilated convolutions."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ShapeError(f"expected an S x T sample with S >= 1, got shape {X.shape}")
    return convolve_dilated(X.sum(axis=0), w, d, padded)


def quantile_levels(n: int) -> np.ndarray:
    return np.modf(np.arange(1, n + 1) * GOLDEN_RATIO)[0]


def _stack(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        X = samples
    else:
        X = np.stack([getattr(s, "amplitudes", s) for s in samples])
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3:
        raise ShapeError(f"expected samples of shape (N, S, T), got {X.shape}")
    return X


def fit_biases(
    train,
    bank_cfg: KernelBankConfig,
    plan: DilationPlan | None = None,
    kernels: np.ndarray | None = None,
    seed: int | None = None,
) -> FittedBank:
    """Fit per-pair bias values from quantiles of training convolution outputs.

    Each (kernel, dilation) pair draws one training sample; its channel-summed
    output is evaluated at the golden-ratio quantile levels and the resulting
    biases are sorted ascending.
    """
    if len(train) == 0:
        raise FitError("cannot fit biases on an empty training set")
    X = _stack(train)
    N, S, T = X.shape
    if plan is None:
        plan = build_dilation_plan(bank_cfg, T)
    if plan.input_length != T:
        raise ShapeError(f"plan is for length {plan.input_length}, samples have {T}")
    if kernels is None:
        kernels = generate_kernels(bank_cfg)
    seed = bank_cfg.seed if seed is None else seed

    rng = np.random.default_rng(seed)
    picks = rng.integers(0, N, size=plan.num_pairs)
    summed = X.sum(axis=1)
    biases = []
    for p, k, d, padded, j in plan.pairs():
        if j == 0:
            continue
        out = convolve_dilated(summed[picks[p]], kernels[k], d, padded)
        biases.append(np.sort(np.quantile(out, quantile_levels(j))))
    return FittedBank(
        config=bank_cfg,
        plan=plan,
        kernels=np.array(kernels, dtype=np.int64),
        biases=np.concatenate(biases) if biases else np.zeros(0),
        subcarrier_count=S,
    )


def fit_bank(train, bank_cfg: KernelBankConfig, seed: int | None = None) -> FittedBank:
    """Generate kernels, plan dilations for the training length and fit biases."""
    X = _stack(train)
    plan = build_dilation_plan(bank_cfg, X.shape[-1])
    return fit_biases(X, bank_cfg, plan, generate_kernels(bank_cfg), seed)


def transform(samples, bank: FittedBank) -> np.ndarray:
    """PPV features for a batch, shape ``(N, D)`` in plan order."""
    X = _stack(samples)
    if X.shape[1:] != (bank.subcarrier_count, bank.input_length):
        raise ShapeError(
            f"samples have shape {X.shape[1:]}, bank expects "
            f"({bank.subcarrier_count}, {bank.input_length})"
        )
    summed = X.sum(axis=1)
    plan = bank.plan
    twos = np.stack([np.flatnonzero(row == 2) for row in bank.kernels]).astype(np.int64)
    out = np.empty((X.shape[0], bank.num_features))
    _ppv_kernel(
        np.ascontiguousarray(summed - summed[:, :1]),
        np.asarray(plan.dilations, dtype=np.int64),
        np.asarray(plan.num_biases, dtype=np.int64),
        twos,
        np.ascontiguousarray(bank.biases, dtype=np.float64),
        bank.pair_offsets().astype(np.int64),
        bank.kernels.shape[1],
        out,
    )
    return out


@njit(cache=True, nogil=True)
def _ppv_kernel(x, dilations, num_biases, twos, biases, offsets, kernel_length, out):
    # x: channel-summed series shifted by their first value, shape (N, T)
    n_samples, T = x.shape
    n_dil = dilations.shape[0]
    n_kernels = twos.shape[0]
    max_pad = (kernel_length - 1) * dilations[-1] // 2
    xp = np.empty(T + 2 * max_pad)
    total_pad = np.empty(T)
    total_raw = np.empty(T)
    conv = np.empty(T)
    for s in range(n_samples):
        row = x[s]
        for i in range(n_dil):
            d = dilations[i]
            j_count = num_biases[i]
            if j_count == 0:
                continue
            p = (kernel_length - 1) * d // 2
            for t in range(p):
                xp[t] = row[0]
                xp[p + T + t] = row[T - 1]
            xp[p:p + T] = row
            len_raw = T - (kernel_length - 1) * d
            for t in range(T):
                acc = xp[t]
                for m in range(1, kernel_length):
                    acc += xp[t + m * d]
                total_pad[t] = acc
            for t in range(len_raw):
                acc = row[t]
                for m in range(1, kernel_length):
                    acc += row[t + m * d]
                total_raw[t] = acc
            for k in range(n_kernels):
                pair = k * n_dil + i
                padded = pair % 2 == 0
                off = offsets[pair]
                if padded:
                    src, total, out_len = xp, total_pad, T
                else:
                    src, total, out_len = row, total_raw, len_raw
                # weights in {-1, 2}: sum w*x = 3 * (sum over the 2s) - sum over all
                conv[:out_len] = 0.0
                for r in range(twos.shape[1]):
                    shift = twos[k, r] * d
                    for t in range(out_len):
                        conv[t] += src[t + shift]
                for t in range(out_len):
                    conv[t] = 3.0 * conv[t] - total[t]
                for j in range(j_count):
                    bias = biases[off + j]
                    n_pos = 0
                    for t in range(out_len):
                        n_pos += conv[t] > bias
                    out[s, off + j] = n_pos / out_len


def extract(sample, bank: FittedBank) -> FeatureVector:
    X = np.asarray(getattr(sample, "amplitudes", sample), dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected an S x T sample, got shape {X.shape}")
    values = transform(X[None], bank)[0]
    return FeatureVector(values=values, ap_id=getattr(sample, "ap_id", 0))
