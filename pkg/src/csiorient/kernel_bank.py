"""Fixed {-1, 2} kernel set and per-length dilation schedule."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError


@dataclass(frozen=True)
class KernelBankConfig:
    kernel_length: int = 9
    num_kernels: int = 84
    max_dilations_per_kernel: int = 32
    total_features: int = 9_996
    seed: int = 0

    def __post_init__(self):
        if self.kernel_length < 3 or self.kernel_length % 2 == 0:
            raise ConfigError(f"kernel_length must be odd and >= 3, got {self.kernel_length}")
        if self.num_kernels < 1:
            raise ConfigError(f"num_kernels must be >= 1, got {self.num_kernels}")
        if self.total_features % self.num_kernels != 0:
            raise ConfigError(
                f"total_features ({self.total_features}) must be a multiple of "
                f"num_kernels ({self.num_kernels})"
            )
        if self.total_features < self.num_kernels:
            raise ConfigError("total_features must be at least num_kernels")
        if self.max_dilations_per_kernel < 1:
            raise ConfigError("max_dilations_per_kernel must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    @property
    def features_per_kernel(self) -> int:
        return self.total_features // self.num_kernels


@dataclass(frozen=True)
class DilationPlan:
    """Dilations, padding flags and bias counts for one input length.

    Every kernel shares the same dilation list, so the plan stores it once;
    ``pairs()`` expands it in kernel-major order, which is also the order
    features are emitted in.
    """

    input_length: int
    num_kernels: int
    dilations: tuple[int, ...]
    num_biases: tuple[int, ...]

    def pairs(self):
        """Yield ``(pair_index, kernel_index, dilation, padded, num_biases)``."""
        n_dil = len(self.dilations)
        for k in range(self.num_kernels):
            for i, (d, j) in enumerate(zip(self.dilations, self.num_biases)):
                p = k * n_dil + i
                yield p, k, d, p % 2 == 0, j

    @property
    def num_pairs(self) -> int:
        return self.num_kernels * len(self.dilations)

    @property
    def num_features(self) -> int:
        return self.num_kernels * sum(self.num_biases)

    def padded(self, kernel_index: int, dilation_index: int) -> bool:
        return (kernel_index * len(self.dilations) + dilation_index) % 2 == 0


def generate_kernels(config: KernelBankConfig) -> np.ndarray:
    """Enumerate every placement of ``kernel_length // 3`` twos among -1s.

    Returns an int64 array of shape ``(num_kernels, kernel_length)`` in
    lexicographic order of the positions holding 2. The seed is not used.
    """
    n = config.kernel_length
    r = n // 3
    count = math.comb(n, r)
    if count != config.num_kernels:
        raise ConfigError(
            f"kernel_length {n} yields C({n},{r}) = {count} kernels, "
            f"but num_kernels = {config.num_kernels}"
        )
    kernels = np.full((count, n), -1, dtype=np.int64)
    for row, positions in enumerate(itertools.combinations(range(n), r)):
        kernels[row, list(positions)] = 2
    return kernels


def max_dilation_exponent(T: int, kernel_length: int) -> float:
    if T < kernel_length:
        raise DegenerateInputError(
            f"input length {T} is shorter than kernel length {kernel_length}"
        )
    return math.log2((T - 1) / (kernel_length - 1))


def build_dilation_plan(config: KernelBankConfig, T: int) -> DilationPlan:
    l_max = max_dilation_exponent(T, config.kernel_length)
    n_exp = config.max_dilations_per_kernel
    # largest dilation whose receptive field still fits in T
    cap = (T - 1) // (config.kernel_length - 1)
    raw = (min(math.floor(2 ** (i * l_max / n_exp)), cap) for i in range(n_exp + 1))
    dilations = sorted(set(raw))[:n_exp]

    per_kernel = config.features_per_kernel
    base, extra = divmod(per_kernel, len(dilations))
    num_biases = tuple(base + (1 if i < extra else 0) for i in range(len(dilations)))
    return DilationPlan(
        input_length=T,
        num_kernels=config.num_kernels,
        dilations=tuple(dilations),
        num_biases=num_biases,
    )
