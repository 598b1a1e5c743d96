from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from .errors import ConfigError
from .fusion import TOPOLOGIES, TrainConfig
from .kernel_bank import KernelBankConfig
from .ridge import DEFAULT_ALPHAS


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a train or eval invocation."""

    topology: str = "cmap"
    ap_ids: tuple[int, ...] | None = None
    data_dir: str = ""
    seed: int = 0
    runs: int = 10
    train_fraction: float = 0.8
    by_user: bool = False
    kernel_length: int = 9
    num_kernels: int = 84
    max_dilations_per_kernel: int = 32
    total_features: int = 9_996
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    folds: int = 5
    output: str | None = None

    def __post_init__(self):
        for topo in self.topologies:
            if topo not in TOPOLOGIES:
                raise ConfigError(f"unknown topology {topo!r}; choose from {', '.join(TOPOLOGIES)}")
        if self.runs < 1:
            raise ConfigError(f"runs must be >= 1, got {self.runs}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if not self.alphas or any(a <= 0 for a in self.alphas):
            raise ConfigError("alphas must be a non-empty list of positive values")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        self.bank_config()  # validates the kernel-bank overrides

    @property
    def topologies(self) -> tuple[str, ...]:
        return tuple(t.strip() for t in self.topology.split(",") if t.strip())

    def bank_config(self, seed: int | None = None) -> KernelBankConfig:
        return KernelBankConfig(
            kernel_length=self.kernel_length,
            num_kernels=self.num_kernels,
            max_dilations_per_kernel=self.max_dilations_per_kernel,
            total_features=self.total_features,
            seed=self.seed if seed is None else seed,
        )

    def run_seed(self, run: int) -> int:
        return self.seed + run

    def train_config(self, run: int = 0) -> TrainConfig:
        seed = self.run_seed(run)
        return TrainConfig(
            bank=self.bank_config(seed), alphas=tuple(self.alphas), folds=self.folds, seed=seed
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ap_ids"] = None if self.ap_ids is None else list(self.ap_ids)
        d["alphas"] = list(self.alphas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run-config fields {sorted(unknown)}")
        d = dict(d)
        if d.get("ap_ids") is not None:
            d["ap_ids"] = tuple(int(a) for a in d["ap_ids"])
        if "alphas" in d:
            d["alphas"] = tuple(float(a) for a in d["alphas"])
        return cls(**d)
