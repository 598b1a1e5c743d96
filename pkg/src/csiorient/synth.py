"""Synthetic multi-AP CSI amplitudes with known activity/orientation structure.

The activity fixes the temporal shape of the amplitude modulation; the
orientation fixes, per access point, how strongly that modulation reaches the
receiver and the gain and delay of a secondary (multipath) copy of it.

Users scale the whole recording. Each performance draws one small time shift,
tempo change and amplitude change that every AP sees; each AP then adds its
own Gaussian noise. Amplitudes are clamped at zero and quantized to 1e-4.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataset import ACTIVITY_NAMES, ORIENTATION_NAMES, CsiDataset, CsiSample, save
from .errors import ConfigError

N_ACTIVITIES = len(ACTIVITY_NAMES)
N_ORIENTATIONS = len(ORIENTATION_NAMES)
QUANTUM_DECIMALS = 4

# modulation gain per orientation level; APs see these levels in different orders
_GAIN_LEVELS = np.array([0.6, 0.8, 1.05, 1.35])
_ECHO_LEVELS = np.array([0.1, 0.2, 0.3, 0.4])
_DELAY_LEVELS = np.array([0.04, 0.07, 0.10, 0.13])
_MOD_DEPTH = 0.15
_BASE_LEVEL = 10.0
_USER_SCALE = (0.9, 1.1)
_USER_TEMPO = (0.97, 1.03)
_SHIFT_FRACTION = 0.01
_AMP_JITTER = 0.05
_TEMPO_JITTER = 0.01
_AGC_PER_NOISE = 0.03


@dataclass(frozen=True)
class SynthConfig:
    S: int = 52
    T: int = 256
    A: int = 5
    users: int = 6
    samples_per_cell: int = 20
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("S", "A", "users", "samples_per_cell"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.T < 16:
            raise ConfigError(f"T must be >= 16, got {self.T}")
        if not self.noise_std >= 0:
            raise ConfigError(f"noise_std must be >= 0, got {self.noise_std}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    @classmethod
    def paper_shape(cls, **overrides) -> "SynthConfig":
        """20 samples x 4 activities x 4 orientations x 6 users, 5 APs."""
        return cls(**{**dict(users=6, samples_per_cell=20, A=5), **overrides})

    @property
    def samples_per_ap(self) -> int:
        return self.users * N_ACTIVITIES * N_ORIENTATIONS * self.samples_per_cell

    def to_dict(self) -> dict:
        return asdict(self)


def _unit_rms(f):
    t = np.linspace(0.0, 1.0, 4096, endpoint=False)
    rms = np.sqrt(np.mean(f(t) ** 2))
    return lambda x: f(x) / rms


_SIGNATURES = (
    # Circle: slow smooth periodic motion
    _unit_rms(lambda t: np.sin(2 * np.pi * 2 * t)),
    # Left-Right: sweeps that speed up
    _unit_rms(lambda t: np.sin(2 * np.pi * (3 * t + 2 * t**2))),
    # Push-Pull: abrupt back-and-forth
    _unit_rms(lambda t: np.tanh(3 * np.sin(2 * np.pi * 3 * t))),
    # Up-Down: short bursts of fast strokes
    _unit_rms(
        lambda t: sum(np.exp(-0.5 * ((t - c) / 0.06) ** 2) for c in (0.2, 0.5, 0.8))
        * np.sin(2 * np.pi * 6 * t)
    ),
)


def activity_signature(activity: int, t: np.ndarray) -> np.ndarray:
    """Modulation shape of an activity at normalized times ``t``; unit RMS on [0, 1)."""
    if not 0 <= activity < len(_SIGNATURES):
        raise ValueError(f"no signature for activity {activity}")
    return _SIGNATURES[activity](t)


def orientation_profile(ap_index: int, orientation: int):
    """(modulation gain, echo gain, echo delay as fraction of T) for one AP."""
    return (
        _GAIN_LEVELS[(orientation + ap_index) % 4],
        _ECHO_LEVELS[(3 * orientation + ap_index + 1) % 4],
        _DELAY_LEVELS[(orientation + 2 * ap_index + 2) % 4],
    )


def _subcarrier_base(ap_index: int, S: int) -> np.ndarray:
    s = np.arange(S) / S
    return _BASE_LEVEL * (1 + 0.3 * np.sin(2 * np.pi * s * (ap_index + 1) / 2 + ap_index))


def _subcarrier_attenuation(ap_index: int, orientation: int, S: int) -> np.ndarray:
    s = np.arange(S) / S
    return 1 + 0.5 * np.cos(2 * np.pi * s * (1 + ap_index % 3) + np.pi * orientation / 2)


def _render(cfg: SynthConfig, ap_index, activity, orientation, user_scale, tempo, shift, amp, noise_rng):
    t = (np.arange(cfg.T) / cfg.T - shift) * tempo
    gain, echo, delay = orientation_profile(ap_index, orientation)
    modulation = activity_signature(activity, t) + echo * activity_signature(activity, t - delay)
    profile = gain * _subcarrier_attenuation(ap_index, orientation, cfg.S)
    base = _subcarrier_base(ap_index, cfg.S)
    X = user_scale * base[:, None] * (1 + _MOD_DEPTH * amp * profile[:, None] * modulation[None, :])
    if cfg.noise_std > 0:
        # receiver gain jitter is common to all subcarriers, thermal noise is not
        agc = noise_rng.normal(0.0, _AGC_PER_NOISE * cfg.noise_std, size=cfg.T)
        X = X * (1 + agc[None, :]) + noise_rng.normal(0.0, cfg.noise_std, size=X.shape)
    X = np.maximum(X, 0.0)
    scale = 10.0**QUANTUM_DECIMALS
    return np.round(X * scale) / scale


def synth_generate(cfg: SynthConfig, out_dir=None) -> CsiDataset:
    """Generate a labeled dataset; write it to ``out_dir`` when given."""
    user_rng = np.random.default_rng([cfg.seed, 1])
    user_scales = user_rng.uniform(*_USER_SCALE, size=cfg.users)
    user_tempos = user_rng.uniform(*_USER_TEMPO, size=cfg.users)

    samples = []
    sample_id = 0
    for user in range(cfg.users):
        for activity in range(N_ACTIVITIES):
            for orientation in range(N_ORIENTATIONS):
                for _ in range(cfg.samples_per_cell):
                    perf = np.random.default_rng([cfg.seed, 2, sample_id])
                    shift = perf.uniform(-_SHIFT_FRACTION, _SHIFT_FRACTION)
                    amp = 1 + perf.uniform(-_AMP_JITTER, _AMP_JITTER)
                    tempo = user_tempos[user] * (1 + perf.uniform(-_TEMPO_JITTER, _TEMPO_JITTER))
                    for a in range(cfg.A):
                        noise_rng = np.random.default_rng([cfg.seed, 3, sample_id, a])
                        X = _render(
                            cfg, a, activity, orientation, user_scales[user], tempo, shift, amp,
                            noise_rng,
                        )
                        samples.append(
                            CsiSample(
                                ap_id=a + 1,
                                sample_id=sample_id,
                                amplitudes=X,
                                activity=activity,
                                orientation=orientation,
                                user_id=user,
                            )
                        )
                    sample_id += 1
    dataset = CsiDataset(S=cfg.S, T=cfg.T, ap_ids=tuple(range(1, cfg.A + 1)), samples=samples)
    if out_dir is not None:
        save(dataset, out_dir, decimals=QUANTUM_DECIMALS)
    return dataset
