"""Single-AP, concatenated multi-AP and voting multi-AP classifiers.

Every access point gets its own fitted kernel bank (biases fitted on that AP's
training recordings, seeded by ``(seed, ap_id)``). The topologies differ only
in how the per-AP features reach the two Ridge heads:

* ``sap``: one AP, features go straight to an activity head and an
  orientation head.
* ``cmap``: features of all APs are concatenated in ascending ``ap_id`` order
  and fed to one pair of heads.
* ``amap``: each AP has its own pair of heads; their hard predictions are
  combined by majority vote, separately per task.

With a single AP all three produce the same predictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ridge
from .dataset import ACTIVITY_NAMES, ORIENTATION_NAMES, CsiDataset, CsiSample
from .errors import AlignmentError, ConfigError, DataError, ShapeError
from .features import FittedBank, fit_bank, transform
from .kernel_bank import KernelBankConfig
from .ridge import RidgeModel

TOPOLOGIES = ("sap", "cmap", "amap")


@dataclass(frozen=True)
class TrainConfig:
    bank: KernelBankConfig = field(default_factory=KernelBankConfig)
    alphas: tuple[float, ...] = ridge.DEFAULT_ALPHAS
    folds: int = 5
    seed: int = 0


@dataclass(frozen=True, eq=False)
class FusionModel:
    topology: str
    ap_ids: tuple[int, ...]
    banks: tuple[FittedBank, ...]
    activity_heads: tuple[RidgeModel, ...]
    orientation_heads: tuple[RidgeModel, ...]
    activity_names: tuple[str, ...] = ACTIVITY_NAMES
    orientation_names: tuple[str, ...] = ORIENTATION_NAMES

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"unknown topology {self.topology!r}")
        if len(self.banks) != len(self.ap_ids):
            raise ConfigError("need exactly one fitted bank per AP")
        if self.topology == "sap" and len(self.ap_ids) != 1:
            raise ConfigError(f"sap uses exactly one AP, got {list(self.ap_ids)}")
        n_heads = len(self.ap_ids) if self.topology == "amap" else 1
        if len(self.activity_heads) != n_heads or len(self.orientation_heads) != n_heads:
            raise ConfigError(f"{self.topology} needs {n_heads} head(s) per task")

    @property
    def head_input_dim(self) -> int:
        return self.activity_heads[0].num_features


def bank_seed(seed: int, ap_id: int) -> list[int]:
    return [seed, ap_id]


def fit_ap_bank(samples: Sequence[CsiSample], ap_id: int, cfg: TrainConfig) -> FittedBank:
    X = np.stack([s.amplitudes for s in samples])
    return fit_bank(X, cfg.bank, seed=bank_seed(cfg.seed, ap_id))


def fit_heads(F, y_activity, y_orientation, cfg: TrainConfig) -> tuple[RidgeModel, RidgeModel]:
    kw = dict(alphas=cfg.alphas, folds=cfg.folds, seed=cfg.seed)
    return ridge.fit(F, y_activity, **kw), ridge.fit(F, y_orientation, **kw)


def _labels(rows: Sequence[Sequence[CsiSample]]):
    return (
        np.array([r[0].activity for r in rows]),
        np.array([r[0].orientation for r in rows]),
    )


def _check_aligned(rows: Sequence[Sequence[CsiSample]]) -> tuple[int, ...]:
    """Validate aligned rows and return the sorted AP ids they cover."""
    if len(rows) == 0:
        raise DataError("no training samples")
    ap_ids = tuple(sorted(s.ap_id for s in rows[0]))
    for n, row in enumerate(rows):
        ids = sorted(s.ap_id for s in row)
        if ids != list(ap_ids):
            missing = sorted(set(ap_ids) - set(ids))
            raise AlignmentError(
                f"sample {n}: expected one recording per AP {list(ap_ids)}, got {ids}"
                + (f" (missing AP {missing})" if missing else "")
            )
        if len({(s.activity, s.orientation) for s in row}) != 1:
            raise AlignmentError(f"sample {n}: recordings disagree on labels")
    return ap_ids


def _by_ap(rows, ap_ids):
    """Reorder each aligned row into ascending ap_id order."""
    return [tuple(next(s for s in row if s.ap_id == a) for a in ap_ids) for row in rows]


def train_sap(samples: Sequence[CsiSample], cfg: TrainConfig = TrainConfig(), **names) -> FusionModel:
    ids = {s.ap_id for s in samples}
    if len(ids) != 1:
        raise DataError(f"single-AP training needs samples from one AP, got APs {sorted(ids)}")
    return _train("sap", [(s,) for s in samples], cfg, **names)


def train_cmap(rows: Sequence[Sequence[CsiSample]], cfg: TrainConfig = TrainConfig(), **names) -> FusionModel:
    return _train("cmap", rows, cfg, **names)


def train_amap(rows: Sequence[Sequence[CsiSample]], cfg: TrainConfig = TrainConfig(), **names) -> FusionModel:
    return _train("amap", rows, cfg, **names)


def _train(topology, rows, cfg, activity_names=ACTIVITY_NAMES, orientation_names=ORIENTATION_NAMES):
    ap_ids = _check_aligned(rows)
    rows = _by_ap(rows, ap_ids)
    y_act, y_ori = _labels(rows)
    banks, feats = [], []
    for i, a in enumerate(ap_ids):
        column = [r[i] for r in rows]
        bank = fit_ap_bank(column, a, cfg)
        banks.append(bank)
        feats.append(transform(np.stack([s.amplitudes for s in column]), bank))
    if topology == "amap":
        heads = [fit_heads(F, y_act, y_ori, cfg) for F in feats]
    else:
        heads = [fit_heads(np.concatenate(feats, axis=1), y_act, y_ori, cfg)]
    return FusionModel(
        topology=topology,
        ap_ids=ap_ids,
        banks=tuple(banks),
        activity_heads=tuple(h[0] for h in heads),
        orientation_heads=tuple(h[1] for h in heads),
        activity_names=tuple(activity_names),
        orientation_names=tuple(orientation_names),
    )


def train(dataset: CsiDataset, topology: str, ap_ids=None, cfg: TrainConfig = TrainConfig()) -> FusionModel:
    """Train any topology from a dataset, using ``ap_ids`` (default: all)."""
    ap_ids = tuple(sorted(dataset.ap_ids if ap_ids is None else ap_ids))
    unknown = set(ap_ids) - set(dataset.ap_ids)
    if unknown:
        raise ConfigError(f"dataset has no AP {sorted(unknown)}")
    if topology == "sap" and len(ap_ids) != 1:
        raise ConfigError(f"sap needs exactly one AP, got {list(ap_ids)}")
    names = dict(activity_names=dataset.activity_names, orientation_names=dataset.orientation_names)
    rows = dataset.aligned(ap_ids)
    if topology == "sap":
        return train_sap([r[0] for r in rows], cfg, **names)
    if topology == "cmap":
        return train_cmap(rows, cfg, **names)
    if topology == "amap":
        return train_amap(rows, cfg, **names)
    raise ConfigError(f"unknown topology {topology!r}")


def vote(predictions, class_order):
    """Majority vote over hard predictions; ties go to the earliest class."""
    class_order = list(class_order)
    index = {c: i for i, c in enumerate(class_order)}
    counts = np.zeros(len(class_order), dtype=np.int64)
    if len(predictions) == 0:
        raise DataError("vote needs at least one prediction")
    for p in predictions:
        try:
            counts[index[p]] += 1
        except KeyError:
            raise DataError(f"prediction {p!r} is not one of {class_order}") from None
    return class_order[int(np.argmax(counts))]


def features_by_ap(model: FusionModel, rows: Sequence[Sequence[CsiSample]]) -> list[np.ndarray]:
    """Per-AP feature matrices for aligned rows, in ``model.ap_ids`` order."""
    for n, row in enumerate(rows):
        ids = sorted(s.ap_id for s in row)
        if len(row) != len(model.ap_ids) or ids != list(model.ap_ids):
            missing = sorted(set(model.ap_ids) - set(ids))
            raise ShapeError(
                f"sample {n}: model expects APs {list(model.ap_ids)}, got {ids}"
                + (f"; missing AP {missing}" if missing else "")
            )
    rows = _by_ap(rows, model.ap_ids)
    return [
        transform(np.stack([r[i].amplitudes for r in rows]), bank)
        for i, bank in enumerate(model.banks)
    ]


def predict_features(model: FusionModel, feats: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Batch prediction from per-AP feature matrices (``model.ap_ids`` order)."""
    if len(feats) != len(model.ap_ids):
        raise ShapeError(f"expected features from {len(model.ap_ids)} AP(s), got {len(feats)}")
    if model.topology != "amap":
        F = np.concatenate(feats, axis=1)
        return (
            ridge.predict(model.activity_heads[0], F),
            ridge.predict(model.orientation_heads[0], F),
        )
    act = np.stack([ridge.predict(h, F) for h, F in zip(model.activity_heads, feats)])
    ori = np.stack([ridge.predict(h, F) for h, F in zip(model.orientation_heads, feats)])
    act_order = model.activity_heads[0].class_labels
    ori_order = model.orientation_heads[0].class_labels
    return (
        np.array([vote(col, act_order) for col in act.T]),
        np.array([vote(col, ori_order) for col in ori.T]),
    )


def predict_batch(model: FusionModel, rows: Sequence[Sequence[CsiSample]]):
    return predict_features(model, features_by_ap(model, rows))


def predict(model: FusionModel, samples) -> tuple[int, int]:
    """(activity id, orientation id) for one sample or one aligned AP tuple."""
    row = (samples,) if isinstance(samples, CsiSample) else tuple(samples)
    act, ori = predict_batch(model, [row])
    return int(act[0]), int(ori[0])
