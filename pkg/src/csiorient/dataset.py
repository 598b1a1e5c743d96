"""CSI samples, the on-disk dataset layout, stratified splits and a generator.

Layout of a dataset directory::

    manifest.json
    ap1/00000.txt   # S lines of T whitespace-separated amplitudes
    ap1/00001.txt
    ap2/00000.txt
    ...

The manifest records the shape, the access points, the label names and one
record per logical sample with the file of every access point.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import AlignmentError, ConfigError, DataError, DatasetIOError, FormatError, SplitError

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
ACTIVITY_NAMES = ("Circle", "Left-Right", "Push-Pull", "Up-Down")
ORIENTATION_NAMES = ("0°", "45°", "90°", "180°")


@dataclass(frozen=True, eq=False)
class CsiSample:
    ap_id: int
    sample_id: int
    amplitudes: np.ndarray
    activity: int
    orientation: int
    user_id: int | None = None

    @property
    def shape(self):
        return self.amplitudes.shape


@dataclass(eq=False)
class CsiDataset:
    S: int
    T: int
    ap_ids: tuple[int, ...]
    samples: list[CsiSample]
    activity_names: tuple[str, ...] = ACTIVITY_NAMES
    orientation_names: tuple[str, ...] = ORIENTATION_NAMES
    _by_key: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.ap_ids = tuple(sorted(self.ap_ids))
        self._by_key = {(s.sample_id, s.ap_id): s for s in self.samples}

    def __len__(self):
        return len(self.sample_ids)

    @property
    def sample_ids(self) -> list[int]:
        return sorted({s.sample_id for s in self.samples})

    def get(self, sample_id: int, ap_id: int) -> CsiSample:
        try:
            return self._by_key[(sample_id, ap_id)]
        except KeyError:
            raise AlignmentError(f"sample {sample_id} has no recording from AP {ap_id}") from None

    def for_ap(self, ap_id: int) -> list[CsiSample]:
        return [self.get(i, ap_id) for i in self.sample_ids]

    def aligned(self, ap_ids: Iterable[int] | None = None) -> list[tuple[CsiSample, ...]]:
        """One tuple per logical sample, ordered by ascending ap_id."""
        ap_ids = sorted(self.ap_ids if ap_ids is None else ap_ids)
        return [tuple(self.get(i, a) for a in ap_ids) for i in self.sample_ids]

    def labels(self) -> tuple[np.ndarray, np.ndarray]:
        first = [self.get(i, self._any_ap(i)) for i in self.sample_ids]
        return (
            np.array([s.activity for s in first]),
            np.array([s.orientation for s in first]),
        )

    def _any_ap(self, sample_id):
        for a in self.ap_ids:
            if (sample_id, a) in self._by_key:
                return a
        raise AlignmentError(f"unknown sample {sample_id}")

    def subset(self, sample_ids: Iterable[int]) -> "CsiDataset":
        keep = set(sample_ids)
        return CsiDataset(
            S=self.S,
            T=self.T,
            ap_ids=self.ap_ids,
            samples=[s for s in self.samples if s.sample_id in keep],
            activity_names=self.activity_names,
            orientation_names=self.orientation_names,
        )


def _check_amplitudes(X: np.ndarray, where: str):
    if not np.all(np.isfinite(X)):
        raise DataError(f"{where}: non-finite amplitude")
    if np.any(X < 0):
        raise DataError(f"{where}: negative amplitude {X.min()}")


def read_sample_file(path, S: int | None = None, T: int | None = None) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DatasetIOError(f"missing sample file {path}")
    try:
        X = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise FormatError(f"{path}: cannot parse amplitudes ({exc})") from exc
    if S is not None and X.shape[0] != S:
        raise FormatError(f"{path}: expected S={S} rows, found {X.shape[0]}")
    if T is not None and X.shape[1] != T:
        raise FormatError(f"{path}: expected T={T} values per row, found {X.shape[1]}")
    _check_amplitudes(X, str(path))
    return X


def write_sample_file(path, X: np.ndarray, decimals: int | None = None):
    """Write one amplitude matrix as text.

    Without ``decimals`` every value gets 17 significant digits, which always
    reads back bit-exactly. ``decimals`` is only exact when the values were
    produced as ``integer / 10**decimals``.
    """
    fmt = "%.17g" if decimals is None else f"%.{decimals}f"
    np.savetxt(path, X, fmt=fmt, delimiter=" ")


def load(manifest_path) -> CsiDataset:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise DatasetIOError(f"missing manifest {manifest_path}")
    try:
        meta = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid manifest ({exc})") from exc
    if meta.get("version", 0) > MANIFEST_VERSION:
        raise FormatError(f"manifest version {meta.get('version')} is newer than {MANIFEST_VERSION}")
    try:
        S, T = int(meta["S"]), int(meta["T"])
        ap_ids = tuple(int(a) for a in meta["ap_ids"])
        activity_names = tuple(meta.get("activity_names", ACTIVITY_NAMES))
        orientation_names = tuple(meta.get("orientation_names", ORIENTATION_NAMES))
        records = meta["samples"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{manifest_path}: malformed manifest ({exc})") from exc

    root = manifest_path.parent
    samples = []
    for rec in records:
        sid = int(rec["sample_id"])
        activity, orientation = int(rec["activity"]), int(rec["orientation"])
        if not 0 <= activity < len(activity_names):
            raise DataError(f"sample {sid}: activity id {activity} out of range")
        if not 0 <= orientation < len(orientation_names):
            raise DataError(f"sample {sid}: orientation id {orientation} out of range")
        files = {int(a): f for a, f in rec["files"].items()}
        if sorted(files) != sorted(ap_ids):
            raise FormatError(
                f"sample {sid}: files for APs {sorted(files)}, manifest declares {sorted(ap_ids)}"
            )
        for a in ap_ids:
            X = read_sample_file(root / files[a], S, T)
            samples.append(
                CsiSample(
                    ap_id=a,
                    sample_id=sid,
                    amplitudes=X,
                    activity=activity,
                    orientation=orientation,
                    user_id=rec.get("user_id"),
                )
            )
    return CsiDataset(
        S=S,
        T=T,
        ap_ids=ap_ids,
        samples=samples,
        activity_names=activity_names,
        orientation_names=orientation_names,
    )


def sample_path(ap_id: int, sample_id: int) -> str:
    return f"ap{ap_id}/{sample_id:05d}.txt"


def save(dataset: CsiDataset, out_dir, decimals: int | None = None) -> Path:
    """Write ``dataset`` in the directory layout read by :func:`load`."""
    out_dir = Path(out_dir)
    for a in dataset.ap_ids:
        (out_dir / f"ap{a}").mkdir(parents=True, exist_ok=True)
    records = []
    for sid in dataset.sample_ids:
        first = None
        files = {}
        for a in dataset.ap_ids:
            s = dataset.get(sid, a)
            first = first or s
            rel = sample_path(a, sid)
            write_sample_file(out_dir / rel, s.amplitudes, decimals)
            files[str(a)] = rel
        records.append(
            {
                "sample_id": sid,
                "activity": first.activity,
                "orientation": first.orientation,
                "user_id": first.user_id,
                "files": files,
            }
        )
    meta = {
        "version": MANIFEST_VERSION,
        "S": dataset.S,
        "T": dataset.T,
        "ap_ids": list(dataset.ap_ids),
        "activity_names": list(dataset.activity_names),
        "orientation_names": list(dataset.orientation_names),
        "samples": records,
    }
    tmp = out_dir / (MANIFEST_NAME + ".tmp")
    tmp.write_text(json.dumps(meta, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    os.replace(tmp, out_dir / MANIFEST_NAME)
    return out_dir / MANIFEST_NAME


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    by_user: bool = False

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")


def split(dataset: CsiDataset, spec: SplitSpec = SplitSpec()) -> tuple[CsiDataset, CsiDataset]:
    """Partition by sample id, stratified on the (activity, orientation) cell.

    With ``by_user`` whole users are held out instead and cells are not
    balanced.
    """
    ids = dataset.sample_ids
    rng = np.random.default_rng(spec.seed)
    first = {i: dataset.get(i, dataset._any_ap(i)) for i in ids}

    if spec.by_user:
        users = sorted({first[i].user_id for i in ids}, key=lambda u: (u is None, u))
        if len(users) < 2:
            raise SplitError("a by-user split needs at least two users")
        order = [users[k] for k in rng.permutation(len(users))]
        n_train = min(max(math.floor(spec.train_fraction * len(users) + 0.5), 1), len(users) - 1)
        train_users = set(order[:n_train])
        train = [i for i in ids if first[i].user_id in train_users]
        test = [i for i in ids if first[i].user_id not in train_users]
        return dataset.subset(train), dataset.subset(test)

    cells: dict[tuple[int, int], list[int]] = {}
    for i in ids:
        cells.setdefault((first[i].activity, first[i].orientation), []).append(i)
    n_act, n_ori = len(dataset.activity_names), len(dataset.orientation_names)
    train, test = [], []
    for cell in ((a, o) for a in range(n_act) for o in range(n_ori)):
        members = cells.get(cell, [])
        if len(members) < 2:
            raise SplitError(
                f"cell (activity={cell[0]}, orientation={cell[1]}) has {len(members)} "
                "samples; stratified splitting needs at least 2"
            )
        perm = [members[k] for k in rng.permutation(len(members))]
        n_train = math.floor(spec.train_fraction * len(members) + 0.5)
        n_train = min(max(n_train, 1), len(members) - 1)
        train += perm[:n_train]
        test += perm[n_train:]
    return dataset.subset(train), dataset.subset(test)
