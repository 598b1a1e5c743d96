"""Versioned, checksummed model archives.

File layout::

    CSIORIENT-MODEL\\n
    {"format_version": "1.0", "sha256": ..., "meta_bytes": M, "data_bytes": N}\\n
    <M bytes of UTF-8 JSON metadata><N bytes of raw little-endian arrays>

The checksum covers metadata and array bytes. Arrays are stored raw, so
loading restores every float bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import ArchiveError, ChecksumError, VersionError
from .features import FittedBank
from .fusion import FusionModel
from .kernel_bank import DilationPlan, KernelBankConfig
from .ridge import RidgeModel

MAGIC = b"CSIORIENT-MODEL\n"
FORMAT_VERSION = (1, 0)


@dataclass(frozen=True, eq=False)
class ModelArchive:
    model: FusionModel
    run_config: RunConfig
    format_version: tuple[int, int] = FORMAT_VERSION


class _Packer:
    def __init__(self):
        self.index = {}
        self.chunks = []
        self.offset = 0

    def add(self, name: str, arr: np.ndarray) -> str:
        arr = np.ascontiguousarray(arr)
        dtype = arr.dtype.newbyteorder("<")
        raw = arr.astype(dtype, copy=False).tobytes()
        self.index[name] = {
            "dtype": dtype.str,
            "shape": list(arr.shape),
            "offset": self.offset,
            "nbytes": len(raw),
        }
        self.chunks.append(raw)
        self.offset += len(raw)
        return name


def _bank_meta(bank: FittedBank, i: int, packer: _Packer) -> dict:
    return {
        "config": {
            "kernel_length": bank.config.kernel_length,
            "num_kernels": bank.config.num_kernels,
            "max_dilations_per_kernel": bank.config.max_dilations_per_kernel,
            "total_features": bank.config.total_features,
            "seed": bank.config.seed,
        },
        "plan": {
            "input_length": bank.plan.input_length,
            "num_kernels": bank.plan.num_kernels,
            "dilations": list(bank.plan.dilations),
            "num_biases": list(bank.plan.num_biases),
        },
        "subcarrier_count": bank.subcarrier_count,
        "kernels": packer.add(f"bank{i}.kernels", bank.kernels),
        "biases": packer.add(f"bank{i}.biases", bank.biases),
    }


def _head_meta(head: RidgeModel, name: str, packer: _Packer) -> dict:
    return {
        "class_labels": list(head.class_labels),
        "alpha": head.alpha,
        "cv_accuracy": [[a, s] for a, s in head.cv_accuracy.items()],
        "weights": packer.add(f"{name}.weights", head.weights),
        "intercepts": packer.add(f"{name}.intercepts", head.intercepts),
        "feature_means": packer.add(f"{name}.means", head.feature_means),
        "feature_scales": packer.add(f"{name}.scales", head.feature_scales),
    }


def to_bytes(archive: ModelArchive) -> bytes:
    m = archive.model
    packer = _Packer()
    meta = {
        "run_config": archive.run_config.to_dict(),
        "model": {
            "topology": m.topology,
            "ap_ids": list(m.ap_ids),
            "activity_names": list(m.activity_names),
            "orientation_names": list(m.orientation_names),
            "banks": [_bank_meta(b, i, packer) for i, b in enumerate(m.banks)],
            "activity_heads": [_head_meta(h, f"act{i}", packer) for i, h in enumerate(m.activity_heads)],
            "orientation_heads": [_head_meta(h, f"ori{i}", packer) for i, h in enumerate(m.orientation_heads)],
        },
        "arrays": packer.index,
    }
    meta_bytes = json.dumps(meta, sort_keys=True, ensure_ascii=False).encode("utf-8")
    data = b"".join(packer.chunks)
    header = {
        "format_version": "%d.%d" % archive.format_version,
        "sha256": hashlib.sha256(meta_bytes + data).hexdigest(),
        "meta_bytes": len(meta_bytes),
        "data_bytes": len(data),
    }
    return MAGIC + json.dumps(header, sort_keys=True).encode() + b"\n" + meta_bytes + data


def save_model(path, model: FusionModel, run_config: RunConfig) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(to_bytes(ModelArchive(model, run_config)))
    os.replace(tmp, path)
    return path


def _array(index: dict, data: bytes, name: str) -> np.ndarray:
    spec = index[name]
    start, n = spec["offset"], spec["nbytes"]
    if start + n > len(data):
        raise ArchiveError(f"array {name} runs past the end of the archive")
    arr = np.frombuffer(data[start:start + n], dtype=np.dtype(spec["dtype"]))
    return arr.reshape(spec["shape"]).astype(arr.dtype.newbyteorder("="))


def _load_bank(meta, index, data) -> FittedBank:
    plan = meta["plan"]
    return FittedBank(
        config=KernelBankConfig(**meta["config"]),
        plan=DilationPlan(
            input_length=plan["input_length"],
            num_kernels=plan["num_kernels"],
            dilations=tuple(plan["dilations"]),
            num_biases=tuple(plan["num_biases"]),
        ),
        kernels=_array(index, data, meta["kernels"]),
        biases=_array(index, data, meta["biases"]),
        subcarrier_count=meta["subcarrier_count"],
    )


def _load_head(meta, index, data) -> RidgeModel:
    return RidgeModel(
        class_labels=tuple(meta["class_labels"]),
        weights=_array(index, data, meta["weights"]),
        intercepts=_array(index, data, meta["intercepts"]),
        feature_means=_array(index, data, meta["feature_means"]),
        feature_scales=_array(index, data, meta["feature_scales"]),
        alpha=meta["alpha"],
        cv_accuracy={a: s for a, s in meta["cv_accuracy"]},
    )


def from_bytes(blob: bytes) -> ModelArchive:
    if not blob.startswith(MAGIC):
        raise ArchiveError("not a model archive (bad magic line)")
    end = blob.find(b"\n", len(MAGIC))
    if end < 0:
        raise ArchiveError("truncated archive header")
    try:
        header = json.loads(blob[len(MAGIC):end])
        major, minor = (int(x) for x in header["format_version"].split("."))
        n_meta, n_data = int(header["meta_bytes"]), int(header["data_bytes"])
        expected = header["sha256"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ArchiveError(f"corrupt archive header ({exc})") from exc
    if major > FORMAT_VERSION[0]:
        raise VersionError(
            f"archive format {major}.{minor} is newer than supported "
            f"{FORMAT_VERSION[0]}.{FORMAT_VERSION[1]}"
        )
    body = blob[end + 1:]
    if len(body) != n_meta + n_data:
        raise ArchiveError(
            f"archive body is {len(body)} bytes, header declares {n_meta + n_data} (truncated?)"
        )
    actual = hashlib.sha256(body).hexdigest()
    if actual != expected:
        raise ChecksumError(f"checksum mismatch: expected {expected}, got {actual}")
    try:
        meta = json.loads(body[:n_meta].decode("utf-8"))
        data = body[n_meta:]
        index = meta["arrays"]
        m = meta["model"]
        model = FusionModel(
            topology=m["topology"],
            ap_ids=tuple(m["ap_ids"]),
            banks=tuple(_load_bank(b, index, data) for b in m["banks"]),
            activity_heads=tuple(_load_head(h, index, data) for h in m["activity_heads"]),
            orientation_heads=tuple(_load_head(h, index, data) for h in m["orientation_heads"]),
            activity_names=tuple(m["activity_names"]),
            orientation_names=tuple(m["orientation_names"]),
        )
        run_config = RunConfig.from_dict(meta["run_config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ArchiveError(f"malformed archive payload ({exc})") from exc
    return ModelArchive(model=model, run_config=run_config, format_version=(major, minor))


def load_model(path) -> ModelArchive:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ArchiveError(f"cannot read archive {path}: {exc}") from exc
    return from_bytes(blob)
