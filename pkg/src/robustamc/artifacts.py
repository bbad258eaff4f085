"""Trained-model artifacts: in-memory container and AMCW v1 file format.

Layout, little-endian: magic "AMCW", u16 version, u32 parameter count,
f32 flat parameter vector, u32 JSON length, UTF-8 provenance JSON (arch
descriptor, strategy, seeds, config digest, feature split point). float32
parameters round-trip bit-exactly.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np
import torch

from .errors import DatasetFormatError
from .grads import flat_params, set_flat_params
from .models import ArchDescriptor, AmcModel, build_model

MAGIC = b"AMCW"
VERSION = 1


@dataclasses.dataclass
class TrainedArtifact:
    """A trained classifier plus everything needed to rebuild and audit it."""

    desc: ArchDescriptor
    theta: np.ndarray
    frame_len: int
    num_classes: int
    feature_dim: int
    provenance: dict

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float32).reshape(-1)

    @classmethod
    def from_model(cls, model: AmcModel, provenance: dict) -> "TrainedArtifact":
        return cls(
            desc=model.desc,
            theta=flat_params(model).to(torch.float32).numpy().copy(),
            frame_len=model.frame_len,
            num_classes=model.num_classes,
            feature_dim=model.feature_dim,
            provenance=dict(provenance),
        )

    def build(self, dtype: torch.dtype = torch.float32) -> AmcModel:
        model = build_model(
            self.desc, frame_len=self.frame_len, num_classes=self.num_classes, seed=0, dtype=dtype
        )
        set_flat_params(model, torch.from_numpy(self.theta).to(dtype))
        return model

    def equals(self, other: "TrainedArtifact") -> bool:
        return (
            self.desc == other.desc
            and self.frame_len == other.frame_len
            and self.num_classes == other.num_classes
            and self.feature_dim == other.feature_dim
            and self.provenance == other.provenance
            and np.array_equal(self.theta, other.theta)
        )


def save_artifact(artifact: TrainedArtifact, path: str | Path) -> None:
    meta = {
        "arch": artifact.desc.to_dict(),
        "frame_len": artifact.frame_len,
        "num_classes": artifact.num_classes,
        "feature_dim": artifact.feature_dim,
        "split_point": "head",
        "provenance": artifact.provenance,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    path = Path(path)
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<HI", VERSION, artifact.theta.size)
    buf += artifact.theta.astype("<f4", copy=False).tobytes()
    buf += struct.pack("<I", len(meta_bytes))
    buf += meta_bytes
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(bytes(buf))
    tmp.replace(path)


def load_artifact(path: str | Path) -> TrainedArtifact:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise DatasetFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    if len(data) < 10:
        raise DatasetFormatError("truncated artifact header", offset=len(data))
    version, count = struct.unpack_from("<HI", data, 4)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported artifact version {version}", offset=4)
    off = 10
    end = off + 4 * count
    if len(data) < end + 4:
        raise DatasetFormatError("artifact file too short for parameter block", offset=len(data))
    theta = np.frombuffer(data[off:end], dtype="<f4").copy()
    (meta_len,) = struct.unpack_from("<I", data, end)
    meta_start = end + 4
    if len(data) < meta_start + meta_len:
        raise DatasetFormatError("truncated artifact metadata", offset=len(data))
    try:
        meta = json.loads(data[meta_start : meta_start + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise DatasetFormatError("artifact metadata is not valid JSON", offset=meta_start)
    return TrainedArtifact(
        desc=ArchDescriptor.from_dict(meta["arch"]),
        theta=theta,
        frame_len=int(meta["frame_len"]),
        num_classes=int(meta["num_classes"]),
        feature_dim=int(meta["feature_dim"]),
        provenance=meta.get("provenance", {}),
    )
