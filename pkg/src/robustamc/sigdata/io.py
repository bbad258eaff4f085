"""Binary dataset serialization (AMCF v1) and the raw I/Q import path.

Layout, little-endian throughout:

    magic   4 bytes  b"AMCF"
    u16     format version (1)
    u32     frame count
    u16     frame length
    then per frame: u8 class id, f32 snr_db, f32[2*frame_len] I row then Q row
    u8      dataset role
    u8[n]   labeled mask, one byte per frame
    u32     provenance JSON byte length (0 if absent)
    bytes   provenance JSON, UTF-8, sorted keys

Round-trips are bit-exact because frames are stored as the same float32
values they carry in memory.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DatasetFormatError, InputShapeError
from .dataset import DatasetRole, DomainDataset, IQFrame
from .modulation import ModulationClass

MAGIC = b"AMCF"
VERSION = 1


def save_dataset(ds: DomainDataset, path: str | Path, provenance: dict | None = None) -> None:
    """Write a dataset to disk; provenance defaults to ds.provenance."""
    path = Path(path)
    prov = provenance if provenance is not None else ds.provenance
    n = len(ds.frames)
    frame_len = ds.frame_len
    labeled = set(ds.labeled_idx)

    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<HIH", VERSION, n, frame_len)
    for f in ds.frames:
        buf += struct.pack("<Bf", int(f.label), float(f.snr_db))
        buf += f.iq.astype("<f4", copy=False).tobytes()
    buf += struct.pack("<B", int(ds.role))
    buf += bytes(1 if i in labeled else 0 for i in range(n))
    prov_bytes = json.dumps(prov, sort_keys=True).encode("utf-8") if prov else b""
    buf += struct.pack("<I", len(prov_bytes))
    buf += prov_bytes

    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(bytes(buf))
    tmp.replace(path)


def load_dataset(path: str | Path) -> DomainDataset:
    """Read an AMCF file back into a DomainDataset, validating as it goes."""
    data = Path(path).read_bytes()
    off = 0

    if data[:4] != MAGIC:
        raise DatasetFormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    off = 4
    if len(data) < off + 8:
        raise DatasetFormatError("truncated header", offset=len(data))
    version, n, frame_len = struct.unpack_from("<HIH", data, off)
    if version != VERSION:
        raise DatasetFormatError(f"unsupported format version {version}", offset=off)
    off += 8

    rec = 1 + 4 + 4 * 2 * frame_len
    frames: list[IQFrame] = []
    need = off + n * rec + 1 + n + 4
    if len(data) < need:
        raise DatasetFormatError(
            f"file too short for {n} frames of length {frame_len}", offset=len(data)
        )

    raw = np.frombuffer(data, dtype=np.uint8, count=n * rec, offset=off)
    off_role = off + n * rec
    role_byte = data[off_role]
    try:
        role = DatasetRole(role_byte)
    except ValueError:
        raise DatasetFormatError(f"unknown dataset role {role_byte}", offset=off_role)
    mask = data[off_role + 1 : off_role + 1 + n]
    off_prov = off_role + 1 + n
    (prov_len,) = struct.unpack_from("<I", data, off_prov)
    prov_start = off_prov + 4
    if len(data) < prov_start + prov_len:
        raise DatasetFormatError("truncated provenance block", offset=len(data))
    if prov_len:
        try:
            prov = json.loads(data[prov_start : prov_start + prov_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise DatasetFormatError("provenance block is not valid JSON", offset=prov_start)
    else:
        prov = {}

    domain = role.domain
    rows = raw.reshape(n, rec) if n else raw.reshape(0, rec)
    for i in range(n):
        row = rows[i]
        cls_id = int(row[0])
        try:
            label = ModulationClass(cls_id)
        except ValueError:
            raise DatasetFormatError(f"unknown class id {cls_id}", offset=off + i * rec)
        (snr,) = struct.unpack("<f", row[1:5].tobytes())
        iq = np.frombuffer(row[5:].tobytes(), dtype="<f4").reshape(2, frame_len).copy()
        frames.append(IQFrame(iq=iq, label=label, snr_db=snr, domain=domain))

    labeled_idx = tuple(i for i in range(n) if mask[i])
    return DomainDataset(frames=frames, role=role, labeled_idx=labeled_idx, provenance=prov)


def load_raw_iq(
    data_path: str | Path,
    labels_path: str | Path,
    frame_len: int,
    role: DatasetRole = DatasetRole.TARGET_TEST,
) -> DomainDataset:
    """Import raw interleaved float32 I/Q with a sidecar label file.

    The data file is a flat stream of little-endian float32 pairs
    I0,Q0,I1,Q1,... concatenated frame after frame. The sidecar is CSV with
    header ``class_id,snr_db`` and one row per frame.
    """
    raw = np.fromfile(str(data_path), dtype="<f4")
    if raw.size % (2 * frame_len) != 0:
        raise InputShapeError(
            f"raw file holds {raw.size} floats, not a multiple of 2*frame_len={2 * frame_len}"
        )
    n = raw.size // (2 * frame_len)
    interleaved = raw.reshape(n, frame_len, 2)

    lines = Path(labels_path).read_text().strip().splitlines()
    if not lines or lines[0].strip().lower() != "class_id,snr_db":
        raise DatasetFormatError("label sidecar must start with header 'class_id,snr_db'")
    body = lines[1:]
    if len(body) != n:
        raise InputShapeError(f"label sidecar has {len(body)} rows for {n} frames")

    frames = []
    domain = role.domain
    for i, line in enumerate(body):
        cls_s, snr_s = line.split(",")
        frames.append(
            IQFrame(
                iq=np.ascontiguousarray(interleaved[i].T),
                label=ModulationClass(int(cls_s)),
                snr_db=float(snr_s),
                domain=domain,
            )
        )
    return DomainDataset(frames=frames, role=role, labeled_idx=tuple(range(n)))
