"""Serialization round-trips and format-error handling for dataset files."""

import struct

import numpy as np
import pytest

from robustamc.errors import DatasetFormatError, InputShapeError
from robustamc.sigdata import load_dataset, save_dataset
from robustamc.sigdata.dataset import DatasetRole, DomainDataset
from robustamc.sigdata.io import load_raw_iq


def test_round_trip_source(tmp_path, source_roles):
    ds = source_roles[DatasetRole.SOURCE_TRAIN]
    path = tmp_path / "train.amcf"
    save_dataset(ds, path, provenance={"origin": "unit-test", "seed": 4001})
    back = load_dataset(path)
    np.testing.assert_array_equal(back.x(), ds.x())
    np.testing.assert_array_equal(back.y(), ds.y())
    np.testing.assert_array_equal(back.snrs(), ds.snrs())
    assert back.role == ds.role
    assert back.labeled_idx == ds.labeled_idx
    assert back.provenance == {"origin": "unit-test", "seed": 4001}


def test_round_trip_is_bit_exact(tmp_path, target_roles):
    ds = target_roles[DatasetRole.TARGET_PILOT]
    p1, p2 = tmp_path / "a.amcf", tmp_path / "b.amcf"
    save_dataset(ds, p1)
    save_dataset(load_dataset(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_dataset_round_trips(tmp_path):
    ds = DomainDataset(frames=[], role=DatasetRole.TARGET_PILOT, labeled_idx=())
    path = tmp_path / "empty.amcf"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert len(back.frames) == 0
    assert back.role == DatasetRole.TARGET_PILOT


def test_bad_magic_reports_offset_zero(tmp_path, source_roles):
    path = tmp_path / "bad.amcf"
    save_dataset(source_roles[DatasetRole.SOURCE_TEST], path)
    blob = bytearray(path.read_bytes())
    blob[0] = ord("X")
    path.write_bytes(bytes(blob))
    with pytest.raises(DatasetFormatError) as err:
        load_dataset(path)
    assert err.value.offset == 0


def test_unsupported_version(tmp_path, source_roles):
    path = tmp_path / "v9.amcf"
    save_dataset(source_roles[DatasetRole.SOURCE_TEST], path)
    blob = bytearray(path.read_bytes())
    blob[4:6] = struct.pack("<H", 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(DatasetFormatError, match="version"):
        load_dataset(path)


def test_truncated_file(tmp_path, source_roles):
    path = tmp_path / "trunc.amcf"
    save_dataset(source_roles[DatasetRole.SOURCE_TEST], path)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(DatasetFormatError, match="too short|truncated"):
        load_dataset(path)


def test_bad_class_id(tmp_path, source_roles):
    ds = source_roles[DatasetRole.SOURCE_TEST]
    path = tmp_path / "cls.amcf"
    save_dataset(ds, path)
    blob = bytearray(path.read_bytes())
    blob[12] = 200  # first frame's class byte
    path.write_bytes(bytes(blob))
    with pytest.raises(DatasetFormatError, match="class"):
        load_dataset(path)


def test_bad_role_byte(tmp_path):
    ds = DomainDataset(frames=[], role=DatasetRole.SOURCE_TRAIN, labeled_idx=())
    path = tmp_path / "role.amcf"
    save_dataset(ds, path)
    blob = bytearray(path.read_bytes())
    blob[12] = 77  # role byte sits right after the (empty) frame block
    path.write_bytes(bytes(blob))
    with pytest.raises(DatasetFormatError, match="role"):
        load_dataset(path)


def test_raw_iq_import(tmp_path, source_roles):
    ds = source_roles[DatasetRole.SOURCE_TEST]
    x, y, snr = ds.x()[:10], ds.y()[:10], ds.snrs()[:10]
    raw = tmp_path / "frames.iq"
    # interleave I and Q the way an SDR capture would
    inter = np.empty((10, 128, 2), dtype="<f4")
    inter[:, :, 0] = x[:, 0]
    inter[:, :, 1] = x[:, 1]
    inter.tofile(raw)
    sidecar = tmp_path / "frames.csv"
    lines = ["class_id,snr_db"] + [f"{int(c)},{s:.1f}" for c, s in zip(y, snr)]
    sidecar.write_text("\n".join(lines) + "\n")

    back = load_raw_iq(raw, sidecar, frame_len=128)
    np.testing.assert_array_equal(back.x(), x)
    np.testing.assert_array_equal(back.y(), y)
    assert back.role == DatasetRole.TARGET_TEST


def test_raw_iq_rejects_misaligned_stream(tmp_path):
    raw = tmp_path / "odd.iq"
    np.zeros(100, dtype="<f4").tofile(raw)
    sidecar = tmp_path / "odd.csv"
    sidecar.write_text("class_id,snr_db\n0,0.0\n")
    with pytest.raises(InputShapeError):
        load_raw_iq(raw, sidecar, frame_len=128)


def test_raw_iq_rejects_bad_sidecar(tmp_path):
    raw = tmp_path / "ok.iq"
    np.zeros(2 * 128, dtype="<f4").tofile(raw)
    sidecar = tmp_path / "bad.csv"
    sidecar.write_text("label,snr\n0,0.0\n")
    with pytest.raises(DatasetFormatError):
        load_raw_iq(raw, sidecar, frame_len=128)
