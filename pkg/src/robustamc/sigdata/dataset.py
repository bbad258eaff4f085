"""Frame and dataset containers plus the per-domain generation pipeline.

Generation is deterministic and order-independent: every frame gets its own
child seed from a numpy SeedSequence spawned off the dataset seed, so frames
could be produced concurrently and still match the sequential output.
"""

from __future__ import annotations

import dataclasses
import enum

import numpy as np

from ..errors import ConfigurationError, InputShapeError
from .channel import ChannelProfile, apply_channel
from .modulation import ALL_CLASSES, ModulationClass, synth_clean_signal

DEFAULT_FRAME_LEN = 128
DEFAULT_SPS = 4

# Pilot frames may not exceed this fraction of the unlabeled pool.
MAX_PILOT_FRACTION = 0.1


class DatasetRole(enum.IntEnum):
    SOURCE_TRAIN = 0
    SOURCE_TEST = 1
    TARGET_PILOT = 2
    TARGET_UNLABELED = 3
    TARGET_TEST = 4

    @property
    def domain(self) -> str:
        return "source" if self in (DatasetRole.SOURCE_TRAIN, DatasetRole.SOURCE_TEST) else "target"


@dataclasses.dataclass
class IQFrame:
    """One received frame: float32 I/Q rows, true label, nominal SNR, domain."""

    iq: np.ndarray
    label: ModulationClass
    snr_db: float
    domain: str

    def __post_init__(self):
        self.iq = np.asarray(self.iq, dtype=np.float32)
        if self.iq.ndim != 2 or self.iq.shape[0] != 2:
            raise InputShapeError(f"iq must have shape (2, frame_len), got {self.iq.shape}")
        if self.domain not in ("source", "target"):
            raise ConfigurationError(f"domain must be source or target, got {self.domain!r}")

    def equals(self, other: "IQFrame") -> bool:
        return (
            self.label == other.label
            and self.domain == other.domain
            and np.float32(self.snr_db) == np.float32(other.snr_db)
            and self.iq.shape == other.iq.shape
            and np.array_equal(self.iq, other.iq)
        )


@dataclasses.dataclass
class DomainDataset:
    """A role-tagged frame collection with an explicit labeled/unlabeled split."""

    frames: list[IQFrame]
    role: DatasetRole
    labeled_idx: tuple[int, ...]
    provenance: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.labeled_idx = tuple(sorted(int(i) for i in self.labeled_idx))
        n = len(self.frames)
        if any(i < 0 or i >= n for i in self.labeled_idx):
            raise InputShapeError("labeled_idx out of range")
        if len(set(self.labeled_idx)) != len(self.labeled_idx):
            raise InputShapeError("labeled_idx contains duplicates")
        lens = {f.iq.shape[1] for f in self.frames}
        if len(lens) > 1:
            raise InputShapeError(f"mixed frame lengths in one dataset: {sorted(lens)}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_len(self) -> int:
        return self.frames[0].iq.shape[1] if self.frames else 0

    @property
    def unlabeled_idx(self) -> tuple[int, ...]:
        labeled = set(self.labeled_idx)
        return tuple(i for i in range(len(self.frames)) if i not in labeled)

    def x(self) -> np.ndarray:
        """Stacked float32 array of shape (n, 2, frame_len)."""
        if not self.frames:
            return np.zeros((0, 2, 0), dtype=np.float32)
        return np.stack([f.iq for f in self.frames])

    def y(self) -> np.ndarray:
        return np.array([int(f.label) for f in self.frames], dtype=np.int64)

    def snrs(self) -> np.ndarray:
        return np.array([f.snr_db for f in self.frames], dtype=np.float32)

    def subset(self, idx) -> "DomainDataset":
        idx = [int(i) for i in idx]
        remap = {old: new for new, old in enumerate(idx)}
        labeled = tuple(remap[i] for i in self.labeled_idx if i in remap)
        return DomainDataset(
            frames=[self.frames[i] for i in idx],
            role=self.role,
            labeled_idx=labeled,
            provenance=dict(self.provenance),
        )

    def equals(self, other: "DomainDataset") -> bool:
        return (
            self.role == other.role
            and self.labeled_idx == other.labeled_idx
            and len(self.frames) == len(other.frames)
            and self.provenance == other.provenance
            and all(a.equals(b) for a, b in zip(self.frames, other.frames))
        )


def synth_frame(
    mod: ModulationClass,
    profile: ChannelProfile,
    snr_db: float,
    seed,
    frame_len: int = DEFAULT_FRAME_LEN,
    sps: int = DEFAULT_SPS,
    domain: str = "source",
) -> IQFrame:
    """Generate one frame end to end: clean signal, channel, I/Q packing."""
    rng = np.random.default_rng(seed)
    sig = synth_clean_signal(mod, frame_len, sps, rng)
    rx = apply_channel(sig, profile, snr_db, rng)
    iq = np.stack([rx.real, rx.imag]).astype(np.float32)
    return IQFrame(iq=iq, label=mod, snr_db=float(snr_db), domain=domain)


def _generate_class_frames(
    mod: ModulationClass,
    profile: ChannelProfile,
    count: int,
    seeds,
    frame_len: int,
    sps: int,
    domain: str,
) -> list[IQFrame]:
    """Frames for one class, SNR-stratified round-robin over the profile grid."""
    grid = profile.snr_grid
    return [
        synth_frame(mod, profile, grid[i % len(grid)], seeds[i], frame_len, sps, domain)
        for i in range(count)
    ]


def build_domain(
    profile: ChannelProfile,
    per_class: int,
    shots: int,
    seed: int,
    domain: str = "source",
    test_per_class: int | None = None,
    frame_len: int = DEFAULT_FRAME_LEN,
    sps: int = DEFAULT_SPS,
) -> dict[DatasetRole, DomainDataset]:
    """Generate every dataset role for one domain.

    Source domains yield {SOURCE_TRAIN, SOURCE_TEST}; target domains yield
    {TARGET_PILOT, TARGET_UNLABELED, TARGET_TEST}. For targets, per_class
    counts the adaptation pool per class, out of which exactly ``shots``
    labeled pilots per class are carved; pilots and unlabeled frames are
    disjoint by construction and the pilot set may not exceed 10% of the
    unlabeled pool.
    """
    if per_class <= 0:
        raise ConfigurationError(f"per_class must be positive, got {per_class}")
    if shots < 0 or shots > per_class:
        raise ConfigurationError(f"shots must be in [0, per_class], got {shots}")
    if test_per_class is None:
        test_per_class = per_class
    if domain not in ("source", "target"):
        raise ConfigurationError(f"domain must be source or target, got {domain!r}")
    n_classes = len(ALL_CLASSES)
    if domain == "target" and shots > 0:
        n_unlabeled = n_classes * (per_class - shots)
        if n_classes * shots > MAX_PILOT_FRACTION * n_unlabeled:
            raise ConfigurationError(
                f"pilot set ({n_classes * shots} frames) exceeds "
                f"{MAX_PILOT_FRACTION:.0%} of the unlabeled pool ({n_unlabeled} frames); "
                f"lower shots or raise per_class"
            )

    total = n_classes * (per_class + test_per_class)
    children = np.random.SeedSequence(seed).spawn(total)
    out: dict[DatasetRole, DomainDataset] = {}

    pool_frames: list[IQFrame] = []
    pilot_pick: list[int] = []
    offset = 0
    for mod in ALL_CLASSES:
        cls_frames = _generate_class_frames(
            mod, profile, per_class, children[offset : offset + per_class],
            frame_len, sps, domain,
        )
        base = len(pool_frames)
        pool_frames.extend(cls_frames)
        pilot_pick.extend(range(base, base + shots))
        offset += per_class

    test_frames: list[IQFrame] = []
    for mod in ALL_CLASSES:
        test_frames.extend(
            _generate_class_frames(
                mod, profile, test_per_class,
                children[offset : offset + test_per_class],
                frame_len, sps, domain,
            )
        )
        offset += test_per_class

    if domain == "source":
        out[DatasetRole.SOURCE_TRAIN] = DomainDataset(
            frames=pool_frames,
            role=DatasetRole.SOURCE_TRAIN,
            labeled_idx=tuple(range(len(pool_frames))),
        )
        out[DatasetRole.SOURCE_TEST] = DomainDataset(
            frames=test_frames,
            role=DatasetRole.SOURCE_TEST,
            labeled_idx=tuple(range(len(test_frames))),
        )
        return out

    pilot_set = set(pilot_pick)
    unlabeled_pick = [i for i in range(len(pool_frames)) if i not in pilot_set]
    out[DatasetRole.TARGET_PILOT] = DomainDataset(
        frames=[pool_frames[i] for i in pilot_pick],
        role=DatasetRole.TARGET_PILOT,
        labeled_idx=tuple(range(len(pilot_pick))),
    )
    out[DatasetRole.TARGET_UNLABELED] = DomainDataset(
        frames=[pool_frames[i] for i in unlabeled_pick],
        role=DatasetRole.TARGET_UNLABELED,
        labeled_idx=(),
    )
    out[DatasetRole.TARGET_TEST] = DomainDataset(
        frames=test_frames,
        role=DatasetRole.TARGET_TEST,
        labeled_idx=tuple(range(len(test_frames))),
    )
    return out
