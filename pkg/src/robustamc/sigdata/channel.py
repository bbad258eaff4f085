"""Channel impairment model: multipath fading, CFO, phase offset, AWGN.

The noise variance is set relative to the post-fading signal power, so the
nominal SNR survives the fading stage. With fading disabled and zero offsets
the channel is an exact identity at infinite SNR.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from ..errors import ConfigurationError, InputShapeError

FADING_MODES = ("none", "rayleigh", "rician")


@dataclasses.dataclass(frozen=True)
class ChannelProfile:
    """Stochastic channel description shared by every frame of a domain.

    snr_grid values are in dB and must be strictly increasing. max_cfo is a
    fraction of the sample rate; max_phase is in radians. fading="none"
    forces tap_count to 1.
    """

    snr_grid: tuple[float, ...]
    fading: str = "none"
    rician_k: float = 4.0
    tap_count: int = 1
    max_cfo: float = 0.0
    max_phase: float = 0.0

    def __post_init__(self):
        grid = tuple(float(s) for s in self.snr_grid)
        if not grid:
            raise ConfigurationError("snr_grid must be non-empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigurationError(f"snr_grid must be strictly increasing: {grid}")
        object.__setattr__(self, "snr_grid", grid)
        if self.fading not in FADING_MODES:
            raise ConfigurationError(
                f"fading must be one of {FADING_MODES}, got {self.fading!r}"
            )
        if self.fading == "none":
            object.__setattr__(self, "tap_count", 1)
        elif self.tap_count < 1:
            raise ConfigurationError(f"tap_count must be >= 1, got {self.tap_count}")
        if self.rician_k < 0:
            raise ConfigurationError(f"rician_k must be >= 0, got {self.rician_k}")
        if self.max_cfo < 0 or self.max_cfo > 0.5:
            raise ConfigurationError(f"max_cfo must be in [0, 0.5], got {self.max_cfo}")
        if self.max_phase < 0:
            raise ConfigurationError(f"max_phase must be >= 0, got {self.max_phase}")


def _draw_taps(profile: ChannelProfile, rng: np.random.Generator) -> np.ndarray:
    """Random unit-mean-energy FIR taps with an exponential delay profile."""
    L = profile.tap_count
    pdp = np.exp(-np.arange(L, dtype=float))
    pdp /= pdp.sum()
    scatter = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0)
    if profile.fading == "rician":
        k = profile.rician_k
        los = np.zeros(L, dtype=complex)
        los[0] = 1.0
        taps = np.sqrt(pdp) * (
            np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * scatter
        )
    else:
        taps = np.sqrt(pdp) * scatter
    return taps


def apply_channel(
    signal: np.ndarray,
    profile: ChannelProfile,
    snr_db: float,
    rng: np.random.Generator | int,
) -> np.ndarray:
    """Push one complex frame through the channel.

    Draw order is fixed (taps, cfo, phase, noise) so a given (profile, seed)
    is reproducible, and the no-noise path consumes the same draws as the
    noisy one up to the noise itself.
    """
    signal = np.asarray(signal)
    if signal.ndim != 1 or signal.size == 0:
        raise InputShapeError(f"signal must be a non-empty 1-D array, got {signal.shape}")
    rng = np.random.default_rng(rng)
    out = signal.astype(complex, copy=True)

    if profile.fading != "none":
        taps = _draw_taps(profile, rng)
        out = np.convolve(out, taps)[: signal.size]

    if profile.max_cfo > 0:
        cfo = rng.uniform(-profile.max_cfo, profile.max_cfo)
        out = out * np.exp(2j * np.pi * cfo * np.arange(signal.size))

    if profile.max_phase > 0:
        phase = rng.uniform(-profile.max_phase, profile.max_phase)
        out = out * np.exp(1j * phase)

    if not (np.isinf(snr_db) and snr_db > 0):
        p_faded = np.mean(np.abs(out) ** 2)
        sigma2 = p_faded * 10.0 ** (-snr_db / 10.0)
        noise = np.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(signal.size) + 1j * rng.standard_normal(signal.size)
        )
        out = out + noise

    return out
