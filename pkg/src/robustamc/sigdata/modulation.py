"""Constellation mappings and analog message synthesis.

Seven modulation classes: five digital (Gray-coded PSK/QAM at unit average
constellation power) and two analog AM variants synthesized from a random
multitone message. Class ids are stable because the dataset file format
stores them as single bytes.
"""

from __future__ import annotations

import enum

import numpy as np

from ..errors import InputShapeError, UnsupportedOperationError


class ModulationClass(enum.IntEnum):
    BPSK = 0
    QPSK = 1
    PSK8 = 2
    QAM16 = 3
    QAM64 = 4
    AM_DSB = 5
    AM_SSB = 6

    @property
    def is_digital(self) -> bool:
        return self not in (ModulationClass.AM_DSB, ModulationClass.AM_SSB)

    @property
    def bits_per_symbol(self) -> int:
        if not self.is_digital:
            raise UnsupportedOperationError(
                f"{self.name} is analog and has no symbol alphabet"
            )
        return _BITS_PER_SYMBOL[self]

    @property
    def display_name(self) -> str:
        return _DISPLAY[self]


_BITS_PER_SYMBOL = {
    ModulationClass.BPSK: 1,
    ModulationClass.QPSK: 2,
    ModulationClass.PSK8: 3,
    ModulationClass.QAM16: 4,
    ModulationClass.QAM64: 6,
}

_DISPLAY = {
    ModulationClass.BPSK: "BPSK",
    ModulationClass.QPSK: "QPSK",
    ModulationClass.PSK8: "8PSK",
    ModulationClass.QAM16: "QAM16",
    ModulationClass.QAM64: "QAM64",
    ModulationClass.AM_DSB: "AM-DSB",
    ModulationClass.AM_SSB: "AM-SSB",
}

DIGITAL_CLASSES = tuple(m for m in ModulationClass if m.is_digital)
ALL_CLASSES = tuple(ModulationClass)

AM_MOD_INDEX = 0.8
AM_TONES = 3


def _gray(n: int) -> int:
    return n ^ (n >> 1)


def _pam_levels(bits: int) -> dict[int, float]:
    """Gray-coded amplitude levels for one quadrature axis.

    Level index i carries code gray(i), so adjacent amplitudes differ in
    exactly one bit.
    """
    m = 1 << bits
    levels = np.arange(-(m - 1), m, 2, dtype=float)
    return {_gray(i): levels[i] for i in range(m)}


def _build_constellations() -> dict[ModulationClass, np.ndarray]:
    tables: dict[ModulationClass, np.ndarray] = {}

    tables[ModulationClass.BPSK] = np.array([1.0 + 0.0j, -1.0 + 0.0j])

    # QPSK: one bit per axis, bit 0 -> positive amplitude.
    qpsk = np.empty(4, dtype=complex)
    for b in range(4):
        bi, bq = (b >> 1) & 1, b & 1
        qpsk[b] = ((1 - 2 * bi) + 1j * (1 - 2 * bq)) / np.sqrt(2.0)
    tables[ModulationClass.QPSK] = qpsk

    # 8PSK: phase index n carries code gray(n) so neighbours differ in one bit.
    psk8 = np.empty(8, dtype=complex)
    for n in range(8):
        psk8[_gray(n)] = np.exp(2j * np.pi * n / 8)
    tables[ModulationClass.PSK8] = psk8

    # Square QAM: independent Gray coding per axis, unit average power.
    for cls, axis_bits, norm in (
        (ModulationClass.QAM16, 2, np.sqrt(10.0)),
        (ModulationClass.QAM64, 3, np.sqrt(42.0)),
    ):
        amp = _pam_levels(axis_bits)
        m = 1 << (2 * axis_bits)
        table = np.empty(m, dtype=complex)
        mask = (1 << axis_bits) - 1
        for b in range(m):
            bi = (b >> axis_bits) & mask
            bq = b & mask
            table[b] = (amp[bi] + 1j * amp[bq]) / norm
        tables[cls] = table

    return tables


CONSTELLATIONS = _build_constellations()


def map_symbols(mod: ModulationClass, bits: np.ndarray) -> np.ndarray:
    """Map a bit vector onto complex constellation symbols.

    Args:
        mod: a digital modulation class.
        bits: 1-D array of 0/1 values whose length is a multiple of the
            class's bits-per-symbol.

    Returns:
        Complex symbol array of length ``len(bits) // bits_per_symbol``.
    """
    if not mod.is_digital:
        raise UnsupportedOperationError(f"cannot map bits for analog class {mod.name}")
    bits = np.asarray(bits)
    if bits.ndim != 1:
        raise InputShapeError(f"bits must be 1-D, got shape {bits.shape}")
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise InputShapeError("bits must contain only 0 and 1")
    bps = mod.bits_per_symbol
    if bits.size % bps != 0:
        raise InputShapeError(
            f"bit length {bits.size} is not a multiple of {bps} for {mod.name}"
        )
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    idx = groups @ weights
    return CONSTELLATIONS[mod][idx]


def synth_analog(mod: ModulationClass, n: int, rng: np.random.Generator | int) -> np.ndarray:
    """Synthesize one analog AM frame of n complex baseband samples.

    The message is a random 3-tone mixture with tone frequencies placed on
    DFT bins (keeps the SSB spectrum strictly one-sided). Frames are
    normalized to unit average power.

    Args:
        mod: AM_DSB or AM_SSB.
        n: frame length in samples, at least 16.
        rng: numpy Generator or integer seed.

    Returns:
        Complex array of length n with mean(|s|^2) == 1.
    """
    if mod.is_digital:
        raise UnsupportedOperationError(f"{mod.name} is not an analog class")
    if n < 16:
        raise InputShapeError(f"analog synthesis needs n >= 16, got {n}")
    rng = np.random.default_rng(rng)

    k_max = max(2, int(0.04 * n))
    ks = rng.integers(1, k_max + 1, size=AM_TONES)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=AM_TONES)
    amps = rng.uniform(0.5, 1.0, size=AM_TONES)
    t = np.arange(n)

    if mod is ModulationClass.AM_DSB:
        msg = np.zeros(n)
        for k, ph, a in zip(ks, phases, amps):
            msg += a * np.cos(2.0 * np.pi * k * t / n + ph)
        msg /= np.max(np.abs(msg))
        sig = (1.0 + AM_MOD_INDEX * msg).astype(complex)
    else:
        # SSB via analytic-signal construction: positive-frequency tones only.
        sig = np.zeros(n, dtype=complex)
        for k, ph, a in zip(ks, phases, amps):
            sig += a * np.exp(1j * (2.0 * np.pi * k * t / n + ph))

    power = np.mean(np.abs(sig) ** 2)
    return sig / np.sqrt(power)


def synth_clean_signal(
    mod: ModulationClass,
    frame_len: int,
    sps: int,
    rng: np.random.Generator | int,
) -> np.ndarray:
    """Synthesize one noiseless unit-power baseband frame of any class.

    Digital classes draw random bits, map them through the constellation and
    hold each symbol for ``sps`` samples; analog classes call synth_analog.
    """
    rng = np.random.default_rng(rng)
    if not mod.is_digital:
        return synth_analog(mod, frame_len, rng)
    if frame_len % sps != 0:
        raise InputShapeError(f"frame_len {frame_len} not divisible by sps {sps}")
    nsym = frame_len // sps
    bits = rng.integers(0, 2, size=nsym * mod.bits_per_symbol)
    sig = np.repeat(map_symbols(mod, bits), sps)
    power = np.mean(np.abs(sig) ** 2)
    return sig / np.sqrt(power)
