"""Constellation and analog-waveform oracles for the signal synthesizers."""

import numpy as np
import pytest

from robustamc.errors import InputShapeError, UnsupportedOperationError
from robustamc.sigdata.modulation import (
    CONSTELLATIONS,
    ModulationClass,
    map_symbols,
    synth_analog,
    synth_clean_signal,
)


def test_bpsk_is_antipodal():
    out = map_symbols(ModulationClass.BPSK, np.array([0, 1]))
    assert np.allclose(out, [1 + 0j, -1 + 0j])


def test_qpsk_gray_corner_has_unit_power():
    out = map_symbols(ModulationClass.QPSK, np.array([0, 0]))
    assert out.shape == (1,)
    assert out[0] == pytest.approx((1 + 1j) / np.sqrt(2))


@pytest.mark.parametrize(
    "mod,bits",
    [(ModulationClass.QPSK, 2), (ModulationClass.PSK8, 3),
     (ModulationClass.QAM16, 4), (ModulationClass.QAM64, 6)],
)
def test_constellation_mean_power_is_one(mod, bits):
    # enumerate all symbol patterns independently of the lookup table
    m = 1 << bits
    patterns = ((np.arange(m)[:, None] >> np.arange(bits - 1, -1, -1)) & 1).ravel()
    points = map_symbols(mod, patterns)
    assert points.shape == (m,)
    assert np.mean(np.abs(points) ** 2) == pytest.approx(1.0, abs=1e-9)


def test_qam16_levels_scaled_by_sqrt10():
    # the unnormalized 16-QAM grid {±1,±3}² has mean power 10
    pts = CONSTELLATIONS[ModulationClass.QAM16] * np.sqrt(10)
    assert np.allclose(np.sort(np.unique(np.round(pts.real, 9))), [-3, -1, 1, 3])
    assert np.allclose(np.sort(np.unique(np.round(pts.imag, 9))), [-3, -1, 1, 3])


def test_psk8_points_lie_on_unit_circle():
    pts = CONSTELLATIONS[ModulationClass.PSK8]
    assert np.allclose(np.abs(pts), 1.0)
    # 8 distinct phases, uniformly spaced
    phases = np.sort(np.angle(pts))
    gaps = np.diff(phases)
    assert np.allclose(gaps, np.pi / 4)


def test_gray_neighbours_differ_in_one_bit():
    # adjacent-phase 8PSK points must carry symbol indices at Hamming distance 1
    pts = CONSTELLATIONS[ModulationClass.PSK8]
    order = np.argsort(np.angle(pts))
    ring = np.concatenate([order, order[:1]])
    for a, b in zip(ring[:-1], ring[1:]):
        assert bin(int(a) ^ int(b)).count("1") == 1


def test_map_symbols_rejects_bad_bits():
    with pytest.raises(InputShapeError):
        map_symbols(ModulationClass.QPSK, np.array([0, 1, 0]))  # not divisible by 2
    with pytest.raises(InputShapeError):
        map_symbols(ModulationClass.BPSK, np.array([0, 2]))  # non-binary
    with pytest.raises(InputShapeError):
        map_symbols(ModulationClass.BPSK, np.array([[0], [1]]))  # not 1-D
    with pytest.raises(UnsupportedOperationError):
        map_symbols(ModulationClass.AM_DSB, np.array([0, 1]))


def test_analog_generation_is_deterministic():
    a = synth_analog(ModulationClass.AM_DSB, 128, 77)
    b = synth_analog(ModulationClass.AM_DSB, 128, 77)
    np.testing.assert_array_equal(a, b)
    c = synth_analog(ModulationClass.AM_DSB, 128, 78)
    assert not np.array_equal(a, c)


def test_ssb_energy_is_single_sided():
    frame = synth_analog(ModulationClass.AM_SSB, 1024, 3)
    spec = np.fft.fft(frame)
    total = np.sum(np.abs(spec) ** 2)
    negative = np.sum(np.abs(spec[513:]) ** 2)  # bins above Nyquist = negative freqs
    assert negative <= 0.01 * total


def test_analog_frames_have_unit_mean_power():
    rng = np.random.default_rng(12)
    for mod in (ModulationClass.AM_DSB, ModulationClass.AM_SSB):
        powers = [
            np.mean(np.abs(synth_analog(mod, 128, rng)) ** 2) for _ in range(1000)
        ]
        assert np.mean(powers) == pytest.approx(1.0, abs=0.05)


def test_analog_rejects_short_frames():
    with pytest.raises(InputShapeError):
        synth_analog(ModulationClass.AM_DSB, 8, 0)


def test_digital_signal_rectangular_pulse_and_power():
    sig = synth_clean_signal(ModulationClass.QPSK, frame_len=128, sps=4, rng=5)
    assert sig.shape == (128,)
    # rectangular pulse: each group of sps samples repeats one symbol
    blocks = sig.reshape(-1, 4)
    assert np.allclose(blocks, blocks[:, :1])
    assert np.mean(np.abs(sig) ** 2) == pytest.approx(1.0, abs=1e-6)


def test_clean_signal_covers_every_class():
    for mod in ModulationClass:
        sig = synth_clean_signal(mod, frame_len=128, sps=4, rng=9)
        assert sig.shape == (128,)
        assert np.all(np.isfinite(sig))


def test_class_ids_are_stable():
    assert [m.value for m in ModulationClass] == [0, 1, 2, 3, 4, 5, 6]
    assert ModulationClass.BPSK == 0
    assert ModulationClass.AM_SSB == 6
    assert ModulationClass.QAM64.bits_per_symbol == 6
    assert not ModulationClass.AM_DSB.is_digital
