import numpy as np
import pytest

from sic_lab.dsp import awgn_complex, fir_convolve, power_dbm, scale_to_dbm
from sic_lab.waveform import (
    OfdmConfig,
    ber_count,
    detect_preamble,
    ofdm_modulate,
    ofdm_receive,
    qam16_demap,
    qam16_map,
)
from helpers import qam16_ber_analytic

CFG = OfdmConfig()


def test_qam16_stated_mappings():
    assert qam16_map(np.array([0, 0, 0, 0]))[0] == pytest.approx((-3 - 3j) / np.sqrt(10))
    assert qam16_map(np.array([1, 1, 1, 0]))[0] == pytest.approx((1 + 3j) / np.sqrt(10))


def test_qam16_unit_average_energy():
    all_codewords = np.array([[b >> 3 & 1, b >> 2 & 1, b >> 1 & 1, b & 1] for b in range(16)]).reshape(-1)
    symbols = qam16_map(all_codewords)
    assert np.mean(np.abs(symbols) ** 2) == pytest.approx(1.0, abs=1e-15)


def test_qam16_length_must_divide_by_four():
    with pytest.raises(ValueError):
        qam16_map(np.array([0, 1, 0]))


def test_qam16_demap_inverts_map():
    all_codewords = np.array([[b >> 3 & 1, b >> 2 & 1, b >> 1 & 1, b & 1] for b in range(16)]).reshape(-1)
    np.testing.assert_array_equal(qam16_demap(qam16_map(all_codewords)), all_codewords)


def test_qam16_demap_small_noise_recovers(rng):
    bits = rng.integers(0, 2, size=4000)
    sym = qam16_map(bits)
    # half the minimum decision distance per axis is 1/sqrt(10)
    kick = 0.99 / np.sqrt(10)
    noisy = sym + kick * (rng.choice([-1, 1], sym.size) + 1j * rng.choice([-1, 1], sym.size)) / np.sqrt(2)
    np.testing.assert_array_equal(qam16_demap(noisy), bits)


def test_qam16_demap_origin_tie_breaks_to_lower_gray_index():
    # 0 is equidistant from levels -1 and +1; the tie falls to -1 = bits 01
    np.testing.assert_array_equal(qam16_demap(np.array([0j])), [0, 1, 0, 1])


@pytest.mark.parametrize("n_bits", [1, 100, CFG.bits_per_symbol, CFG.bits_per_symbol * 3 + 17])
def test_ofdm_roundtrip_identity_channel(rng, n_bits):
    bits = rng.integers(0, 2, size=n_bits)
    frame = ofdm_modulate(CFG, bits)
    ber, detected, sinr = ofdm_receive(CFG, frame, bits)
    assert detected and ber == 0.0
    assert sinr > 50.0


def test_ofdm_frame_length_formula(rng):
    bits = rng.integers(0, 2, size=3 * CFG.bits_per_symbol)
    assert ofdm_modulate(CFG, bits).size == (CFG.preamble_symbols + 3) * (CFG.nfft + CFG.cp_len)


def test_ofdm_frame_power_near_zero_dbm(rng):
    powers = []
    for _ in range(20):
        bits = rng.integers(0, 2, size=8 * CFG.bits_per_symbol)
        powers.append(power_dbm(ofdm_modulate(CFG, bits)))
    assert abs(np.mean(powers)) < 0.5
    assert max(abs(p) for p in powers) < 1.5


def test_pure_noise_is_not_detected():
    noise = awgn_complex(CFG.frame_len(), 0.0, seed=11)
    ber, detected, _ = ofdm_receive(CFG, noise, np.zeros(64, dtype=np.int64))
    assert not detected and ber == 0.5


def test_receive_through_two_tap_channel_at_40db_snr(rng):
    errors = 0
    total = 0
    for trial in range(20):
        bits = rng.integers(0, 2, size=CFG.bits_per_symbol * CFG.data_symbols_per_frame)
        tx = ofdm_modulate(CFG, bits)
        h = np.array([1.0, 0.25 * np.exp(1j * rng.uniform(0, 2 * np.pi))])
        rx = fir_convolve(tx, h)
        rx = rx + awgn_complex(rx.size, power_dbm(rx) - 40.0, seed=trial)
        ber, detected, _ = ofdm_receive(CFG, rx, bits)
        assert detected
        errors += ber * bits.size
        total += bits.size
    assert errors / total < 1e-3


def test_detection_offset_recovered(rng):
    bits = rng.integers(0, 2, size=CFG.bits_per_symbol)
    frame = ofdm_modulate(CFG, bits)
    padded = np.concatenate([awgn_complex(37, -40.0, seed=3), frame])
    offset, peak = detect_preamble(CFG, padded)
    assert offset == 37 and peak > 0.9
    ber, detected, _ = ofdm_receive(CFG, padded, bits)
    assert detected and ber == 0.0


def test_ber_count_basics(rng):
    a = rng.integers(0, 2, size=100_000)
    b = rng.integers(0, 2, size=100_000)
    assert ber_count(a, a) == 0.0
    assert ber_count(a, 1 - a) == 1.0
    assert ber_count(a, b) == pytest.approx(0.5, abs=0.01)
    with pytest.raises(ValueError):
        ber_count(a, a[:-1])


def test_symbol_level_ber_matches_analytic_formula(rng):
    """Uncoded Gray 16-QAM over AWGN vs the decision-region enumeration."""
    n_sym = 400_000
    bits = rng.integers(0, 2, size=4 * n_sym)
    sym = qam16_map(bits)
    for esn0_db in (8.0, 12.0, 16.0):
        sigma = np.sqrt(0.5 * 10 ** (-esn0_db / 10))
        noisy = sym + sigma * (rng.standard_normal(n_sym) + 1j * rng.standard_normal(n_sym))
        measured = ber_count(bits, qam16_demap(noisy))
        expected = qam16_ber_analytic(esn0_db)
        if expected >= 1e-4:
            assert expected / 2 < measured < expected * 2


def test_config_validation():
    with pytest.raises(ValueError):
        OfdmConfig(cp_len=64)
    with pytest.raises(ValueError):
        OfdmConfig(used_subcarriers=64)
    with pytest.raises(ValueError):
        OfdmConfig(pilot_offsets=(40,))
