"""Simplified OFDM frames with uncoded Gray 16-QAM, plus the matching receiver.

A frame is `preamble_symbols` known full-band training symbols followed by
data symbols; every OFDM symbol carries a cyclic prefix.  The receiver does
correlation-based packet detection against the known preamble, a per-subcarrier
least-squares channel estimate from the preamble, one-tap equalization and
hard-decision demapping.  Detection failure is an in-band outcome reported as
BER = 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Gray order per axis: bits (b_hi, b_lo) -> level index -> amplitude level.
_QAM_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
_QAM_THRESHOLDS = np.array([-2.0, 0.0, 2.0]) / np.sqrt(10.0)
_IDX_TO_BITS = np.array([[0, 0], [0, 1], [1, 1], [1, 0]], dtype=np.int64)


@dataclass(frozen=True)
class OfdmConfig:
    nfft: int = 64
    used_subcarriers: int = 52  # including pilots, symmetric around DC, DC unused
    cp_len: int = 16
    pilot_offsets: tuple = (7, 21)  # pilots at +- these subcarrier offsets
    preamble_symbols: int = 2
    data_symbols_per_frame: int = 8
    detect_threshold: float = 0.6

    def __post_init__(self):
        if self.used_subcarriers % 2 or self.used_subcarriers + 1 > self.nfft:
            raise ValueError("OfdmConfig: used subcarriers must be even and fit nfft")
        if self.cp_len >= self.nfft:
            raise ValueError("OfdmConfig: cp_len must be < nfft")
        if any(p > self.used_subcarriers // 2 for p in self.pilot_offsets):
            raise ValueError("OfdmConfig: pilot offsets outside the used band")

    @property
    def symbol_len(self) -> int:
        return self.nfft + self.cp_len

    @property
    def used_offsets(self) -> np.ndarray:
        half = self.used_subcarriers // 2
        return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])

    @property
    def pilot_positions(self) -> np.ndarray:
        return np.array(sorted([-p for p in self.pilot_offsets] + list(self.pilot_offsets)))

    @property
    def data_positions(self) -> np.ndarray:
        pilots = set(self.pilot_positions.tolist())
        return np.array([k for k in self.used_offsets if k not in pilots])

    @property
    def bits_per_symbol(self) -> int:
        return 4 * self.data_positions.size

    def frame_len(self, n_data_symbols: int | None = None) -> int:
        if n_data_symbols is None:
            n_data_symbols = self.data_symbols_per_frame
        return (self.preamble_symbols + n_data_symbols) * self.symbol_len


def qam16_map(bits: np.ndarray) -> np.ndarray:
    """Gray-coded 16-QAM, unit average symbol energy.

    Bit quads (b0 b1 b2 b3) map (b0 b1) -> I and (b2 b3) -> Q with Gray order
    00, 01, 11, 10 running from -3 to +3 (scaled by 1/sqrt(10)).
    """
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % 4:
        raise ValueError("qam16_map: bit count must be divisible by 4")
    quads = bits.reshape(-1, 4)
    i_idx = (quads[:, 0] << 1) | (quads[:, 0] ^ quads[:, 1])
    q_idx = (quads[:, 2] << 1) | (quads[:, 2] ^ quads[:, 3])
    return _QAM_LEVELS[i_idx] + 1j * _QAM_LEVELS[q_idx]


def qam16_demap(symbols: np.ndarray) -> np.ndarray:
    """Nearest-point hard decision; exact ties fall to the lower Gray index."""
    symbols = np.asarray(symbols)
    i_idx = np.searchsorted(_QAM_THRESHOLDS, symbols.real, side="left")
    q_idx = np.searchsorted(_QAM_THRESHOLDS, symbols.imag, side="left")
    out = np.empty((symbols.size, 4), dtype=np.int64)
    out[:, 0:2] = _IDX_TO_BITS[i_idx]
    out[:, 2:4] = _IDX_TO_BITS[q_idx]
    return out.reshape(-1)


def ber_count(tx: np.ndarray, rx: np.ndarray) -> float:
    tx = np.asarray(tx)
    rx = np.asarray(rx)
    if tx.shape != rx.shape:
        raise ValueError("ber_count: length mismatch")
    return float(np.mean(tx != rx))


def _preamble_pattern(cfg: OfdmConfig) -> np.ndarray:
    """Fixed full-band QPSK pattern (+-1 +-j)/sqrt(2), one value per used bin."""
    rng = np.random.default_rng(2486)
    signs = rng.integers(0, 2, size=(cfg.used_subcarriers, 2)) * 2 - 1
    return (signs[:, 0] + 1j * signs[:, 1]) / np.sqrt(2.0)


def _pilot_pattern(cfg: OfdmConfig) -> np.ndarray:
    base = np.array([1.0, 1.0, 1.0, -1.0])
    reps = -(-cfg.pilot_positions.size // base.size)
    return np.tile(base, reps)[: cfg.pilot_positions.size].astype(np.complex128)


def _symbols_to_time(cfg: OfdmConfig, freq_rows: np.ndarray) -> np.ndarray:
    """IFFT each row onto the full grid and prepend cyclic prefixes.

    Scaled so a row with unit-energy entries on all used bins has unit
    time-domain variance.
    """
    n_rows = freq_rows.shape[0]
    grid = np.zeros((n_rows, cfg.nfft), dtype=np.complex128)
    grid[:, cfg.used_offsets % cfg.nfft] = freq_rows
    time = np.fft.ifft(grid, axis=1) * (cfg.nfft / np.sqrt(cfg.used_subcarriers))
    with_cp = np.concatenate([time[:, -cfg.cp_len :], time], axis=1)
    return with_cp.reshape(-1)


def _time_to_symbols(cfg: OfdmConfig, samples: np.ndarray, n_symbols: int) -> np.ndarray:
    """Strip prefixes, FFT, and return the used-bin values row per symbol."""
    blocks = samples[: n_symbols * cfg.symbol_len].reshape(n_symbols, cfg.symbol_len)
    spectrum = np.fft.fft(blocks[:, cfg.cp_len :], axis=1) * (
        np.sqrt(cfg.used_subcarriers) / cfg.nfft
    )
    return spectrum[:, cfg.used_offsets % cfg.nfft]


def ofdm_modulate(cfg: OfdmConfig, payload_bits: np.ndarray) -> np.ndarray:
    """Build one frame: preamble symbols, then the payload on data subcarriers.

    The payload is zero-padded up to a whole number of OFDM symbols; padding is
    recoverable from the payload length and is excluded from BER counting by
    the receiver.
    """
    payload_bits = np.asarray(payload_bits, dtype=np.int64)
    if payload_bits.size == 0:
        raise ValueError("ofdm_modulate: empty payload")
    bps = cfg.bits_per_symbol
    n_data_symbols = -(-payload_bits.size // bps)
    padded = np.zeros(n_data_symbols * bps, dtype=np.int64)
    padded[: payload_bits.size] = payload_bits
    data_syms = qam16_map(padded).reshape(n_data_symbols, -1)

    rows = np.zeros(
        (cfg.preamble_symbols + n_data_symbols, cfg.used_subcarriers),
        dtype=np.complex128,
    )
    rows[: cfg.preamble_symbols] = _preamble_pattern(cfg)
    used = cfg.used_offsets
    data_cols = np.searchsorted(used, cfg.data_positions)
    pilot_cols = np.searchsorted(used, cfg.pilot_positions)
    rows[cfg.preamble_symbols :, data_cols] = data_syms
    rows[cfg.preamble_symbols :, pilot_cols] = _pilot_pattern(cfg)
    return _symbols_to_time(cfg, rows)


def preamble_waveform(cfg: OfdmConfig) -> np.ndarray:
    """Time-domain preamble (with prefixes) the detector correlates against."""
    rows = np.tile(_preamble_pattern(cfg), (cfg.preamble_symbols, 1))
    return _symbols_to_time(cfg, rows)


def detect_preamble(cfg: OfdmConfig, rx: np.ndarray):
    """Normalized cross-correlation search for the frame start.

    Returns (offset, peak); detection succeeds when peak >= detect_threshold.
    """
    p = preamble_waveform(cfg)
    rx = np.asarray(rx)
    if rx.size < p.size:
        return 0, 0.0
    num = np.abs(np.correlate(rx, p, mode="valid"))
    energy = np.concatenate([[0.0], np.cumsum(np.abs(rx) ** 2)])
    window = energy[p.size :] - energy[: rx.size - p.size + 1]
    denom = np.sqrt(window * np.sum(np.abs(p) ** 2))
    corr = np.where(denom > 0, num / np.maximum(denom, 1e-300), 0.0)
    offset = int(np.argmax(corr))
    return offset, float(corr[offset])


def ofdm_receive(cfg: OfdmConfig, rx: np.ndarray, tx_bits: np.ndarray):
    """Demodulate one frame and count errors against the transmitted bits.

    Returns (ber, detected, sinr_est_db).  On detection failure ber = 0.5 and
    sinr_est is NaN.  `sinr_est` is an EVM-based estimate from the equalized
    constellation; pad bits are excluded from the error count.
    """
    tx_bits = np.asarray(tx_bits, dtype=np.int64)
    bps = cfg.bits_per_symbol
    n_data_symbols = -(-tx_bits.size // bps)
    needed = cfg.frame_len(n_data_symbols)

    offset, peak = detect_preamble(cfg, rx)
    if peak < cfg.detect_threshold or offset + needed > np.asarray(rx).size:
        return 0.5, False, float("nan")

    frame = np.asarray(rx)[offset : offset + needed]
    rows = _time_to_symbols(cfg, frame, cfg.preamble_symbols + n_data_symbols)
    h_est = np.mean(rows[: cfg.preamble_symbols] / _preamble_pattern(cfg), axis=0)

    used = cfg.used_offsets
    data_cols = np.searchsorted(used, cfg.data_positions)
    eq = rows[cfg.preamble_symbols :, data_cols] / h_est[data_cols]
    bits = qam16_demap(eq.reshape(-1))
    ber = ber_count(tx_bits, bits[: tx_bits.size])

    decided = qam16_map(bits)
    err_pow = np.mean(np.abs(eq.reshape(-1) - decided) ** 2)
    sig_pow = np.mean(np.abs(decided) ** 2)
    sinr_est = float("inf") if err_pow == 0 else 10.0 * np.log10(sig_pow / err_pow)
    return ber, True, sinr_est
