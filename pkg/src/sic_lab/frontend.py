"""Behavioral models of the analog path: PA, SI channel, LNA/AGC, and the ADC.

Everything between the digital transmit samples and the digital residual is
modeled here.  All blocks are pure functions of their inputs plus explicit
seeds, so front-end instances can be evaluated concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsp import awgn_complex, db_to_amplitude, fir_convolve


@dataclass(frozen=True)
class PaModel:
    """Memoryless odd-order polynomial power amplifier.

    z[k] = a1*s[k] + a3*|s[k]|^2 s[k] + a5*|s[k]|^4 s[k], times a fixed gain
    that places a unit-variance input at `output_dbm`.  The default gain
    assumes circular-Gaussian statistics; `calibrate_pa` (strategies module)
    pins it against the actual waveform family instead, so every block of an
    experiment sees one and the same amplifier.
    """

    a1: complex = 1.0
    a3: complex = -0.08 - 0.01j
    a5: complex = 0.005j
    output_dbm: float = 20.0
    gain: float | None = None

    def __post_init__(self):
        if self.a1 == 0:
            raise ValueError("PaModel: a1 must be nonzero")

    def nominal_gain(self) -> float:
        if self.gain is not None:
            return self.gain
        # E|p(s)|^2 for s ~ CN(0,1): with t=|s|^2 ~ Exp(1), E t^m = m!.
        a1, a3, a5 = complex(self.a1), complex(self.a3), complex(self.a5)
        mean_pow = (
            abs(a1) ** 2
            + 6.0 * abs(a3) ** 2
            + 120.0 * abs(a5) ** 2
            + 2.0 * (a1 * np.conj(a3)).real * 2.0
            + 2.0 * (a1 * np.conj(a5)).real * 6.0
            + 2.0 * (a3 * np.conj(a5)).real * 24.0
        )
        return db_to_amplitude(self.output_dbm) / np.sqrt(mean_pow)


def pa_distort(pa: PaModel, s: np.ndarray) -> np.ndarray:
    """The unscaled polynomial part of the amplifier."""
    s = np.asarray(s, dtype=np.complex128)
    t = np.abs(s) ** 2
    return s * (pa.a1 + pa.a3 * t + pa.a5 * t * t)


def pa_apply(pa: PaModel, s: np.ndarray) -> np.ndarray:
    """Amplify a unit-variance baseband signal to the PA output level."""
    return pa.nominal_gain() * pa_distort(pa, s)


@dataclass
class SiChannel:
    """Time-invariant linear self-interference coupling path."""

    taps: np.ndarray
    passive_isolation_db: float


def make_si_channel(
    seed, n_taps: int = 32, passive_isolation_db: float = 35.0, decay: float = 0.15
) -> SiChannel:
    """Exponentially decaying complex-Gaussian FIR, normalized so a white
    input loses exactly `passive_isolation_db` of power through it."""
    if n_taps < 1:
        raise ValueError("make_si_channel: n_taps must be >= 1")
    rng = np.random.default_rng(seed)
    taps = (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)) * np.exp(
        -decay * np.arange(n_taps)
    )
    taps *= np.sqrt(10.0 ** (-passive_isolation_db / 10.0) / np.sum(np.abs(taps) ** 2))
    return SiChannel(taps=taps, passive_isolation_db=passive_isolation_db)


@dataclass(frozen=True)
class AdcSpec:
    """Mid-rise quantizer with saturation threshold `lam` and `bits` bits."""

    bits: int = 12
    lam: float = 1.0

    @property
    def n_levels(self) -> int:
        return 2**self.bits

    @property
    def delta(self) -> float:
        return 2.0 * self.lam / (self.n_levels - 1)


def clip_g(x, lam: float):
    """Saturation: -lam for x <= -lam, x inside, +lam for x >= lam."""
    return np.clip(x, -lam, lam)


def adc_quantize(spec: AdcSpec, x: np.ndarray) -> np.ndarray:
    """Apply the mid-rise quantizer to the I/Q components individually.

    Output levels are m*delta - lam for m in 0..N-1; values at +-lam mark
    saturated components.  Accepts complex or real input.
    """
    x = np.asarray(x)
    if np.iscomplexobj(x):
        flat = np.ascontiguousarray(x, dtype=np.complex128).view(np.float64)
        return kernels.quantize_midrise(flat, spec.lam, spec.n_levels).view(
            np.complex128
        )
    flat = np.ascontiguousarray(x, dtype=np.float64)
    return kernels.quantize_midrise(flat, spec.lam, spec.n_levels)


def saturated_fraction(q: np.ndarray, lam: float) -> float:
    """Fraction of I/Q components sitting at +-lam in a quantized signal."""
    q = np.asarray(q)
    comps = q.view(np.float64) if np.iscomplexobj(q) else q
    return float(np.mean(np.abs(comps) >= lam))


@dataclass(frozen=True)
class LnaSpec:
    """Low-noise amplifier modeled as a pure power gain."""

    gain_db: float

    @property
    def amplitude(self) -> float:
        return db_to_amplitude(self.gain_db)


@dataclass(frozen=True)
class AgcSpec:
    """Frame-wise feedforward AGC with a square-law detector.

    Per frame the detector measures mean |x|^2, the gain steers that power to
    `setpoint_dbm` within [gain_min_db, gain_max_db], and the reported gain
    (RSSI) is re-quantized in the dB domain by `rssi_adc` spanning the gain
    range.  rssi_adc=None reports the exact gain (used by tests).
    """

    frame_len: int = 64
    setpoint_dbm: float = -12.0
    gain_min_db: float = -20.0
    gain_max_db: float = 40.0
    rssi_adc: AdcSpec | None = field(default_factory=AdcSpec)

    def __post_init__(self):
        if self.frame_len < 1:
            raise ValueError("AgcSpec: frame_len must be >= 1")
        if not self.gain_min_db < self.gain_max_db:
            raise ValueError("AgcSpec: gain_min_db must be < gain_max_db")


def agc_gains(spec: AgcSpec, x: np.ndarray):
    """Per-frame gains for a signal, plus their RSSI-quantized report.

    Returns (gains_db, rssi_db), one entry per frame of `frame_len` samples;
    a short tail frame uses whatever samples remain.
    """
    x = np.asarray(x)
    if x.size < 1:
        raise ValueError("agc_gains: empty input")
    n_full, tail = divmod(x.size, spec.frame_len)
    sq = x.real * x.real + x.imag * x.imag if np.iscomplexobj(x) else x * x
    powers = np.empty(n_full + (1 if tail else 0))
    if n_full:
        powers[:n_full] = sq[: n_full * spec.frame_len].reshape(n_full, -1).mean(axis=1)
    if tail:
        powers[-1] = sq[n_full * spec.frame_len :].mean()
    gains = np.full(powers.size, float(spec.gain_max_db))
    live = powers > 0.0
    gains[live] = np.clip(
        spec.setpoint_dbm - 10.0 * np.log10(powers[live]),
        spec.gain_min_db,
        spec.gain_max_db,
    )
    if spec.rssi_adc is None:
        return gains, gains.copy()
    center = 0.5 * (spec.gain_min_db + spec.gain_max_db)
    half = 0.5 * (spec.gain_max_db - spec.gain_min_db)
    rssi = (
        kernels.quantize_midrise(
            np.ascontiguousarray(gains - center),
            half,
            spec.rssi_adc.n_levels,
        )
        + center
    )
    return gains, rssi


def per_sample_amplitude(spec: AgcSpec, gains_db: np.ndarray, n: int) -> np.ndarray:
    """Expand per-frame dB gains into a per-sample amplitude multiplier."""
    return np.repeat(db_to_amplitude(gains_db), spec.frame_len)[:n]


def simulate_receive(
    z: np.ndarray,
    channel: SiChannel,
    soi: np.ndarray | None,
    noise_power_dbm: float | None,
    seed,
) -> np.ndarray:
    """Received analog signal: SI through the channel, plus SOI and noise.

    `soi=None` models the training condition (no remote transmission);
    `noise_power_dbm=None` disables the noise floor.
    """
    y = fir_convolve(z, channel.taps)
    if soi is not None:
        y = y + np.asarray(soi)
    if noise_power_dbm is not None:
        y = y + awgn_complex(y.size, noise_power_dbm, seed)
    return y
