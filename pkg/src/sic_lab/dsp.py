"""Complex-baseband primitives shared by every layer of the simulator.

Power convention: a complex sequence with unit variance sits at 0 dBm, i.e.
power_dbm(x) = 10*log10(mean |x[k]|^2).  Gains quoted in dB are power gains;
the matching amplitude multiplier is 10**(g_db/20).
"""

from __future__ import annotations

import numpy as np


class SilentSignalError(ValueError):
    """Raised when an operation needs nonzero power but the input is silent."""


def db_to_amplitude(gain_db: float) -> float:
    return 10.0 ** (gain_db / 20.0)


def power_dbm(x: np.ndarray) -> float:
    """Mean-square power of a complex sequence on the dBm scale."""
    x = np.asarray(x)
    if x.size == 0:
        raise ValueError("power_dbm: empty input")
    p = float(np.mean(np.abs(x) ** 2))
    if p == 0.0:
        raise SilentSignalError("power_dbm: silent signal (zero power)")
    return 10.0 * np.log10(p)


def scale_to_dbm(x: np.ndarray, target_dbm: float) -> np.ndarray:
    """Rescale so that power_dbm(result) == target_dbm."""
    gain = db_to_amplitude(target_dbm - power_dbm(x))
    return np.asarray(x) * gain


def fir_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Causal linear convolution truncated to len(x); x[k<0] = 0."""
    h = np.asarray(h)
    if h.size == 0:
        raise ValueError("fir_convolve: empty filter")
    x = np.asarray(x)
    return np.convolve(x, h)[: x.size]


def awgn_complex(n: int, power_dbm_level: float, seed) -> np.ndarray:
    """Circularly-symmetric complex Gaussian noise at the given dBm level.

    Per-sample variance 10**(level/10), split equally across I and Q.
    `seed` is anything np.random.default_rng accepts (int or SeedSequence);
    a fixed seed gives a bit-identical sequence.
    """
    if n <= 0:
        raise ValueError("awgn_complex: n must be positive")
    rng = np.random.default_rng(seed)
    sigma = np.sqrt(0.5 * 10.0 ** (power_dbm_level / 10.0))
    return sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
