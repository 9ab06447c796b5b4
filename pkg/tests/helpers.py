"""Shared test oracles: finite differences, hand convolution, analytic QAM BER."""

import math

import numpy as np

from sic_lab import autodiff as ad
from sic_lab import strategies as st


def finite_diff_check(params, grads, loss_fn, rng, n_coords, rel_tol):
    """Central finite differences of `loss_fn` against recorded gradients.

    Perturbs up to `n_coords` randomly chosen parameter coordinates (step
    1e-6).  Errors are taken relative to the coordinate or, for near-zero
    coordinates, to 1% of the gradient's overall scale, so that pure FP
    roundoff in the differences cannot register as a mismatch.
    """
    flat_views = [p.value.reshape(-1) for p in params]
    grad_views = [g.reshape(-1) for g in grads]
    sizes = np.array([v.size for v in flat_views])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_coords, total), replace=False)
    bounds = np.cumsum(sizes)
    gmax = max(float(np.max(np.abs(g))) for g in grad_views)
    floor = max(1e-2 * gmax, 1e-10)
    worst = 0.0
    for flat_idx in picks:
        which = int(np.searchsorted(bounds, flat_idx, side="right"))
        local = int(flat_idx - (bounds[which] - sizes[which]))
        view = flat_views[which]
        old = view[local]
        h = 1e-6 * max(1.0, abs(old))
        view[local] = old + h
        lp = loss_fn()
        view[local] = old - h
        lm = loss_fn()
        view[local] = old
        fd = (lp - lm) / (2.0 * h)
        g = grad_views[which][local]
        denom = max(abs(fd), abs(g), floor)
        worst = max(worst, abs(fd - g) / denom)
    assert worst < rel_tol, f"finite-difference mismatch: worst rel err {worst:.3e}"
    return worst


def strategy_loss_and_grads(cfg, model, seq):
    """Build the strategy graph once; returns (info, grads, frozen_loss_fn)."""
    tape = ad.Tape()
    loss, info = st.build_residual_graph(cfg, model, seq, tape)
    ad.zero_grads(model.parameters())
    tape.backward(loss)
    grads = [p.grad.copy() for p in model.parameters()]

    def frozen_loss():
        t2 = ad.Tape()
        l2, _ = st.build_residual_graph(cfg, model, seq, t2, frozen=info.frozen)
        return l2.value

    return info, grads, frozen_loss


def conv_truncated_oracle(x, h):
    """Hand convolution: y[k] = sum_m h[m] x[k-m], truncated to len(x)."""
    n, L = len(x), len(h)
    y = np.zeros(n, dtype=np.result_type(x, h))
    for k in range(n):
        for m in range(min(L, k + 1)):
            y[k] += h[m] * x[k - m]
    return y


def qam16_ber_analytic(esn0_db: float) -> float:
    """Exact bit-error probability of Gray 16-QAM over AWGN.

    Enumerates the per-axis decision regions with the Gaussian CDF; per-axis
    levels are {+-1, +-3}/sqrt(10) (unit symbol energy) with Gray bit labels.
    """
    esn0 = 10.0 ** (esn0_db / 10.0)
    sigma = math.sqrt(1.0 / (2.0 * esn0))  # per-axis noise std at Es = 1
    levels = np.array([-3.0, -1.0, 1.0, 3.0]) / math.sqrt(10.0)
    bits = [(0, 0), (0, 1), (1, 1), (1, 0)]
    bounds = [-math.inf] + list(np.array([-2.0, 0.0, 2.0]) / math.sqrt(10.0)) + [math.inf]

    def phi(x):
        if math.isinf(x):
            return 1.0 if x > 0 else 0.0
        return 0.5 * math.erfc(-x / math.sqrt(2.0))

    err = 0.0
    for i, level in enumerate(levels):
        for j in range(4):
            p = phi((bounds[j + 1] - level) / sigma) - phi((bounds[j] - level) / sigma)
            hamming = (bits[i][0] != bits[j][0]) + (bits[i][1] != bits[j][1])
            err += p * hamming
    return err / (4 * 2)  # average over levels, per bit
