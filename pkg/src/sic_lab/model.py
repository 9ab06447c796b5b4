"""Hammerstein self-interference model.

A sample-wise MLP nonlinearity (features re, im, |s| so amplitude-dependent
distortion is expressible) feeds a complex FIR layer, and the result is
multiplied by a fixed output scale that places the prediction at the expected
SI level.  The scale is never trained; the network itself operates around the
0 dBm level of its unit-variance input.

Parameters are stored with fixed per-group scale factors (effective weight =
raw * scale).  The trained FIR taps are ~1/sqrt(2L) each and Adam moves every
raw coordinate by roughly the learning rate per step, so without the scaling
a 0.03 step would be a third of a typical tap; the factors keep per-step
changes at the percent level for both groups, which is what lets the
saturation-masked training chain survive its early all-clipped phase.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import kernels
from .dsp import db_to_amplitude

MLP_SCALE = 0.25


@dataclass
class HammersteinModel:
    w1: ad.Parameter
    b1: ad.Parameter
    w2: ad.Parameter
    b2: ad.Parameter
    fir_re: ad.Parameter
    fir_im: ad.Parameter
    output_scale: float
    mlp_scale: float = MLP_SCALE
    fir_scale: float = 0.125

    @property
    def hidden(self) -> int:
        return self.w1.value.shape[1]

    @property
    def fir_len(self) -> int:
        return self.fir_re.value.size

    @property
    def fir_taps(self) -> np.ndarray:
        """Effective complex FIR taps."""
        return self.fir_scale * (self.fir_re.value + 1j * self.fir_im.value)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2, self.fir_re, self.fir_im]


def model_init(seed, hidden: int = 16, fir_len: int = 64, si_power_dbm: float = -15.0):
    """Fresh model: Glorot-uniform effective MLP weights, all-zero FIR taps.

    The zero FIR gates the MLP, so a fresh model predicts exactly zero and the
    initial residual sits at the SI level.
    """
    if hidden < 1 or fir_len < 1:
        raise ValueError("model_init: hidden and fir_len must be >= 1")
    rng = np.random.default_rng(seed)
    fir_scale = 1.0 / np.sqrt(2.0 * fir_len)

    def glorot(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out)) / MLP_SCALE

    return HammersteinModel(
        w1=ad.Parameter(glorot(3, hidden)),
        b1=ad.Parameter(np.zeros(hidden)),
        w2=ad.Parameter(glorot(hidden, 2)),
        b2=ad.Parameter(np.zeros(2)),
        fir_re=ad.Parameter(np.zeros(fir_len)),
        fir_im=ad.Parameter(np.zeros(fir_len)),
        output_scale=db_to_amplitude(si_power_dbm),
        mlp_scale=MLP_SCALE,
        fir_scale=float(fir_scale),
    )


def features(s: np.ndarray) -> np.ndarray:
    """Per-sample MLP input (re, im, |s|) as an (n, 3) array."""
    s = np.asarray(s, dtype=np.complex128)
    return np.ascontiguousarray(np.column_stack([s.real, s.imag, np.abs(s)]))


def model_forward(model: HammersteinModel, feats: np.ndarray, tape: ad.Tape):
    """Differentiable forward pass; returns the (re, im) prediction nodes."""
    sm = model.mlp_scale
    h = ad.tanh(
        ad.affine(feats, ad.smul(tape.leaf(model.w1), sm), ad.smul(tape.leaf(model.b1), sm))
    )
    p = ad.affine(h, ad.smul(tape.leaf(model.w2), sm), ad.smul(tape.leaf(model.b2), sm))
    yr, yi = ad.fir_conv(
        ad.column(p, 0),
        ad.column(p, 1),
        ad.smul(tape.leaf(model.fir_re), model.fir_scale),
        ad.smul(tape.leaf(model.fir_im), model.fir_scale),
    )
    return ad.smul(yr, model.output_scale), ad.smul(yi, model.output_scale)


def model_predict(model: HammersteinModel, s: np.ndarray, feats: np.ndarray | None = None):
    """Tape-free forward pass for evaluation and deployment."""
    if feats is None:
        feats = features(s)
    sm = model.mlp_scale
    h = kernels.tanh_fwd(feats @ (model.w1.value * sm) + model.b1.value * sm)
    p = h @ (model.w2.value * sm) + model.b2.value * sm
    yr, yi = kernels.conv_fwd(
        np.ascontiguousarray(p[:, 0]),
        np.ascontiguousarray(p[:, 1]),
        model.fir_re.value * model.fir_scale,
        model.fir_im.value * model.fir_scale,
    )
    return model.output_scale * (yr + 1j * yi)


def fir_path(model: HammersteinModel, p: np.ndarray) -> np.ndarray:
    """FIR + output scale applied to an externally supplied pre-distorted
    signal (bypasses the MLP; used to test the linear tail in isolation)."""
    p = np.asarray(p, dtype=np.complex128)
    yr, yi = kernels.conv_fwd(
        np.ascontiguousarray(p.real),
        np.ascontiguousarray(p.imag),
        model.fir_re.value * model.fir_scale,
        model.fir_im.value * model.fir_scale,
    )
    return model.output_scale * (yr + 1j * yi)


# ---------------------------------------------------------------------------
# checkpoints: one .npz per model, float64 arrays round-trip bit-exactly
# ---------------------------------------------------------------------------


def save_checkpoint(model: HammersteinModel, path, meta: dict | None = None):
    np.savez(
        path,
        w1=model.w1.value,
        b1=model.b1.value,
        w2=model.w2.value,
        b2=model.b2.value,
        fir_re=model.fir_re.value,
        fir_im=model.fir_im.value,
        output_scale=np.float64(model.output_scale),
        mlp_scale=np.float64(model.mlp_scale),
        fir_scale=np.float64(model.fir_scale),
        meta=np.str_(json.dumps(meta or {}, sort_keys=True)),
    )


def load_checkpoint(path):
    with np.load(path) as data:
        model = HammersteinModel(
            w1=ad.Parameter(data["w1"]),
            b1=ad.Parameter(data["b1"]),
            w2=ad.Parameter(data["w2"]),
            b2=ad.Parameter(data["b2"]),
            fir_re=ad.Parameter(data["fir_re"]),
            fir_im=ad.Parameter(data["fir_im"]),
            output_scale=float(data["output_scale"]),
            mlp_scale=float(data["mlp_scale"]),
            fir_scale=float(data["fir_scale"]),
        )
        meta = json.loads(str(data["meta"]))
    return model, meta
