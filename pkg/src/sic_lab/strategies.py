"""The four ADC-aware optimization setups and the training loop around them.

Each strategy is a different wiring of model, SIC subtraction, gain stage and
converter blocks:

* bpad -- the converter is modeled up to its saturation: the clip is a real
  layer in the graph (adjoints blocked outside the range) and the remaining
  quantization error is injected behind a stop gradient.
* ste  -- the converter is present in the forward values only; the backward
  pass treats the whole chain as identity.
* agc  -- frame-wise feedforward gains replace the fixed LNA; the loss sees
  the gain-compensated residual, using the RSSI-quantized gain report.
* dta  -- offline training against quantized unity-gain recordings of the
  received signal; no gain stage or converter appears in the graph.

`train` runs one Adam step per sequence, an epoch being one pass over the
corpus, and snapshots residual metrics at every epoch entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import autodiff as ad
from .dsp import awgn_complex, db_to_amplitude, fir_convolve, scale_to_dbm
from .kernels import mean_abs_sq
from .frontend import (
    AdcSpec,
    AgcSpec,
    PaModel,
    SiChannel,
    adc_quantize,
    agc_gains,
    pa_apply,
    pa_distort,
    per_sample_amplitude,
)
from .model import HammersteinModel, features, model_forward, model_predict
from .waveform import OfdmConfig, ofdm_modulate


class StrategyKind(Enum):
    BPAD = "bpad"
    STE = "ste"
    AGC = "agc"
    DTA = "dta"

    @classmethod
    def parse(cls, name: str) -> "StrategyKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(
                f"unknown strategy {name!r}; expected one of "
                f"{[k.value for k in cls]}"
            ) from None


@dataclass
class TrainConfig:
    strategy: StrategyKind
    adc: AdcSpec = field(default_factory=AdcSpec)
    lna_gain_db: float = 30.0
    agc: AgcSpec | None = None
    epochs: int = 6000
    lr: float = 0.03

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("TrainConfig: epochs must be >= 1")
        if self.strategy is StrategyKind.AGC and self.agc is None:
            raise ValueError("TrainConfig: AGC strategy needs an AgcSpec")


@dataclass
class SequenceData:
    """One training sequence: transmit signal, its features, and the received
    signal (SOI absent); `y_rec` carries the unity-gain quantized recording
    used by the offline strategy."""

    s: np.ndarray
    feats: np.ndarray
    y_a: np.ndarray
    y_rec: np.ndarray | None = None


@dataclass
class FrozenGraph:
    """Forward-pass constants of one built graph.

    Re-building the graph with these pinned yields the smooth surrogate whose
    exact gradient the backward pass computes; finite-difference oracles
    difference that surrogate.
    """

    sat_mask: tuple | None = None  # (re, im) 0/1 float arrays
    sat_offset: tuple | None = None
    quant_err: tuple | None = None
    agc_amp: np.ndarray | None = None
    agc_comp: np.ndarray | None = None


@dataclass
class GraphInfo:
    r_analog: np.ndarray
    r_digital: np.ndarray
    loss: float
    sat_count: int
    n_components: int
    frozen: FrozenGraph


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")
        self.epoch = epoch


def _sat_pair(ur, ui, lam, frozen: FrozenGraph, record: FrozenGraph):
    if frozen is not None:
        mr, mi = frozen.sat_mask
        or_, oi = frozen.sat_offset
        return ad.add(ad.smul(ur, mr), or_), ad.add(ad.smul(ui, mi), oi)
    vr = ad.saturation(ur, lam)
    vi = ad.saturation(ui, lam)
    mask_r = (np.abs(vr.value) < lam).astype(np.float64)
    mask_i = (np.abs(vi.value) < lam).astype(np.float64)
    record.sat_mask = (mask_r, mask_i)
    record.sat_offset = (vr.value - mask_r * ur.value, vi.value - mask_i * ui.value)
    return vr, vi


def _adc_pair(ur, ui, adc: AdcSpec, frozen: FrozenGraph, record: FrozenGraph):
    if frozen is not None:
        er, ei = frozen.quant_err
        return ad.add(ur, er), ad.add(ui, ei)
    qr = ad.quantize_ste(ur, adc.lam, adc.n_levels)
    qi = ad.quantize_ste(ui, adc.lam, adc.n_levels)
    record.quant_err = (qr.value - ur.value, qi.value - ui.value)
    return qr, qi


def build_residual_graph(
    cfg: TrainConfig,
    model: HammersteinModel,
    seq: SequenceData,
    tape: ad.Tape,
    frozen: FrozenGraph | None = None,
):
    """Wire the strategy's residual graph on `tape`.

    Returns (loss_node, GraphInfo).  With `frozen` the nonsmooth pieces
    (saturation masks, quantization errors, AGC gains) are pinned to the
    supplied constants, producing the smooth surrogate of that base point.
    """
    record = FrozenGraph()
    yr, yi = model_forward(model, seq.feats, tape)

    if cfg.strategy is StrategyKind.DTA:
        if seq.y_rec is None:
            raise ValueError("DTA strategy needs recorded sequences (y_rec)")
        rr = ad.sub(tape.constant(seq.y_rec.real), yr)
        ri = ad.sub(tape.constant(seq.y_rec.imag), yi)
        loss = ad.mse_loss(rr, ri)
        r_dig = rr.value + 1j * ri.value
        comps = seq.y_rec.view(np.float64)
        info = GraphInfo(
            r_analog=(seq.y_a.real - yr.value) + 1j * (seq.y_a.imag - yi.value),
            r_digital=r_dig,
            loss=loss.value,
            sat_count=int(np.count_nonzero(np.abs(comps) >= cfg.adc.lam)),
            n_components=comps.size,
            frozen=record,
        )
        return loss, info

    rar = ad.sub(tape.constant(seq.y_a.real), yr)
    rai = ad.sub(tape.constant(seq.y_a.imag), yi)
    r_analog = rar.value + 1j * rai.value
    lam = cfg.adc.lam

    if cfg.strategy is StrategyKind.AGC:
        if frozen is not None:
            amp, rssi_amp = frozen.agc_amp, frozen.agc_comp
        else:
            gains_db, rssi_db = agc_gains(cfg.agc, r_analog)
            amp = per_sample_amplitude(cfg.agc, gains_db, r_analog.size)
            rssi_amp = per_sample_amplitude(cfg.agc, rssi_db, r_analog.size)
        record.agc_amp, record.agc_comp = amp, rssi_amp
        ur, ui = ad.smul(rar, amp), ad.smul(rai, amp)
        vr, vi = _sat_pair(ur, ui, lam, frozen, record)
        qr, qi = _adc_pair(vr, vi, cfg.adc, frozen, record)
        # digital gain compensation divides by the RSSI-reported gain
        rr, ri = ad.sdiv(qr, rssi_amp), ad.sdiv(qi, rssi_amp)
    else:
        amp = db_to_amplitude(cfg.lna_gain_db)
        ur, ui = ad.smul(rar, amp), ad.smul(rai, amp)
        if cfg.strategy is StrategyKind.BPAD:
            vr, vi = _sat_pair(ur, ui, lam, frozen, record)
            qr, qi = _adc_pair(vr, vi, cfg.adc, frozen, record)
        else:  # STE: converter invisible to the backward pass
            qr, qi = _adc_pair(ur, ui, cfg.adc, frozen, record)
        rr, ri = qr, qi

    loss = ad.mse_loss(rr, ri)
    sat = int(np.count_nonzero(np.abs(qr.value) >= lam)) + int(
        np.count_nonzero(np.abs(qi.value) >= lam)
    )
    info = GraphInfo(
        r_analog=r_analog,
        r_digital=rr.value + 1j * ri.value,
        loss=loss.value,
        sat_count=sat,
        n_components=qr.value.size + qi.value.size,
        frozen=record,
    )
    return loss, info


@dataclass
class DigitalForward:
    """Gradient-free recomputation of one sequence's forward path."""

    r_analog: np.ndarray
    r_digital: np.ndarray
    loss: float
    sat_count: int
    n_components: int
    sat_count_steady: int
    n_components_steady: int


def forward_digital(cfg: TrainConfig, model: HammersteinModel, seq: SequenceData, skip_head: int = 0):
    """Evaluate the strategy's forward path with plain array code (no tape).

    `skip_head` additionally reports saturation statistics that ignore the
    first samples of the sequence (used to judge AGC settling).
    """
    y_hat = model_predict(model, seq.s, seq.feats)
    if cfg.strategy is StrategyKind.DTA:
        r_analog = seq.y_a - y_hat
        r_dig = seq.y_rec - y_hat
        q = seq.y_rec
    else:
        r_analog = seq.y_a - y_hat
        if cfg.strategy is StrategyKind.AGC:
            gains_db, rssi_db = agc_gains(cfg.agc, r_analog)
            amp = per_sample_amplitude(cfg.agc, gains_db, r_analog.size)
            rssi_amp = per_sample_amplitude(cfg.agc, rssi_db, r_analog.size)
            q = adc_quantize(cfg.adc, r_analog * amp)
            # compensate per real channel: complex/real division rounds
            # differently from the plain quotient of the components
            r_dig = (q.real / rssi_amp) + 1j * (q.imag / rssi_amp)
        else:
            q = adc_quantize(cfg.adc, r_analog * db_to_amplitude(cfg.lna_gain_db))
            r_dig = q
    comps = np.abs(q.view(np.float64))
    sat = comps >= cfg.adc.lam
    loss = mean_abs_sq(r_dig)
    return DigitalForward(
        r_analog=r_analog,
        r_digital=r_dig,
        loss=loss,
        sat_count=int(np.count_nonzero(sat)),
        n_components=comps.size,
        sat_count_steady=int(np.count_nonzero(sat[2 * skip_head :])),
        n_components_steady=max(comps.size - 2 * skip_head, 0),
    )


@dataclass
class TrainLog:
    """Per-epoch residual metrics; row e is the state entering epoch e."""

    residual_dbm_analog: np.ndarray
    residual_dbm_digital: np.ndarray
    saturated_fraction: np.ndarray
    loss: np.ndarray
    steady_saturated_fraction: np.ndarray  # ignores each sequence's first AGC frames

    def __len__(self):
        return self.residual_dbm_analog.size


def train(cfg: TrainConfig, model: HammersteinModel, corpus):
    """Optimize `model` in place; returns the per-epoch TrainLog.

    Deterministic for a fixed corpus and model state.  Raises
    TrainingDiverged (with the epoch recorded) if the loss leaves the finite
    range.
    """
    n_ep = cfg.epochs
    log = TrainLog(
        residual_dbm_analog=np.empty(n_ep),
        residual_dbm_digital=np.empty(n_ep),
        saturated_fraction=np.empty(n_ep),
        loss=np.empty(n_ep),
        steady_saturated_fraction=np.empty(n_ep),
    )
    params = model.parameters()
    skip_head = 10 * cfg.agc.frame_len if cfg.strategy is StrategyKind.AGC else 0

    for epoch in range(n_ep):
        p_an = p_dig = loss_sum = 0.0
        sat = n_comp = sat_st = n_comp_st = 0
        for seq in corpus:
            fd = forward_digital(cfg, model, seq, skip_head=skip_head)
            p_an += mean_abs_sq(fd.r_analog)
            p_dig += mean_abs_sq(fd.r_digital)
            loss_sum += fd.loss
            sat += fd.sat_count
            n_comp += fd.n_components
            sat_st += fd.sat_count_steady
            n_comp_st += fd.n_components_steady
        n_seq = len(corpus)
        if not np.isfinite(loss_sum):
            raise TrainingDiverged(epoch, loss_sum / n_seq)
        log.residual_dbm_analog[epoch] = 10.0 * np.log10(p_an / n_seq)
        log.residual_dbm_digital[epoch] = 10.0 * np.log10(p_dig / n_seq)
        log.saturated_fraction[epoch] = sat / n_comp
        log.steady_saturated_fraction[epoch] = sat_st / max(n_comp_st, 1)
        log.loss[epoch] = loss_sum / n_seq

        for seq in corpus:
            tape = ad.Tape()
            loss, _ = build_residual_graph(cfg, model, seq, tape)
            if not np.isfinite(loss.value):
                raise TrainingDiverged(epoch, loss.value)
            ad.zero_grads(params)
            tape.backward(loss)
            ad.adam_step(params, cfg.lr)
    return log


# ---------------------------------------------------------------------------
# data preparation
# ---------------------------------------------------------------------------


def make_training_corpus(
    ofdm_cfg: OfdmConfig,
    pa: PaModel,
    channel: SiChannel,
    noise_dbm: float | None,
    n_sequences: int,
    sequence_len: int,
    seed,
):
    """Fixed corpus of OFDM transmit sequences and their received responses.

    Each transmit sequence is normalized to exactly unit variance; the SOI is
    absent, and every sequence carries one frozen noise realization.
    """
    seed = list(np.atleast_1d(seed).astype(np.int64))
    corpus = []
    for i in range(n_sequences):
        s = transmit_stream(ofdm_cfg, sequence_len, seed + [i, 0])
        y_a = fir_convolve(pa_apply(pa, s), channel.taps)
        if noise_dbm is not None:
            y_a = y_a + awgn_complex(sequence_len, noise_dbm, seed + [i, 1])
        corpus.append(SequenceData(s=s, feats=features(s), y_a=y_a))
    return corpus


def calibrate_pa(pa: PaModel, ofdm_cfg: OfdmConfig, n_samples: int = 1 << 16) -> PaModel:
    """Pin the amplifier gain against the actual waveform family.

    The rated output power is a property of the transmitted waveform, whose
    peak statistics differ slightly from the Gaussian assumed by the default
    gain.  A fixed-seed reference stream keeps the calibration deterministic.
    """
    ref = transmit_stream(ofdm_cfg, n_samples, [0x0FD3, 0])
    p = pa_distort(pa, ref)
    gain = db_to_amplitude(pa.output_dbm) / np.sqrt(mean_abs_sq(p))
    return replace(pa, gain=float(gain))


def transmit_stream(ofdm_cfg: OfdmConfig, n_samples: int, seed) -> np.ndarray:
    """Concatenated random OFDM frames, truncated and scaled to unit variance."""
    rng = np.random.default_rng(seed)
    chunks = []
    total = 0
    while total < n_samples:
        bits = rng.integers(0, 2, size=ofdm_cfg.bits_per_symbol * ofdm_cfg.data_symbols_per_frame)
        frame = ofdm_modulate(ofdm_cfg, bits)
        chunks.append(frame)
        total += frame.size
    stream = np.concatenate(chunks)[:n_samples]
    return scale_to_dbm(stream, 0.0)


def dta_record_dataset(corpus, adc: AdcSpec):
    """Quantized unity-gain recordings of each received sequence (the gain
    stage is bypassed and analog cancellation is off while recording)."""
    return [replace(seq, y_rec=adc_quantize(adc, seq.y_a)) for seq in corpus]
