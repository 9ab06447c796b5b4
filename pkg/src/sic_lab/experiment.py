"""Config-driven experiment runners.

`run_learning_experiment` trains every requested (strategy, gain) system and
writes one learning-curve CSV/SVG plus a model checkpoint per run.
`run_ber_sweep` pushes a shared test dataset through each trained system's
receive chain over an SNR grid and writes the merged BER/SINR table.

Everything is derived from (config, seed): sweep tasks run concurrently as
independent processes and results are merged in a fixed order, so outputs are
byte-identical across re-runs (the manifest timestamp being the one exception).
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .dsp import awgn_complex, db_to_amplitude, fir_convolve, scale_to_dbm
from .frontend import adc_quantize, agc_gains, make_si_channel, pa_apply, per_sample_amplitude
from .kernels import mean_abs_sq
from .model import load_checkpoint, model_init, model_predict, save_checkpoint
from .strategies import (
    StrategyKind,
    TrainConfig,
    calibrate_pa,
    dta_record_dataset,
    make_training_corpus,
    train,
    transmit_stream,
)
from .svgplot import Figure, Series, render
from .waveform import ofdm_modulate, ofdm_receive

# seed stream tags; every random draw hangs off [seed, tag, ...]
SEED_CHANNEL, SEED_CORPUS, SEED_MODEL, SEED_TEST = 0, 1, 2, 3

SATURATION_MARKER_DBM = -35.0  # residual level below which the ADC no longer clips

TRAIN_CSV_COLUMNS = ("epoch", "residual_dbm_analog", "residual_dbm_digital", "saturated_fraction", "loss")
BER_CSV_COLUMNS = ("snr_db", "sinr_db", "ber", "detected_fraction", "strategy", "lna_gain_db")


@dataclass(frozen=True)
class RunSpec:
    strategy: StrategyKind
    lna_gain_db: float | None

    @property
    def label(self) -> str:
        if self.lna_gain_db is None:
            return self.strategy.value
        return f"{self.strategy.value}_{self.lna_gain_db:g}"


@dataclass
class MetricsRow:
    snr_db: float
    sinr_db: float
    ber: float
    detected_fraction: float
    strategy: str
    lna_gain_db: float | None


def plan_runs(cfg: ExperimentConfig, strategies=None, gains=None):
    names = [StrategyKind.parse(s) for s in (strategies or cfg.train.strategies)]
    gains = [float(g) for g in (gains or cfg.train.lna_gains_db)]
    runs = []
    for kind in names:
        if kind in (StrategyKind.BPAD, StrategyKind.STE):
            runs.extend(RunSpec(kind, g) for g in gains)
        else:
            runs.append(RunSpec(kind, None))
    return runs


def n_workers(cfg: ExperimentConfig) -> int:
    if cfg.sweep.workers > 0:
        return cfg.sweep.workers
    return max(1, min(os.cpu_count() or 1, 8))


def _pmap(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# learning experiment
# ---------------------------------------------------------------------------


def build_frontend(cfg: ExperimentConfig):
    """Calibrated PA plus the seeded SI channel of this experiment."""
    pa = calibrate_pa(cfg.frontend.pa_model(), cfg.waveform.ofdm_config())
    channel = make_si_channel(
        [cfg.seed, SEED_CHANNEL],
        cfg.frontend.channel_taps,
        cfg.frontend.passive_isolation_db,
        cfg.frontend.channel_decay,
    )
    return pa, channel


def build_corpus(cfg: ExperimentConfig):
    pa, channel = build_frontend(cfg)
    corpus = make_training_corpus(
        cfg.waveform.ofdm_config(),
        pa,
        channel,
        cfg.frontend.noise_floor_dbm,
        cfg.train.sequences,
        cfg.train.sequence_len,
        [cfg.seed, SEED_CORPUS],
    )
    return channel, corpus


def train_config_for(cfg: ExperimentConfig, run: RunSpec) -> TrainConfig:
    return TrainConfig(
        strategy=run.strategy,
        adc=cfg.frontend.adc_spec(),
        lna_gain_db=run.lna_gain_db if run.lna_gain_db is not None else cfg.train.dta_deploy_gain_db,
        agc=cfg.agc.agc_spec() if run.strategy is StrategyKind.AGC else None,
        epochs=cfg.train.epochs,
        lr=cfg.train.lr,
    )


def execute_run(task):
    """Train one system from scratch (worker-safe: rebuilds its own data)."""
    cfg, run = task
    _, corpus = build_corpus(cfg)
    if run.strategy is StrategyKind.DTA:
        corpus = dta_record_dataset(corpus, cfg.frontend.adc_spec())
    model = model_init(
        [cfg.seed, SEED_MODEL],
        cfg.model.hidden,
        cfg.model.fir_len,
        cfg.model.si_power_dbm,
    )
    log = train(train_config_for(cfg, run), model, corpus)
    return run, log, model


def run_learning_experiment(cfg: ExperimentConfig, out_dir, strategies=None, gains=None):
    """Train every planned run and emit CSV + SVG + checkpoint per system."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = plan_runs(cfg, strategies, gains)
    results = _pmap(execute_run, [(cfg, r) for r in runs], n_workers(cfg))

    curves = []
    logs = {}
    for run, log, model in results:
        label = run.label
        logs[label] = log
        rows = [
            (
                e,
                log.residual_dbm_analog[e],
                log.residual_dbm_digital[e],
                log.saturated_fraction[e],
                log.loss[e],
            )
            for e in range(len(log))
        ]
        write_csv(out / f"train_{label}.csv", TRAIN_CSV_COLUMNS, rows)
        save_checkpoint(
            model,
            out / f"model_{label}.npz",
            meta=dict(
                label=label,
                strategy=run.strategy.value,
                lna_gain_db=run.lna_gain_db,
                seed=cfg.seed,
            ),
        )
        epochs = list(range(len(log)))
        curves.append(Series(x=epochs, y=list(log.residual_dbm_analog), label=label))
        fig = Figure(
            title=f"SIC learning: {label}",
            xlabel="epoch",
            ylabel="analog residual power [dBm]",
            hline=SATURATION_MARKER_DBM,
            hline_label=f"{SATURATION_MARKER_DBM:g} dBm",
            series=[curves[-1]],
        )
        (out / f"learning_{label}.svg").write_text(render(fig))

    fig_all = Figure(
        title="SIC learning curves",
        xlabel="epoch",
        ylabel="analog residual power [dBm]",
        hline=SATURATION_MARKER_DBM,
        hline_label=f"{SATURATION_MARKER_DBM:g} dBm",
        series=curves,
    )
    (out / "learning.svg").write_text(render(fig_all))
    return logs


# ---------------------------------------------------------------------------
# BER / SINR sweep
# ---------------------------------------------------------------------------


def receive_chain(strategy: StrategyKind, r_analog, adc, agc_spec, gain_db: float):
    """Digital residual a deployed system hands to the demodulator."""
    if strategy is StrategyKind.AGC:
        gains_db, rssi_db = agc_gains(agc_spec, r_analog)
        amp = per_sample_amplitude(agc_spec, gains_db, r_analog.size)
        rssi_amp = per_sample_amplitude(agc_spec, rssi_db, r_analog.size)
        q = adc_quantize(adc, r_analog * amp)
        return (q.real / rssi_amp) + 1j * (q.imag / rssi_amp)
    return adc_quantize(adc, r_analog * db_to_amplitude(gain_db))


def ber_point(cfg: ExperimentConfig, model, run: RunSpec, snr_db: float, keep_signals: bool = False):
    """Average BER of one system at one SNR over the shared test frames.

    The SOI rides at snr_db above the noise floor; frames failing packet
    detection count as BER 0.5.  SINR is recomputed from the stored signals
    as SOI power over (SI residual + noise) power.
    """
    wcfg = cfg.waveform.ofdm_config()
    pa, channel = build_frontend(cfg)
    adc = cfg.frontend.adc_spec()
    agc_spec = cfg.agc.agc_spec()
    soi_dbm = cfg.frontend.noise_floor_dbm + snr_db
    deploy_gain = run.lna_gain_db
    if deploy_gain is None:
        deploy_gain = cfg.train.dta_deploy_gain_db
    frame_len = wcfg.frame_len()
    payload_bits = wcfg.bits_per_symbol * wcfg.data_symbols_per_frame
    snr_key = int(round(snr_db * 1000)) & 0xFFFFFFFF

    ber_sum = 0.0
    detected = 0
    soi_pow = 0.0
    resid_pow = 0.0
    kept = []
    for j in range(cfg.sweep.frames_per_snr):
        rng = np.random.default_rng([cfg.seed, SEED_TEST, snr_key, j])
        bits = rng.integers(0, 2, size=payload_bits)
        soi = scale_to_dbm(ofdm_modulate(wcfg, bits), soi_dbm)
        s_tx = transmit_stream(wcfg, frame_len, [cfg.seed, SEED_TEST, snr_key, j, 1])
        si = fir_convolve(pa_apply(pa, s_tx), channel.taps)
        noise = awgn_complex(frame_len, cfg.frontend.noise_floor_dbm, [cfg.seed, SEED_TEST, snr_key, j, 2])
        y = si + soi + noise
        y_hat = model_predict(model, s_tx) if model is not None else 0.0
        r_analog = y - y_hat
        r_digital = receive_chain(run.strategy, r_analog, adc, agc_spec, deploy_gain)
        ber, det, _ = ofdm_receive(wcfg, r_digital, bits)
        ber_sum += ber
        detected += int(det)
        resid = r_analog - soi
        soi_pow += mean_abs_sq(soi)
        resid_pow += mean_abs_sq(resid)
        if keep_signals:
            kept.append((soi, resid))
    n = cfg.sweep.frames_per_snr
    row = MetricsRow(
        snr_db=snr_db,
        sinr_db=10.0 * np.log10(soi_pow / resid_pow),
        ber=ber_sum / n,
        detected_fraction=detected / n,
        strategy=run.strategy.value,
        lna_gain_db=run.lna_gain_db,
    )
    return (row, kept) if keep_signals else row


def _ber_task(task):
    cfg, model_path, snr_db = task
    model, meta = load_checkpoint(model_path)
    run = RunSpec(
        StrategyKind.parse(meta["strategy"]),
        None if meta["lna_gain_db"] is None else float(meta["lna_gain_db"]),
    )
    return ber_point(cfg, model, run, snr_db)


def run_ber_sweep(cfg: ExperimentConfig, models_dir, out_dir):
    """Sweep every trained system over the SNR grid; returns the merged rows."""
    models = sorted(Path(models_dir).glob("model_*.npz"))
    if not models:
        raise FileNotFoundError(f"no model checkpoints under {models_dir}")
    tasks = [(cfg, str(p), float(snr)) for p in models for snr in cfg.sweep.snr_db]
    rows = _pmap(_ber_task, tasks, n_workers(cfg))
    rows.sort(key=lambda r: (r.strategy, r.lna_gain_db if r.lna_gain_db is not None else -1.0, r.snr_db))
    emit_ber_outputs(rows, out_dir)
    return rows


def emit_ber_outputs(rows, out_dir):
    """Write the BER sweep CSV and its BER/SINR figure; rejects empty input."""
    if not rows:
        raise ValueError("emit_ber_outputs: no rows")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_rows = [
        (
            r.snr_db,
            r.sinr_db,
            r.ber,
            r.detected_fraction,
            r.strategy,
            "" if r.lna_gain_db is None else r.lna_gain_db,
        )
        for r in rows
    ]
    write_csv(out / "ber.csv", BER_CSV_COLUMNS, csv_rows)

    by_system = {}
    for r in rows:
        label = r.strategy if r.lna_gain_db is None else f"{r.strategy}_{r.lna_gain_db:g}"
        by_system.setdefault(label, []).append(r)
    series = []
    for label in sorted(by_system):
        pts = by_system[label]
        floor = 0.5 / 10000.0  # plot floor for zero-error points on the log axis
        series.append(Series(x=[p.snr_db for p in pts], y=[max(p.ber, floor) for p in pts], label=label))
    for label in sorted(by_system):
        pts = by_system[label]
        series.append(
            Series(
                x=[p.snr_db for p in pts],
                y=[p.sinr_db for p in pts],
                label=f"{label} SINR",
                dashed=True,
                right=True,
            )
        )
    fig = Figure(
        title="BER vs SNR (right axis: SINR after SIC)",
        xlabel="SNR [dB]",
        ylabel="BER",
        right_ylabel="SINR [dB]",
        ylog=True,
        series=series,
    )
    (out / "ber.svg").write_text(render(fig))


# ---------------------------------------------------------------------------
# files: CSV, config echo, manifest
# ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, columns, rows):
    """Deterministic CSV: floats via repr (shortest exact round trip)."""
    lines = [",".join(columns)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def echo_config(out_dir, raw_bytes: bytes):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_bytes(raw_bytes)


def write_manifest(out_dir, seed: int):
    """Hash every output file; `created_utc` is the one nondeterministic field."""
    out = Path(out_dir)
    hashes = {}
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            hashes[str(p.relative_to(out))] = hashlib.sha256(p.read_bytes()).hexdigest()
    manifest = {
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "seed": seed,
        "outputs": hashes,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
