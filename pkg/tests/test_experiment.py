import hashlib
import json

import numpy as np
import pytest

from sic_lab import cli
from sic_lab.config import ConfigError, config_from_dict, default_config, load_config
from sic_lab.dsp import power_dbm
from sic_lab.experiment import (
    MetricsRow,
    RunSpec,
    ber_point,
    emit_ber_outputs,
    plan_runs,
    read_csv,
    run_ber_sweep,
    run_learning_experiment,
    write_csv,
    write_manifest,
)
from sic_lab.strategies import StrategyKind
from sic_lab.svgplot import Figure, Series, render

TINY = {
    "seed": 777,
    "train": {"epochs": 2, "sequences": 2, "sequence_len": 512, "lna_gains_db": [30.0]},
    "sweep": {"snr_db": [0.0, 30.0], "frames_per_snr": 2, "workers": 1},
}


# --- config ---------------------------------------------------------------


def test_default_config_round_trip():
    cfg = config_from_dict({})
    assert cfg.train.epochs == 6000 and cfg.frontend.adc_bits == 12


def test_unknown_keys_are_rejected_with_path():
    with pytest.raises(ConfigError, match="train.epoch: unknown key"):
        config_from_dict({"train": {"epoch": 10}})
    with pytest.raises(ConfigError, match="outputs: unknown key"):
        config_from_dict({"outputs": "x"})


def test_type_errors_are_reported_with_path():
    with pytest.raises(ConfigError, match="train.epochs"):
        config_from_dict({"train": {"epochs": "many"}})
    with pytest.raises(ConfigError, match="frontend.pa_a3"):
        config_from_dict({"frontend": {"pa_a3": [1, 2, 3]}})


def test_complex_coefficients_parse_from_pairs():
    cfg = config_from_dict({"frontend": {"pa_a3": [-0.1, 0.02]}})
    assert cfg.frontend.pa_a3 == -0.1 + 0.02j


def test_load_config_returns_raw_bytes(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 5\n")
    cfg, raw = load_config(path)
    assert cfg.seed == 5 and raw == b"seed: 5\n"


# --- planning ---------------------------------------------------------------


def test_default_plan_is_eight_runs():
    runs = plan_runs(default_config())
    labels = [r.label for r in runs]
    assert labels == [
        "bpad_30", "bpad_40", "bpad_50",
        "ste_30", "ste_40", "ste_50",
        "agc", "dta",
    ]


def test_plan_filters():
    runs = plan_runs(default_config(), strategies=["ste"], gains=[30.0])
    assert [r.label for r in runs] == ["ste_30"]


# --- CSV / SVG / manifest -----------------------------------------------------


def test_csv_round_trip_exact(tmp_path):
    rows = [(0, 0.1, -47.25, 3e-4, "ste", 30.0), (1, -1.0 / 3.0, 1e-300, 0.5, "agc", "")]
    path = tmp_path / "t.csv"
    write_csv(path, ("a", "b", "c", "d", "e", "f"), rows)
    header, parsed = read_csv(path)
    assert header == ["a", "b", "c", "d", "e", "f"]
    for row, back in zip(rows, parsed):
        for v, s in zip(row, back):
            if isinstance(v, float):
                assert float(s) == v  # repr round-trips float64 exactly
            else:
                assert str(v) == s


def test_emit_ber_outputs_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_ber_outputs([], tmp_path / "x")
    assert not (tmp_path / "x" / "ber.csv").exists()


def test_svg_rendering_is_deterministic():
    fig = Figure(
        title="t", xlabel="x", ylabel="y", ylog=True,
        series=[Series(x=[0, 1, 2], y=[0.5, 0.1, 1e-3], label="s")],
        hline=0.05, hline_label="m",
    )
    a, b = render(fig), render(fig)
    assert a == b and a.startswith("<svg") and "polyline" in a


def test_svg_skips_nonfinite_points():
    fig = Figure(series=[Series(x=[0, 1, 2], y=[1.0, float("nan"), 2.0], label="s")])
    assert "nan" not in render(fig)


def test_manifest_lists_hashes(tmp_path):
    (tmp_path / "a.csv").write_text("x\n")
    manifest = write_manifest(tmp_path, seed=9)
    digest = hashlib.sha256(b"x\n").hexdigest()
    assert manifest["outputs"]["a.csv"] == digest
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["seed"] == 9 and on_disk["outputs"] == {"a.csv": digest}


# --- runners -------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_cfg():
    return config_from_dict(TINY)


def test_learning_experiment_writes_expected_files(tmp_path, tiny_cfg):
    logs = run_learning_experiment(tiny_cfg, tmp_path, strategies=["ste", "dta"], gains=[30.0])
    assert sorted(logs) == ["dta", "ste_30"]
    for label in logs:
        header, rows = read_csv(tmp_path / f"train_{label}.csv")
        assert header == ["epoch", "residual_dbm_analog", "residual_dbm_digital", "saturated_fraction", "loss"]
        assert len(rows) == 2
        assert (tmp_path / f"model_{label}.npz").exists()
        assert (tmp_path / f"learning_{label}.svg").exists()
    assert (tmp_path / "learning.svg").exists()


def test_ber_sweep_over_trained_models(tmp_path, tiny_cfg):
    run_learning_experiment(tiny_cfg, tmp_path, strategies=["ste"], gains=[30.0])
    rows = run_ber_sweep(tiny_cfg, tmp_path, tmp_path)
    assert len(rows) == 2  # one system x two SNRs
    assert all(r.strategy == "ste" and 0.0 <= r.ber <= 0.5 for r in rows)
    header, parsed = read_csv(tmp_path / "ber.csv")
    assert header == ["snr_db", "sinr_db", "ber", "detected_fraction", "strategy", "lna_gain_db"]


def test_ber_sweep_requires_models(tmp_path, tiny_cfg):
    with pytest.raises(FileNotFoundError):
        run_ber_sweep(tiny_cfg, tmp_path / "empty", tmp_path / "empty")


def test_sinr_column_matches_recomputation_from_signals(tiny_cfg):
    run = RunSpec(StrategyKind.STE, 30.0)
    row, kept = ber_point(tiny_cfg, None, run, snr_db=30.0, keep_signals=True)
    soi = np.concatenate([s for s, _ in kept])
    resid = np.concatenate([r for _, r in kept])
    assert row.sinr_db == pytest.approx(power_dbm(soi) - power_dbm(resid), abs=1e-9)


def test_sic_disabled_gives_half_ber_everywhere(tiny_cfg):
    # the raw self-interference sits ~40 dB above any in-grid SOI level
    for snr in tiny_cfg.sweep.snr_db:
        row = ber_point(tiny_cfg, None, RunSpec(StrategyKind.STE, 30.0), snr_db=snr)
        assert row.ber == 0.5 and row.detected_fraction == 0.0


# --- CLI -------------------------------------------------------------------------


def write_tiny_config(path, out_dir, seed=777):
    cfg = dict(TINY)
    cfg["seed"] = seed
    cfg["output_dir"] = str(out_dir)
    import yaml

    path.write_text(yaml.safe_dump(cfg))


def test_cli_train_filter_and_outputs(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.yaml"
    write_tiny_config(cfg_path, tmp_path / "out")
    assert cli.main(["train", "--config", str(cfg_path), "--strategies", "ste", "--gains", "30"]) == 0
    assert (tmp_path / "out" / "train_ste_30.csv").exists()
    assert (tmp_path / "out" / "config.yaml").read_bytes() == cfg_path.read_bytes()
    assert "trained ste_30" in capsys.readouterr().out


def test_cli_env_seed_override(tmp_path, monkeypatch):
    cfg_path = tmp_path / "cfg.yaml"
    write_tiny_config(cfg_path, tmp_path / "out")
    monkeypatch.setenv("SIC_LAB_SEED", "31337")
    cli.main(["train", "--config", str(cfg_path), "--strategies", "dta"])
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["seed"] == 31337


def test_cli_config_error_is_reported(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("train: {epoch: 1}\n")
    assert cli.main(["train", "--config", str(bad)]) == 2
    assert "unknown key" in capsys.readouterr().err
