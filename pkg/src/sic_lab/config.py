"""Experiment configuration: a YAML file mapped onto validated dataclasses.

Unknown keys are rejected with their full path, values are type-checked, and
every key has a default, so a config file only states what it overrides.
Complex coefficients are written as two-element [re, im] lists.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import get_args, get_origin, get_type_hints

import yaml

from .frontend import AdcSpec, AgcSpec, PaModel
from .waveform import OfdmConfig


class ConfigError(ValueError):
    pass


@dataclass
class WaveformSection:
    nfft: int = 64
    used_subcarriers: int = 52
    cp_len: int = 16
    pilot_offsets: tuple[int, ...] = (7, 21)
    preamble_symbols: int = 2
    data_symbols_per_frame: int = 8
    detect_threshold: float = 0.6

    def ofdm_config(self) -> OfdmConfig:
        return OfdmConfig(
            nfft=self.nfft,
            used_subcarriers=self.used_subcarriers,
            cp_len=self.cp_len,
            pilot_offsets=tuple(self.pilot_offsets),
            preamble_symbols=self.preamble_symbols,
            data_symbols_per_frame=self.data_symbols_per_frame,
            detect_threshold=self.detect_threshold,
        )


@dataclass
class FrontendSection:
    pa_a1: complex = 1.0 + 0.0j
    pa_a3: complex = -0.08 - 0.01j
    pa_a5: complex = 0.005j
    pa_output_dbm: float = 20.0
    channel_taps: int = 32
    passive_isolation_db: float = 35.0
    channel_decay: float = 0.15
    noise_floor_dbm: float = -77.0
    adc_bits: int = 12
    adc_lambda: float = 1.0

    def pa_model(self) -> PaModel:
        return PaModel(
            a1=self.pa_a1, a3=self.pa_a3, a5=self.pa_a5, output_dbm=self.pa_output_dbm
        )

    def adc_spec(self) -> AdcSpec:
        return AdcSpec(bits=self.adc_bits, lam=self.adc_lambda)


@dataclass
class ModelSection:
    hidden: int = 16
    fir_len: int = 64
    si_power_dbm: float = -15.0


@dataclass
class TrainSection:
    epochs: int = 6000
    lr: float = 0.03
    sequences: int = 10
    sequence_len: int = 4096
    strategies: tuple[str, ...] = ("bpad", "ste", "agc", "dta")
    lna_gains_db: tuple[float, ...] = (30.0, 40.0, 50.0)
    dta_deploy_gain_db: float = 30.0


@dataclass
class AgcSection:
    frame_len: int = 64
    setpoint_dbm: float = -12.0
    gain_min_db: float = -20.0
    gain_max_db: float = 40.0
    rssi_bits: int = 12

    def agc_spec(self) -> AgcSpec:
        return AgcSpec(
            frame_len=self.frame_len,
            setpoint_dbm=self.setpoint_dbm,
            gain_min_db=self.gain_min_db,
            gain_max_db=self.gain_max_db,
            rssi_adc=AdcSpec(bits=self.rssi_bits, lam=1.0),
        )


@dataclass
class SweepSection:
    snr_db: tuple[float, ...] = tuple(float(v) for v in range(0, 55, 5))
    frames_per_snr: int = 200
    workers: int = 0  # 0 = one per CPU (capped)


@dataclass
class ExperimentConfig:
    seed: int = 12345
    output_dir: str = "out"
    waveform: WaveformSection = field(default_factory=WaveformSection)
    frontend: FrontendSection = field(default_factory=FrontendSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    agc: AgcSection = field(default_factory=AgcSection)
    sweep: SweepSection = field(default_factory=SweepSection)


def _coerce(value, hint, path):
    origin = get_origin(hint)
    if origin in (tuple, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected a list")
        item_hint = get_args(hint)[0]
        return tuple(_coerce(v, item_hint, f"{path}[{i}]") for i, v in enumerate(value))
    if hint is complex:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return complex(value)
        if isinstance(value, (list, tuple)) and len(value) == 2:
            return complex(float(value[0]), float(value[1]))
        raise ConfigError(f"{path}: expected a number or [re, im] pair")
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported value type")


def _build_section(cls, data, path):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        full = f"{path}.{key}" if path else str(key)
        if key not in names:
            raise ConfigError(f"{full}: unknown key")
        hint = hints[key]
        if dataclasses.is_dataclass(hint):
            kwargs[key] = _build_section(hint, value, full)
        else:
            kwargs[key] = _coerce(value, hint, full)
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build_section(ExperimentConfig, data, "")


def load_config(path):
    """Parse and validate a YAML config; returns (config, raw_bytes)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    data = yaml.safe_load(raw) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data), raw


def default_config() -> ExperimentConfig:
    return ExperimentConfig()
