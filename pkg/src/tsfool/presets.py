"""Bundled experiment presets.

Two benchmark domains plus a synthetic one for demos and CI:

* ``power``  — household electric power CSV (semicolon-separated, separate
  Date/Time columns, "?" gaps), resampled to hourly buckets; next-hour
  prediction of active power from a 14-step window over all 7 channels.
* ``stock``  — daily OHLCV prices; next-day open from a 60-step window.
* ``synth``  — seeded generator output, small enough for quick runs.

Model presets follow the published benchmark configurations; the ``-alt``
variants are the alternative layer widths that appear alongside them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import CsvSchema
from .errors import ConfigError

ATTACK_DEFAULTS = {"epsilon": 0.2, "alpha": 0.001, "iterations": 200}


@dataclass(frozen=True)
class DataPreset:
    name: str
    target: str
    lookback: int
    split_fraction: float
    csv_schema: CsvSchema | None = None     # None: synthetic
    resample_seconds: int | None = None
    synth_rows: int = 600
    synth_channels: int = 5


@dataclass(frozen=True)
class ModelPreset:
    name: str
    data: str                # DataPreset name
    arch: str
    hidden: tuple[int, ...]
    dense: tuple[int, ...]
    batch_size: int
    epochs: int
    learning_rate: float = 0.001


DATA_PRESETS: dict[str, DataPreset] = {
    "power": DataPreset(
        name="power",
        target="Global_active_power",
        lookback=14,
        split_fraction=0.25,
        csv_schema=CsvSchema(
            timestamp_columns=("Date", "Time"),
            timestamp_format="%d/%m/%Y %H:%M:%S",
            delimiter=";",
        ),
        resample_seconds=3600,
    ),
    "stock": DataPreset(
        name="stock",
        target="Open",
        lookback=60,
        split_fraction=0.3,
        csv_schema=CsvSchema(
            timestamp_columns=("Date",),
            timestamp_format="%Y-%m-%d",
            delimiter=",",
        ),
    ),
    "synth": DataPreset(
        name="synth",
        target="target",
        lookback=10,
        split_fraction=0.25,
    ),
}


def _mp(name, data, arch, hidden, dense, batch, epochs):
    return ModelPreset(name, data, arch, hidden, dense, batch, epochs)


MODEL_PRESETS: dict[str, ModelPreset] = {
    p.name: p
    for p in [
        # power domain
        _mp("power-cnn", "power", "cnn", (60, 60, 60), (50, 1), 512, 200),
        _mp("power-lstm", "power", "lstm", (30, 30, 30), (1,), 32, 250),
        _mp("power-gru", "power", "gru", (30, 30, 30), (1,), 32, 250),
        _mp("power-lstm-alt", "power", "lstm", (100, 100, 100), (1,), 32, 250),
        _mp("power-gru-alt", "power", "gru", (100, 100, 100), (1,), 32, 250),
        # stock domain
        _mp("stock-cnn", "stock", "cnn", (60, 60, 60), (40, 1), 14, 250),
        _mp("stock-lstm", "stock", "lstm", (100, 100, 100), (1,), 14, 300),
        _mp("stock-gru", "stock", "gru", (100, 100, 100), (1,), 14, 300),
        _mp("stock-lstm-alt", "stock", "lstm", (30, 30, 30), (1,), 14, 300),
        _mp("stock-gru-alt", "stock", "gru", (30, 30, 30), (1,), 14, 300),
        # synthetic desk-scale
        _mp("synth-cnn", "synth", "cnn", (16, 16, 16), (16, 1), 32, 60),
        _mp("synth-lstm", "synth", "lstm", (12, 12, 12), (1,), 32, 60),
        _mp("synth-gru", "synth", "gru", (12, 12, 12), (1,), 32, 60),
    ]
}


def get_model_preset(name: str) -> ModelPreset:
    try:
        return MODEL_PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown model preset {name!r}; available: {', '.join(sorted(MODEL_PRESETS))}"
        ) from None


def get_data_preset(name: str) -> DataPreset:
    try:
        return DATA_PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown data preset {name!r}; available: {', '.join(sorted(DATA_PRESETS))}"
        ) from None
