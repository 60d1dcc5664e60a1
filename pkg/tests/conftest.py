"""Session-wide fixtures: one small synthetic dataset and one quickly
trained model per architecture, shared by the unit-test modules."""

from __future__ import annotations

import numpy as np
import pytest

from tsfool.data import prepare_windows, synth_generate
from tsfool.neural import ModelSpec, TrainConfig, train


@pytest.fixture(scope="session")
def small_frame():
    return synth_generate(seed=101, rows=400, n_channels=5)


@pytest.fixture(scope="session")
def small_data(small_frame):
    train_ds, test_ds, scaler = prepare_windows(
        small_frame, lookback=10, target_channel="target", split_fraction=0.25
    )
    return train_ds, test_ds, scaler


def _quick_model(arch, train_ds, seed):
    spec = ModelSpec(
        arch=arch,
        lookback=train_ds.lookback,
        n_channels=train_ds.n_channels,
        hidden=(8, 8, 8),
        dense=(16, 1) if arch == "cnn" else (1,),
        channel_names=train_ds.channel_names,
        target_channel=train_ds.target_channel,
    )
    cfg = TrainConfig(epochs=25, batch_size=32, shuffle_seed=seed + 50)
    return train(spec, train_ds, cfg, init_seed=seed)


@pytest.fixture(scope="session")
def cnn_model(small_data):
    return _quick_model("cnn", small_data[0], seed=1)


@pytest.fixture(scope="session")
def lstm_model(small_data):
    return _quick_model("lstm", small_data[0], seed=2)


@pytest.fixture(scope="session")
def gru_model(small_data):
    return _quick_model("gru", small_data[0], seed=3)


@pytest.fixture(scope="session")
def all_models(cnn_model, lstm_model, gru_model):
    return {"cnn": cnn_model, "lstm": lstm_model, "gru": gru_model}
