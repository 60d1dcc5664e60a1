"""Evaluation harness tests: metrics, attack outcomes, transfer matrices,
epsilon sweeps, and deterministic report files."""

import json

import numpy as np
import pytest

from tsfool.attack import AttackConfig
from tsfool.errors import ConfigError, ShapeError
from tsfool.experiment import (
    attack_eval,
    epsilon_sweep,
    evaluate,
    reference_anchors,
    run_attack,
    summary_json,
    transfer_matrix,
    write_summary_json,
    write_sweep_csv,
    write_transfer_csv,
)
from tsfool.neural import predict


def test_evaluate_matches_manual_formulas(small_data, gru_model):
    _, test_ds, _ = small_data
    report = evaluate(gru_model, test_ds)
    pred = predict(gru_model, test_ds.X)
    err = pred - test_ds.y
    assert report.rmse == pytest.approx(float(np.sqrt(np.mean(err**2))), rel=1e-12)
    assert report.mae == pytest.approx(float(np.mean(np.abs(err))), rel=1e-12)
    assert report.n_windows == test_ds.n_windows
    assert set(report.to_dict()) == {"rmse", "mae", "n_windows"}


def test_run_attack_validates_method(small_data, gru_model):
    _, test_ds, _ = small_data
    with pytest.raises(ConfigError):
        run_attack(gru_model, test_ds, AttackConfig(epsilon=0.1), "pgd")


def test_attack_eval_percentage_math(small_data, gru_model):
    _, test_ds, _ = small_data
    outcome, batch = attack_eval(gru_model, test_ds, AttackConfig(epsilon=0.1), "fgsm")
    assert outcome.method == "fgsm"
    assert outcome.rmse_attacked > outcome.rmse_clean
    expect = 100.0 * (outcome.rmse_attacked - outcome.rmse_clean) / outcome.rmse_clean
    assert outcome.pct_increase == pytest.approx(expect, rel=1e-12)
    assert batch.n_windows == test_ds.n_windows
    keys = set(outcome.to_dict())
    assert keys == {"attack", "epsilon", "alpha", "iters",
                    "rmse_clean", "rmse_attacked", "pct_increase", "n_windows"}


# ------------------------------------------------------------- transfer


def test_transfer_matrix_diagonal_is_self_attack(small_data, all_models):
    _, test_ds, _ = small_data
    models = [all_models["cnn"], all_models["lstm"], all_models["gru"]]
    labels = ["cnn", "lstm", "gru"]
    cfg = AttackConfig(epsilon=0.1)
    tm = transfer_matrix(models, labels, test_ds, cfg, "fgsm")
    assert tm.labels == ("cnn", "lstm", "gru")
    assert tm.adv_rmse.shape == (3, 3) and tm.pct_increase.shape == (3, 3)
    for i, model in enumerate(models):
        outcome, _ = attack_eval(model, test_ds, cfg, "fgsm")
        assert tm.adv_rmse[i, i] == pytest.approx(outcome.rmse_attacked, rel=1e-12)
        assert tm.clean_rmse[i] == pytest.approx(outcome.rmse_clean, rel=1e-12)


def test_transfer_matrix_single_model_is_1x1(small_data, gru_model):
    _, test_ds, _ = small_data
    tm = transfer_matrix([gru_model], ["solo"], test_ds, AttackConfig(epsilon=0.1), "fgsm")
    assert tm.size == 1
    assert tm.pct_increase.shape == (1, 1)
    assert tm.pct_increase[0, 0] > 0


def test_transfer_matrix_validation(small_data, all_models, gru_model):
    _, test_ds, _ = small_data
    with pytest.raises(ConfigError):
        transfer_matrix([], [], test_ds, AttackConfig(epsilon=0.1), "fgsm")
    with pytest.raises(ConfigError):
        transfer_matrix([gru_model], ["a", "b"], test_ds, AttackConfig(epsilon=0.1), "fgsm")
    with pytest.raises(ConfigError):
        transfer_matrix([gru_model, gru_model], ["x", "x"], test_ds,
                        AttackConfig(epsilon=0.1), "fgsm")

    from tsfool.neural import ModelSpec, build_model

    other = build_model(ModelSpec(arch="gru", lookback=test_ds.lookback + 2,
                                  n_channels=test_ds.n_channels, hidden=(3,)), seed=0)
    with pytest.raises(ShapeError) as exc:
        transfer_matrix([gru_model, other], ["ok", "wrong"], test_ds,
                        AttackConfig(epsilon=0.1), "fgsm")
    assert "wrong" in str(exc.value)


# ---------------------------------------------------------------- sweep


def test_sweep_zero_budget_equals_clean(small_data, gru_model):
    _, test_ds, _ = small_data
    sweep = epsilon_sweep(gru_model, test_ds, [0.0, 0.05], "fgsm")
    assert sweep.rmse_attacked[0] == pytest.approx(sweep.rmse_clean, rel=1e-12)
    assert sweep.pct_increase[0] == pytest.approx(0.0, abs=1e-9)
    assert sweep.rmse_attacked[1] > sweep.rmse_clean


def test_sweep_bim_defaults_alpha_to_eps_over_iters(small_data, gru_model):
    _, test_ds, _ = small_data
    sweep = epsilon_sweep(gru_model, test_ds, [0.04, 0.1], "bim", iterations=4)
    assert sweep.alphas == (0.01, 0.025)
    explicit = epsilon_sweep(gru_model, test_ds, [0.04], "bim", alpha=0.02, iterations=4)
    assert explicit.alphas == (0.02,)


def test_sweep_validation(small_data, gru_model):
    _, test_ds, _ = small_data
    with pytest.raises(ConfigError):
        epsilon_sweep(gru_model, test_ds, [], "fgsm")
    with pytest.raises(ConfigError):
        epsilon_sweep(gru_model, test_ds, [-0.1], "fgsm")
    with pytest.raises(ConfigError):
        epsilon_sweep(gru_model, test_ds, [0.1], "nope")


# -------------------------------------------------------------- reports


def test_summary_json_shape_and_keys(small_data, gru_model):
    _, test_ds, _ = small_data
    outcome, _ = attack_eval(gru_model, test_ds, AttackConfig(epsilon=0.1), "fgsm")
    text = summary_json(outcome, "m.tsf", "gru")
    doc = json.loads(text)
    assert set(doc) == {"model", "arch", "attack", "epsilon", "alpha", "iters",
                        "rmse_clean", "rmse_attacked", "pct_increase", "n_windows"}
    assert doc["model"] == "m.tsf" and doc["arch"] == "gru"
    # sorted keys, stable layout
    assert text == summary_json(outcome, "m.tsf", "gru")
    assert list(doc) == sorted(doc)


def test_report_writers_are_byte_deterministic(tmp_path, small_data, all_models):
    _, test_ds, _ = small_data
    models = [all_models["cnn"], all_models["gru"]]
    cfg = AttackConfig(epsilon=0.08)
    tm = transfer_matrix(models, ["cnn", "gru"], test_ds, cfg, "fgsm")
    sweep = epsilon_sweep(all_models["gru"], test_ds, [0.0, 0.05], "fgsm")
    outcome, _ = attack_eval(all_models["gru"], test_ds, cfg, "fgsm")

    for name, write in (
        ("tm.csv", lambda p: write_transfer_csv(p, tm)),
        ("sweep.csv", lambda p: write_sweep_csv(p, sweep)),
        ("sum.json", lambda p: write_summary_json(p, outcome, "g", "gru")),
    ):
        a, b = tmp_path / f"a_{name}", tmp_path / f"b_{name}"
        write(a)
        write(b)
        assert a.read_bytes() == b.read_bytes(), name


def test_transfer_csv_contents(tmp_path, small_data, all_models):
    _, test_ds, _ = small_data
    tm = transfer_matrix([all_models["cnn"], all_models["gru"]], ["cnn", "gru"],
                         test_ds, AttackConfig(epsilon=0.1), "fgsm")
    p = tmp_path / "tm.csv"
    write_transfer_csv(p, tm)
    lines = p.read_text().strip().splitlines()
    assert lines[0].split(",")[0] == "source\\victim"
    first = lines[1].split(",")
    assert first[0] == "cnn"
    assert float(first[1]) == pytest.approx(tm.pct_increase[0, 0])


def test_reference_anchors_available():
    anchors = reference_anchors()
    assert set(anchors["domains"]) == {"power", "stock"}
    power = anchors["domains"]["power"]
    assert set(power["clean_rmse"]) == {"cnn", "lstm", "gru"}
    assert anchors["attack_defaults"]["epsilon"] == 0.2
    for domain in anchors["domains"].values():
        for method in ("fgsm", "bim"):
            cells = domain["transfer_pct_increase"][method]
            assert len(cells) == 6
            assert all(v > 0 for v in cells.values())
