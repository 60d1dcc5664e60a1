"""Attack tests: exactness contracts (bitwise identities, budget bounds),
damage on trained models, masking, and the signature export."""

import csv

import numpy as np
import pytest

from tsfool.attack import (
    AttackConfig,
    attack_stats,
    bim,
    fgsm,
    input_gradient,
    write_signature_csv,
)
from tsfool.errors import ConfigError, ShapeError
from tsfool.neural import ModelSpec, build_model, predict


def bits(a):
    return np.asarray(a, dtype=np.float64).view(np.uint64)


def rmse(model, X, y):
    return float(np.sqrt(np.mean((predict(model, X) - y) ** 2)))


# ------------------------------------------------------------ config


def test_attack_config_validation():
    with pytest.raises(ConfigError):
        AttackConfig(epsilon=-0.1)
    with pytest.raises(ConfigError):
        AttackConfig(epsilon=np.inf)
    with pytest.raises(ConfigError):
        AttackConfig(alpha=-1e-9)
    with pytest.raises(ConfigError):
        AttackConfig(iterations=0)
    with pytest.raises(ConfigError):
        AttackConfig(feature_mask=np.array([1, 0, 1]))   # ints, not bools
    cfg = AttackConfig(feature_mask=np.array([True, False]))
    assert cfg.feature_mask.dtype == np.bool_


def test_mask_length_checked_against_model(small_data, gru_model):
    _, test_ds, _ = small_data
    cfg = AttackConfig(epsilon=0.1, feature_mask=np.array([True, False]))
    with pytest.raises(ConfigError):
        fgsm(gru_model, test_ds.X, test_ds.y, cfg)


def test_window_geometry_checked(gru_model):
    with pytest.raises(ShapeError):
        fgsm(gru_model, np.zeros((4, 3, 5)), np.zeros((4, 1)), AttackConfig(epsilon=0.1))


# -------------------------------------------------- exactness contracts


def test_fgsm_zero_epsilon_is_identity_bitwise(small_data, gru_model):
    _, test_ds, _ = small_data
    out = fgsm(gru_model, test_ds.X, test_ds.y, AttackConfig(epsilon=0.0))
    assert np.array_equal(bits(out.X_adv), bits(test_ds.X))
    assert out.X_adv is not test_ds.X   # fresh array, not an alias


def test_bim_zero_alpha_is_identity_bitwise(small_data, gru_model):
    _, test_ds, _ = small_data
    out = bim(gru_model, test_ds.X, test_ds.y,
              AttackConfig(epsilon=0.1, alpha=0.0, iterations=7))
    assert np.array_equal(bits(out.X_adv), bits(test_ds.X))


def test_fgsm_moves_each_element_by_exactly_plus_minus_epsilon_or_zero(small_data, all_models):
    _, test_ds, _ = small_data
    eps = 0.07
    for arch, model in all_models.items():
        g = input_gradient(model, test_ds.X, test_ds.y)
        eta = eps * np.sign(g)
        members = np.isin(eta, (-eps, 0.0, eps))
        assert members.all(), f"{arch}: step outside {{-eps, 0, +eps}}"
        out = fgsm(model, test_ds.X, test_ds.y, AttackConfig(epsilon=eps))
        # the attack applies exactly that step, element for element
        expect = test_ds.X + eta
        assert np.array_equal(bits(out.X_adv), bits(expect)), arch


def test_bim_single_full_step_equals_fgsm_bitwise(small_data, all_models):
    _, test_ds, _ = small_data
    for arch, model in all_models.items():
        f = fgsm(model, test_ds.X, test_ds.y, AttackConfig(epsilon=0.05))
        b = bim(model, test_ds.X, test_ds.y,
                AttackConfig(epsilon=0.05, alpha=0.05, iterations=1))
        assert np.array_equal(bits(f.X_adv), bits(b.X_adv)), arch


def test_bim_stays_inside_epsilon_ball_exactly(small_data, gru_model):
    _, test_ds, _ = small_data
    eps = 0.08
    out = bim(gru_model, test_ds.X, test_ds.y,
              AttackConfig(epsilon=eps, alpha=0.03, iterations=9))
    lo = test_ds.X - eps
    hi = test_ds.X + eps
    assert np.all(out.X_adv >= lo) and np.all(out.X_adv <= hi)
    assert np.all(np.abs(out.X_adv - test_ds.X) <= eps + 1e-12)


def test_frozen_channels_bitwise_and_free_channels_move(small_data, gru_model):
    _, test_ds, _ = small_data
    mask = np.array([True, False, True, False, True])
    for fn, cfg in (
        (fgsm, AttackConfig(epsilon=0.1, feature_mask=mask)),
        (bim, AttackConfig(epsilon=0.1, alpha=0.04, iterations=4, feature_mask=mask)),
    ):
        out = fn(gru_model, test_ds.X, test_ds.y, cfg)
        assert np.array_equal(bits(out.X_adv[..., ~mask]), bits(test_ds.X[..., ~mask]))
        assert np.any(out.X_adv[..., mask] != test_ds.X[..., mask])


def test_attacks_leave_input_untouched(small_data, gru_model):
    _, test_ds, _ = small_data
    before = test_ds.X.copy()
    bim(gru_model, test_ds.X, test_ds.y, AttackConfig(epsilon=0.1, alpha=0.05, iterations=3))
    assert np.array_equal(bits(before), bits(test_ds.X))


def test_sign_zero_gradient_leaves_value_in_place():
    """A model that ignores its input has zero input gradients everywhere,
    so FGSM must not move anything."""
    spec = ModelSpec(arch="cnn", lookback=4, n_channels=2, hidden=(3,), dense=(1,))
    model = build_model(spec, seed=0)
    for p in model.params.values():
        p.data[...] = 0.0
    X = np.random.default_rng(0).uniform(0.2, 0.8, size=(5, 4, 2))
    y = np.zeros((5, 1))
    g = input_gradient(model, X, y)
    assert np.all(g == 0.0)
    out = fgsm(model, X, y, AttackConfig(epsilon=0.3))
    np.testing.assert_array_equal(out.X_adv, X)


# ----------------------------------------------------------- behaviour


def test_fgsm_increases_training_objective(small_data, all_models):
    _, test_ds, _ = small_data
    for arch, model in all_models.items():
        clean = rmse(model, test_ds.X, test_ds.y)
        out = fgsm(model, test_ds.X, test_ds.y, AttackConfig(epsilon=0.1))
        attacked = rmse(model, out.X_adv, test_ds.y)
        assert attacked > clean, f"{arch}: fgsm did not hurt ({clean} -> {attacked})"


def test_bim_at_least_matches_fgsm_on_trained_models(small_data, all_models):
    _, test_ds, _ = small_data
    for arch, model in all_models.items():
        f = fgsm(model, test_ds.X, test_ds.y, AttackConfig(epsilon=0.1))
        b = bim(model, test_ds.X, test_ds.y,
                AttackConfig(epsilon=0.1, alpha=0.01, iterations=20))
        f_rmse = rmse(model, f.X_adv, test_ds.y)
        b_rmse = rmse(model, b.X_adv, test_ds.y)
        assert b_rmse >= 0.95 * f_rmse, f"{arch}: bim {b_rmse} far below fgsm {f_rmse}"


def test_gradient_direction_is_ascent(small_data, gru_model):
    """Tiny steps along sign(grad) must not decrease the objective."""
    _, test_ds, _ = small_data
    X = test_ds.X[:32]
    y = test_ds.y[:32]
    g = input_gradient(gru_model, X, y)
    before = float(np.mean((predict(gru_model, X) - y) ** 2))
    after = float(np.mean((predict(gru_model, X + 1e-4 * np.sign(g)) - y) ** 2))
    assert after >= before - 1e-12


def test_input_gradient_matches_unchunked(small_data, gru_model):
    """Chunked gradients equal a single whole-batch pass."""
    import tsfool.attack as atk

    _, test_ds, _ = small_data
    X, y = test_ds.X, test_ds.y
    whole = input_gradient(gru_model, X, y)
    original = atk._CHUNK
    try:
        atk._CHUNK = 13
        chunked = input_gradient(gru_model, X, y)
    finally:
        atk._CHUNK = original
    # batch means scale gradients by chunk size; sign patterns must agree
    assert np.array_equal(np.sign(whole), np.sign(chunked))


def test_attack_stats_fields(small_data, gru_model):
    _, test_ds, _ = small_data
    out = fgsm(gru_model, test_ds.X, test_ds.y, AttackConfig(epsilon=0.05))
    stats = attack_stats(out)
    assert stats["method"] == "fgsm"
    assert stats["epsilon"] == 0.05
    assert stats["n_windows"] == test_ds.n_windows
    assert stats["within_budget"] is True
    assert 0.0 < stats["mean_abs_delta"] <= stats["max_abs_delta"] <= 0.05 + 1e-12
    assert 0.0 < stats["frac_elements_changed"] <= 1.0


# ------------------------------------------------------------ signature


def test_signature_csv_round_trips_values(tmp_path, small_data, gru_model):
    _, test_ds, _ = small_data
    out = fgsm(gru_model, test_ds.X, test_ds.y, AttackConfig(epsilon=0.1))
    path = tmp_path / "sig.csv"
    n = write_signature_csv(out, path, window_indices=[0, 2],
                            channel_names=test_ds.channel_names)
    T, N = test_ds.X.shape[1:]
    assert n == 2 * T * N
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == n
    for row in rows[:10]:
        m, t = int(row["window_index"]), int(row["t"])
        j = test_ds.channel_names.index(row["channel"])
        assert float(row["original"]) == test_ds.X[m, t, j]
        assert float(row["adversarial"]) == out.X_adv[m, t, j]
        assert float(row["delta"]) == out.X_adv[m, t, j] - test_ds.X[m, t, j]


def test_signature_csv_validates_indices(tmp_path, small_data, gru_model):
    _, test_ds, _ = small_data
    out = fgsm(gru_model, test_ds.X[:3], test_ds.y[:3], AttackConfig(epsilon=0.1))
    with pytest.raises(ConfigError):
        write_signature_csv(out, tmp_path / "x.csv", window_indices=[5])
    with pytest.raises(ConfigError):
        write_signature_csv(out, tmp_path / "x.csv", channel_names=["just-one"])
