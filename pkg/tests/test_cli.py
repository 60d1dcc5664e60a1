"""Command-line interface tests: the full pipeline through main(), exit
codes, config-file defaults, and environment seed handling."""

import json

import pytest

from tsfool.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from tsfool.neural import load_model


@pytest.fixture(scope="module")
def arts(tmp_path_factory):
    """Artifacts from one CLI pipeline run, shared by read-only tests."""
    root = tmp_path_factory.mktemp("cli")
    csv = str(root / "series.csv")
    ds = str(root / "data.npz")
    model = str(root / "model.tsf")
    assert main(["synth", "--seed", "11", "--rows", "300", "--channels", "4",
                 "--out", csv]) == EXIT_OK
    assert main(["prep", "--csv", csv, "--out", ds, "--lookback", "8",
                 "--target", "target", "--split-fraction", "0.25"]) == EXIT_OK
    assert main(["train", "--dataset", ds, "--out", model, "--arch", "gru",
                 "--hidden", "8,8", "--epochs", "10", "--batch-size", "32",
                 "--seed", "5"]) == EXIT_OK
    return {"root": root, "csv": csv, "ds": ds, "model": model}


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.startswith("tsfool ")


def test_pipeline_prints_progress(arts, capsys):
    assert main(["eval", "--model", arts["model"], "--dataset", arts["ds"]]) == EXIT_OK
    out = capsys.readouterr().out
    assert "rmse" in out and "test windows" in out

    assert main(["eval", "--model", arts["model"], "--dataset", arts["ds"],
                 "--split", "train"]) == EXIT_OK
    assert "train windows" in capsys.readouterr().out


def test_attack_command_and_summary(arts, tmp_path, capsys):
    summary = str(tmp_path / "sum.json")
    rc = main(["attack", "--model", arts["model"], "--dataset", arts["ds"],
               "--method", "fgsm", "--epsilon", "0.1",
               "--summary", summary, "--no-timestamp"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "fgsm epsilon=0.1" in out
    assert "within budget: True" in out
    doc = json.loads(open(summary).read())
    assert doc["attack"] == "fgsm"
    assert "generated_at" not in doc


def test_no_timestamp_reruns_are_byte_identical(arts, tmp_path):
    paths = [str(tmp_path / f"s{i}.json") for i in (0, 1)]
    for p in paths:
        rc = main(["attack", "--model", arts["model"], "--dataset", arts["ds"],
                   "--method", "bim", "--epsilon", "0.1", "--alpha", "0.02",
                   "--iterations", "5", "--max-windows", "16",
                   "--summary", p, "--no-timestamp"])
        assert rc == EXIT_OK
    assert open(paths[0], "rb").read() == open(paths[1], "rb").read()


def test_transfer_command_prints_matrix(arts, capsys):
    rc = main(["transfer", "--models", f"{arts['model']},{arts['model']}",
               "--labels", "a,b", "--dataset", arts["ds"], "--method", "fgsm",
               "--epsilon", "0.1", "--max-windows", "24"])
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "rows craft / columns evaluate" in out
    assert "clean rmse:" in out
    assert "a" in out and "b" in out


def test_sweep_command(arts, tmp_path, capsys):
    out_csv = str(tmp_path / "sweep.csv")
    rc = main(["sweep", "--model", arts["model"], "--dataset", arts["ds"],
               "--method", "fgsm", "--epsilons", "0,0.1",
               "--max-windows", "24", "--out", out_csv])
    assert rc == EXIT_OK
    text = capsys.readouterr().out
    assert "sweep" in text
    lines = open(out_csv).read().strip().splitlines()
    assert lines[0] == "epsilon,alpha,rmse_clean,rmse_attacked,pct_increase"
    assert len(lines) == 3


# ------------------------------------------------------------ exit codes


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--definitely-not-a-flag", "1", "--out", "/tmp/x.csv"])
    assert exc.value.code == EXIT_USAGE


def test_unknown_preset_is_usage_error(arts, capsys):
    rc = main(["train", "--dataset", arts["ds"], "--out", "/tmp/never.tsf",
               "--preset", "no-such-preset"])
    assert rc == EXIT_USAGE
    assert "no-such-preset" in capsys.readouterr().err


def test_missing_data_file_is_data_error(capsys):
    rc = main(["eval", "--model", "/nonexistent/m.tsf",
               "--dataset", "/nonexistent/d.npz"])
    assert rc == EXIT_DATA
    assert "error:" in capsys.readouterr().err


def test_bad_attack_budget_is_usage_error(arts):
    rc = main(["attack", "--model", arts["model"], "--dataset", arts["ds"],
               "--method", "fgsm", "--epsilon", "-0.5"])
    assert rc == EXIT_USAGE


@pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow is the point
def test_diverged_training_is_numeric_error(arts, tmp_path, capsys):
    rc = main(["train", "--dataset", arts["ds"], "--out", str(tmp_path / "x.tsf"),
               "--arch", "gru", "--hidden", "4", "--epochs", "4",
               "--batch-size", "4096", "--learning-rate", "1e200", "--seed", "0"])
    assert rc == EXIT_NUMERIC
    assert "diverged" in capsys.readouterr().err


# ------------------------------------------------------------ config file


def test_config_file_supplies_defaults(arts, tmp_path):
    cfg = tmp_path / "tsfool.ini"
    cfg.write_text("[train]\nepochs = 3\nhidden = 6,6\narch = gru\n"
                   "batch_size = 32\n")
    out = str(tmp_path / "cfg.tsf")
    rc = main(["--config", str(cfg), "train", "--dataset", arts["ds"],
               "--out", out, "--seed", "1"])
    assert rc == EXIT_OK
    model, _ = load_model(out)
    assert len(model.history) == 3
    assert model.spec.hidden == (6, 6)


def test_explicit_flag_beats_config(arts, tmp_path):
    cfg = tmp_path / "tsfool.ini"
    cfg.write_text("[train]\nepochs = 9\nhidden = 6,6\narch = gru\n"
                   "batch_size = 32\n")
    out = str(tmp_path / "cfg2.tsf")
    rc = main(["--config", str(cfg), "train", "--dataset", arts["ds"],
               "--out", out, "--epochs", "2", "--seed", "1"])
    assert rc == EXIT_OK
    model, _ = load_model(out)
    assert len(model.history) == 2


def test_config_unknown_section_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[mystery]\nknob = 1\n")
    rc = main(["--config", str(cfg), "synth", "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_USAGE
    assert "unknown config section" in capsys.readouterr().err


def test_config_missing_file_rejected(tmp_path, capsys):
    rc = main(["--config", str(tmp_path / "absent.ini"),
               "synth", "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_USAGE
    assert "cannot read config" in capsys.readouterr().err


# ------------------------------------------------------- environment seed


def test_env_seed_used_when_flag_absent(tmp_path, monkeypatch):
    a, b, c = (str(tmp_path / f"{n}.csv") for n in "abc")
    monkeypatch.setenv("TSFOOL_SEED", "77")
    assert main(["synth", "--rows", "120", "--out", a]) == EXIT_OK
    assert main(["synth", "--rows", "120", "--out", b]) == EXIT_OK
    # same env seed: identical bytes
    assert open(a, "rb").read() == open(b, "rb").read()
    # explicit flag wins over the environment
    assert main(["synth", "--rows", "120", "--seed", "78", "--out", c]) == EXIT_OK
    assert open(a, "rb").read() != open(c, "rb").read()


def test_env_seed_must_be_integer(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("TSFOOL_SEED", "banana")
    rc = main(["synth", "--rows", "120", "--out", str(tmp_path / "x.csv")])
    assert rc == EXIT_USAGE
    assert "TSFOOL_SEED" in capsys.readouterr().err
