"""Evaluation harness: clean metrics, attack outcomes, cross-model transfer
matrices, epsilon sweeps, and deterministic report files.

All metrics are computed in the normalized [0, 1] input space, matching the
space the attacks operate in.  Report writers emit byte-deterministic output
for fixed inputs: JSON with sorted keys, CSV floats via ``repr``.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, ShapeError
from .attack import AttackConfig, AdversarialBatch, bim, fgsm
from .data import WindowedDataset
from .neural.models import TrainedModel
from .neural.training import predict

METHODS = ("fgsm", "bim")


@dataclass(frozen=True)
class EvalReport:
    """Clean-data regression quality."""

    rmse: float
    mae: float
    n_windows: int

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "mae": self.mae, "n_windows": self.n_windows}


def _rmse(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(pred - y))))


def evaluate(model: TrainedModel, dataset: WindowedDataset) -> EvalReport:
    if dataset.n_windows == 0:
        raise ShapeError("cannot evaluate on an empty dataset")
    pred = predict(model, dataset.X)
    err = pred - dataset.y
    return EvalReport(
        rmse=float(np.sqrt(np.mean(np.square(err)))),
        mae=float(np.mean(np.abs(err))),
        n_windows=dataset.n_windows,
    )


def run_attack(
    model: TrainedModel, dataset: WindowedDataset, config: AttackConfig, method: str
) -> AdversarialBatch:
    if method not in METHODS:
        raise ConfigError(f"unknown attack method {method!r}; expected one of {METHODS}")
    fn = fgsm if method == "fgsm" else bim
    return fn(model, dataset.X, dataset.y, config)


@dataclass(frozen=True)
class AttackOutcome:
    """Before/after metrics for one attack on one model."""

    method: str
    epsilon: float
    alpha: float
    iterations: int
    rmse_clean: float
    rmse_attacked: float
    pct_increase: float
    n_windows: int

    def to_dict(self) -> dict:
        return {
            "attack": self.method,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "iters": self.iterations,
            "rmse_clean": self.rmse_clean,
            "rmse_attacked": self.rmse_attacked,
            "pct_increase": self.pct_increase,
            "n_windows": self.n_windows,
        }


def _pct(clean: float, attacked: float) -> float:
    return 100.0 * (attacked - clean) / clean if clean > 0 else float("nan")


def attack_eval(
    model: TrainedModel, dataset: WindowedDataset, config: AttackConfig, method: str
) -> tuple[AttackOutcome, AdversarialBatch]:
    """Attack a dataset and measure the damage on the same model."""
    batch = run_attack(model, dataset, config, method)
    clean = _rmse(predict(model, dataset.X), dataset.y)
    attacked = _rmse(predict(model, batch.X_adv), dataset.y)
    outcome = AttackOutcome(
        method=method,
        epsilon=float(config.epsilon),
        alpha=float(config.alpha),
        iterations=int(config.iterations),
        rmse_clean=clean,
        rmse_attacked=attacked,
        pct_increase=_pct(clean, attacked),
        n_windows=dataset.n_windows,
    )
    return outcome, batch


@dataclass(frozen=True)
class TransferMatrix:
    """Cross-model attack transfer: row = crafting model, column = victim."""

    labels: tuple[str, ...]
    method: str
    epsilon: float
    clean_rmse: np.ndarray      # [S] per victim
    adv_rmse: np.ndarray        # [S, S] source x victim
    pct_increase: np.ndarray    # [S, S]

    @property
    def size(self) -> int:
        return len(self.labels)


def transfer_matrix(
    models: list[TrainedModel],
    labels: list[str],
    dataset: WindowedDataset,
    config: AttackConfig,
    method: str,
) -> TransferMatrix:
    """Craft adversarial windows on each model, evaluate them on every model.

    A single model yields a 1x1 matrix (the self-attack cell).  All models
    must accept the dataset's window geometry.
    """
    if not models:
        raise ConfigError("transfer_matrix needs at least one model")
    if len(labels) != len(models):
        raise ConfigError(f"{len(labels)} labels for {len(models)} models")
    if len(set(labels)) != len(labels):
        raise ConfigError(f"duplicate labels: {labels}")
    geom = (dataset.X.shape[1], dataset.X.shape[2])
    for lbl, m in zip(labels, models):
        if (m.spec.lookback, m.spec.n_channels) != geom:
            raise ShapeError(
                f"model {lbl!r} expects [{m.spec.lookback}, {m.spec.n_channels}], "
                f"dataset windows are {list(geom)}"
            )

    S = len(models)
    clean = np.array([_rmse(predict(m, dataset.X), dataset.y) for m in models])
    adv = np.zeros((S, S))
    pct = np.zeros((S, S))
    for i, src in enumerate(models):
        batch = run_attack(src, dataset, config, method)
        for j, victim in enumerate(models):
            adv[i, j] = _rmse(predict(victim, batch.X_adv), dataset.y)
            pct[i, j] = _pct(clean[j], adv[i, j])
    return TransferMatrix(tuple(labels), method, float(config.epsilon), clean, adv, pct)


@dataclass(frozen=True)
class SweepResult:
    """Attack damage as a function of the epsilon budget."""

    method: str
    epsilons: tuple[float, ...]
    alphas: tuple[float, ...]       # per-epsilon step actually used
    iterations: int
    rmse_clean: float
    rmse_attacked: tuple[float, ...]
    pct_increase: tuple[float, ...]


def epsilon_sweep(
    model: TrainedModel,
    dataset: WindowedDataset,
    epsilons,
    method: str,
    alpha: float | None = None,
    iterations: int = 200,
    feature_mask=None,
) -> SweepResult:
    """Evaluate one attack at several budgets.

    With ``alpha=None`` BIM uses ``epsilon / iterations`` per budget so the
    schedule scales with the ball; FGSM ignores the step entirely.  A zero
    budget is measured like any other and lands exactly at the clean RMSE.
    """
    eps = [float(e) for e in epsilons]
    if not eps:
        raise ConfigError("epsilon_sweep needs at least one epsilon")
    if any(not np.isfinite(e) or e < 0 for e in eps):
        raise ConfigError(f"epsilons must be finite and >= 0, got {eps}")
    if method not in METHODS:
        raise ConfigError(f"unknown attack method {method!r}; expected one of {METHODS}")

    clean = _rmse(predict(model, dataset.X), dataset.y)
    attacked: list[float] = []
    alphas: list[float] = []
    for e in eps:
        a = (e / iterations if alpha is None else alpha) if method == "bim" else 0.0
        cfg = AttackConfig(epsilon=e, alpha=a, iterations=iterations, feature_mask=feature_mask)
        batch = run_attack(model, dataset, cfg, method)
        attacked.append(_rmse(predict(model, batch.X_adv), dataset.y))
        alphas.append(a)
    return SweepResult(
        method=method,
        epsilons=tuple(eps),
        alphas=tuple(alphas),
        iterations=int(iterations),
        rmse_clean=clean,
        rmse_attacked=tuple(attacked),
        pct_increase=tuple(_pct(clean, v) for v in attacked),
    )


# ---------------------------------------------------------------------------
# Report writers (byte-deterministic for fixed inputs)
# ---------------------------------------------------------------------------

def summary_json(outcome: AttackOutcome, model_label: str, arch: str, extra: dict | None = None) -> str:
    doc = {"model": model_label, "arch": arch}
    doc.update(outcome.to_dict())
    if extra:
        doc.update(extra)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_summary_json(path, outcome: AttackOutcome, model_label: str, arch: str,
                       extra: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(summary_json(outcome, model_label, arch, extra))


def write_transfer_csv(path, tm: TransferMatrix) -> None:
    """Matrix of attack-transfer RMSE increases, percent; rows craft, columns
    evaluate."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source\\victim"] + list(tm.labels))
        for i, lbl in enumerate(tm.labels):
            writer.writerow([lbl] + [repr(float(v)) for v in tm.pct_increase[i]])
        writer.writerow([])
        writer.writerow(["victim", "clean_rmse"])
        for j, lbl in enumerate(tm.labels):
            writer.writerow([lbl, repr(float(tm.clean_rmse[j]))])


def write_sweep_csv(path, sweep: SweepResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epsilon", "alpha", "rmse_clean", "rmse_attacked", "pct_increase"])
        for e, a, r, p in zip(sweep.epsilons, sweep.alphas, sweep.rmse_attacked, sweep.pct_increase):
            writer.writerow([repr(float(e)), repr(float(a)), repr(float(sweep.rmse_clean)),
                             repr(float(r)), repr(float(p))])


def reference_anchors() -> dict:
    """Published benchmark numbers bundled for side-by-side context in
    reports.  Informational only — nothing in the package gates on them."""
    with resources.files("tsfool.reference").joinpath("anchors.json").open("r") as fh:
        return json.load(fh)
