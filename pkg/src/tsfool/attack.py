"""Gradient-sign evasion attacks on window regressors.

Both attacks perturb normalized inputs inside an L-infinity ball of radius
``epsilon`` around the original windows:

* ``fgsm`` takes a single step ``X + epsilon * sign(dJ/dX)``.
* ``bim`` repeats smaller steps ``X' + alpha * sign(dJ/dX')`` and projects
  back into the ball after every step.

``J`` is the model's training objective (mean squared error), evaluated with
the true targets; gradients are raw — no clipping is ever applied here.

Exactness contracts, verified by the test suite:

* ``epsilon == 0`` returns the input bit for bit (both attacks).
* ``alpha == 0`` makes every BIM step a no-op, so the output equals the
  input bit for bit.
* ``bim`` with ``iterations=1, alpha=epsilon`` equals ``fgsm`` bit for bit:
  both take the same single step, and projecting a point already on the
  ball's surface leaves its bits unchanged.
* Channels with ``feature_mask[c] == False`` are restored from the original
  after every step, so they match the input bit for bit.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError, ShapeError
from .ndtensor import Tape, Tensor
from .neural.models import TrainedModel, forward
from .neural.training import mse_loss

_CHUNK = 256  # fixed internal batch size for gradient passes


@dataclass(frozen=True)
class AttackConfig:
    """Budget and schedule for an evasion attack.

    ``epsilon`` is the L-infinity budget in normalized units; ``alpha`` the
    per-iteration step and ``iterations`` the step count (both used by BIM
    only).  ``feature_mask`` holds one boolean per channel — True means the
    channel may be perturbed, False freezes it at its original values.
    """

    epsilon: float = 0.2
    alpha: float = 0.001
    iterations: int = 200
    feature_mask: np.ndarray | None = None

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise ConfigError(f"epsilon must be finite and >= 0, got {self.epsilon}")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ConfigError(f"alpha must be finite and >= 0, got {self.alpha}")
        if self.iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {self.iterations}")
        if self.feature_mask is not None:
            mask = np.asarray(self.feature_mask)
            if mask.dtype != np.bool_ or mask.ndim != 1:
                raise ConfigError("feature_mask must be a 1-D boolean array")
            object.__setattr__(self, "feature_mask", mask.copy())


@dataclass(frozen=True)
class AdversarialBatch:
    """Original windows alongside their attacked counterparts."""

    X: np.ndarray          # [M, T, N] originals (normalized space)
    X_adv: np.ndarray      # [M, T, N] perturbed
    y: np.ndarray          # [M, 1] true targets
    method: str            # "fgsm" | "bim"
    config: AttackConfig

    @property
    def delta(self) -> np.ndarray:
        return self.X_adv - self.X

    @property
    def n_windows(self) -> int:
        return self.X.shape[0]


def input_gradient(model: TrainedModel, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """dJ/dX of the MSE objective, one gradient slab per window.

    Windows are independent, so the pass is chunked internally; sign
    patterns do not depend on the chunking because each window's gradient
    only ever gets a positive batch-size scale.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 3:
        raise ShapeError(f"expected windows [M, T, N], got {X.shape}")
    if y.shape != (X.shape[0], 1):
        raise ShapeError(f"targets must be [{X.shape[0]}, 1], got {y.shape}")
    out = np.empty_like(X)
    for lo in range(0, X.shape[0], _CHUNK):
        xb = Tensor(np.ascontiguousarray(X[lo : lo + _CHUNK]), requires_grad=True)
        yb = Tensor(y[lo : lo + _CHUNK])
        with Tape() as tape:
            loss = mse_loss(forward(model, xb, record=True), yb)
        if not np.isfinite(loss.item()):
            raise NumericalError("attack objective became non-finite; model may have diverged")
        out[lo : lo + _CHUNK] = tape.gradients(loss)[xb].data
    return out


def _signed_step(model: TrainedModel, X_cur: np.ndarray, y: np.ndarray, step: float) -> np.ndarray:
    """One gradient-sign ascent step; a zero step returns the input's bits."""
    if step == 0.0:
        return X_cur.copy()
    g = input_gradient(model, X_cur, y)
    return X_cur + step * np.sign(g)


def _restore_frozen(X_cur: np.ndarray, X: np.ndarray, mask: np.ndarray | None) -> None:
    if mask is not None:
        X_cur[..., ~mask] = X[..., ~mask]


def _check_attack_args(model: TrainedModel, X: np.ndarray, config: AttackConfig) -> None:
    spec = model.spec
    if X.shape[1:] != (spec.lookback, spec.n_channels):
        raise ShapeError(
            f"windows {X.shape[1:]} do not match model [{spec.lookback}, {spec.n_channels}]"
        )
    if config.feature_mask is not None and len(config.feature_mask) != spec.n_channels:
        raise ConfigError(
            f"feature_mask has {len(config.feature_mask)} entries for "
            f"{spec.n_channels} channels"
        )


def fgsm(model: TrainedModel, X: np.ndarray, y: np.ndarray, config: AttackConfig) -> AdversarialBatch:
    """Fast gradient sign method: one full-budget step."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_attack_args(model, X, config)
    if config.epsilon == 0.0:
        X_adv = X.copy()
    else:
        X_adv = _signed_step(model, X, y, config.epsilon)
        _restore_frozen(X_adv, X, config.feature_mask)
    return AdversarialBatch(X, X_adv, y, "fgsm", config)


def bim(model: TrainedModel, X: np.ndarray, y: np.ndarray, config: AttackConfig) -> AdversarialBatch:
    """Basic iterative method: repeated small steps, projected into the
    epsilon-ball around the original windows after every step."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_attack_args(model, X, config)
    if config.epsilon == 0.0 or config.alpha == 0.0:
        X_adv = X.copy()
    else:
        lo = X - config.epsilon
        hi = X + config.epsilon
        X_adv = X.copy()
        for _ in range(config.iterations):
            X_adv = _signed_step(model, X_adv, y, config.alpha)
            np.clip(X_adv, lo, hi, out=X_adv)
            _restore_frozen(X_adv, X, config.feature_mask)
    return AdversarialBatch(X, X_adv, y, "bim", config)


def attack_stats(batch: AdversarialBatch) -> dict:
    """Perturbation summary for a finished attack."""
    delta = batch.delta
    abs_delta = np.abs(delta)
    return {
        "method": batch.method,
        "epsilon": float(batch.config.epsilon),
        "n_windows": int(batch.n_windows),
        "max_abs_delta": float(abs_delta.max()) if delta.size else 0.0,
        "mean_abs_delta": float(abs_delta.mean()) if delta.size else 0.0,
        "frac_elements_changed": float(np.mean(delta != 0.0)) if delta.size else 0.0,
        "within_budget": bool(np.all(abs_delta <= batch.config.epsilon + 1e-12)),
    }


def write_signature_csv(
    batch: AdversarialBatch,
    path: str | os.PathLike,
    window_indices=None,
    channel_names=None,
) -> int:
    """Dump per-element perturbations as CSV rows
    (window_index, t, channel, original, adversarial, delta).

    ``window_indices`` limits output to selected windows (default: all);
    returns the number of data rows written.
    """
    M, T, N = batch.X.shape
    if window_indices is None:
        window_indices = range(M)
    if channel_names is None:
        names = [f"c{j}" for j in range(N)]
    else:
        if len(channel_names) != N:
            raise ConfigError(f"{len(channel_names)} channel names for {N} channels")
        names = list(channel_names)
    rows = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "t", "channel", "original", "adversarial", "delta"])
        for m in window_indices:
            if not 0 <= m < M:
                raise ConfigError(f"window index {m} out of range [0, {M})")
            for t in range(T):
                for j in range(N):
                    o = batch.X[m, t, j]
                    a = batch.X_adv[m, t, j]
                    writer.writerow([m, t, names[j], repr(float(o)), repr(float(a)),
                                     repr(float(a - o))])
                    rows += 1
    return rows
