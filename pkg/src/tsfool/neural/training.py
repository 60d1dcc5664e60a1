"""Mini-batch training with Adam, global-norm gradient clipping, and
divergence detection.

The loop is deliberately plain: shuffle with a seeded generator, slice
batches, record one tape per batch, and update parameters in place.  Epoch
loss history is the size-weighted mean of batch losses.  Gradient clipping
applies during training only — attack code computes raw gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericalError, ShapeError
from .. import ndtensor as nd
from ..ndtensor import Tape, Tensor
from ..data import WindowedDataset
from .models import TrainedModel, ModelSpec, build_model, forward

GRAD_CLIP_NORM = 5.0


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    shuffle_seed: int = 0
    clip_norm: float = GRAD_CLIP_NORM

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.clip_norm <= 0:
            raise ConfigError(f"clip_norm must be positive, got {self.clip_norm}")


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error as a tape-recorded scalar."""
    if pred.shape != target.shape:
        raise ShapeError(f"mse_loss: prediction {pred.shape} vs target {target.shape}")
    return nd.tmean(nd.square(nd.sub(pred, target)))


class AdamState:
    """Per-parameter first/second moment accumulators plus the step count."""

    def __init__(self, params: dict[str, Tensor]):
        self.m = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in params.items()}
        self.t = 0


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> None:
    """One in-place Adam update with bias-corrected moment estimates."""
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for name, p in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for parameter {name}")
        m = state.m[name]
        v = state.v[name]
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * np.square(g)
        p.data -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their joint L2 norm is <= max_norm.
    Returns the pre-clip norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.dot(g.reshape(-1), g.reshape(-1)))
    norm = math.sqrt(total)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def _diagnose_nonfinite(model: TrainedModel, xb: np.ndarray) -> str:
    bad: list[str] = []

    def probe(name, t):
        if not bad and not np.isfinite(t.data).all():
            bad.append(name)

    try:
        forward(model, xb, record=False, probe=probe)
    except Exception:
        pass
    for name, p in model.params.items():
        if not np.isfinite(p.data).all():
            bad.insert(0, f"parameter {name}")
            break
    return bad[0] if bad else "loss"


def train(
    spec_or_model: ModelSpec | TrainedModel,
    dataset: WindowedDataset,
    config: TrainConfig,
    init_seed: int = 0,
    progress=None,
) -> TrainedModel:
    """Train a model (or continue training one) on windowed data.

    Raises NumericalError naming the epoch and first non-finite layer if the
    loss diverges.  ``progress(epoch, loss)``, if given, is called once per
    epoch.
    """
    if isinstance(spec_or_model, TrainedModel):
        model = spec_or_model
    else:
        model = build_model(spec_or_model, init_seed)
    spec = model.spec
    if dataset.X.shape[1] != spec.lookback or dataset.X.shape[2] != spec.n_channels:
        raise ShapeError(
            f"dataset windows {dataset.X.shape[1:]} do not match model "
            f"[{spec.lookback}, {spec.n_channels}]"
        )

    rng = np.random.default_rng(config.shuffle_seed)
    n = dataset.n_windows
    names = list(model.params)
    state = AdamState(model.params)
    start_epoch = len(model.history)

    for epoch in range(start_epoch, start_epoch + config.epochs):
        order = rng.permutation(n)
        epoch_sum = 0.0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            xb = np.ascontiguousarray(dataset.X[idx])
            yb = Tensor(dataset.y[idx])
            with Tape() as tape:
                pred = forward(model, xb, record=True)
                loss = mse_loss(pred, yb)
            loss_val = loss.item()
            if not math.isfinite(loss_val):
                where = _diagnose_nonfinite(model, xb)
                raise NumericalError(
                    f"training diverged at epoch {epoch}: non-finite values first "
                    f"seen at {where}"
                )
            by_tensor = tape.gradients(loss)
            grads = {name: by_tensor[model.params[name]].data for name in names}
            clip_by_global_norm(grads, config.clip_norm)
            adam_step(model.params, grads, state, config)
            epoch_sum += loss_val * len(idx)
        epoch_loss = epoch_sum / n
        model.history.append(epoch_loss)
        if progress is not None:
            progress(epoch, epoch_loss)

    model.metadata.setdefault("train", {})
    model.metadata["train"] = {
        "epochs": len(model.history),
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "shuffle_seed": config.shuffle_seed,
        "final_loss": model.history[-1] if model.history else None,
    }
    return model


def predict(model: TrainedModel, X: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Model outputs for windows X, as a [M, 1] float array."""
    X = np.asarray(X, dtype=np.float64)
    outs = []
    for lo in range(0, X.shape[0], batch_size):
        outs.append(forward(model, X[lo : lo + batch_size]).data)
    return np.concatenate(outs, axis=0) if outs else np.zeros((0, 1))
