"""Neural regressors: model construction, training, and persistence."""

from .models import ARCHS, ModelSpec, TrainedModel, build_model, forward
from .training import (
    GRAD_CLIP_NORM,
    AdamState,
    TrainConfig,
    adam_step,
    clip_by_global_norm,
    mse_loss,
    predict,
    train,
)
from .serialize import load_model, save_model

__all__ = [
    "ARCHS",
    "ModelSpec",
    "TrainedModel",
    "build_model",
    "forward",
    "GRAD_CLIP_NORM",
    "AdamState",
    "TrainConfig",
    "adam_step",
    "clip_by_global_norm",
    "mse_loss",
    "predict",
    "train",
    "load_model",
    "save_model",
]
