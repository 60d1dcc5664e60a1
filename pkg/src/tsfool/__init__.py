"""tsfool: gradient-sign evasion attacks on time-series regressors.

The package trains CNN / LSTM / GRU next-step regressors on multivariate
series with a small tape-based autodiff engine, then crafts FGSM and BIM
adversarial inputs against them and measures the damage, including
cross-architecture transfer.  A FastAPI service exposes the workflow; the
``tsfool`` CLI drives it in-process or against a remote server.
"""

from .errors import ConfigError, DataError, NumericalError, ShapeError, TsfoolError
from .ndtensor import Tape, Tensor, backward, suspend_tape
from .data import (
    CsvSchema,
    Scaler,
    SeriesFrame,
    WindowedDataset,
    fit_scaler,
    fnv1a64,
    load_csv,
    load_dataset,
    make_windows,
    prepare_windows,
    resample_mean,
    save_dataset,
    split_frame,
    split_windows,
    synth_generate,
    write_frame_csv,
)
from .neural import (
    ModelSpec,
    TrainConfig,
    TrainedModel,
    build_model,
    forward,
    load_model,
    mse_loss,
    predict,
    save_model,
    train,
)
from .attack import (
    AdversarialBatch,
    AttackConfig,
    attack_stats,
    bim,
    fgsm,
    input_gradient,
    write_signature_csv,
)
from .experiment import (
    AttackOutcome,
    EvalReport,
    SweepResult,
    TransferMatrix,
    attack_eval,
    epsilon_sweep,
    evaluate,
    reference_anchors,
    run_attack,
    transfer_matrix,
)

__version__ = "1.0.0"

__all__ = [
    "TsfoolError", "ConfigError", "DataError", "ShapeError", "NumericalError",
    "Tensor", "Tape", "backward", "suspend_tape",
    "SeriesFrame", "CsvSchema", "Scaler", "WindowedDataset",
    "load_csv", "resample_mean", "fit_scaler", "make_windows",
    "split_frame", "split_windows", "prepare_windows", "synth_generate",
    "write_frame_csv", "save_dataset", "load_dataset", "fnv1a64",
    "ModelSpec", "TrainedModel", "TrainConfig",
    "build_model", "forward", "train", "predict", "mse_loss",
    "save_model", "load_model",
    "AttackConfig", "AdversarialBatch", "fgsm", "bim",
    "input_gradient", "attack_stats", "write_signature_csv",
    "EvalReport", "AttackOutcome", "TransferMatrix", "SweepResult",
    "evaluate", "run_attack", "attack_eval", "transfer_matrix",
    "epsilon_sweep", "reference_anchors",
    "__version__",
]
