"""Request/response bodies for the HTTP service.

Every request model rejects unknown keys, so typos fail loudly instead of
being silently ignored.  File paths are interpreted on the machine running
the service (which is the local machine when the CLI runs in-process).
"""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class _Req(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --------------------------------------------------------------------- synth

class SynthRequest(_Req):
    seed: int = 0
    rows: int = 600
    channels: int = 5
    out_csv: str


class SynthResponse(BaseModel):
    path: str
    rows: int
    channels: int


# ---------------------------------------------------------------------- prep

class PrepRequest(_Req):
    csv_path: str
    out_path: str
    data_preset: str | None = None
    lookback: int | None = None
    target: str | None = None
    split_fraction: float | None = None
    resample_seconds: int | None = None
    delimiter: str | None = None
    timestamp_columns: list[str] | None = None
    timestamp_format: str | None = None
    channels: list[str] | None = None


class PrepResponse(BaseModel):
    path: str
    n_train: int
    n_test: int
    lookback: int
    channel_names: list[str]
    target_channel: str
    fingerprint_train: str
    fingerprint_test: str


# --------------------------------------------------------------------- train

class TrainRequest(_Req):
    dataset_path: str
    out_path: str
    preset: str | None = None
    arch: str | None = None
    hidden: list[int] | None = None
    dense: list[int] | None = None
    kernel_size: int | None = None
    epochs: int | None = None
    batch_size: int | None = None
    learning_rate: float | None = None
    seed: int = 0
    shuffle_seed: int | None = None


class TrainResponse(BaseModel):
    path: str
    arch: str
    epochs: int
    final_loss: float
    n_parameters: int


# ---------------------------------------------------------------------- eval

class EvalRequest(_Req):
    model_path: str
    dataset_path: str
    split: str = "test"


class EvalResponse(BaseModel):
    rmse: float
    mae: float
    n_windows: int
    split: str


# -------------------------------------------------------------------- attack

class AttackRequest(_Req):
    model_path: str
    dataset_path: str
    method: str
    split: str = "test"
    epsilon: float = 0.2
    alpha: float = 0.001
    iterations: int = 200
    freeze_channels: list[str] | None = None
    max_windows: int | None = Field(default=None, ge=1)
    summary_path: str | None = None
    signature_path: str | None = None
    signature_windows: int = 1
    include_timestamp: bool = True


class AttackResponse(BaseModel):
    method: str
    epsilon: float
    alpha: float
    iterations: int
    rmse_clean: float
    rmse_attacked: float
    pct_increase: float
    n_windows: int
    max_abs_delta: float
    within_budget: bool
    summary_path: str | None = None
    signature_path: str | None = None


# ------------------------------------------------------------------ transfer

class TransferRequest(_Req):
    model_paths: list[str]
    dataset_path: str
    method: str
    labels: list[str] | None = None
    split: str = "test"
    epsilon: float = 0.2
    alpha: float = 0.001
    iterations: int = 200
    max_windows: int | None = Field(default=None, ge=1)
    out_csv: str | None = None


class TransferResponse(BaseModel):
    labels: list[str]
    method: str
    epsilon: float
    clean_rmse: list[float]
    adv_rmse: list[list[float]]
    pct_increase: list[list[float]]
    out_csv: str | None = None


# --------------------------------------------------------------------- sweep

class SweepRequest(_Req):
    model_path: str
    dataset_path: str
    method: str
    epsilons: list[float]
    split: str = "test"
    alpha: float | None = None
    iterations: int = 200
    max_windows: int | None = Field(default=None, ge=1)
    out_csv: str | None = None


class SweepResponse(BaseModel):
    method: str
    epsilons: list[float]
    alphas: list[float]
    iterations: int
    rmse_clean: float
    rmse_attacked: list[float]
    pct_increase: list[float]
    out_csv: str | None = None


# -------------------------------------------------------------------- health

class HealthResponse(BaseModel):
    status: str
    version: str
