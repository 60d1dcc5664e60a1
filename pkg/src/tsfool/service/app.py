"""FastAPI application wrapping the core package.

Endpoints mirror the workflow stages: synth -> prep -> train -> eval /
attack / transfer / sweep.  Domain errors surface as HTTP 400 with a body
``{"error": {"kind": <exception class>, "message": <str>}}`` so thin clients
can map them back onto exit codes.
"""

from __future__ import annotations

import os
from datetime import datetime, timezone

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..attack import AttackConfig, attack_stats, write_signature_csv
from ..data import (
    CsvSchema,
    WindowedDataset,
    load_csv,
    load_dataset,
    prepare_windows,
    resample_mean,
    save_dataset,
    synth_generate,
    write_frame_csv,
)
from ..errors import ConfigError, TsfoolError
from ..experiment import (
    attack_eval,
    epsilon_sweep,
    evaluate,
    transfer_matrix,
    write_summary_json,
    write_sweep_csv,
    write_transfer_csv,
)
from ..neural import ModelSpec, TrainConfig, load_model, save_model, train
from ..presets import get_data_preset, get_model_preset
from .schemas import (
    AttackRequest,
    AttackResponse,
    EvalRequest,
    EvalResponse,
    HealthResponse,
    PrepRequest,
    PrepResponse,
    SweepRequest,
    SweepResponse,
    SynthRequest,
    SynthResponse,
    TrainRequest,
    TrainResponse,
    TransferRequest,
    TransferResponse,
)


def _pick_split(train_ds, test_ds, split: str) -> WindowedDataset:
    if split == "train":
        return train_ds
    if split == "test":
        return test_ds
    raise ConfigError(f"split must be 'train' or 'test', got {split!r}")


def _subsample(ds: WindowedDataset, max_windows: int | None) -> WindowedDataset:
    """Deterministic evenly-spaced subsample, preserving chronology."""
    if max_windows is None or ds.n_windows <= max_windows:
        return ds
    idx = np.linspace(0, ds.n_windows - 1, max_windows).round().astype(int)
    idx = np.unique(idx)
    return WindowedDataset(
        np.ascontiguousarray(ds.X[idx]),
        np.ascontiguousarray(ds.y[idx]),
        ds.lookback,
        ds.channel_names,
        ds.target_channel,
        ds.scaler,
        ds.start_rows[idx].copy(),
    )


def _mask_from_names(ds: WindowedDataset, freeze: list[str] | None):
    if not freeze:
        return None
    unknown = [n for n in freeze if n not in ds.channel_names]
    if unknown:
        raise ConfigError(f"cannot freeze unknown channels {unknown}; have {list(ds.channel_names)}")
    return np.array([n not in freeze for n in ds.channel_names])


def create_app() -> FastAPI:
    app = FastAPI(title="tsfool", version=__version__)

    @app.exception_handler(TsfoolError)
    async def domain_error(_request: Request, exc: TsfoolError):
        return JSONResponse(
            status_code=400,
            content={"error": {"kind": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/v1/synth", response_model=SynthResponse)
    def synth(req: SynthRequest):
        frame = synth_generate(req.seed, req.rows, req.channels)
        write_frame_csv(frame, req.out_csv)
        return SynthResponse(path=req.out_csv, rows=frame.rows, channels=len(frame.names))

    @app.post("/v1/prep", response_model=PrepResponse)
    def prep(req: PrepRequest):
        preset = get_data_preset(req.data_preset) if req.data_preset else None
        base = preset.csv_schema if preset and preset.csv_schema else CsvSchema()
        # Explicit fields override whatever the preset supplies.
        schema = CsvSchema(
            timestamp_columns=tuple(req.timestamp_columns) if req.timestamp_columns else base.timestamp_columns,
            timestamp_format=req.timestamp_format or base.timestamp_format,
            channels=tuple(req.channels) if req.channels else base.channels,
            delimiter=req.delimiter or base.delimiter,
        )
        frame = load_csv(req.csv_path, schema)
        resample = req.resample_seconds
        if resample is None and preset is not None:
            resample = preset.resample_seconds
        if resample:
            frame = resample_mean(frame, resample)
        lookback = req.lookback or (preset.lookback if preset else None)
        target = req.target or (preset.target if preset else None)
        fraction = req.split_fraction or (preset.split_fraction if preset else None)
        if lookback is None or target is None or fraction is None:
            raise ConfigError(
                "prep needs lookback, target, and split_fraction (directly or via data_preset)"
            )
        train_ds, test_ds, _scaler = prepare_windows(frame, lookback, target, fraction)
        save_dataset(req.out_path, train_ds, test_ds)
        return PrepResponse(
            path=req.out_path,
            n_train=train_ds.n_windows,
            n_test=test_ds.n_windows,
            lookback=lookback,
            channel_names=list(train_ds.channel_names),
            target_channel=target,
            fingerprint_train=train_ds.fingerprint(),
            fingerprint_test=test_ds.fingerprint(),
        )

    @app.post("/v1/train", response_model=TrainResponse)
    def train_endpoint(req: TrainRequest):
        train_ds, _test_ds = load_dataset(req.dataset_path)
        if req.preset:
            mp = get_model_preset(req.preset)
            arch = req.arch or mp.arch
            hidden = tuple(req.hidden) if req.hidden else mp.hidden
            dense = tuple(req.dense) if req.dense else mp.dense
            epochs = req.epochs or mp.epochs
            batch = req.batch_size or mp.batch_size
            lr = req.learning_rate or mp.learning_rate
        else:
            if not req.arch or not req.hidden:
                raise ConfigError("train needs either a preset or arch + hidden widths")
            arch = req.arch
            hidden = tuple(req.hidden)
            dense = tuple(req.dense) if req.dense else ((16, 1) if arch == "cnn" else (1,))
            epochs = req.epochs or 60
            batch = req.batch_size or 32
            lr = req.learning_rate or 0.001
        spec = ModelSpec(
            arch=arch,
            lookback=train_ds.lookback,
            n_channels=train_ds.n_channels,
            hidden=hidden,
            dense=dense,
            kernel_size=req.kernel_size or 3,
            channel_names=train_ds.channel_names,
            target_channel=train_ds.target_channel,
        )
        cfg = TrainConfig(
            epochs=epochs,
            batch_size=batch,
            learning_rate=lr,
            shuffle_seed=req.shuffle_seed if req.shuffle_seed is not None else req.seed,
        )
        model = train(spec, train_ds, cfg, init_seed=req.seed)
        save_model(model, req.out_path, scaler=train_ds.scaler)
        return TrainResponse(
            path=req.out_path,
            arch=arch,
            epochs=len(model.history),
            final_loss=model.history[-1],
            n_parameters=model.n_parameters(),
        )

    @app.post("/v1/eval", response_model=EvalResponse)
    def eval_endpoint(req: EvalRequest):
        model, _scaler = load_model(req.model_path)
        train_ds, test_ds = load_dataset(req.dataset_path)
        ds = _pick_split(train_ds, test_ds, req.split)
        report = evaluate(model, ds)
        return EvalResponse(rmse=report.rmse, mae=report.mae,
                            n_windows=report.n_windows, split=req.split)

    @app.post("/v1/attack", response_model=AttackResponse)
    def attack_endpoint(req: AttackRequest):
        model, _scaler = load_model(req.model_path)
        train_ds, test_ds = load_dataset(req.dataset_path)
        ds = _subsample(_pick_split(train_ds, test_ds, req.split), req.max_windows)
        cfg = AttackConfig(
            epsilon=req.epsilon,
            alpha=req.alpha,
            iterations=req.iterations,
            feature_mask=_mask_from_names(ds, req.freeze_channels),
        )
        outcome, batch = attack_eval(model, ds, cfg, req.method)
        stats = attack_stats(batch)
        if req.summary_path:
            extra = None
            if req.include_timestamp:
                extra = {"generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
            # label the model by basename so reports are independent of
            # where the file happens to live (reruns stay byte-identical)
            write_summary_json(req.summary_path, outcome,
                               os.path.basename(req.model_path),
                               model.spec.arch, extra)
        if req.signature_path:
            count = min(req.signature_windows, batch.n_windows)
            write_signature_csv(batch, req.signature_path, range(count), ds.channel_names)
        return AttackResponse(
            method=outcome.method,
            epsilon=outcome.epsilon,
            alpha=outcome.alpha,
            iterations=outcome.iterations,
            rmse_clean=outcome.rmse_clean,
            rmse_attacked=outcome.rmse_attacked,
            pct_increase=outcome.pct_increase,
            n_windows=outcome.n_windows,
            max_abs_delta=stats["max_abs_delta"],
            within_budget=stats["within_budget"],
            summary_path=req.summary_path,
            signature_path=req.signature_path,
        )

    @app.post("/v1/transfer", response_model=TransferResponse)
    def transfer_endpoint(req: TransferRequest):
        if not req.model_paths:
            raise ConfigError("transfer needs at least one model path")
        loaded = [load_model(p)[0] for p in req.model_paths]
        labels = req.labels or [f"m{i}:{m.spec.arch}" for i, m in enumerate(loaded)]
        train_ds, test_ds = load_dataset(req.dataset_path)
        ds = _subsample(_pick_split(train_ds, test_ds, req.split), req.max_windows)
        cfg = AttackConfig(epsilon=req.epsilon, alpha=req.alpha, iterations=req.iterations)
        tm = transfer_matrix(loaded, labels, ds, cfg, req.method)
        if req.out_csv:
            write_transfer_csv(req.out_csv, tm)
        return TransferResponse(
            labels=list(tm.labels),
            method=tm.method,
            epsilon=tm.epsilon,
            clean_rmse=[float(v) for v in tm.clean_rmse],
            adv_rmse=[[float(v) for v in row] for row in tm.adv_rmse],
            pct_increase=[[float(v) for v in row] for row in tm.pct_increase],
            out_csv=req.out_csv,
        )

    @app.post("/v1/sweep", response_model=SweepResponse)
    def sweep_endpoint(req: SweepRequest):
        model, _scaler = load_model(req.model_path)
        train_ds, test_ds = load_dataset(req.dataset_path)
        ds = _subsample(_pick_split(train_ds, test_ds, req.split), req.max_windows)
        sweep = epsilon_sweep(
            model, ds, req.epsilons, req.method, alpha=req.alpha, iterations=req.iterations
        )
        if req.out_csv:
            write_sweep_csv(req.out_csv, sweep)
        return SweepResponse(
            method=sweep.method,
            epsilons=list(sweep.epsilons),
            alphas=list(sweep.alphas),
            iterations=sweep.iterations,
            rmse_clean=sweep.rmse_clean,
            rmse_attacked=list(sweep.rmse_attacked),
            pct_increase=list(sweep.pct_increase),
            out_csv=req.out_csv,
        )

    return app
