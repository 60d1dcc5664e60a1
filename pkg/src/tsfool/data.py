"""Dataset plumbing: CSV ingestion, resampling, scaling, windowing, splits,
and a seeded synthetic generator for tests and demos.

Conventions fixed here:

* Gaps ("?" or empty CSV cells) are NaN inside a ``SeriesFrame``.
* ``resample_mean`` buckets by wall-clock period, averages non-gap values,
  forward-fills all-gap buckets, and drops leading rows that never saw data.
* Scaling is per-channel min-max to [0, 1], fitted on training rows only;
  attack budgets (epsilon) are expressed in this normalized space.
* Window m covers rows [m, m+T) and its target is the target channel at row
  m+T (strictly next-step, information-causal).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

_GAP_TOKENS = {"", "?", "nan", "NaN", "NA"}

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a over raw bytes."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class SeriesFrame:
    """Timestamped multivariate series; NaN marks an explicit gap."""

    timestamps: np.ndarray        # datetime64[s], strictly increasing
    names: tuple[str, ...]
    values: np.ndarray            # [rows, N] float64

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[s]")
        vals = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[1] != len(self.names):
            raise DataError(
                f"values shape {vals.shape} does not match {len(self.names)} channel names"
            )
        if len(ts) != vals.shape[0]:
            raise DataError(f"{len(ts)} timestamps vs {vals.shape[0]} value rows")
        if len(self.names) != len(set(self.names)):
            raise DataError("duplicate channel names")
        if len(ts) > 1 and not np.all(np.diff(ts.astype("int64")) > 0):
            raise DataError("timestamps must be strictly increasing")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise DataError(f"unknown channel {name!r}; have {list(self.names)}")
        return self.values[:, self.names.index(name)]


@dataclass(frozen=True)
class CsvSchema:
    """Column layout of an input CSV.

    ``timestamp_columns`` may list several columns (e.g. separate date and
    time); their cell values are joined with a single space before parsing
    with ``timestamp_format``.  ``channels=None`` takes every non-timestamp
    column, in file order.
    """

    timestamp_columns: tuple[str, ...] = ("timestamp",)
    timestamp_format: str = "%Y-%m-%d %H:%M:%S"
    channels: tuple[str, ...] | None = None
    delimiter: str = ","


def load_csv(path: str | os.PathLike, schema: CsvSchema) -> SeriesFrame:
    """Parse a CSV into a SeriesFrame; unparseable numeric cells become gaps."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot open {path}: {e}") from e
    with fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for col in schema.timestamp_columns:
            if col not in header:
                raise DataError(f"{path}: missing timestamp column {col!r}")
        ts_idx = [header.index(c) for c in schema.timestamp_columns]
        if schema.channels is None:
            names = tuple(h for h in header if h not in schema.timestamp_columns)
        else:
            for col in schema.channels:
                if col not in header:
                    raise DataError(f"{path}: missing column {col!r}")
            names = tuple(schema.channels)
        ch_idx = [header.index(n) for n in names]

        stamps: list = []
        rows: list[list[float]] = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(cell.strip() == "" for cell in rec):
                continue
            raw_ts = " ".join(rec[i].strip() for i in ts_idx)
            try:
                dt = datetime.strptime(raw_ts, schema.timestamp_format)
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: bad timestamp {raw_ts!r}: {e}") from e
            stamps.append(np.datetime64(dt, "s"))
            row = []
            for i in ch_idx:
                cell = rec[i].strip() if i < len(rec) else ""
                if cell in _GAP_TOKENS:
                    row.append(np.nan)
                else:
                    try:
                        row.append(float(cell))
                    except ValueError:
                        row.append(np.nan)
            rows.append(row)

    if not rows:
        raise DataError(f"{path}: no data rows")
    ts = np.array(stamps, dtype="datetime64[s]")
    if len(ts) > 1 and not np.all(np.diff(ts.astype("int64")) > 0):
        raise DataError(f"{path}: timestamps are not strictly increasing")
    return SeriesFrame(ts, names, np.array(rows, dtype=np.float64))


def resample_mean(frame: SeriesFrame, period_seconds: int) -> SeriesFrame:
    """Bucket rows into fixed periods and average the non-gap values.

    All-gap buckets (including entirely missing ones) are forward-filled from
    the previous bucket; leading rows with any still-missing channel are
    dropped.
    """
    if frame.rows == 0:
        raise DataError("resample: empty frame")
    if period_seconds <= 0:
        raise ConfigError(f"resample period must be positive, got {period_seconds}")
    t = frame.timestamps.astype("int64")
    spacing = int(np.min(np.diff(t))) if frame.rows > 1 else period_seconds
    if period_seconds % spacing != 0:
        raise ConfigError(
            f"resample period {period_seconds}s is not a multiple of source spacing {spacing}s"
        )

    bucket = (t - t[0]) // period_seconds
    n_buckets = int(bucket[-1]) + 1
    n_ch = len(frame.names)
    sums = np.zeros((n_buckets, n_ch))
    counts = np.zeros((n_buckets, n_ch))
    finite = np.isfinite(frame.values)
    np.add.at(sums, bucket, np.where(finite, frame.values, 0.0))
    np.add.at(counts, bucket, finite.astype(np.float64))
    with np.errstate(invalid="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1.0), np.nan)

    # Forward-fill empty buckets per channel, then drop leading gaps.
    for c in range(n_ch):
        col = means[:, c]
        last = np.nan
        for i in range(n_buckets):
            if math.isnan(col[i]):
                col[i] = last
            else:
                last = col[i]
    keep = np.all(np.isfinite(means), axis=1)
    first = int(np.argmax(keep)) if keep.any() else n_buckets
    if first >= n_buckets:
        raise DataError("resample: no bucket has data for every channel")
    means = means[first:]
    stamps = frame.timestamps[0].astype("int64") + period_seconds * np.arange(
        first, n_buckets, dtype="int64"
    )
    return SeriesFrame(stamps.astype("datetime64[s]"), frame.names, means)


@dataclass(frozen=True)
class Scaler:
    """Per-channel min-max scaler fitted on a training row range."""

    names: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray
    fit_range: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "mins", np.asarray(self.mins, dtype=np.float64))
        object.__setattr__(self, "maxs", np.asarray(self.maxs, dtype=np.float64))
        if np.any(self.maxs < self.mins):
            raise DataError("scaler: max < min for some channel")

    def _span(self) -> np.ndarray:
        span = self.maxs - self.mins
        return np.where(span > 0, span, 1.0)

    def apply_frame(self, frame: SeriesFrame) -> SeriesFrame:
        if frame.names != self.names:
            raise DataError(f"scaler fitted on {self.names}, frame has {frame.names}")
        scaled = (frame.values - self.mins) / self._span()
        return SeriesFrame(frame.timestamps, frame.names, scaled)

    def invert_frame(self, frame: SeriesFrame) -> SeriesFrame:
        if frame.names != self.names:
            raise DataError(f"scaler fitted on {self.names}, frame has {frame.names}")
        return SeriesFrame(frame.timestamps, frame.names, frame.values * self._span() + self.mins)

    def apply_column(self, name: str, values: np.ndarray) -> np.ndarray:
        i = self.names.index(name)
        return (np.asarray(values, dtype=np.float64) - self.mins[i]) / self._span()[i]

    def invert_column(self, name: str, values: np.ndarray) -> np.ndarray:
        i = self.names.index(name)
        return np.asarray(values, dtype=np.float64) * self._span()[i] + self.mins[i]


def fit_scaler(frame: SeriesFrame, train_range: tuple[int, int]) -> Scaler:
    """Fit per-channel min/max on rows [start, stop) only."""
    start, stop = train_range
    if not (0 <= start < stop <= frame.rows):
        raise ConfigError(f"fit range [{start}, {stop}) invalid for {frame.rows} rows")
    section = frame.values[start:stop]
    if not np.isfinite(section).any(axis=0).all():
        raise DataError("fit_scaler: some channel has no finite value in the training range")
    with np.errstate(all="ignore"):
        mins = np.nanmin(section, axis=0)
        maxs = np.nanmax(section, axis=0)
    return Scaler(frame.names, mins, maxs, (start, stop))


@dataclass(frozen=True)
class WindowedDataset:
    """Sliding windows with strictly next-step targets."""

    X: np.ndarray                     # [M, T, N]
    y: np.ndarray                     # [M, 1]
    lookback: int
    channel_names: tuple[str, ...]
    target_channel: str
    scaler: Scaler | None = None
    start_rows: np.ndarray = field(default=None)  # source row of each window start

    def __post_init__(self):
        if self.start_rows is None:
            object.__setattr__(self, "start_rows", np.arange(self.X.shape[0], dtype=np.int64))
        if self.X.ndim != 3 or self.y.shape != (self.X.shape[0], 1):
            raise DataError(f"window shapes X{self.X.shape} y{self.y.shape} inconsistent")
        if self.X.shape[1] != self.lookback or self.X.shape[2] != len(self.channel_names):
            raise DataError(
                f"X{self.X.shape} does not match lookback {self.lookback} "
                f"x {len(self.channel_names)} channels"
            )

    @property
    def n_windows(self) -> int:
        return self.X.shape[0]

    @property
    def n_channels(self) -> int:
        return self.X.shape[2]

    def fingerprint(self) -> str:
        """FNV-1a of the canonical byte form, as 16 hex digits."""
        h = fnv1a64(self._canonical_bytes())
        return f"{h:016x}"

    def _canonical_bytes(self) -> bytes:
        head = "|".join(
            ["TSWIN1", str(self.lookback), self.target_channel, ",".join(self.channel_names)]
        ).encode()
        return (
            head
            + self.X.astype("<f8").tobytes()
            + self.y.astype("<f8").tobytes()
            + self.start_rows.astype("<i8").tobytes()
        )


def make_windows(
    frame: SeriesFrame,
    lookback: int,
    target_channel: str,
    input_channels: Sequence[str] | None = None,
) -> WindowedDataset:
    if lookback < 1:
        raise ConfigError(f"lookback must be >= 1, got {lookback}")
    if frame.rows <= lookback:
        raise DataError(f"need more than {lookback} rows, have {frame.rows}")
    target = frame.column(target_channel)
    names = tuple(input_channels) if input_channels is not None else frame.names
    cols = [frame.names.index(n) if n in frame.names else -1 for n in names]
    for n, c in zip(names, cols):
        if c < 0:
            raise DataError(f"unknown input channel {n!r}")
    vals = frame.values[:, cols]
    if not np.isfinite(vals).all() or not np.isfinite(target).all():
        raise DataError("windowing requires gap-free data; resample or fill gaps first")

    m = frame.rows - lookback
    X = np.lib.stride_tricks.sliding_window_view(vals, lookback, axis=0)[:m]
    X = np.ascontiguousarray(np.swapaxes(X, 1, 2))     # [M, T, N]
    y = target[lookback:].reshape(-1, 1).copy()
    return WindowedDataset(X, y, lookback, names, target_channel)


def split_frame(frame: SeriesFrame, fraction: float) -> tuple[SeriesFrame, SeriesFrame]:
    """Chronological split: the latest ceil(rows*fraction) rows become test."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must be in (0, 1), got {fraction}")
    n_test = int(math.ceil(frame.rows * fraction))
    cut = frame.rows - n_test
    if cut < 1 or n_test < 1:
        raise DataError(f"cannot split {frame.rows} rows with fraction {fraction}")
    return (
        SeriesFrame(frame.timestamps[:cut], frame.names, frame.values[:cut]),
        SeriesFrame(frame.timestamps[cut:], frame.names, frame.values[cut:]),
    )


def split_windows(
    dataset: WindowedDataset, fraction: float
) -> tuple[WindowedDataset, WindowedDataset]:
    """Split windows so that any window whose target row falls in the latest
    ceil(rows*fraction) source rows goes to test."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must be in (0, 1), got {fraction}")
    rows = dataset.n_windows + dataset.lookback
    cut = rows - int(math.ceil(rows * fraction))
    target_rows = dataset.start_rows + dataset.lookback
    test_mask = target_rows >= cut
    if not test_mask.any() or test_mask.all():
        raise DataError(f"split fraction {fraction} leaves an empty side")

    def pick(mask):
        return WindowedDataset(
            np.ascontiguousarray(dataset.X[mask]),
            np.ascontiguousarray(dataset.y[mask]),
            dataset.lookback,
            dataset.channel_names,
            dataset.target_channel,
            dataset.scaler,
            dataset.start_rows[mask].copy(),
        )

    return pick(~test_mask), pick(test_mask)


def synth_generate(seed: int, rows: int, n_channels: int) -> SeriesFrame:
    """Deterministic synthetic multivariate series.

    Channels ``ch1..ch{N-1}`` are mixtures of two sines plus AR(1) noise; the
    ``target`` channel is a fixed (seed-drawn) linear combination of lagged
    driver values plus a small noise term, so next-step regressors can learn
    it well.
    """
    if rows < 100:
        raise ConfigError(f"synthetic series needs rows >= 100, got {rows}")
    if n_channels < 2:
        raise ConfigError(f"synthetic series needs >= 2 channels, got {n_channels}")
    rng = np.random.default_rng(seed)
    n_drivers = n_channels - 1
    max_lag = 4
    total = rows + max_lag

    t = np.arange(total, dtype=np.float64)
    drivers = np.empty((total, n_drivers))
    for i in range(n_drivers):
        p1, p2 = rng.uniform(24.0, 200.0, size=2)
        a1, a2 = rng.uniform(0.5, 1.5, size=2)
        ph1, ph2 = rng.uniform(0.0, 2.0 * np.pi, size=2)
        wave = a1 * np.sin(2.0 * np.pi * t / p1 + ph1) + a2 * np.sin(2.0 * np.pi * t / p2 + ph2)
        ar = np.empty(total)
        ar[0] = 0.0
        innov = rng.normal(0.0, 0.1, size=total)
        for k in range(1, total):
            ar[k] = 0.8 * ar[k - 1] + innov[k]
        drivers[:, i] = wave + ar

    w_recent = rng.uniform(-1.0, 1.0, size=n_drivers)
    w_lagged = rng.uniform(-1.0, 1.0, size=n_drivers)
    lags = rng.integers(2, max_lag + 1, size=n_drivers)
    bias = rng.uniform(-0.5, 0.5)
    noise = rng.normal(0.0, 0.05, size=rows)

    target = np.full(rows, bias)
    for i in range(n_drivers):
        recent = drivers[max_lag - 1 : max_lag - 1 + rows, i]
        lagged = drivers[max_lag - lags[i] : max_lag - lags[i] + rows, i]
        target += w_recent[i] * recent + w_lagged[i] * lagged
    target += noise

    values = np.column_stack([target, drivers[max_lag:]])
    names = ("target",) + tuple(f"ch{i + 1}" for i in range(n_drivers))
    t0 = np.datetime64("2020-01-01T00:00:00", "s")
    stamps = t0 + np.arange(rows, dtype="int64") * 3600
    return SeriesFrame(stamps, names, values)


def write_frame_csv(frame: SeriesFrame, path: str | os.PathLike) -> None:
    """Write a frame in the package's canonical CSV layout (gaps as empty)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("timestamp",) + frame.names)
        for ts, row in zip(frame.timestamps, frame.values):
            stamp = np.datetime_as_string(ts, unit="s").replace("T", " ")
            writer.writerow([stamp] + ["" if math.isnan(v) else repr(float(v)) for v in row])


def save_dataset(path: str | os.PathLike, train: WindowedDataset, test: WindowedDataset) -> None:
    """Persist a prepared train/test window pair (and the fitted scaler) as
    a single .npz archive."""
    if train.channel_names != test.channel_names or train.lookback != test.lookback:
        raise DataError("train/test windows disagree on geometry")
    scaler = train.scaler
    meta = {
        "lookback": train.lookback,
        "channel_names": list(train.channel_names),
        "target_channel": train.target_channel,
        "scaler": None
        if scaler is None
        else {
            "names": list(scaler.names),
            "mins": [float(v) for v in scaler.mins],
            "maxs": [float(v) for v in scaler.maxs],
            "fit_range": [int(scaler.fit_range[0]), int(scaler.fit_range[1])],
        },
    }
    np.savez(
        path,
        X_train=train.X,
        y_train=train.y,
        rows_train=train.start_rows,
        X_test=test.X,
        y_test=test.y,
        rows_test=test.start_rows,
        meta=np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8),
    )


def load_dataset(path: str | os.PathLike) -> tuple[WindowedDataset, WindowedDataset]:
    """Inverse of :func:`save_dataset`."""
    try:
        with np.load(path) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError) as e:
        raise DataError(f"cannot read dataset file {path}: {e}") from e
    required = {"X_train", "y_train", "rows_train", "X_test", "y_test", "rows_test", "meta"}
    missing = required - set(arrays)
    if missing:
        raise DataError(f"{path}: dataset file is missing entries {sorted(missing)}")
    meta = json.loads(arrays["meta"].tobytes().decode("utf-8"))
    sd = meta.get("scaler")
    scaler = (
        None
        if sd is None
        else Scaler(
            tuple(sd["names"]),
            np.array(sd["mins"], dtype=np.float64),
            np.array(sd["maxs"], dtype=np.float64),
            (int(sd["fit_range"][0]), int(sd["fit_range"][1])),
        )
    )

    def build(part):
        return WindowedDataset(
            np.ascontiguousarray(arrays[f"X_{part}"], dtype=np.float64),
            np.ascontiguousarray(arrays[f"y_{part}"], dtype=np.float64),
            int(meta["lookback"]),
            tuple(meta["channel_names"]),
            meta["target_channel"],
            scaler,
            np.ascontiguousarray(arrays[f"rows_{part}"], dtype=np.int64),
        )

    return build("train"), build("test")


def prepare_windows(
    frame: SeriesFrame,
    lookback: int,
    target_channel: str,
    split_fraction: float,
    input_channels: Sequence[str] | None = None,
    include_target: bool = True,
) -> tuple[WindowedDataset, WindowedDataset, Scaler]:
    """Standard recipe: fit scaler on the chronological training rows, scale
    the whole frame, window it, and split windows by target row."""
    channels = list(input_channels) if input_channels is not None else list(frame.names)
    if not include_target and target_channel in channels:
        channels.remove(target_channel)
    n_test = int(math.ceil(frame.rows * split_fraction))
    cut = frame.rows - n_test
    if cut < lookback + 1:
        raise DataError(
            f"training side has {cut} rows, need more than lookback {lookback}"
        )
    scaler = fit_scaler(frame, (0, cut))
    scaled = scaler.apply_frame(frame)
    windows = make_windows(scaled, lookback, target_channel, channels)
    windows = WindowedDataset(
        windows.X, windows.y, windows.lookback, windows.channel_names,
        windows.target_channel, scaler, windows.start_rows,
    )
    train, test = split_windows(windows, split_fraction)
    return train, test, scaler
