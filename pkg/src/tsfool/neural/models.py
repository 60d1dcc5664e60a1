"""Window-to-scalar regressors built on the tape engine.

Three architectures share one interface: a 1-D CNN and stacked LSTM / GRU
recurrent nets, each ending in a small dense head that emits one value per
window.  All are expressed purely through tape primitives, so a single tape
recording yields gradients with respect to parameters (training) or inputs
(attacks) with no architecture-specific code.

Parameter layout (names are stable and serialized):

* ``conv{l}.W``  [kernel, in_ch, filters], ``conv{l}.b``  [filters]
* ``lstm{l}.W``  [in+H, 4H] with gate blocks ordered i, f, o, g;
  ``lstm{l}.b``  [4H], forget-gate slice initialized to 1.0
* ``gru{l}.Wzr`` [in+H, 2H] (update and reset gates), ``gru{l}.bzr`` [2H];
  ``gru{l}.Wh``  [in+H, H] (candidate), ``gru{l}.bh`` [H]
* ``dense{i}.W`` [in, out], ``dense{i}.b`` [out]

Weights are Glorot-uniform, biases zero (except the LSTM forget gate).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError
from .. import ndtensor as nd
from ..ndtensor import Tensor

ARCHS = ("cnn", "lstm", "gru")


@dataclass(frozen=True)
class ModelSpec:
    """Architecture hyperparameters; fully determines the parameter set."""

    arch: str
    lookback: int
    n_channels: int
    hidden: tuple[int, ...]
    dense: tuple[int, ...] = (1,)
    kernel_size: int = 3
    channel_names: tuple[str, ...] | None = None
    target_channel: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "dense", tuple(int(d) for d in self.dense))
        if self.channel_names is not None:
            object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown architecture {self.arch!r}; expected one of {ARCHS}")
        if self.lookback < 1:
            raise ConfigError(f"lookback must be >= 1, got {self.lookback}")
        if self.n_channels < 1:
            raise ConfigError(f"n_channels must be >= 1, got {self.n_channels}")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden}")
        if not self.dense or any(d < 1 for d in self.dense) or self.dense[-1] != 1:
            raise ConfigError(f"dense widths must be positive and end in 1, got {self.dense}")
        if self.arch == "cnn" and (self.kernel_size < 1 or self.kernel_size % 2 == 0):
            raise ConfigError(f"kernel_size must be odd and >= 1, got {self.kernel_size}")
        if self.channel_names is not None and len(self.channel_names) != self.n_channels:
            raise ConfigError(
                f"{len(self.channel_names)} channel names for {self.n_channels} channels"
            )

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "lookback": self.lookback,
            "n_channels": self.n_channels,
            "hidden": list(self.hidden),
            "dense": list(self.dense),
            "kernel_size": self.kernel_size,
            "channel_names": list(self.channel_names) if self.channel_names else None,
            "target_channel": self.target_channel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        names = d.get("channel_names")
        return cls(
            arch=d["arch"],
            lookback=int(d["lookback"]),
            n_channels=int(d["n_channels"]),
            hidden=tuple(d["hidden"]),
            dense=tuple(d["dense"]),
            kernel_size=int(d.get("kernel_size", 3)),
            channel_names=tuple(names) if names else None,
            target_channel=d.get("target_channel"),
        )


@dataclass
class TrainedModel:
    """A spec plus its parameters; history and metadata ride along."""

    spec: ModelSpec
    params: dict[str, Tensor]
    history: list[float] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def clone(self) -> "TrainedModel":
        return TrainedModel(
            self.spec,
            {k: Tensor(v.data.copy(), requires_grad=True) for k, v in self.params.items()},
            list(self.history),
            dict(self.metadata),
        )

    def n_parameters(self) -> int:
        return sum(int(v.size) for v in self.params.values())


def _glorot(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int):
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(-limit, limit, size=shape)


def build_model(spec: ModelSpec, seed: int) -> TrainedModel:
    """Fresh parameters for a spec; the same (spec, seed) always yields the
    same bits."""
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}

    def param(name, arr):
        params[name] = Tensor(np.asarray(arr, dtype=np.float64), requires_grad=True)

    if spec.arch == "cnn":
        in_ch = spec.n_channels
        k = spec.kernel_size
        for l, filters in enumerate(spec.hidden):
            param(f"conv{l}.W", _glorot(rng, (k, in_ch, filters), k * in_ch, k * filters))
            param(f"conv{l}.b", np.zeros(filters))
            in_ch = filters
        head_in = spec.lookback * in_ch
    elif spec.arch == "lstm":
        in_dim = spec.n_channels
        for l, width in enumerate(spec.hidden):
            param(f"lstm{l}.W", _glorot(rng, (in_dim + width, 4 * width), in_dim + width, 4 * width))
            b = np.zeros(4 * width)
            b[width : 2 * width] = 1.0      # forget gate starts open
            param(f"lstm{l}.b", b)
            in_dim = width
        head_in = in_dim
    else:  # gru
        in_dim = spec.n_channels
        for l, width in enumerate(spec.hidden):
            param(f"gru{l}.Wzr", _glorot(rng, (in_dim + width, 2 * width), in_dim + width, 2 * width))
            param(f"gru{l}.bzr", np.zeros(2 * width))
            param(f"gru{l}.Wh", _glorot(rng, (in_dim + width, width), in_dim + width, width))
            param(f"gru{l}.bh", np.zeros(width))
            in_dim = width
        head_in = in_dim

    for i, width in enumerate(spec.dense):
        param(f"dense{i}.W", _glorot(rng, (head_in, width), head_in, width))
        param(f"dense{i}.b", np.zeros(width))
        head_in = width

    return TrainedModel(spec, params, [], {"init_seed": int(seed)})


def _dense_head(spec: ModelSpec, params: dict[str, Tensor], h: Tensor, probe) -> Tensor:
    for i in range(len(spec.dense)):
        h = nd.add_bias(nd.matmul(h, params[f"dense{i}.W"]), params[f"dense{i}.b"])
        if i < len(spec.dense) - 1:
            h = nd.relu(h)
        if probe:
            probe(f"dense{i}", h)
    return h


def _forward_cnn(spec: ModelSpec, params: dict[str, Tensor], x: Tensor, probe) -> Tensor:
    k = spec.kernel_size
    half = k // 2
    T = spec.lookback
    h = x
    for l in range(len(spec.hidden)):
        W = params[f"conv{l}.W"]
        padded = nd.pad(h, axis=1, before=half, after=half)
        acc = _conv_taps(padded, W, k, T)
        h = nd.relu(nd.add_bias(acc, params[f"conv{l}.b"]))
        if probe:
            probe(f"conv{l}", h)
    flat = nd.reshape(h, (h.shape[0], T * spec.hidden[-1]))
    return _dense_head(spec, params, flat, probe)


def _conv_taps(padded: Tensor, W: Tensor, k: int, T: int) -> Tensor:
    """Same-padding 1-D convolution as a sum of shifted matmuls against
    kernel-tap slices, keeping every step on the tape."""
    acc = None
    for j in range(k):
        tap = nd.slice_(W, axis=0, start=j, stop=j + 1)          # [1, in, F]
        tap = nd.reshape(tap, (W.shape[1], W.shape[2]))          # [in, F]
        term = nd.matmul(nd.slice_(padded, axis=1, start=j, stop=j + T), tap)
        acc = term if acc is None else nd.add(acc, term)
    return acc


def _forward_lstm(spec: ModelSpec, params: dict[str, Tensor], x: Tensor, probe) -> Tensor:
    B, T = x.shape[0], spec.lookback
    seq = [nd.reshape(nd.slice_(x, axis=1, start=t, stop=t + 1), (B, x.shape[2])) for t in range(T)]
    for l, H in enumerate(spec.hidden):
        W, b = params[f"lstm{l}.W"], params[f"lstm{l}.b"]
        h = Tensor(np.zeros((B, H)))
        c = Tensor(np.zeros((B, H)))
        out = []
        for t in range(T):
            z = nd.add_bias(nd.matmul(nd.concat([seq[t], h], axis=1), W), b)
            # one sigmoid over the contiguous i,f,o block (elementwise, so
            # identical to per-gate sigmoids), then split
            gates = nd.sigmoid(nd.slice_(z, axis=1, start=0, stop=3 * H))
            i_g = nd.slice_(gates, axis=1, start=0, stop=H)
            f_g = nd.slice_(gates, axis=1, start=H, stop=2 * H)
            o_g = nd.slice_(gates, axis=1, start=2 * H, stop=3 * H)
            g = nd.tanh(nd.slice_(z, axis=1, start=3 * H, stop=4 * H))
            c = nd.add(nd.mul(f_g, c), nd.mul(i_g, g))
            h = nd.mul(o_g, nd.tanh(c))
            out.append(h)
        seq = out
        if probe:
            probe(f"lstm{l}", h)
    return _dense_head(spec, params, seq[-1], probe)


def _forward_gru(spec: ModelSpec, params: dict[str, Tensor], x: Tensor, probe) -> Tensor:
    B, T = x.shape[0], spec.lookback
    seq = [nd.reshape(nd.slice_(x, axis=1, start=t, stop=t + 1), (B, x.shape[2])) for t in range(T)]
    for l, H in enumerate(spec.hidden):
        Wzr, bzr = params[f"gru{l}.Wzr"], params[f"gru{l}.bzr"]
        Wh, bh = params[f"gru{l}.Wh"], params[f"gru{l}.bh"]
        h = Tensor(np.zeros((B, H)))
        out = []
        for t in range(T):
            zr = nd.sigmoid(nd.add_bias(nd.matmul(nd.concat([seq[t], h], axis=1), Wzr), bzr))
            z = nd.slice_(zr, axis=1, start=0, stop=H)
            r = nd.slice_(zr, axis=1, start=H, stop=2 * H)
            cand = nd.tanh(
                nd.add_bias(nd.matmul(nd.concat([seq[t], nd.mul(r, h)], axis=1), Wh), bh)
            )
            # h = (1 - z) * h_prev + z * candidate
            h = nd.add(nd.mul(nd.sub(1.0, z), h), nd.mul(z, cand))
            out.append(h)
        seq = out
        if probe:
            probe(f"gru{l}", h)
    return _dense_head(spec, params, seq[-1], probe)


def forward(model: TrainedModel, x, record: bool = False, probe=None) -> Tensor:
    """Predict one value per window.

    ``x`` is a Tensor or array of shape [B, lookback, n_channels].  With
    ``record=False`` (the default) the pass runs outside any active tape;
    pass ``record=True`` inside a ``Tape`` context to make the pass
    differentiable.  ``probe(name, tensor)``, if given, is called after every
    layer — used by training diagnostics to locate non-finite activations.
    """
    spec = model.spec
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x, dtype=np.float64))
    if x.ndim != 3 or x.shape[1] != spec.lookback or x.shape[2] != spec.n_channels:
        raise ShapeError(
            f"{spec.arch} expects windows [B, {spec.lookback}, {spec.n_channels}], "
            f"got {x.shape}"
        )
    fwd = {"cnn": _forward_cnn, "lstm": _forward_lstm, "gru": _forward_gru}[spec.arch]
    if record:
        return fwd(spec, model.params, x, probe)
    with nd.suspend_tape():
        return fwd(spec, model.params, x, probe)
