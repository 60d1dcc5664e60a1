"""Dense tensors plus a minimal reverse-mode differentiation tape.

Design notes:

* ``Tensor`` is a thin immutable-by-convention wrapper around a contiguous
  numpy array (float64 by default, float32 via ``set_default_dtype``).
* Differentiation is define-by-run: while a ``Tape`` is active (as a context
  manager) every primitive whose inputs are tracked records a node with its
  backward rule.  ``tape.gradients(loss)`` replays the nodes in exact reverse
  order and returns gradients for every requires-grad leaf seen on the tape.
* Broadcasting is restricted to python-scalar/tensor and single-element
  tensors; any other shape mismatch is a hard ``ShapeError``.  Row-wise bias
  addition is its own explicit primitive (``add_bias``) rather than a silent
  broadcast.
* A tape is single-threaded state; the active-tape stack is thread-local so
  independent workers can each run their own tape.

The primitive set is the minimum needed for the three model families here
(stacked LSTM/GRU cells and 1-D convolutions built from pad/slice/matmul):
add, sub, mul, matmul, add_bias, sigmoid, tanh, relu, square, sum, mean,
concat, slice_, reshape, pad.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError

_DEFAULT_DTYPE = np.float64


def set_default_dtype(dtype) -> None:
    """Switch the default element type (np.float64 or np.float32)."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dt}; use float64 or float32")
    _DEFAULT_DTYPE = dt.type


def get_default_dtype():
    return _DEFAULT_DTYPE


class Tensor:
    """A dense multi-dimensional array of reals.

    Treat instances as immutable: all primitives allocate fresh outputs, and
    tapes rely on recorded arrays never changing underneath them.
    """

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        self.data = arr
        self.requires_grad = requires_grad

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __getitem__(self, idx):
        # Bounds-checked element access; row-major like the underlying array.
        return self.data[idx]

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all work is done by the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


class _Node:
    __slots__ = ("inputs", "output", "backward_fn")

    def __init__(self, inputs, output, backward_fn):
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of primitive applications for reverse-mode replay."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._tracked: set[int] = set()
        self._leaves: dict[int, Tensor] = {}

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stk = _stack()
        if not stk or stk[-1] is not self:
            raise RuntimeError("tape stack corrupted: exiting a tape that is not innermost")
        stk.pop()

    def tracks(self, t: Tensor) -> bool:
        return t.requires_grad or id(t) in self._tracked

    def _register(self, node: _Node) -> None:
        self._nodes.append(node)
        self._tracked.add(id(node.output))
        for t in node.inputs:
            if isinstance(t, Tensor) and t.requires_grad and id(t) not in self._tracked:
                self._leaves.setdefault(id(t), t)

    def gradients(self, loss: Tensor) -> dict[Tensor, Tensor]:
        """Gradients of a scalar ``loss`` w.r.t. every requires-grad leaf.

        The loss must have been produced under this tape.  Leaves that do not
        influence the loss get zero gradients of their own shape.
        """
        if loss.size != 1:
            raise ShapeError(f"loss must be scalar, got shape {loss.shape}")
        if id(loss) not in self._tracked:
            raise ValueError("loss was not recorded on this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self._nodes):
            g = grads.pop(id(node.output), None)
            if g is None:
                continue
            for inp, gin in zip(node.inputs, node.backward_fn(g)):
                if gin is None or not isinstance(inp, Tensor):
                    continue
                key = id(inp)
                prev = grads.get(key)
                grads[key] = gin if prev is None else prev + gin

        out: dict[Tensor, Tensor] = {}
        for key, leaf in self._leaves.items():
            g = grads.get(key)
            if g is None:
                g = np.zeros_like(leaf.data)
            # Always copy: backward functions may hand back the upstream
            # array itself, and callers are free to mutate their gradients.
            out[leaf] = Tensor(np.array(g, dtype=leaf.data.dtype, copy=True))
        return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, Tensor]:
    """Functional alias for ``tape.gradients(loss)``."""
    return tape.gradients(loss)


_TLS = threading.local()


def _stack() -> list:
    try:
        return _TLS.tapes
    except AttributeError:
        _TLS.tapes = []
        return _TLS.tapes


def active_tape() -> Tape | None:
    stk = _stack()
    return stk[-1] if stk and stk[-1] is not None else None


class suspend_tape:
    """Context manager that hides any active tape (for un-recorded forwards)."""

    def __enter__(self):
        _stack().append(None)
        return self

    def __exit__(self, exc_type, exc, tb):
        _stack().pop()


def _wrap(arr: np.ndarray) -> Tensor:
    """Fast constructor for primitive outputs.

    Skips the ``asarray``/contiguity validation of ``Tensor.__init__``;
    callers must pass a fresh ndarray produced by a numpy operation on
    tensor data (already the right dtype, already C-contiguous).
    """
    t = Tensor.__new__(Tensor)
    t.data = arr
    t.requires_grad = False
    return t


def _record(out: Tensor, inputs: tuple, backward_fn: Callable) -> Tensor:
    # Hot path: called once per primitive, usually with no tape active
    # (prediction, attacks, finite differences), so resolve the stack
    # inline instead of going through active_tape().
    try:
        stk = _TLS.tapes
    except AttributeError:
        return out
    if not stk:
        return out
    tape = stk[-1]
    if tape is None:
        return out
    for t in inputs:
        if isinstance(t, Tensor) and (t.requires_grad or id(t) in tape._tracked):
            tape._register(_Node(inputs, out, backward_fn))
            return out
    return out


def _binary_operands(op: str, a, b):
    """Resolve elementwise operands: equal shapes, or one side scalar.

    Returns (a, b, a_scalar, b_scalar) where python numbers stay numbers and
    single-element tensors count as scalars against any shape.
    """
    a_t = isinstance(a, Tensor)
    b_t = isinstance(b, Tensor)
    if a_t and b_t:
        if a.data.shape == b.data.shape:
            return a, b, False, False
        if a.data.size == 1 or b.data.size == 1:
            return a, b, a.data.size == 1, b.data.size == 1
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ")
    if not a_t and not b_t:
        raise TypeError(f"{op}: at least one operand must be a Tensor")
    if a_t:
        return a, float(b), False, True
    return float(a), b, True, False


def _val(x):
    return x.data if isinstance(x, Tensor) else x


def _reduce_to(g: np.ndarray, operand) -> np.ndarray | None:
    """Collapse an output-shaped gradient onto a scalar operand if needed."""
    if not isinstance(operand, Tensor):
        return None
    if g.shape == operand.shape:
        return g
    return np.asarray(g.sum(), dtype=g.dtype).reshape(operand.shape)


def add(a, b) -> Tensor:
    a, b, _, _ = _binary_operands("add", a, b)
    out = _wrap(_val(a) + _val(b))

    def bwd(g):
        return _reduce_to(g, a), _reduce_to(g, b)

    return _record(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b, _, _ = _binary_operands("sub", a, b)
    out = _wrap(_val(a) - _val(b))

    def bwd(g):
        gb = _reduce_to(-g, b)
        return _reduce_to(g, a), gb

    return _record(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b, _, _ = _binary_operands("mul", a, b)
    av, bv = _val(a), _val(b)
    out = _wrap(av * bv)

    def bwd(g):
        ga = _reduce_to(g * bv, a)
        gb = _reduce_to(g * av, b)
        return ga, gb

    return _record(out, (a, b), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product ``a @ b`` with 2-D ``b``; extra leading axes of ``a``
    are treated as batch dimensions."""
    if not isinstance(a, Tensor) or not isinstance(b, Tensor):
        raise TypeError("matmul: both operands must be Tensors")
    if a.ndim < 2 or b.ndim != 2:
        raise ShapeError(f"matmul: need a.ndim>=2 and b.ndim==2, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    av, bv = a.data, b.data
    out = _wrap(av @ bv)

    def bwd(g):
        ga = g @ bv.T
        k, m = bv.shape
        gb = av.reshape(-1, k).T @ g.reshape(-1, m)
        return ga, gb

    return _record(out, (a, b), bwd)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a 1-D bias along the last axis of ``x`` (explicit row-wise add)."""
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias: bias {b.shape} does not match last axis of {x.shape}")
    out = _wrap(x.data + b.data)

    def bwd(g):
        return g, g.reshape(-1, b.shape[0]).sum(axis=0)

    return _record(out, (x, b), bwd)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    # exp(-|x|) never overflows; the two selected formulas are the classic
    # numerically stable pair 1/(1+e^-x) for x>=0 and e^x/(1+e^x) for x<0.
    t = np.exp(-np.abs(x))
    out_v = np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
    out = _wrap(out_v)

    def bwd(g):
        return (g * (out_v * (1.0 - out_v)),)

    return _record(out, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out_v = np.tanh(a.data)
    out = _wrap(out_v)

    def bwd(g):
        return (g * (1.0 - out_v * out_v),)

    return _record(out, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    av = a.data
    out = _wrap(np.maximum(av, 0.0))

    def bwd(g):
        return (g * (av > 0.0),)

    return _record(out, (a,), bwd)


def square(a: Tensor) -> Tensor:
    av = a.data
    out = _wrap(av * av)

    def bwd(g):
        return (g * (2.0 * av),)

    return _record(out, (a,), bwd)


def tsum(a: Tensor) -> Tensor:
    out = _wrap(np.asarray(a.data.sum()))

    def bwd(g):
        return (np.full(a.shape, float(g), dtype=a.data.dtype),)

    return _record(out, (a,), bwd)


def tmean(a: Tensor) -> Tensor:
    if a.size == 0:
        raise ShapeError("mean: empty tensor")
    out = _wrap(np.asarray(a.data.mean()))
    inv_n = 1.0 / a.size

    def bwd(g):
        return (np.full(a.shape, float(g) * inv_n, dtype=a.data.dtype),)

    return _record(out, (a,), bwd)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if len(tensors) == 0:
        raise ShapeError("concat: need at least one tensor")
    nd = tensors[0].ndim
    ax = axis % nd
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if t.ndim != nd or other[:ax] != base[:ax] or other[ax + 1:] != base[ax + 1:]:
            raise ShapeError(
                f"concat: shapes {tensors[0].shape} and {t.shape} differ off axis {axis}"
            )
    out = _wrap(np.concatenate([t.data for t in tensors], axis=ax))
    offsets, total = [], 0
    for t in tensors[:-1]:
        total += t.data.shape[ax]
        offsets.append(total)

    def bwd(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, offsets, axis=ax))

    return _record(out, tuple(tensors), bwd)


def slice_(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice ``a[..., start:stop, ...]`` along one axis."""
    shape = a.data.shape
    ax = axis % len(shape)
    if not (0 <= start < stop <= shape[ax]):
        raise ShapeError(f"slice: range [{start}:{stop}) out of bounds for axis {axis} of {shape}")
    parts = [slice(None)] * len(shape)
    parts[ax] = slice(start, stop)
    idx = tuple(parts)
    out = _wrap(np.ascontiguousarray(a.data[idx]))

    def bwd(g):
        z = np.zeros(shape, dtype=g.dtype)
        z[idx] = g
        return (z,)

    return _record(out, (a,), bwd)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = _wrap(a.data.reshape(shape))

    def bwd(g):
        return (g.reshape(a.shape),)

    return _record(out, (a,), bwd)


def pad(a: Tensor, axis: int, before: int, after: int) -> Tensor:
    """Zero-pad one axis; the backward rule slices the padding back off."""
    if before < 0 or after < 0:
        raise ShapeError(f"pad: negative padding ({before}, {after})")
    ax = axis % a.ndim
    widths = [(0, 0)] * a.ndim
    widths[ax] = (before, after)
    out = _wrap(np.pad(a.data, widths))
    idx = tuple(
        slice(None) if i != ax else slice(before, before + a.shape[ax]) for i in range(a.ndim)
    )

    def bwd(g):
        return (np.ascontiguousarray(g[idx]),)

    return _record(out, (a,), bwd)
