"""Shared test utilities: finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from tsfool.ndtensor import Tape, Tensor, suspend_tape

FD_H = 1e-6
REL_FLOOR = 1e-3   # denominator floor keeps tiny-gradient ratios meaningful
ABS_FALLBACK = 1e-8


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Worst-case elementwise relative error with an absolute fallback for
    near-zero pairs."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    diff = np.abs(analytic - numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_FLOOR)
    rel = diff / denom
    rel[diff <= ABS_FALLBACK] = 0.0
    return float(rel.max()) if rel.size else 0.0


def numeric_grad(f, arr: np.ndarray, h: float = FD_H) -> np.ndarray:
    """Central finite differences of scalar-valued ``f`` w.r.t. ``arr``.

    ``f`` must read ``arr`` afresh on every call; entries are perturbed in
    place and restored exactly.
    """
    g = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def tape_grad(build_loss, wrt: list[Tensor]) -> list[np.ndarray]:
    """Record ``build_loss()`` on a fresh tape and return gradients for each
    tensor in ``wrt`` (zeros if unused)."""
    with Tape() as tape:
        loss = build_loss()
    grads = tape.gradients(loss)
    out = []
    for t in wrt:
        g = grads.get(t)
        out.append(np.zeros_like(t.data) if g is None else g.data)
    return out


def check_gradients(build_loss, tensors: dict[str, Tensor], tol: float = 1e-4) -> dict[str, float]:
    """Compare tape gradients of ``build_loss`` against finite differences
    for every named tensor; returns the worst relative error per name and
    asserts all are below ``tol``."""
    names = list(tensors)
    analytic = tape_grad(build_loss, [tensors[n] for n in names])

    def value() -> float:
        with suspend_tape():
            return build_loss().item()

    errors: dict[str, float] = {}
    for name, ana in zip(names, analytic):
        num = numeric_grad(value, tensors[name].data)
        errors[name] = rel_err(ana, num)
    worst = max(errors.values())
    assert worst < tol, f"gradient mismatch: {errors}"
    return errors
