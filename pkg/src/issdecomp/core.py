"""Vectors, dense operators and tolerances.

Signals, data and dual variables are plain 1-d ``float64`` numpy arrays.
Operators are materialised as dense matrices; the problems handled here are
desk-sized, so there is no matrix-free machinery.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ArgumentError

__all__ = [
    "Tolerances",
    "LinearOperator",
    "as_vector",
    "dense_operator",
    "identity_operator",
    "convolution_operator",
    "composed_operator",
    "apply",
    "apply_adjoint",
    "norms",
]


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds.

    Parameters
    ----------
    active : float
        Dual-boundary and argmax detection (``|p_i| >= 1 - active``).
    check : float
        Condition verification and support detection.
    lsq : float
        Least-squares residual / KKT tolerance.
    """

    active: float = 1e-9
    check: float = 1e-8
    lsq: float = 1e-10

    def __post_init__(self):
        for name in ("active", "check", "lsq"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ArgumentError(f"tolerance {name!r} must be positive, got {value!r}")
        if self.active > self.check:
            raise ArgumentError("tolerance 'active' must not exceed 'check'")

    def to_dict(self) -> dict:
        return {"active": self.active, "check": self.check, "lsq": self.lsq}


def as_vector(values, name: str = "vector") -> np.ndarray:
    """Return `values` as a finite, non-empty 1-d float64 array (a copy)."""
    v = np.array(values, dtype=np.float64)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise ArgumentError(f"{name} must be one-dimensional, got shape {v.shape}")
    if v.size < 1:
        raise ArgumentError(f"{name} must have length >= 1")
    if not np.all(np.isfinite(v)):
        raise ArgumentError(f"{name} contains non-finite entries")
    v.setflags(write=False)
    return v


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Dense real matrix with a provenance tag.

    The tag (``"dense"``, ``"convolution"``, ``"identity"`` or
    ``"composed"``) is descriptive only; apply and adjoint always use
    `matrix`.
    """

    matrix: np.ndarray
    provenance: str = "dense"
    kernel: tuple | None = None
    offsets: tuple | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ArgumentError(f"operator matrix must be a non-empty 2-d array, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ArgumentError("operator matrix contains non-finite entries")
        if self.provenance not in ("dense", "convolution", "identity", "composed"):
            raise ArgumentError(f"unknown provenance {self.provenance!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def T(self) -> LinearOperator:
        return LinearOperator(self.matrix.T, "dense")

    def dense_copy(self) -> LinearOperator:
        return LinearOperator(self.matrix.copy(), "dense")

    def __matmul__(self, u):
        return apply(self, u)


def dense_operator(matrix) -> LinearOperator:
    return LinearOperator(matrix, "dense")


def identity_operator(n: int) -> LinearOperator:
    if n < 1:
        raise ArgumentError("identity dimension must be >= 1")
    return LinearOperator(np.eye(n), "identity")


def composed_operator(outer: LinearOperator, inner: LinearOperator) -> LinearOperator:
    """Operator ``outer @ inner`` (apply `inner` first)."""
    if outer.n_cols != inner.n_rows:
        raise ArgumentError(f"cannot compose shapes {outer.shape} and {inner.shape}")
    return LinearOperator(outer.matrix @ inner.matrix, "composed")


def convolution_operator(kernel: Sequence[float], offsets: Sequence[int], n: int) -> LinearOperator:
    """Square convolution matrix with zero padding.

    ``(Ku)_k = sum_j u_{k-j} g_j`` where ``g_j = kernel[i]`` for
    ``j = offsets[i]``; indices of `u` outside ``[0, n)`` contribute zero.

    >>> K = convolution_operator([1, 1, 0], range(-1, 2), 5)
    >>> K.matrix[1, 1:3] * 2 ** 0.5
    array([1., 1.])
    """
    g = np.asarray(kernel, dtype=np.float64).ravel()
    offs = [int(o) for o in offsets]
    if g.size != len(offs):
        raise ArgumentError(f"kernel has {g.size} taps but {len(offs)} offsets were given")
    if g.size < 1:
        raise ArgumentError("kernel must be non-empty")
    if len(set(offs)) != len(offs):
        raise ArgumentError("offsets must be distinct")
    if n < g.size:
        raise ArgumentError(f"signal length {n} is shorter than the kernel ({g.size})")
    if not np.all(np.isfinite(g)):
        raise ArgumentError("kernel contains non-finite entries")
    mat = np.zeros((n, n))
    for gj, j in zip(g, offs):
        for k in range(n):
            col = k - j
            if 0 <= col < n:
                mat[k, col] += gj
    return LinearOperator(mat, "convolution", kernel=tuple(g.tolist()), offsets=tuple(offs))


def _check_len(op: LinearOperator, v: np.ndarray, expected: int, what: str) -> None:
    if v.shape[0] != expected:
        raise ArgumentError(f"{what}: operator of shape {op.shape} cannot act on length {v.shape[0]}")


def apply(op: LinearOperator, u) -> np.ndarray:
    """Return ``K u``."""
    u = as_vector(u, "u")
    _check_len(op, u, op.n_cols, "apply")
    return op.matrix @ u


def apply_adjoint(op: LinearOperator, v) -> np.ndarray:
    """Return ``K* v`` (transpose action)."""
    v = as_vector(v, "v")
    _check_len(op, v, op.n_rows, "apply_adjoint")
    return op.matrix.T @ v


def norms(u) -> tuple[float, float, float]:
    """Return the (l1, l2, linf) norms of `u`."""
    u = as_vector(u, "u")
    a = np.abs(u)
    return float(a.sum()), float(np.sqrt(u @ u)), float(a.max())
