"""Subdifferential tests for the l1 norm and a discrete TV* evaluator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LinearOperator, Tolerances, as_vector
from .errors import ArgumentError

__all__ = ["SubdiffVerdict", "in_subdiff_l1", "in_subdiff_zero", "tv_star", "l2_sub0_norm"]

_DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class SubdiffVerdict:
    """Outcome of a membership test ``p in dJ(u)``.

    `worst_margin` is the signed distance to feasibility of the most violated
    coordinate `worst_index` (0-based); negative means violated.
    """

    member: bool
    worst_index: int
    worst_margin: float
    tolerance_used: float

    def __bool__(self) -> bool:
        return self.member


def _verdict(margins: np.ndarray, tol: float) -> SubdiffVerdict:
    i = int(np.argmin(margins))
    worst = float(margins[i])
    return SubdiffVerdict(worst >= -tol, i, worst, tol)


def in_subdiff_l1(u, p, tol: Tolerances = _DEFAULT_TOL) -> SubdiffVerdict:
    """Test ``p in d||.||_1(u)``.

    Every coordinate needs ``|p_i| <= 1``; on the support of `u` (entries
    larger than ``tol.check`` in magnitude) additionally ``p_i = sign(u_i)``.
    """
    u = as_vector(u, "u")
    p = as_vector(p, "p")
    if u.shape != p.shape:
        raise ArgumentError(f"length mismatch: u has {u.size} entries, p has {p.size}")
    margins = 1.0 - np.abs(p)
    support = np.abs(u) > tol.check
    margins[support] = np.minimum(margins[support], -np.abs(p[support] - np.sign(u[support])))
    return _verdict(margins, tol.check)


def in_subdiff_zero(p, tol: Tolerances = _DEFAULT_TOL) -> SubdiffVerdict:
    """Test ``p in d||.||_1(0)``, i.e. ``||p||_inf <= 1``."""
    p = as_vector(p, "p")
    return _verdict(1.0 - np.abs(p), tol.check)


def tv_star(u) -> float:
    """Discrete TV with boundary terms: ``sum |u_{i+1} - u_i| + |u_1| + |u_n|``.

    Unit grid spacing; for piecewise-constant signals this agrees with the
    continuum functional on [0, 1].
    """
    u = as_vector(u, "u")
    return float(np.abs(np.diff(u)).sum() + abs(u[0]) + abs(u[-1]))


def l2_sub0_norm(us: Sequence, K: LinearOperator, k: int) -> float:
    """Norm of the k-th partial subgradient sum for ``J = ||.||_2``.

    Uses the singular values ``lambda_j = ||u_j||_2 / ||K u_j||_2^2`` of the
    quadratic-norm case; for orthonormal vectors and ``K = I`` this is
    ``sqrt(k)``, which exceeds 1 as soon as ``k >= 2``.
    """
    if not 1 <= k <= len(us):
        raise ArgumentError(f"k must lie in [1, {len(us)}], got {k}")
    total = np.zeros(K.n_cols)
    for u in us[:k]:
        u = as_vector(u, "u")
        Ku = K.matrix @ u
        nrm = float(Ku @ Ku)
        if not np.any(u) or nrm == 0.0:
            raise ArgumentError("l2_sub0_norm requires nonzero vectors outside ker(K)")
        lam = np.sqrt(u @ u) / nrm
        total += lam * (K.matrix.T @ Ku)
    return float(np.linalg.norm(total))
