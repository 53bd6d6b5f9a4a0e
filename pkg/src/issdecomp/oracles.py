"""Independent cross-checks for the exact flow solver.

* Bregman iteration: forward-Euler clock ``t = k / alpha`` on the dual.
* Showalter's method (quadratic regulariser) in closed form and by RK4.
* Exhaustive enumeration of sign-feasible supports at each breakpoint.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .aiss import FlowTrajectory, ProblemSpec
from .core import LinearOperator, as_vector
from .errors import ArgumentError, SolverError
from .singular import Condition, ConditionReport

__all__ = [
    "BregmanState",
    "bregman_run",
    "support_change_times",
    "spectral_norm",
    "showalter_closed_form",
    "showalter_rk4",
    "brute_force_flow_check",
]


@dataclass(frozen=True, eq=False)
class BregmanState:
    iterate_index: int
    u: np.ndarray
    p: np.ndarray
    alpha: float

    @property
    def time(self) -> float:
        return self.iterate_index / self.alpha


def spectral_norm(K: LinearOperator, iters: int = 100, seed: int = 0) -> float:
    """Power-iteration estimate of ``||K||_2``."""
    M = K.matrix
    x = np.random.default_rng(seed).standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    sigma = 0.0
    for _ in range(iters):
        y = M.T @ (M @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        sigma = math.sqrt(ny)
    return sigma


def _soft(v: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _bregman_gap(M, f, alpha, p, u) -> tuple[float, float]:
    """Duality gap of ``0.5||Mu - f||^2 + alpha(||u||_1 - <p, u>)`` and the magnitude of its terms."""
    theta = f - M @ u
    l1 = float(np.abs(u).sum())
    primal = 0.5 * float(theta @ theta) + alpha * (l1 - float(p @ u))
    # largest s in [0, 1] with ||s M* theta + alpha p||_inf <= alpha, up to rounding slack
    g = M.T @ theta
    bound = 1.0 + 1e-12
    s = 1.0
    for gi, pi in zip(g, p):
        if gi != 0.0:
            s = min(s, max((alpha * (bound - pi)) / gi, (alpha * (-bound - pi)) / gi))
    s = max(s, 0.0)
    theta = s * theta
    dual = -0.5 * float(theta @ theta) + float(theta @ f)
    return primal - dual, 0.5 * float(f @ f) + alpha * l1


def _bregman_step(M, f, alpha, p, u0, L, inner_tol, max_inner):
    """FISTA for ``argmin 0.5||Mu - f||^2 + alpha(||u||_1 - <p, u>)``."""
    step = 1.0 / L
    x = u0.copy()
    y = x.copy()
    tk = 1.0
    for it in range(1, max_inner + 1):
        grad = M.T @ (M @ y - f)
        x_new = _soft(y - step * grad + step * alpha * p, step * alpha)
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        y = x_new + ((tk - 1.0) / t_new) * (x_new - x)
        x, tk = x_new, t_new
        if it % 5 == 0:
            gap, scale = _bregman_gap(M, f, alpha, p, x)
            if gap <= inner_tol * max(1.0, scale):
                return x
    raise SolverError(f"Bregman subproblem did not reach gap {inner_tol} in {max_inner} iterations")


def bregman_run(prob: ProblemSpec, alpha: float, n_iters: int, inner_tol: float = 1e-12,
                max_inner: int = 100000) -> list[BregmanState]:
    """Run `n_iters` Bregman iterations; state ``k`` sits at time ``k / alpha``.

    Each subproblem is solved by accelerated proximal gradient (step
    ``1/||K||^2``, warm-started from the previous iterate) until the
    duality gap drops below `inner_tol` (relative to the objective); the dual is then updated by
    ``p += K*(f - K u) / alpha``.
    """
    if not alpha > 0:
        raise ArgumentError("alpha must be positive")
    M = prob.K.matrix
    f = prob.f
    L = spectral_norm(prob.K) ** 2
    n = prob.n
    u = np.zeros(n)
    p = np.zeros(n)
    states = [BregmanState(0, u.copy(), p.copy(), alpha)]
    if L == 0.0 or not np.any(f):
        return states + [BregmanState(k, u.copy(), p.copy(), alpha) for k in range(1, n_iters + 1)]
    for k in range(1, n_iters + 1):
        u = _bregman_step(M, f, alpha, p, u, L, inner_tol, max_inner)
        p = p + (M.T @ (f - M @ u)) / alpha
        states.append(BregmanState(k, u.copy(), p.copy(), alpha))
    return states


def support_change_times(states: list[BregmanState], threshold: float = 1e-8) -> list[tuple[float, frozenset]]:
    """``(time, support)`` at every iterate whose support differs from the previous one."""
    out = []
    prev: frozenset = frozenset()
    for s in states:
        supp = frozenset(np.flatnonzero(np.abs(s.u) > threshold).tolist())
        if supp != prev:
            out.append((s.time, supp))
            prev = supp
    return out


def showalter_closed_form(K: LinearOperator, f, t: float) -> np.ndarray:
    """Closed-form solution of ``du/dt = K*(f - K u)``, ``u(0) = 0``.

    ``u(t) = sum_j (1 - exp(-sigma_j^2 t)) <f, v_j> / sigma_j * u_j`` over the
    nonzero singular triplets ``K u_j = sigma_j v_j``.
    """
    if t < 0:
        raise ArgumentError("t must be non-negative")
    f = as_vector(f, "f")
    V_data, sigma, Uh = np.linalg.svd(K.matrix, full_matrices=False)
    keep = sigma > sigma.max(initial=0.0) * max(K.shape) * np.finfo(float).eps if sigma.size else sigma > 0
    sigma = sigma[keep]
    coef = -np.expm1(-sigma**2 * t) * (V_data[:, keep].T @ f) / sigma
    return Uh[keep].T @ coef


def showalter_rk4(K: LinearOperator, f, t: float, step: float = 1e-3) -> np.ndarray:
    """Integrate ``du/dt = K*(f - K u)`` from 0 to `t` with classical RK4."""
    f = as_vector(f, "f")
    M = K.matrix
    b = M.T @ f
    A = M.T @ M
    u = np.zeros(M.shape[1])
    n_steps = int(round(t / step))
    h = t / n_steps if n_steps else 0.0
    for _ in range(n_steps):
        k1 = b - A @ u
        k2 = b - A @ (u + 0.5 * h * k1)
        k3 = b - A @ (u + 0.5 * h * k2)
        k4 = b - A @ (u + h * k3)
        u = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def brute_force_flow_check(prob: ProblemSpec, traj: FlowTrajectory, atol: float = 1e-10,
                           max_dim: int = 10) -> ConditionReport:
    """Confirm every breakpoint primal by exhaustive enumeration.

    For each breakpoint the boundary set ``I = {|p_i| = 1}`` fixes the
    admissible signs; every support ``S`` within ``I`` is fitted by
    unconstrained least squares and kept if its signs agree with ``p``.  The
    recorded primal must be admissible and attain the minimal residual.
    """
    if prob.n > max_dim:
        raise ArgumentError(f"brute force refused for dimension {prob.n} > {max_dim}")
    tol = prob.tol
    M = prob.K.matrix
    f = prob.f
    worst_gap, worst_k = 0.0, None
    for k, b in enumerate(traj.breakpoints):
        I = np.flatnonzero(np.abs(b.p) >= 1.0 - tol.active)
        s = np.sign(b.p[I])
        best = float(f @ f)
        for size in range(1, I.size + 1):
            for S in itertools.combinations(range(I.size), size):
                cols = I[list(S)]
                x = np.linalg.lstsq(M[:, cols], f, rcond=None)[0]
                if np.all(x * s[list(S)] >= -atol):
                    res = f - M[:, cols] @ x
                    best = min(best, float(res @ res))
        res = f - M @ b.u
        recorded = float(res @ res)
        off = np.ones(prob.n, dtype=bool)
        off[I] = False
        admissible = np.all(b.u[off] == 0.0) and np.all(b.u[I] * s >= -atol)
        gap = recorded - best if admissible else math.inf
        if gap > worst_gap or (not admissible and worst_k is None):
            worst_gap, worst_k = gap, k
    passed = worst_gap <= atol
    return ConditionReport(Condition.BRUTE_FORCE, passed, worst_k, worst_gap, atol,
                           detail="" if passed else f"breakpoint {worst_k} is not the minimal sign-feasible fit")
