"""Exact inverse scale space flow for ``J = ||.||_1``.

The flow ``dp/dt = K*(f - K u)``, ``p in dJ(u)``, ``p(0) = 0`` has a
piecewise-constant primal and a piecewise-linear dual.  Between events the
primal is frozen; an event happens when a dual coordinate reaches +-1, at
which point the primal is refitted by least squares over the sign cone of
the coordinates sitting on the dual boundary.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import LinearOperator, Tolerances, as_vector
from .errors import ArgumentError, SolverError, TrajectoryRangeError
from .singular import Condition, ConditionReport
from .subgrad import in_subdiff_l1

__all__ = [
    "ProblemSpec",
    "Breakpoint",
    "FlowTrajectory",
    "solve",
    "signed_cone_lsq",
    "evaluate",
    "verify_trajectory",
    "sample_times",
]

RESIDUAL_ZERO = "residual_zero"
T_MAX_REACHED = "t_max_reached"


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    K: LinearOperator
    f: np.ndarray
    t_max: float = math.inf
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        f = as_vector(self.f, "f")
        if f.size != self.K.n_rows:
            raise ArgumentError(f"data of length {f.size} does not match operator {self.K.shape}")
        t_max = float(self.t_max)
        if not t_max > 0:
            raise ArgumentError("t_max must be positive")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "t_max", t_max)

    @property
    def n(self) -> int:
        return self.K.n_cols

    def residual(self, u: np.ndarray) -> np.ndarray:
        """``K*(f - K u)``."""
        return self.K.matrix.T @ (self.f - self.K.matrix @ u)


@dataclass(frozen=True, eq=False)
class Breakpoint:
    t: float
    u: np.ndarray
    p: np.ndarray
    r: np.ndarray


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Breakpoints of the flow.

    `rate0` is ``K* f``, the dual velocity on ``[0, t_1)``.  `t_max` is the
    horizon the trajectory was computed for (``inf`` when unbounded).
    """

    breakpoints: tuple[Breakpoint, ...]
    terminated: str
    rate0: np.ndarray
    t_max: float = math.inf

    def __len__(self) -> int:
        return len(self.breakpoints)

    @property
    def times(self) -> list[float]:
        return [b.t for b in self.breakpoints]

    @property
    def n(self) -> int:
        return self.rate0.size


def signed_cone_lsq(K: LinearOperator, f, active: Sequence[int], signs: Sequence[float],
                    tol: Tolerances = Tolerances()) -> np.ndarray:
    """Least squares over a signed orthant.

    Minimises ``0.5 ||K u - f||^2`` subject to ``u_i * signs_i >= 0`` for
    ``i in active`` and ``u_i = 0`` elsewhere.  Lawson-Hanson active-set
    iteration on the sign-flipped columns; restricted solves use the
    minimum-norm least-squares solution.
    """
    f = as_vector(f, "f")
    active = np.asarray(active, dtype=int)
    s = np.asarray(signs, dtype=float)
    if active.size == 0:
        raise ArgumentError("active set must be nonempty")
    if s.shape != active.shape or np.any(np.abs(s) != 1):
        raise ArgumentError("need one sign (+1/-1) per active index")
    A = K.matrix[:, active] * s
    m = active.size
    x = np.zeros(m)
    passive = np.zeros(m, dtype=bool)
    w = A.T @ f
    budget = 10 * m
    steps = 0
    while True:
        candidates = np.where(~passive, w, -np.inf)
        j = int(np.argmax(candidates))
        if passive.all() or candidates[j] <= tol.lsq:
            break
        passive[j] = True
        while True:
            steps += 1
            if steps > budget:
                raise SolverError(f"signed_cone_lsq exceeded {budget} iterations "
                                  f"(active={active.tolist()}, passive={np.flatnonzero(passive).tolist()})")
            z = np.zeros(m)
            z[passive] = np.linalg.lstsq(A[:, passive], f, rcond=None)[0]
            bad = passive & (z <= 0)
            if not bad.any():
                x = z
                break
            alpha = np.min(x[bad] / (x[bad] - z[bad]))
            x = x + alpha * (z - x)
            passive &= x > 0
            x[~passive] = 0.0
        w = A.T @ (f - A @ x)
    u = np.zeros(K.n_cols)
    u[active] = s * x
    return u


def _next_event(p: np.ndarray, r: np.ndarray, tol: Tolerances) -> float:
    """Smallest positive step after which some ``|p_i + dt r_i|`` reaches 1."""
    best = math.inf
    moving = np.abs(r) > tol.lsq
    for i in np.flatnonzero(moving):
        target = math.copysign(1.0, r[i])
        # a coordinate on the boundary it is moving towards is a KKT violation; skip it
        if target * p[i] >= 1.0 - tol.active:
            continue
        best = min(best, float((target - p[i]) / r[i]))
    return best


def solve(prob: ProblemSpec, max_events: int | None = None) -> FlowTrajectory:
    """Compute the exact flow path as a list of breakpoints."""
    tol = prob.tol
    K = prob.K.matrix
    n = prob.n
    rate0 = K.T @ prob.f
    rate0.setflags(write=False)
    if max_events is None:
        max_events = 20 * n + 100
    t = 0.0
    p = np.zeros(n)
    r = rate0.copy()
    bps: list[Breakpoint] = []
    terminated = RESIDUAL_ZERO
    while np.max(np.abs(r)) > tol.lsq:
        if len(bps) >= max_events:
            raise SolverError(f"no convergence after {max_events} events")
        dt = _next_event(p, r, tol)
        if not math.isfinite(dt):
            raise SolverError("nonzero residual but no dual coordinate approaches the boundary")
        t_next = t + float(dt)
        if t_next > prob.t_max:
            terminated = T_MAX_REACHED
            break
        p = p + dt * r
        I = np.flatnonzero(np.abs(p) >= 1.0 - tol.active)
        s = np.sign(p[I])
        p[I] = s
        u = signed_cone_lsq(prob.K, prob.f, I, s, tol)
        r = K.T @ (prob.f - K @ u)
        t = t_next
        for a in (u, p, r):
            a.setflags(write=False)
        bps.append(Breakpoint(t, u, p, r))
        p = p.copy()
        if t >= prob.t_max:
            terminated = T_MAX_REACHED if np.max(np.abs(r)) > tol.lsq else RESIDUAL_ZERO
            break
    return FlowTrajectory(tuple(bps), terminated, rate0, prob.t_max)


def evaluate(traj: FlowTrajectory, prob: ProblemSpec | None, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Primal and dual at time `t`.

    The primal jumps *at* each breakpoint (intervals are left-closed).  When
    `prob` is given its horizon takes precedence over the trajectory's.
    """
    t_max = prob.t_max if prob is not None else traj.t_max
    if t < 0:
        raise TrajectoryRangeError(f"negative time {t}")
    if traj.terminated != RESIDUAL_ZERO and t > t_max:
        raise TrajectoryRangeError(f"time {t} beyond the computed horizon {t_max}")
    times = traj.times
    k = bisect.bisect_right(times, t) - 1
    if k < 0:
        return np.zeros(traj.n), t * traj.rate0
    b = traj.breakpoints[k]
    return b.u.copy(), b.p + (t - b.t) * b.r


def left_limit(traj: FlowTrajectory, k: int) -> tuple[np.ndarray, np.ndarray]:
    """One-sided limit from the left at breakpoint `k`."""
    b = traj.breakpoints[k]
    if k == 0:
        return np.zeros(traj.n), b.t * traj.rate0
    prev = traj.breakpoints[k - 1]
    return prev.u.copy(), prev.p + (b.t - prev.t) * prev.r


def sample_times(traj: FlowTrajectory, samples_per_interval: int) -> list[float]:
    """Interior sample times of every interval, including the tail after the last breakpoint."""
    times = [0.0] + traj.times
    if traj.breakpoints:
        tail = traj.t_max if math.isfinite(traj.t_max) else 2.0 * times[-1]
    else:
        tail = traj.t_max if math.isfinite(traj.t_max) else 1.0
    times.append(tail)
    out = []
    for a, b in zip(times[:-1], times[1:]):
        if b <= a:
            continue
        out.extend(a + (b - a) * j / (samples_per_interval + 1) for j in range(1, samples_per_interval + 1))
    return out


def verify_trajectory(traj: FlowTrajectory, prob: ProblemSpec, samples_per_interval: int = 5) -> ConditionReport:
    """Re-check the flow conditions along a computed path.

    At every breakpoint and at `samples_per_interval` interior times per
    interval: ``p(t) in d||.||_1(u(t))`` and
    ``|<K*(f - K u(t)), u(t)>| <= tol.check``.  `witness_index` is the
    breakpoint index of the worst violation (the interval's left breakpoint
    for interior samples, ``None`` before the first breakpoint).
    """
    if samples_per_interval < 1:
        raise ArgumentError("samples_per_interval must be >= 1")
    tol = prob.tol
    worst = (math.inf, None, "")

    def record(u, p, idx, label):
        nonlocal worst
        v = in_subdiff_l1(u, p, tol)
        ortho = abs(float(prob.residual(u) @ u))
        margin = min(v.worst_margin + tol.check, tol.check - ortho)
        if margin < worst[0]:
            worst = (margin, idx, f"{label}: subgradient margin {v.worst_margin:.3e}, orthogonality {ortho:.3e}")

    for k, b in enumerate(traj.breakpoints):
        record(b.u, b.p, k, f"breakpoint {k} (t={b.t!r})")
    times = traj.times
    for t in sample_times(traj, samples_per_interval):
        u, p = evaluate(traj, None, t)
        k = bisect.bisect_right(times, t) - 1
        record(u, p, k if k >= 0 else None, f"sample t={t!r}")
    if not math.isfinite(worst[0]):
        return ConditionReport(Condition.FLOW, True, None, 0.0, tol.check)
    # witness_value is the slack of the tightest check; negative means violated
    return ConditionReport(Condition.FLOW, worst[0] >= 0, worst[1], worst[0], tol.check, detail=worst[2])
