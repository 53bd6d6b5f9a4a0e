"""Named, fully specified problem instances with their expected outcomes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .aiss import FlowTrajectory, ProblemSpec, solve, verify_trajectory
from .core import LinearOperator, convolution_operator, identity_operator
from .errors import ScenarioLookupError
from .singular import (
    Condition,
    ConditionReport,
    SingularCandidate,
    check_dual_singular,
    check_oc,
    check_singular,
    check_sub0,
    dictionary_singular,
    make_candidate,
)
from .subgrad import tv_star

__all__ = ["Scenario", "ScenarioResult", "NAMES", "build", "run_scenario", "blur_operator"]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A problem, its singular family and the expected results.

    `expected_breakpoints` holds ``(t, u)`` pairs; ``t`` is ``None`` where
    only the primal is known.  `expected_reports` holds
    ``(condition, passed, witness_value)`` triples (witness ``None`` when
    not pinned).  `expected_values` carries scalar facts such as TV* values.
    With `leading_only` the expected breakpoints are only the first few of
    the path.
    """

    name: str
    prob: ProblemSpec
    family: list[SingularCandidate]
    gammas: list[float]
    expected_breakpoints: list[tuple[float | None, np.ndarray]] | None = None
    expected_reports: list[tuple[Condition, bool, float | None]] = field(default_factory=list)
    expected_values: dict[str, float] = field(default_factory=dict)
    source: np.ndarray | None = None
    leading_only: bool = False


def blur_operator(n: int) -> LinearOperator:
    """Two-tap blur ``(K u)_k = (u_k + u_{k+1}) / sqrt(2)`` with zero padding."""
    return convolution_operator(np.array([1.0, 1.0, 0.0]) / SQRT2, range(-1, 2), n)


def _vec(*values) -> np.ndarray:
    return np.array(values, dtype=float)


def _data(K: LinearOperator, family, gammas) -> np.ndarray:
    return sum(g * (K.matrix @ c.u) for g, c in zip(gammas, family))


def _partial_sums(family, gammas) -> list[np.ndarray]:
    out, acc = [], np.zeros(family[0].u.size)
    for g, c in zip(gammas, family):
        acc = acc + g * c.u
        out.append(acc)
    return out


def _sec5_1() -> Scenario:
    K = blur_operator(8)
    family = [make_candidate(u, K) for u in (
        _vec(0, 0, 0, 1, -1, 0, 0, 0),
        _vec(0, -1, 0, 0, 0, 0, 0, 0),
        _vec(0, 0, 0, 0, 0, 0, 1, 0),
    )]
    gammas = [5.0, 2.0, 1.0]
    times = [c.lam / g for c, g in zip(family, gammas)]
    return Scenario(
        "sec5_1", ProblemSpec(K, _data(K, family, gammas)), family, gammas,
        expected_breakpoints=list(zip(times, _partial_sums(family, gammas))),
        expected_reports=[(Condition.OC, True, None), (Condition.SUB0, True, None)],
        expected_values={
            "lambda_1": 2.0, "lambda_2": 1.0, "lambda_3": 1.0,
        },
    )


def _conv_pair_family():
    K = blur_operator(5)
    family = [make_candidate(_vec(0, 0, 1, 0, 0), K), make_candidate(_vec(0, 1, 0, -1, 0) / SQRT2, K)]
    return K, family


def _sec5_2a() -> Scenario:
    K, family = _conv_pair_family()
    gammas = [1.0, 3.0 / (2.0 * SQRT2)]
    return Scenario(
        "sec5_2a", ProblemSpec(K, _data(K, family, gammas)), family, gammas,
        expected_breakpoints=[
            (None, _vec(0, 5 / 4, 0, 0, 0)),
            (None, _vec(0, 1, 1 / 2, 0, 0)),
            (None, _vec(0, 3 / 4, 1, -3 / 4, 0)),
        ],
        expected_reports=[(Condition.OC, True, None), (Condition.SUB0, False, 1.5)],
        expected_values={"residual_first": 9 / 16, "residual_u_lambda1": 9 / 8},
    )


def _conv_pair() -> Scenario:
    K, family = _conv_pair_family()
    gammas = [1.0, 1.0]
    return Scenario(
        "conv_pair", ProblemSpec(K, _data(K, family, gammas)), family, gammas,
        expected_reports=[(Condition.SINGULAR, True, None), (Condition.OC, True, None),
                          (Condition.SUB0, False, 1.5)],
        expected_values={"lambda_1": 1.0, "lambda_2": SQRT2},
    )


def _conv_five_family():
    K = blur_operator(9)
    family = [make_candidate(u, K) for u in (
        _vec(0, 0, 0, 1, -1, 0, 0, 0, 0),
        _vec(0, 0, 0, 0, -1, 1, 0, 0, 0),
        _vec(0, 0, 0, 1, 0, 1, 0, 0, 0) / SQRT2,
        _vec(0, -1, 0, 0, 0, 0, 0, 0, 0),
        _vec(0, 0, 0, 0, 0, 0, 0, -1, 0),
    )]
    return K, family


_FIVE_GAMMAS = [9.0, 8.0, 3.0 * SQRT2, 2.0, 1.0]


def _conv_five() -> Scenario:
    K, family = _conv_five_family()
    gammas = list(_FIVE_GAMMAS)
    return Scenario(
        "conv_five", ProblemSpec(K, _data(K, family, gammas)), family, gammas,
        expected_reports=[(Condition.SINGULAR, True, None), (Condition.OC, True, None),
                          (Condition.SUB0, False, -2.0)],
    )


def _sec5_2b() -> Scenario:
    K, family = _conv_five_family()
    gammas = list(_FIVE_GAMMAS)
    return Scenario(
        "sec5_2b", ProblemSpec(K, _data(K, family, gammas)), family, gammas,
        expected_breakpoints=[
            (None, _vec(0, 0, 0, 0, -11 / 2, 0, 0, 0, 0)),
            (None, _vec(0, 0, 5, 0, -11 / 2, 0, 5, 0, 0)),
            (None, _vec(0, 0, 5 / 4, 15 / 2, -37 / 4, 0, 5, 0, 0)),
            (None, _vec(0, 0, 0, 12, -17, 11, 0, 0, 0)),
            (None, _vec(0, -2, 0, 12, -17, 11, 0, 0, 0)),
            (None, _vec(0, -2, 0, 12, -17, 11, 0, -1, 0)),
        ],
        expected_reports=[(Condition.OC, True, None), (Condition.SUB0, False, -2.0)],
    )


def _dictionary() -> Scenario:
    W = identity_operator(8)
    family = [
        dictionary_singular(W, [0], [1]),
        dictionary_singular(W, [2, 5], [1, -1]),
        dictionary_singular(W, [3, 4, 6, 7], [-1, 1, 1, -1]),
    ]
    gammas = [4.0, 2.0, 1.0]
    K = identity_operator(8)
    times = [c.lam / g for c, g in zip(family, gammas)]
    return Scenario(
        "dictionary", ProblemSpec(K, _data(K, family, gammas)), family, gammas,
        expected_breakpoints=list(zip(times, _partial_sums(family, gammas))),
        expected_reports=[(Condition.OC, True, None), (Condition.SUB0, True, None)],
        expected_values={"lambda_1": 1.0, "lambda_2": SQRT2, "lambda_3": 2.0},
    )


def _tv_haar() -> Scenario:
    # Haar wavelets on 8 uniform cells of [0, 1]
    u1 = _vec(1, 1, 1, 1, -1, -1, -1, -1)
    u2 = _vec(SQRT2, SQRT2, -SQRT2, -SQRT2, 0, 0, 0, 0)
    K = identity_operator(8)
    family = [make_candidate(u1 / np.linalg.norm(u1), K), make_candidate(u2 / np.linalg.norm(u2), K)]
    gammas = [1.0, 1.0]
    return Scenario(
        "tv_haar", ProblemSpec(K, u1 + u2), family, gammas,
        expected_reports=[(Condition.OC, True, None)],
        expected_values={"tv_u1": 4.0, "tv_u2": 4.0 * SQRT2, "tv_sum": 4.0 + 2.0 * SQRT2},
        source=np.stack([u1, u2]),
    )


def _ssc() -> Scenario:
    K = blur_operator(5)
    u_dagger = _vec(0, 3, 0, -3, 0)
    # a subgradient of ||.||_1 at u_dagger, strictly inside [-1, 1] off the support
    p = _vec(0.25, 1.0, -0.5, -1.0, 0.1)
    omega = np.linalg.solve(K.matrix.T @ K.matrix, p)
    Ku = K.matrix @ u_dagger
    scale = np.abs(u_dagger).sum() / float(Ku @ Ku)
    return Scenario(
        "ssc", ProblemSpec(K, K.matrix @ omega), [make_candidate(u_dagger, K)], [1.0],
        expected_breakpoints=[(1.0, scale * u_dagger)],
        expected_reports=[(Condition.SSC, True, None)],
        source=omega,
        leading_only=True,
    )


def _dual_sv() -> Scenario:
    K = blur_operator(5)
    norms = np.linalg.norm(K.matrix, axis=0)
    i = int(np.argmax(norms))
    e = np.zeros(5)
    e[i] = 1.0
    f = 2.0 * (K.matrix @ e)
    return Scenario(
        "dual_sv", ProblemSpec(K, f), [make_candidate(e, K)], [2.0],
        expected_reports=[(Condition.DUAL_SV, True, None), (Condition.SINGULAR, True, None)],
    )


_BUILDERS = {
    "sec5_1": _sec5_1,
    "sec5_2a": _sec5_2a,
    "sec5_2b": _sec5_2b,
    "conv_pair": _conv_pair,
    "conv_five": _conv_five,
    "dictionary": _dictionary,
    "tv_haar": _tv_haar,
    "ssc": _ssc,
    "dual_sv": _dual_sv,
}

NAMES = tuple(_BUILDERS)


def build(name: str) -> Scenario:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise ScenarioLookupError(f"unknown scenario {name!r}; choose from {', '.join(NAMES)}") from None


@dataclass
class ScenarioResult:
    name: str
    trajectory: FlowTrajectory
    reports: list[ConditionReport]
    mismatches: list[str]
    notes: list[str]

    @property
    def ok(self) -> bool:
        return not self.mismatches


def _condition_report(sc: Scenario, cond: Condition, traj: FlowTrajectory) -> ConditionReport:
    tol = sc.prob.tol
    K = sc.prob.K
    if cond is Condition.SINGULAR:
        reports = [check_singular(c, tol) for c in sc.family]
        return min(reports, key=lambda r: r.witness_value)
    if cond is Condition.OC:
        return check_oc(sc.family, K, tol)
    if cond is Condition.SUB0:
        return check_sub0(sc.family, tol)
    if cond is Condition.DUAL_SV:
        return check_dual_singular(sc.prob.f, K, tol)
    if cond is Condition.SSC:
        if not traj.breakpoints or sc.expected_breakpoints is None:
            return ConditionReport(Condition.SSC, False, None, math.inf, tol.check, detail="no breakpoint")
        t_exp, u_exp = sc.expected_breakpoints[0]
        first = traj.breakpoints[0]
        dev = max(abs(first.t - t_exp) / t_exp, float(np.max(np.abs(first.u - u_exp))))
        return ConditionReport(Condition.SSC, dev <= tol.check, 0, dev, tol.check,
                               detail=f"first breakpoint t={first.t!r}")
    raise ValueError(f"no scenario check for {cond}")


def _matches_family(u: np.ndarray, family, atol: float) -> int | None:
    nu = np.linalg.norm(u)
    for j, c in enumerate(family):
        v = c.u / np.linalg.norm(c.u)
        if nu > 0 and min(np.max(np.abs(u / nu - v)), np.max(np.abs(u / nu + v))) <= atol:
            return j
    return None


def run_scenario(sc: Scenario, compare: bool = True) -> ScenarioResult:
    """Solve the scenario's flow, run its checks and diff against expectations."""
    tol = sc.prob.tol
    traj = solve(sc.prob)
    reports = [verify_trajectory(traj, sc.prob, 5)]
    mismatches, notes = [], []
    if not reports[0].passed:
        mismatches.append(f"flow conditions violated: {reports[0].detail}")

    for cond, passed, witness in sc.expected_reports:
        rep = _condition_report(sc, cond, traj)
        reports.append(rep)
        if compare and rep.passed != passed:
            mismatches.append(f"{cond.value}: expected {'pass' if passed else 'fail'}, got "
                              f"{'pass' if rep.passed else 'fail'} (witness {rep.witness_value!r})")
        elif compare and witness is not None and abs(rep.witness_value - witness) > 1e-12:
            mismatches.append(f"{cond.value}: witness {rep.witness_value!r} != expected {witness!r}")
        if cond is Condition.DUAL_SV and traj.breakpoints:
            first = make_candidate(traj.breakpoints[0].u, sc.prob.K)
            rep = check_singular(first, tol)
            reports.append(ConditionReport(Condition.SINGULAR, rep.passed, rep.witness_index, rep.witness_value,
                                           rep.tolerance_used, detail="first flow solution"))
            if compare and not rep.passed:
                mismatches.append("first flow solution of a dual singular vector is not singular")

    if traj.breakpoints:
        j = _matches_family(traj.breakpoints[0].u, sc.family, tol.check)
        notes.append("u(t1) does not match any of the singular vectors" if j is None
                     else f"u(t1) is a multiple of family member {j + 1}")

    if compare and sc.expected_breakpoints is not None:
        n_exp = len(sc.expected_breakpoints)
        if len(traj.breakpoints) < n_exp or (not sc.leading_only and len(traj.breakpoints) != n_exp):
            mismatches.append(f"expected {len(sc.expected_breakpoints)} breakpoints, got {len(traj.breakpoints)}")
        for k, ((t_exp, u_exp), b) in enumerate(zip(sc.expected_breakpoints, traj.breakpoints), start=1):
            du = float(np.max(np.abs(b.u - u_exp)))
            if du > tol.check:
                mismatches.append(f"u(t{k}) differs by {du:.3e}")
            if t_exp is not None and abs(b.t - t_exp) > tol.check * max(1.0, abs(t_exp)):
                mismatches.append(f"t{k} = {b.t!r}, expected {t_exp!r}")

    if compare:
        for key, expected in sc.expected_values.items():
            actual = _scenario_value(sc, traj, key)
            if abs(actual - expected) > 1e-10:
                mismatches.append(f"{key} = {actual!r}, expected {expected!r}")
    return ScenarioResult(sc.name, traj, reports, mismatches, notes)


def _scenario_value(sc: Scenario, traj: FlowTrajectory, key: str) -> float:
    if key.startswith("lambda_"):
        return sc.family[int(key.split("_")[1]) - 1].lam
    if key.startswith("tv_"):
        u1, u2 = sc.source
        return tv_star({"tv_u1": u1, "tv_u2": u2, "tv_sum": u1 + u2}[key])
    K, f = sc.prob.K.matrix, sc.prob.f
    if key == "residual_first":
        res = K @ traj.breakpoints[0].u - f
    elif key == "residual_u_lambda1":
        res = K @ sc.family[0].u - f
    else:
        raise KeyError(key)
    return float(res @ res)
