import itertools
import math

import numpy as np
import pytest

from _gen import certified_single, dictionary_family, random_problem
from issdecomp.aiss import ProblemSpec, solve, verify_trajectory
from issdecomp.cli import main
from issdecomp.core import dense_operator, identity_operator
from issdecomp.oracles import (
    bregman_run,
    brute_force_flow_check,
    showalter_closed_form,
    showalter_rk4,
    support_change_times,
)
from issdecomp.scenarios import NAMES, blur_operator, build
from issdecomp.singular import (
    check_dual_singular,
    check_fusion,
    check_oc,
    check_singular,
    check_sub0,
    make_candidate,
    partial_subgradient_sums,
    predicted_breakpoints,
)
from issdecomp.subgrad import in_subdiff_zero, tv_star

S2 = math.sqrt(2.0)


def test_criterion_01_positive_decomposition(capsys):
    assert main(["scenario", "sec5_1", "--compare"]) == 0
    sc = build("sec5_1")
    traj = solve(sc.prob)
    assert len(traj) == 3
    assert [c.lam for c in sc.family] == pytest.approx([2, 1, 1])
    assert traj.times == pytest.approx([0.4, 0.5, 1.0], abs=1e-8)
    sums = [
        [0, 0, 0, 5, -5, 0, 0, 0],
        [0, -2, 0, 5, -5, 0, 0, 0],
        [0, -2, 0, 5, -5, 0, 1, 0],
    ]
    for b, want in zip(traj.breakpoints, sums):
        assert np.max(np.abs(b.u - want)) <= 1e-8


def test_criterion_02_first_violation_example():
    sc = build("sec5_2a")
    traj = solve(sc.prob)
    want = [[0, 5 / 4, 0, 0, 0], [0, 1, 1 / 2, 0, 0], [0, 3 / 4, 1, -3 / 4, 0]]
    assert len(traj) == 3
    for b, w in zip(traj.breakpoints, want):
        assert np.max(np.abs(b.u - w)) <= 1e-8
    K, f = sc.prob.K.matrix, sc.prob.f
    res_first = K @ traj.breakpoints[0].u - f
    res_lam1 = K @ sc.family[0].u - f
    assert abs(res_first @ res_first - 9 / 16) <= 1e-10
    assert abs(res_lam1 @ res_lam1 - 9 / 8) <= 1e-10


def test_criterion_03_second_violation_example():
    sc = build("sec5_2b")
    traj = solve(sc.prob)
    want = [
        [0, 0, 0, 0, -11 / 2, 0, 0, 0, 0],
        [0, 0, 5, 0, -11 / 2, 0, 5, 0, 0],
        [0, 0, 5 / 4, 15 / 2, -37 / 4, 0, 5, 0, 0],
        [0, 0, 0, 12, -17, 11, 0, 0, 0],
        [0, -2, 0, 12, -17, 11, 0, 0, 0],
        [0, -2, 0, 12, -17, 11, 0, -1, 0],
    ]
    assert len(traj) == 6
    for b, w in zip(traj.breakpoints, want):
        assert np.max(np.abs(b.u - w)) <= 1e-8
    # the last three equal the partial compositions gamma_1 u_1 + ... of the five-vector family
    g = sc.gammas
    parts = [sum(gg * c.u for gg, c in zip(g[:k], sc.family[:k])) for k in (3, 4, 5)]
    for b, w in zip(traj.breakpoints[3:], parts):
        assert np.max(np.abs(b.u - w)) <= 1e-8


def test_criterion_04_condition_witnesses():
    r = check_sub0(build("conv_pair").family)
    assert (r.passed, r.witness_index) == (False, 2)
    assert abs(r.witness_value - 1.5) <= 1e-12
    sums = partial_subgradient_sums(build("conv_five").family)
    witnesses = []
    for s in sums[:-1]:
        v = in_subdiff_zero(s)
        if not v:
            witnesses.append(float(s[v.worst_index]))
    assert len(witnesses) == 3
    for got, want in zip(witnesses, [-2.0, 1.5, 1.5]):
        assert abs(got - want) <= 1e-12
    assert in_subdiff_zero(sums[-1])


def test_criterion_05_tv_star_haar():
    u1, u2 = build("tv_haar").source
    a, b, ab = tv_star(u1), tv_star(u2), tv_star(u1 + u2)
    assert abs(a - 4) <= 1e-12
    assert abs(b - 4 * S2) <= 1e-12
    assert abs(ab - (4 + 2 * S2)) <= 1e-12
    assert ab < a + b


def test_criterion_06_single_vector_recovery():
    rng = np.random.default_rng(20260601)
    for _ in range(50):
        K, u, _ = certified_single(rng)
        c = make_candidate(u, K)
        assert check_singular(c).passed
        gamma = float(rng.uniform(0.2, 5.0))
        traj = solve(ProblemSpec(K, gamma * c.Ku))
        assert len(traj) == 1
        t = c.lam / gamma
        assert abs(traj.times[0] - t) <= 1e-9 * t
        assert np.max(np.abs(traj.breakpoints[0].u - gamma * u)) <= 1e-8


def test_criterion_07_first_event_law():
    rng = np.random.default_rng(7)
    for _ in range(100):
        prob = random_problem(rng)
        t1 = 1.0 / np.max(np.abs(prob.K.matrix.T @ prob.f))
        assert abs(solve(prob).times[0] - t1) <= 1e-10 * t1


def test_criterion_08_flow_invariants():
    for name in NAMES:
        sc = build(name)
        assert verify_trajectory(solve(sc.prob), sc.prob, 5).passed, name
    rng = np.random.default_rng(8)
    for _ in range(100):
        prob = random_problem(rng)
        assert verify_trajectory(solve(prob), prob, 5).passed


def test_criterion_09_decomposition_property():
    rng = np.random.default_rng(9)
    for _ in range(25):
        W, fam, gammas = dictionary_family(rng)
        assert check_oc(fam, W).passed and check_sub0(fam).passed
        f = sum(g * (W.matrix @ c.u) for g, c in zip(gammas, fam))
        traj = solve(ProblemSpec(W, f))
        times = predicted_breakpoints(fam, gammas)
        assert len(traj) == len(fam)
        for k, b in enumerate(traj.breakpoints):
            assert abs(b.t - times[k]) <= 1e-8
            want = sum(g * c.u for g, c in zip(gammas[: k + 1], fam[: k + 1]))
            assert np.max(np.abs(b.u - want)) <= 1e-8


def _all_small_subsets(count):
    for size in (2, 3):
        yield from itertools.combinations(range(count), size)


def test_criterion_10_fusion_impossible():
    sc = build("sec5_1")
    for subset in _all_small_subsets(3):
        assert check_fusion(sc.family, sc.gammas, subset, sc.prob.K).passed
    rng = np.random.default_rng(10)
    for _ in range(10):
        W, fam, gammas = dictionary_family(rng, count=int(rng.integers(3, 5)))
        for subset in _all_small_subsets(len(fam)):
            assert check_fusion(fam, gammas, subset, W).passed


def test_criterion_11_strong_source_condition():
    sc = build("ssc")
    K = sc.prob.K.matrix
    u_dag = sc.family[0].u
    b = solve(sc.prob).breakpoints[0]
    assert abs(b.t - 1.0) <= 1e-9
    want = np.abs(u_dag).sum() / float((K @ u_dag) @ (K @ u_dag)) * u_dag
    assert np.max(np.abs(b.u - want)) <= 1e-8


def test_criterion_12_oracle_agreement():
    sc = build("sec5_1")
    aiss_times = solve(sc.prob).times
    gaps = []
    for alpha in (1e2, 1e3, 1e4):
        states = bregman_run(sc.prob, alpha, int(1.05 * alpha * aiss_times[-1]) + 2)
        changes = support_change_times(states)
        assert len(changes) == len(aiss_times)
        gaps.append(max(abs(t - s) for (t, _), s in zip(changes, aiss_times)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 2 / 1e4

    for name in NAMES:
        s = build(name)
        if s.prob.n <= 10:
            assert brute_force_flow_check(s.prob, solve(s.prob)).passed, name

    rng = np.random.default_rng(12)
    for _ in range(20):
        n = int(rng.integers(2, 6))
        K = dense_operator(rng.standard_normal((n, n)) / math.sqrt(n))
        f = rng.standard_normal(n)
        for t in (0.1, 1.0, 10.0):
            exact = showalter_closed_form(K, f, t)
            assert np.linalg.norm(showalter_rk4(K, f, t) - exact) <= 1e-6 * np.linalg.norm(exact)


def _dual_instances(rng):
    yield blur_operator(5)
    yield blur_operator(9)
    for _ in range(10):
        m, n = rng.integers(3, 7, size=2)
        yield dense_operator(rng.standard_normal((m, n)))


def test_criterion_13_dual_singular_vector():
    rng = np.random.default_rng(13)
    for K in _dual_instances(rng):
        i = int(np.argmax(np.linalg.norm(K.matrix, axis=0)))
        c = float(rng.choice([-1, 1]) * rng.uniform(0.5, 4.0))
        f = c * K.matrix[:, i]
        assert check_dual_singular(f, K).passed
        first = solve(ProblemSpec(K, f)).breakpoints[0].u
        assert check_singular(make_candidate(first, K)).passed
    assert not check_dual_singular([2.0, 1.0], identity_operator(2)).passed
    # the implication never fails on generic data either
    for _ in range(20):
        prob = random_problem(rng)
        if check_dual_singular(prob.f, prob.K).passed:
            first = solve(prob).breakpoints[0].u
            assert check_singular(make_candidate(first, prob.K)).passed
