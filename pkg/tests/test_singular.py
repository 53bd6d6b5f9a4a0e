import itertools
import math

import numpy as np
import pytest

from _gen import certified_single, dictionary_family
from issdecomp.aiss import ProblemSpec, solve
from issdecomp.core import dense_operator, identity_operator
from issdecomp.errors import ArgumentError, DegenerateCandidateError, KernelDataError, OrderingError
from issdecomp.scenarios import blur_operator, build
from issdecomp.singular import (
    Condition,
    check_dual_singular,
    check_fusion,
    check_oc,
    check_singular,
    check_sub0,
    check_sub0_signed,
    dictionary_singular,
    make_candidate,
    partial_subgradient_sums,
    predicted_breakpoints,
)
from issdecomp.subgrad import in_subdiff_l1

S2 = math.sqrt(2.0)


@pytest.fixture
def sec51():
    return build("sec5_1")


def test_make_candidate_example():
    c = make_candidate([0, 0, 1, 0, 0], blur_operator(5))
    assert c.lam == pytest.approx(1.0)
    np.testing.assert_allclose(c.p, [0, 0.5, 1, 0.5, 0], atol=1e-15)
    assert c.k_normalised


def test_make_candidate_scaling_invariance():
    K = blur_operator(5)
    c = make_candidate([0, 0, 1, 0, 0], K)
    c3 = make_candidate([0, 0, 3, 0, 0], K)
    assert c3.lam == pytest.approx(c.lam / 3)
    np.testing.assert_allclose(c3.p, c.p, atol=1e-15)
    assert not c3.k_normalised


def test_make_candidate_lambda_of_dipole(sec51):
    assert sec51.family[0].lam == pytest.approx(2.0)


def test_make_candidate_degenerate():
    K = dense_operator(np.array([[1.0, 0.0]]))
    with pytest.raises(DegenerateCandidateError):
        make_candidate([0.0, 1.0], K)
    with pytest.raises(ArgumentError):
        make_candidate([1.0], K)


def test_check_singular_examples():
    for c in build("conv_five").family:
        assert check_singular(c).passed
    r = check_singular(make_candidate([1.0, 0.5], identity_operator(2)))
    assert not r.passed
    assert r.condition is Condition.SINGULAR
    assert check_singular(make_candidate(np.array([0, 1, 0, -1, 0]) / S2, blur_operator(5))).passed


def test_certification_scaling_and_sign_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(20):
        K, u, lam = certified_single(rng)
        c = make_candidate(u, K)
        assert check_singular(c).passed
        assert check_singular(make_candidate(rng.uniform(0.1, 10) * u, K)).passed
        neg = c.negated()
        assert check_singular(neg).passed
        assert neg.lam == pytest.approx(c.lam)


def test_check_oc():
    assert check_oc(build("conv_five").family, blur_operator(9)).passed
    c = make_candidate([0, 0, 1, 0, 0], blur_operator(5))
    r = check_oc([c, c], blur_operator(5))
    assert not r.passed
    assert r.witness_value == pytest.approx(1.0)
    assert r.witness_index == (0, 1)
    with pytest.raises(ArgumentError):
        check_oc([c], blur_operator(5))


def test_check_sub0_sec51(sec51):
    r = check_sub0(sec51.family)
    assert r.passed
    sums = partial_subgradient_sums(sec51.family)
    assert any(np.allclose(s, [-0.5, -1, 0.5, 1, -1, -1, 0, 0]) for s in sums)


def test_check_sub0_pair_fails_with_three_halves():
    r = check_sub0(build("conv_pair").family)
    assert not r.passed
    assert r.witness_index == 2
    assert abs(r.witness_value - 1.5) <= 1e-12


def test_check_sub0_five_vectors():
    fam = build("conv_five").family
    r = check_sub0(fam)
    assert (r.passed, r.witness_index) == (False, 2)
    assert abs(r.witness_value + 2.0) <= 1e-12
    full = partial_subgradient_sums(fam)[-1]
    assert np.max(np.abs(full)) <= 1.0 + 1e-12


def test_check_sub0_signed(sec51):
    fam = sec51.family
    pos = check_sub0_signed(fam, [5, 2, 1])
    plain = check_sub0(fam)
    assert (pos.passed, pos.witness_index, pos.witness_value) == (plain.passed, plain.witness_index, plain.witness_value)
    assert pos.condition is Condition.SUB0_SIGNED
    flipped = check_sub0_signed(fam, [5, -2, 1])
    ref = check_sub0([fam[0], fam[1].negated(), fam[2]])
    assert (flipped.passed, flipped.witness_index) == (ref.passed, ref.witness_index)
    assert flipped.witness_value == pytest.approx(ref.witness_value)
    assert check_sub0_signed(fam[:1], [-3.0]).passed
    with pytest.raises(ArgumentError):
        check_sub0_signed(fam, [1, 0, 1])


def test_check_fusion(sec51):
    K = sec51.prob.K
    assert check_fusion(sec51.family, sec51.gammas, [0, 1], K).passed
    assert check_fusion(sec51.family, sec51.gammas, [0, 1, 2], K).passed
    with pytest.raises(ArgumentError):
        check_fusion(sec51.family, sec51.gammas, [0], K)
    with pytest.raises(OrderingError):
        check_fusion(sec51.family, [1, 2, 1], [0, 1], K)


def test_fusion_detects_a_true_fusion():
    # two halves of an equal-magnitude peak set fuse into a singular vector when gammas match
    W = identity_operator(4)
    a = dictionary_singular(W, [0], [1])
    b = dictionary_singular(W, [1], [1])
    r = check_fusion([a, b], [1.0, 0.999], [0, 1], W)
    assert r.passed  # unequal peaks: not singular
    with pytest.raises(OrderingError):
        check_fusion([a, b], [1.0, 1.0], [0, 1], W)


def test_check_dual_singular_examples():
    I2 = identity_operator(2)
    assert check_dual_singular([1.0, 0.0], I2).passed
    r = check_dual_singular([2.0, 1.0], I2)
    assert not r.passed
    # target (|h|_inf / |f|^2) f = (0.8, 0.4) against the single column e_1
    assert r.witness_index == 1
    assert r.witness_value == pytest.approx(0.4)
    with pytest.raises(KernelDataError):
        check_dual_singular([0.0, 0.0], I2)


def test_dual_singular_tie_uses_convex_combination():
    # h = (1, 1): the midpoint of e_1 and e_2 reproduces f / |f|^2
    assert check_dual_singular([1.0, 1.0], identity_operator(2)).passed
    assert not check_dual_singular([1.0, 1.0, 0.5], identity_operator(3)).passed


def test_dual_singular_consistent_with_first_solution():
    K = blur_operator(5)
    f = 3.0 * (K.matrix @ np.array([0, 0, 1.0, 0, 0]))
    assert check_dual_singular(f, K).passed
    first = solve(ProblemSpec(K, f)).breakpoints[0].u
    assert check_singular(make_candidate(first, K)).passed


def test_predicted_breakpoints(sec51):
    assert predicted_breakpoints(sec51.family, [5, 2, 1]) == pytest.approx([0.4, 0.5, 1.0])
    c = make_candidate([0, 0, 1, 0, 0], blur_operator(5))
    assert predicted_breakpoints([c], [c.lam]) == pytest.approx([1.0])
    assert predicted_breakpoints([c], [0.3]) == pytest.approx([c.lam / 0.3])
    with pytest.raises(OrderingError):
        predicted_breakpoints(sec51.family, [1, 1, 1])
    with pytest.raises(ArgumentError):
        predicted_breakpoints([make_candidate([0, 0, 2, 0, 0], blur_operator(5))], [1.0])


def test_dictionary_singular():
    W = identity_operator(6)
    c = dictionary_singular(W, [2], [1])
    np.testing.assert_array_equal(c.u, np.eye(6)[2])
    assert c.lam == pytest.approx(1.0)
    assert dictionary_singular(W, [0, 1, 3, 5], [1, -1, 1, 1]).lam == pytest.approx(2.0)
    H = np.kron(np.eye(2), np.array([[1, 1], [1, -1]]) / S2)
    c = dictionary_singular(dense_operator(H), [0], [1])
    assert c.dictionary is not None
    assert check_singular(c).passed
    with pytest.raises(ArgumentError):
        dictionary_singular(dense_operator(2 * np.eye(3)), [0], [1])
    with pytest.raises(ArgumentError):
        dictionary_singular(W, [0, 0], [1, 1])


def test_linearity_under_oc_and_sub0():
    rng = np.random.default_rng(8)
    for _ in range(20):
        W, fam, _ = dictionary_family(rng)
        assert check_oc(fam, W).passed and check_sub0(fam).passed
        coef = rng.uniform(0, 3, size=len(fam))
        for k in range(1, len(fam) + 1):
            u = sum(c * f.u for c, f in zip(coef[:k], fam[:k]))
            p = sum(f.p for f in fam[:k])
            assert abs(np.abs(u).sum() - sum(c * np.abs(f.u).sum() for c, f in zip(coef[:k], fam[:k]))) <= 1e-10
            assert in_subdiff_l1(u, p)


def test_pair_sub0_matches_flow_decomposition():
    # for two orthogonal vectors SUB0 holds exactly when the flow recovers the pair in two steps
    cases = [build("conv_pair")]
    sec = build("sec5_1")
    for i, j in itertools.combinations(range(3), 2):
        cases.append((sec.prob.K, [sec.family[i], sec.family[j]], [sec.gammas[i], sec.gammas[j]]))
    for case in cases:
        K, fam, g = (case.prob.K, case.family, case.gammas) if hasattr(case, "prob") else case
        f = sum(gg * (K.matrix @ c.u) for gg, c in zip(g, fam))
        traj = solve(ProblemSpec(K, f))
        decomposed = len(traj) == 2 and np.allclose(traj.breakpoints[0].u, g[0] * fam[0].u, atol=1e-8)
        assert check_sub0(fam).passed == decomposed
