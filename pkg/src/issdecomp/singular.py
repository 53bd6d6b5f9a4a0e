"""Certification of generalised singular vectors and decomposition conditions.

All checks are for ``J = ||.||_1`` (optionally composed with an orthonormal
dictionary ``W``, i.e. ``J(u) = ||W u||_1``).  A singular vector ``u``
satisfies ``lambda K*K u in dJ(u)`` with ``lambda = J(u) / ||K u||^2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import LinearOperator, Tolerances, as_vector, identity_operator
from .errors import ArgumentError, DegenerateCandidateError, KernelDataError, OrderingError
from .subgrad import in_subdiff_l1, in_subdiff_zero

__all__ = [
    "Condition",
    "ConditionReport",
    "SingularCandidate",
    "make_candidate",
    "check_singular",
    "check_oc",
    "check_sub0",
    "check_sub0_signed",
    "partial_subgradient_sums",
    "check_fusion",
    "check_dual_singular",
    "predicted_breakpoints",
    "dictionary_singular",
]

_DEFAULT_TOL = Tolerances()


class Condition(str, Enum):
    SINGULAR = "SINGULAR"
    OC = "OC"
    SUB0 = "SUB0"
    SUB0_SIGNED = "SUB0_SIGNED"
    FUSION = "FUSION"
    DUAL_SV = "DUAL_SV"
    SSC = "SSC"
    FLOW = "FLOW"
    BRUTE_FORCE = "BRUTE_FORCE"


@dataclass(frozen=True)
class ConditionReport:
    """Verdict of one named condition with a numeric witness.

    The meaning of `witness_value` depends on the condition: a membership
    margin (SINGULAR, FUSION, FLOW), an inner product (OC), a partial-sum
    entry (SUB0), or a residual (DUAL_SV, BRUTE_FORCE).
    """

    condition: Condition
    passed: bool
    witness_index: int | tuple[int, int] | None
    witness_value: float
    tolerance_used: float
    detail: str = ""

    def to_dict(self) -> dict:
        idx = self.witness_index
        return {
            "condition": self.condition.value,
            "pass": bool(self.passed),
            "witness_index": list(idx) if isinstance(idx, tuple) else idx,
            "witness_value": float(self.witness_value),
            "tolerance_used": float(self.tolerance_used),
            "detail": self.detail,
        }


@dataclass(frozen=True, eq=False)
class SingularCandidate:
    """A vector with its singular value and subgradient ``p = lambda K*K u``."""

    u: np.ndarray
    lam: float
    p: np.ndarray
    k_normalised: bool
    K: LinearOperator
    dictionary: LinearOperator | None = None

    @property
    def Ku(self) -> np.ndarray:
        return self.K.matrix @ self.u

    def negated(self) -> SingularCandidate:
        return make_candidate(-self.u, self.K, dictionary=self.dictionary)


def _J(u: np.ndarray, dictionary: LinearOperator | None) -> float:
    if dictionary is None:
        return float(np.abs(u).sum())
    return float(np.abs(dictionary.matrix @ u).sum())


def make_candidate(u, K: LinearOperator, dictionary: LinearOperator | None = None,
                   norm_tol: float = 1e-10) -> SingularCandidate:
    """Build a candidate, computing ``lambda`` and ``p`` from `u` and `K`."""
    u = as_vector(u, "u")
    if u.size != K.n_cols:
        raise ArgumentError(f"candidate of length {u.size} does not match operator {K.shape}")
    Ku = K.matrix @ u
    sq = float(Ku @ Ku)
    if sq == 0.0:
        raise DegenerateCandidateError("K u = 0: no singular value is defined")
    lam = _J(u, dictionary) / sq
    p = lam * (K.matrix.T @ Ku)
    p.setflags(write=False)
    return SingularCandidate(u, lam, p, abs(np.sqrt(sq) - 1.0) <= norm_tol, K, dictionary)


def _membership(u: np.ndarray, p: np.ndarray, dictionary, tol: Tolerances):
    if dictionary is None:
        return in_subdiff_l1(u, p, tol)
    # dJ(u) = W* sign(W u); for W*W = I the coefficient q = W p is a sufficient witness
    return in_subdiff_l1(dictionary.matrix @ u, dictionary.matrix @ p, tol)


def check_singular(c: SingularCandidate, tol: Tolerances = _DEFAULT_TOL) -> ConditionReport:
    """Certify ``lambda K*K u in dJ(u)``."""
    v = _membership(c.u, c.p, c.dictionary, tol)
    return ConditionReport(Condition.SINGULAR, v.member, v.worst_index, v.worst_margin, tol.check)


def check_oc(cands: Sequence[SingularCandidate], K: LinearOperator,
             tol: Tolerances = _DEFAULT_TOL) -> ConditionReport:
    """K-orthogonality ``<K u_i, K u_j> = 0`` for all pairs."""
    if len(cands) < 2:
        raise ArgumentError("check_oc needs at least two candidates")
    images = np.array([K.matrix @ c.u for c in cands])
    gram = images @ images.T
    pair = max(itertools.combinations(range(len(cands)), 2), key=lambda ij: abs(gram[ij]))
    worst = float(gram[pair])
    return ConditionReport(Condition.OC, abs(worst) <= tol.check, pair, worst, tol.check)


def partial_subgradient_sums(cands: Sequence[SingularCandidate],
                             signs: Sequence[float] | None = None) -> list[np.ndarray]:
    """Return ``[sum_{j<=k} s_j p_j for k = 1..n]``."""
    if signs is None:
        signs = [1.0] * len(cands)
    out, acc = [], None
    for c, s in zip(cands, signs):
        acc = s * c.p if acc is None else acc + s * c.p
        out.append(acc.copy())
    return out


def _sub0_report(sums: list[np.ndarray], condition: Condition, tol: Tolerances) -> ConditionReport:
    if not sums:
        raise ArgumentError("no candidates given")
    largest_entry, largest_k = 0.0, None
    for k, s in enumerate(sums, start=1):
        v = in_subdiff_zero(s, tol)
        entry = float(s[v.worst_index])
        if not v.member:
            return ConditionReport(condition, False, k, entry, tol.check,
                                   detail=f"partial sum k={k} leaves dJ(0) at coordinate {v.worst_index}")
        if abs(entry) > abs(largest_entry) or largest_k is None:
            largest_entry, largest_k = entry, k
    return ConditionReport(condition, True, None, largest_entry, tol.check)


def check_sub0(cands: Sequence[SingularCandidate], tol: Tolerances = _DEFAULT_TOL) -> ConditionReport:
    """Partial sums ``sum_{j<=k} p_j`` must lie in ``dJ(0)`` for every k.

    Checked in the order given.  On failure `witness_index` is the first
    failing k (1-based count) and `witness_value` the offending entry of that
    partial sum; on success `witness_value` is the largest-magnitude entry seen.
    """
    lengths = {c.p.size for c in cands}
    if len(lengths) > 1:
        raise ArgumentError("subgradients have different lengths")
    return _sub0_report(partial_subgradient_sums(cands), Condition.SUB0, tol)


def check_sub0_signed(cands: Sequence[SingularCandidate], gammas: Sequence[float],
                      tol: Tolerances = _DEFAULT_TOL) -> ConditionReport:
    """SUB0 with partial sums ``sum_{j<=k} sign(gamma_j) p_j``."""
    if len(gammas) != len(cands):
        raise ArgumentError("need one gamma per candidate")
    if any(g == 0 for g in gammas):
        raise ArgumentError("gammas must be nonzero")
    signs = [float(np.sign(g)) for g in gammas]
    return _sub0_report(partial_subgradient_sums(cands, signs), Condition.SUB0_SIGNED, tol)


def _ratios(cands, gammas) -> np.ndarray:
    if len(gammas) != len(cands):
        raise ArgumentError("need one gamma per candidate")
    g = np.asarray(gammas, dtype=float)
    if np.any(g <= 0):
        raise ArgumentError("gammas must be positive")
    return np.array([c.lam for c in cands]) / g


def check_fusion(cands: Sequence[SingularCandidate], gammas: Sequence[float], subset: Sequence[int],
                 K: LinearOperator, tol: Tolerances = _DEFAULT_TOL) -> ConditionReport:
    """Report whether ``w = sum_{k in subset} gamma_k u_k`` fails to be singular.

    Passes when fusion is impossible, i.e. ``mu K*K w`` is *not* in
    ``dJ(w)`` for ``mu = J(w) / ||K w||^2``.  `subset` holds 0-based indices.
    """
    subset = sorted(set(int(i) for i in subset))
    if len(subset) < 2:
        raise ArgumentError("fusion needs a subset of at least two candidates")
    if subset[0] < 0 or subset[-1] >= len(cands):
        raise ArgumentError("subset index out of range")
    ratios = _ratios(cands, gammas)[subset]
    if np.any(np.diff(ratios) <= 0):
        raise OrderingError("lambda_k / gamma_k must be strictly increasing on the subset")
    if not all(cands[i].k_normalised for i in subset):
        raise ArgumentError("fusion check expects K-normalised candidates")
    w = sum(gammas[i] * cands[i].u for i in subset)
    fused = make_candidate(w, K, dictionary=cands[subset[0]].dictionary)
    v = _membership(fused.u, fused.p, fused.dictionary, tol)
    return ConditionReport(Condition.FUSION, not v.member, v.worst_index, v.worst_margin, tol.check,
                           detail=f"fused singular value {fused.lam!r}")


def _simplex_lsq(C: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Minimise ``||C w - y||^2`` over the probability simplex.

    Exact for a handful of columns (enumerates faces and solves the
    equality-constrained KKT system on each); projected gradient otherwise.
    """
    m = C.shape[1]
    if m <= 12:
        best, best_w = np.inf, None
        for size in range(1, m + 1):
            for S in itertools.combinations(range(m), size):
                S = list(S)
                CS = C[:, S]
                kkt = np.zeros((size + 1, size + 1))
                kkt[:size, :size] = CS.T @ CS
                kkt[:size, size] = 1.0
                kkt[size, :size] = 1.0
                rhs = np.concatenate([CS.T @ y, [1.0]])
                sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:size]
                if np.any(sol < -1e-14):
                    continue
                w = np.zeros(m)
                w[S] = np.clip(sol, 0.0, None)
                w /= w.sum()
                res = float(np.sum((C @ w - y) ** 2))
                if res < best:
                    best, best_w = res, w
        return best_w
    step = 1.0 / max(np.linalg.norm(C, 2) ** 2, 1e-300)
    w = np.full(m, 1.0 / m)
    for _ in range(20000):
        w = _project_simplex(w - step * (C.T @ (C @ w - y)))
    return w


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, v.size + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def check_dual_singular(f, K: LinearOperator, tol: Tolerances = _DEFAULT_TOL) -> ConditionReport:
    """Test whether `f` is a dual singular vector.

    With ``h = K* f`` and ``A`` the argmax set of ``|h|``, `f` passes when
    ``(||h||_inf / ||f||^2) f`` is a convex combination of the columns
    ``sign(h_i) K e_i``, ``i in A`` (the subdifferential of
    ``w -> ||K* w||_inf`` at `f`), to ``tol.check`` per coordinate.
    """
    f = as_vector(f, "f")
    if f.size != K.n_rows:
        raise ArgumentError(f"data of length {f.size} does not match operator {K.shape}")
    h = K.matrix.T @ f
    hmax = float(np.abs(h).max())
    if hmax == 0.0:
        raise KernelDataError("K* f = 0")
    A = np.flatnonzero(np.abs(h) >= hmax - tol.active * max(1.0, hmax))
    y = (hmax / float(f @ f)) * f
    C = K.matrix[:, A] * np.sign(h[A])
    w = _simplex_lsq(C, y)
    resid = np.abs(C @ w - y)
    worst = int(np.argmax(resid))
    return ConditionReport(Condition.DUAL_SV, bool(resid[worst] <= tol.check), worst, float(resid[worst]),
                           tol.check, detail=f"argmax set {A.tolist()}, weights {w.tolist()}")


def predicted_breakpoints(cands: Sequence[SingularCandidate], gammas: Sequence[float]) -> list[float]:
    """Jump times ``t_k = lambda_k / gamma_k`` of the sequential decomposition."""
    if not all(c.k_normalised for c in cands):
        raise ArgumentError("predicted breakpoints require K-normalised candidates")
    ratios = _ratios(cands, gammas)
    if np.any(np.diff(ratios) <= 0):
        raise OrderingError(f"lambda_k / gamma_k not strictly increasing: {ratios.tolist()}")
    return ratios.tolist()


def dictionary_singular(W: LinearOperator, support: Sequence[int], signs: Sequence[int],
                        tol: Tolerances = _DEFAULT_TOL) -> SingularCandidate:
    """Equal-magnitude peaks in dictionary coordinates.

    Builds ``u = W* z`` with ``z_i = signs_i / sqrt(n)`` on `support`
    (``n = |support|``) and returns the candidate for ``J = ||W .||_1``,
    ``K = I``; its singular value is ``sqrt(n)`` when `W` is square.
    """
    Wm = W.matrix
    if np.max(np.abs(Wm.T @ Wm - np.eye(Wm.shape[1]))) > tol.check:
        raise ArgumentError("dictionary must satisfy W* W = I")
    support = [int(i) for i in support]
    if not support:
        raise ArgumentError("support must be nonempty")
    if len(signs) != len(support) or any(s not in (1, -1) for s in signs):
        raise ArgumentError("need one sign (+1 or -1) per support index")
    if len(set(support)) != len(support) or min(support) < 0 or max(support) >= Wm.shape[0]:
        raise ArgumentError("support indices must be distinct and in range")
    z = np.zeros(Wm.shape[0])
    z[support] = np.asarray(signs, dtype=float) / np.sqrt(len(support))
    u = Wm.T @ z
    is_identity = W.provenance == "identity" or (Wm.shape[0] == Wm.shape[1] and np.array_equal(Wm, np.eye(Wm.shape[0])))
    return make_candidate(u, identity_operator(Wm.shape[1]), dictionary=None if is_identity else W)
