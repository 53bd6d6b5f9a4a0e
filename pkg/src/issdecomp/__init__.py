"""Exact inverse scale space flow for l1 and generalised singular vector checks."""

__version__ = "0.1.0"

from .aiss import Breakpoint, FlowTrajectory, ProblemSpec, evaluate, signed_cone_lsq, solve, verify_trajectory
from .core import (
    LinearOperator,
    Tolerances,
    composed_operator,
    convolution_operator,
    dense_operator,
    identity_operator,
)
from .errors import (
    ArgumentError,
    DegenerateCandidateError,
    IssError,
    KernelDataError,
    OrderingError,
    ScenarioLookupError,
    SolverError,
    TrajectoryRangeError,
)
from .singular import (
    Condition,
    ConditionReport,
    SingularCandidate,
    check_dual_singular,
    check_fusion,
    check_oc,
    check_singular,
    check_sub0,
    check_sub0_signed,
    dictionary_singular,
    make_candidate,
    predicted_breakpoints,
)
from .subgrad import in_subdiff_l1, in_subdiff_zero, tv_star

__all__ = [
    "ArgumentError", "Breakpoint", "Condition", "ConditionReport", "DegenerateCandidateError",
    "FlowTrajectory", "IssError", "KernelDataError", "LinearOperator", "OrderingError", "ProblemSpec",
    "ScenarioLookupError", "SingularCandidate", "SolverError", "Tolerances", "TrajectoryRangeError",
    "check_dual_singular", "check_fusion", "check_oc", "check_singular", "check_sub0", "check_sub0_signed",
    "composed_operator", "convolution_operator", "dense_operator", "dictionary_singular", "evaluate",
    "identity_operator", "in_subdiff_l1", "in_subdiff_zero", "make_candidate", "predicted_breakpoints",
    "signed_cone_lsq", "solve", "tv_star", "verify_trajectory",
]
