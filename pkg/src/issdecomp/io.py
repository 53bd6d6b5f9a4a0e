"""JSON problem and trajectory files.

Floats are written with ``repr`` (shortest round-trip decimal), so a
trajectory read back from disk is bit-identical to the one written.
Unbounded horizons are stored as ``null``.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .aiss import Breakpoint, FlowTrajectory, ProblemSpec
from .core import Tolerances, convolution_operator, dense_operator, identity_operator
from .errors import ArgumentError

__all__ = [
    "problem_to_dict",
    "problem_from_dict",
    "load_problem",
    "save_problem",
    "problem_digest",
    "trajectory_to_dict",
    "trajectory_from_dict",
    "load_trajectory",
    "save_trajectory",
]


def _floats(a) -> list[float]:
    return [float(x) for x in np.asarray(a, dtype=float).ravel()]


def _horizon_out(t: float) -> float | None:
    return t if math.isfinite(t) else None


def _horizon_in(value) -> float:
    return math.inf if value is None else float(value)


def problem_to_dict(prob: ProblemSpec) -> dict[str, Any]:
    K = prob.K
    if K.provenance == "identity":
        op = {"type": "identity", "n": K.n_cols}
    elif K.provenance == "convolution":
        op = {"type": "convolution", "kernel": _floats(K.kernel), "offsets": [int(o) for o in K.offsets],
              "n": K.n_cols}
    else:
        op = {"type": "dense", "matrix": [_floats(row) for row in K.matrix]}
    return {
        "operator": op,
        "data": _floats(prob.f),
        "t_max": _horizon_out(prob.t_max),
        "tolerances": prob.tol.to_dict(),
    }


def problem_from_dict(d: dict) -> ProblemSpec:
    """Build a `ProblemSpec`; any malformed content raises `ArgumentError`."""
    try:
        op = d["operator"]
        kind = op["type"]
        if kind == "dense":
            K = dense_operator(np.array(op["matrix"], dtype=float))
        elif kind == "convolution":
            K = convolution_operator(np.array(op["kernel"], dtype=float), [int(o) for o in op["offsets"]],
                                     int(op["n"]))
        elif kind == "identity":
            K = identity_operator(int(op["n"]))
        else:
            raise ArgumentError(f"unknown operator type {kind!r}")
        tol = Tolerances(**(d.get("tolerances") or {}))
        return ProblemSpec(K, np.array(d["data"], dtype=float), _horizon_in(d.get("t_max")), tol)
    except ArgumentError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ArgumentError(f"malformed problem: {exc!r}") from exc


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def problem_digest(prob: ProblemSpec) -> str:
    """SHA-256 of the canonical JSON form of the problem."""
    return hashlib.sha256(_canonical(problem_to_dict(prob)).encode()).hexdigest()


def _read_json(path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ArgumentError(f"cannot read {path}: {exc}") from exc


def _write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, allow_nan=False) + "\n")


def load_problem(path) -> ProblemSpec:
    d = _read_json(path)
    if not isinstance(d, dict):
        raise ArgumentError("problem file must hold a JSON object")
    return problem_from_dict(d)


def save_problem(prob: ProblemSpec, path) -> None:
    _write_json(problem_to_dict(prob), path)


def trajectory_to_dict(traj: FlowTrajectory, prob: ProblemSpec) -> dict[str, Any]:
    return {
        "breakpoints": [{"t": b.t, "u": _floats(b.u), "p": _floats(b.p), "r": _floats(b.r)}
                        for b in traj.breakpoints],
        "terminated": traj.terminated,
        "metadata": {
            "tool_version": __version__,
            "tolerances": prob.tol.to_dict(),
            "problem_digest": problem_digest(prob),
            "rate0": _floats(traj.rate0),
            "t_max": _horizon_out(traj.t_max),
        },
    }


def _frozen(values, n: int | None = None) -> np.ndarray:
    a = np.array(values, dtype=float)
    if a.ndim != 1 or (n is not None and a.size != n):
        raise ArgumentError("breakpoint vectors must be 1-d and of equal length")
    a.setflags(write=False)
    return a


def trajectory_from_dict(d: dict) -> FlowTrajectory:
    try:
        meta = d["metadata"]
        rate0 = _frozen(meta["rate0"])
        n = rate0.size
        bps = tuple(Breakpoint(float(b["t"]), _frozen(b["u"], n), _frozen(b["p"], n), _frozen(b["r"], n))
                    for b in d["breakpoints"])
        times = [b.t for b in bps]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])) or any(t <= 0 for t in times[:1]):
            raise ArgumentError("breakpoint times must be positive and strictly increasing")
        return FlowTrajectory(bps, str(d["terminated"]), rate0, _horizon_in(meta.get("t_max")))
    except ArgumentError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ArgumentError(f"malformed trajectory: {exc!r}") from exc


def load_trajectory(path) -> FlowTrajectory:
    d = _read_json(path)
    if not isinstance(d, dict):
        raise ArgumentError("trajectory file must hold a JSON object")
    return trajectory_from_dict(d)


def save_trajectory(traj: FlowTrajectory, prob: ProblemSpec, path) -> None:
    _write_json(trajectory_to_dict(traj, prob), path)
