"""Command-line front end.

Exit codes: 0 success, 1 a requested certification failed or a scenario
mismatched, 2 input error, 3 computational failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .aiss import FlowTrajectory, evaluate, left_limit, solve
from .errors import ArgumentError, ScenarioLookupError, SolverError
from .io import _read_json, load_problem, load_trajectory, save_trajectory
from .scenarios import build, run_scenario
from .singular import (
    ConditionReport,
    check_dual_singular,
    check_fusion,
    check_oc,
    check_singular,
    check_sub0,
    make_candidate,
)

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_COMPUTE = 0, 1, 2, 3
CHECKS = ("singular", "oc", "sub0", "fusion", "dual-sv")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _support(u: np.ndarray, thresh: float) -> str:
    return "{" + ",".join(str(i + 1) for i in np.flatnonzero(np.abs(u) > thresh)) + "}"


def cmd_solve(problem_path, out_path) -> int:
    try:
        prob = load_problem(problem_path)
    except ArgumentError as exc:
        _err(str(exc))
        return EXIT_INPUT
    try:
        traj = solve(prob)
    except SolverError as exc:
        _err(str(exc))
        return EXIT_COMPUTE
    save_trajectory(traj, prob, out_path)
    print(f"{'k':>3}  {'t':>22}  {'|u|_1':>22}  support")
    for k, b in enumerate(traj.breakpoints, start=1):
        print(f"{k:>3}  {b.t!r:>22}  {float(np.abs(b.u).sum())!r:>22}  {_support(b.u, prob.tol.check)}")
    print(f"terminated: {traj.terminated}")
    return EXIT_OK


def _worst_singular(cands, tol) -> ConditionReport:
    reports = [check_singular(c, tol) for c in cands]
    j = min(range(len(reports)), key=lambda i: reports[i].witness_value)
    r = reports[j]
    return ConditionReport(r.condition, all(x.passed for x in reports), r.witness_index, r.witness_value,
                           r.tolerance_used, detail=f"vector {j + 1}")


def _load_vectors(path, prob):
    d = _read_json(path)
    if not isinstance(d, dict) or "vectors" not in d:
        raise ArgumentError("vectors file needs a 'vectors' array")
    try:
        vecs = [np.array(v, dtype=float) for v in d["vectors"]]
        gammas = None if d.get("gammas") is None else [float(g) for g in d["gammas"]]
        subset = None if d.get("subset") is None else [int(i) for i in d["subset"]]
    except (TypeError, ValueError) as exc:
        raise ArgumentError(f"malformed vectors file: {exc!r}") from exc
    if not vecs:
        raise ArgumentError("no vectors given")
    for v in vecs:
        if v.ndim != 1 or v.size != prob.n:
            raise ArgumentError(f"vector of shape {v.shape} does not match operator {prob.K.shape}")
    return [make_candidate(v, prob.K) for v in vecs], gammas, subset


def _run_check(name: str, prob, cands, gammas, subset) -> ConditionReport:
    tol = prob.tol
    if name == "singular":
        return _worst_singular(cands, tol)
    if name == "oc":
        return check_oc(cands, prob.K, tol)
    if name == "sub0":
        return check_sub0(cands, tol)
    if name == "dual-sv":
        return check_dual_singular(prob.f, prob.K, tol)
    if gammas is None:
        raise ArgumentError("fusion needs 'gammas' in the vectors file")
    # rescale to ||K u|| = 1, carrying the factor into gamma so gamma * u is unchanged
    scales = [float(np.linalg.norm(c.Ku)) for c in cands]
    normed = [make_candidate(c.u / s, prob.K) for c, s in zip(cands, scales)]
    g = [gm * s for gm, s in zip(gammas, scales)]
    return check_fusion(normed, g, subset if subset is not None else range(len(cands)), prob.K, tol)


def cmd_check(problem_path, vectors_path, conditions: Sequence[str]) -> int:
    try:
        unknown = [c for c in conditions if c not in CHECKS]
        if unknown:
            raise ArgumentError(f"unknown condition(s) {unknown}; choose from {list(CHECKS)}")
        prob = load_problem(problem_path)
        cands, gammas, subset = _load_vectors(vectors_path, prob)
        reports = [_run_check(c, prob, cands, gammas, subset) for c in conditions]
    except ArgumentError as exc:
        _err(str(exc))
        return EXIT_INPUT
    print(json.dumps({"reports": [r.to_dict() for r in reports]}, indent=1))
    ok = all(r.passed for c, r in zip(conditions, reports) if c != "sub0")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_scenario(name: str, compare: bool = False) -> int:
    try:
        sc = build(name)
    except ScenarioLookupError as exc:
        _err(str(exc.args[0]))
        return EXIT_INPUT
    try:
        res = run_scenario(sc, compare=compare)
    except SolverError as exc:
        _err(str(exc))
        return EXIT_COMPUTE
    print(f"scenario {name}: {len(res.trajectory)} breakpoints, terminated {res.trajectory.terminated}")
    for k, b in enumerate(res.trajectory.breakpoints, start=1):
        print(f"  t{k} = {b.t!r}  u = {np.array2string(b.u, precision=6, max_line_width=200)}")
    for r in res.reports:
        verdict = "pass" if r.passed else "fail"
        extra = f"  ({r.detail})" if r.detail else ""
        print(f"  {r.condition.value}: {verdict}, witness {r.witness_index} value {r.witness_value!r}{extra}")
    for note in res.notes:
        print(f"  note: {note}")
    if compare:
        for m in res.mismatches:
            print(f"  MISMATCH: {m}")
        print("  compare: " + ("ok" if res.ok else "FAILED"))
        return EXIT_OK if res.ok else EXIT_FAIL
    return EXIT_OK


def export_rows(traj: FlowTrajectory, samples: int) -> list[list[float]]:
    """Rows ``[t, u..., p...]``.

    Each interval ``[a, b]`` contributes its left end plus ``samples - 1``
    interior points ``a + (b - a) j / samples``; every breakpoint appears
    twice, left limit first.  A bounded horizon closes the last interval.
    """
    if samples < 2:
        raise ArgumentError("--samples must be at least 2")

    def row(t, u, p):
        return [float(t)] + [float(x) for x in u] + [float(x) for x in p]

    bounded = math.isfinite(traj.t_max)
    if not traj.breakpoints:
        rows = [row(0.0, np.zeros(traj.n), np.zeros(traj.n))]
        if bounded:
            rows.append(row(traj.t_max, *evaluate(traj, None, traj.t_max)))
        return rows

    def interior(a, b):
        return [row(t, *evaluate(traj, None, t)) for t in (a + (b - a) * j / samples for j in range(1, samples))]

    rows = [row(0.0, np.zeros(traj.n), np.zeros(traj.n))]
    prev = 0.0
    for k, b in enumerate(traj.breakpoints):
        rows += interior(prev, b.t)
        rows.append(row(b.t, *left_limit(traj, k)))
        rows.append(row(b.t, b.u, b.p))
        prev = b.t
    if bounded and traj.t_max > prev:
        rows += interior(prev, traj.t_max)
        rows.append(row(traj.t_max, *evaluate(traj, None, traj.t_max)))
    return rows


def cmd_export(trajectory_path, out_csv, samples: int) -> int:
    try:
        traj = load_trajectory(trajectory_path)
        rows = export_rows(traj, samples)
    except ArgumentError as exc:
        _err(str(exc))
        return EXIT_INPUT
    n = traj.n
    header = ["t"] + [f"coord_{i}" for i in range(1, n + 1)] + [f"p_{i}" for i in range(1, n + 1)]
    with open(out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([repr(x) for x in r] for r in rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="issdecomp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="compute the exact flow for a problem file")
    p.add_argument("problem", type=Path)
    p.add_argument("-o", "--out", type=Path, required=True, help="trajectory JSON to write")

    p = sub.add_parser("check", help="run condition checks on a family of vectors")
    p.add_argument("problem", type=Path)
    p.add_argument("vectors", type=Path)
    p.add_argument("--conditions", default="singular,oc,sub0",
                   help=f"comma-separated subset of {','.join(CHECKS)}")

    p = sub.add_parser("scenario", help="run a named scenario")
    p.add_argument("name")
    p.add_argument("--compare", action="store_true", help="diff against the expected results")

    p = sub.add_parser("export", help="sample a trajectory to CSV")
    p.add_argument("trajectory", type=Path)
    p.add_argument("out_csv", type=Path)
    p.add_argument("--samples", type=int, default=10)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args.problem, args.out)
    if args.command == "check":
        return cmd_check(args.problem, args.vectors, [c.strip() for c in args.conditions.split(",") if c.strip()])
    if args.command == "scenario":
        return cmd_scenario(args.name, args.compare)
    return cmd_export(args.trajectory, args.out_csv, args.samples)
