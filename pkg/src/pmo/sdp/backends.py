"""Solver backends behind one ``solve(problem, opts)`` contract.

``builtin`` is the dense interior-point method in :mod:`pmo.sdp.ipm`.
``cvxpy`` hands the canonical form to cvxpy (Clarabel by default) and is only
available when cvxpy is installed. ``PMO_BACKEND`` picks the default.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np
import scipy.linalg as la

from pmo.sdp.ipm import IpmOptions, solve_ipm
from pmo.sdp.problem import (INFEASIBLE, NUMERICAL_TROUBLE, OPTIMAL, UNBOUNDED, SdpProblem,
                             SdpSolution, dual_objective, residuals)


@dataclass
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    backend: str | None = None


def _builtin(problem: SdpProblem, opts: SolveOptions) -> SdpSolution:
    return solve_ipm(problem, IpmOptions(tol=opts.tol, max_iter=opts.max_iter, verbose=opts.verbose))


def _cvxpy(problem: SdpProblem, opts: SolveOptions) -> SdpSolution:
    import cvxpy as cp

    y = cp.Variable(problem.nvars)
    cons = []
    psd = []
    for blk in problem.blocks:
        S = blk.F0 + cp.reshape(blk.F @ y, (blk.size, blk.size), order="C")
        c = 0.5 * (S + S.T) >> 0
        psd.append(c)
        cons.append(c)
    if problem.n_eq:
        cons.append(problem.A @ y == problem.b)
    prob = cp.Problem(cp.Minimize(problem.c @ y + problem.offset), cons)
    solver = os.environ.get("PMO_CVXPY_SOLVER", "CLARABEL")
    kwargs = {}
    if solver == "CLARABEL":
        kwargs = dict(tol_gap_abs=opts.tol * 1e-2, tol_gap_rel=opts.tol * 1e-2,
                      tol_feas=opts.tol * 1e-2, max_iter=opts.max_iter)
    try:
        prob.solve(solver=solver, verbose=opts.verbose, **kwargs)
    except cp.error.SolverError:
        prob.status = "solver_error"
    nan = float("nan")
    if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        status = INFEASIBLE
    elif prob.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        status = UNBOUNDED
    elif y.value is None:
        status = NUMERICAL_TROUBLE
    else:
        status = OPTIMAL
    if y.value is None:
        return SdpSolution(status, np.full(problem.nvars, nan),
                           [np.full((b.size, b.size), nan) for b in problem.blocks],
                           np.full(problem.n_eq, nan), nan, nan, {}, 0, {"backend": "cvxpy"})
    yv = np.asarray(y.value, dtype=float)
    Z = [0.5 * (np.asarray(c.dual_value) + np.asarray(c.dual_value).T) for c in psd]
    if problem.n_eq:
        rhs = problem.c - sum(blk.adjoint(z) for blk, z in zip(problem.blocks, Z))
        lam = la.lstsq(problem.A.T.toarray(), rhs)[0]
    else:
        lam = np.zeros(0)
    res = residuals(problem, yv, Z, lam)
    if status == OPTIMAL and max(res.values()) > opts.tol:
        status = NUMERICAL_TROUBLE
    return SdpSolution(status, yv, Z, lam, problem.objective(yv), dual_objective(problem, Z, lam),
                       res, int(prob.solver_stats.num_iters or 0) if prob.solver_stats else 0,
                       {"backend": "cvxpy", "solver": solver})


BACKENDS: Dict[str, Callable[[SdpProblem, SolveOptions], SdpSolution]] = {
    "builtin": _builtin,
    "cvxpy": _cvxpy,
}


def register_backend(name: str, fn: Callable[[SdpProblem, SolveOptions], SdpSolution]):
    BACKENDS[name] = fn


def get_backend(name: str | None = None):
    name = name or os.environ.get("PMO_BACKEND") or "builtin"
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown SDP backend {name!r}; known: {sorted(BACKENDS)}") from None


def solve(problem: SdpProblem, opts: SolveOptions | None = None) -> SdpSolution:
    opts = opts or SolveOptions()
    return get_backend(opts.backend)(problem, opts)
