"""Interior-point solution of the conic subproblems.

The heavy lifting is done by ``cvxopt.solvers.conelp``, a primal-dual
interior-point method with Nesterov-Todd scaling. This module fixes its
options, maps its status to ``optimal`` / ``infeasible`` / ``max_iter`` and
reports KKT residuals computed independently from the returned iterates.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix, solvers

from .wmmse import ConvexProblem

DEFAULT_TOL = 1e-7


@dataclass
class SolveResult:
    status: str
    z: np.ndarray | None
    P: np.ndarray | None
    x: np.ndarray | None
    objective: float
    gap: float
    iterations: int
    kkt: dict = field(default_factory=dict)
    raw_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _m(a: np.ndarray) -> matrix:
    a = np.asarray(a, float)
    if a.ndim == 1:
        a = a[:, None]
    return matrix(np.ascontiguousarray(a), tc="d")


def kkt_residuals(problem: ConvexProblem, z: np.ndarray, s: np.ndarray, lam: np.ndarray,
                  y: np.ndarray) -> dict:
    """Stationarity, primal and dual cone feasibility and complementarity."""
    G, A = problem.G, problem.A
    stat = problem.c + G.T @ lam + (A.T @ y if A.shape[0] else 0.0)
    primal = G @ z + s - problem.h
    pres = float(np.max(np.abs(primal), initial=0.0))
    if A.shape[0]:
        pres = max(pres, float(np.max(np.abs(A @ z - problem.b))))

    def cone_gap(v):
        l = problem.dims["l"]
        worst = float(np.max(-v[:l], initial=0.0))
        o = l
        for q in problem.dims["q"]:
            worst = max(worst, float(np.linalg.norm(v[o + 1:o + q]) - v[o]))
            o += q
        return worst

    scale = 1.0 + float(np.max(np.abs(problem.c)))
    return {
        "stationarity": float(np.max(np.abs(stat))) / scale,
        "primal": pres,
        "primal_cone": cone_gap(s),
        "dual_cone": cone_gap(lam),
        "complementarity": float(abs(s @ lam)),
    }


def solve(problem: ConvexProblem, tol: float = DEFAULT_TOL, max_iter: int = 100,
          initvals: dict | None = None) -> SolveResult:
    """Solve ``problem``; ``tol`` sets the absolute/relative gap and feasibility targets."""
    opts = {"show_progress": False, "abstol": tol, "reltol": tol, "feastol": tol,
            "maxiters": int(max_iter)}
    args = dict(c=_m(problem.c), G=_m(problem.G), h=_m(problem.h),
                dims={"l": problem.dims["l"], "q": list(problem.dims["q"]), "s": []})
    if problem.A.shape[0]:
        args["A"] = _m(problem.A)
        args["b"] = _m(problem.b)
    try:
        sol = solvers.conelp(options=opts, **args)
    except (ValueError, ArithmeticError) as exc:
        return SolveResult("max_iter", None, None, None, np.nan, np.nan, 0, {"error": str(exc)}, "error")

    raw = sol["status"]
    iters = int(sol.get("iterations", 0))
    if raw in ("primal infeasible",):
        return SolveResult("infeasible", None, None, None, np.inf, np.nan, iters, {}, raw)
    if raw == "dual infeasible" or sol["x"] is None:
        return SolveResult("max_iter", None, None, None, np.nan, np.nan, iters, {}, raw)

    z = np.array(sol["x"]).ravel()
    s = np.array(sol["s"]).ravel()
    lam = np.array(sol["z"]).ravel()
    y = np.array(sol["y"]).ravel() if problem.A.shape[0] else np.zeros(0)
    kkt = kkt_residuals(problem, z, s, lam, y)
    gap = float(sol.get("relative gap") or sol.get("gap") or 0.0)
    status = "optimal" if raw == "optimal" else "max_iter"
    P, x, _, _ = problem.unpack(z)
    return SolveResult(status, z, P, x, problem.objective(z), gap, iters, kkt, raw)
