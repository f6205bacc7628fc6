"""Thin LP contract over scipy's HiGHS interface.

Problems are always posed as minimization with finite variable bounds.
Every returned optimum is re-checked against the constraint rows, so a
solution the backend considers optimal but that violates a row by more than
the feasibility tolerance is reported as ``numerical`` rather than used.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

LP_FEAS_TOL = 1e-7


@dataclass
class LinearProgram:
    """``min c @ x`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lo <= x <= hi``."""

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    constant: float = 0.0
    columns: tuple = ()

    @property
    def n(self) -> int:
        return len(self.c)

    def violation(self, x: np.ndarray) -> float:
        worst = 0.0
        if len(self.b_ub):
            worst = max(worst, float(np.max(self.A_ub @ x - self.b_ub)))
        if len(self.b_eq):
            worst = max(worst, float(np.max(np.abs(self.A_eq @ x - self.b_eq))))
        worst = max(worst, float(np.max(self.lo - x, initial=0.0)),
                    float(np.max(x - self.hi, initial=0.0)))
        return worst


@dataclass
class LPResult:
    status: str
    value: float
    x: np.ndarray | None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def lp_solve(lp: LinearProgram, tol: float = LP_FEAS_TOL) -> LPResult:
    if not (np.all(np.isfinite(lp.lo)) and np.all(np.isfinite(lp.hi))):
        raise ValueError("lp_solve needs finite bounds on every variable")
    if np.any(lp.lo > lp.hi + 1e-12):
        return LPResult("infeasible", np.inf, None, "empty variable bounds")
    hi = np.maximum(lp.hi, lp.lo)
    res = linprog(
        lp.c,
        A_ub=lp.A_ub if len(lp.b_ub) else None,
        b_ub=lp.b_ub if len(lp.b_ub) else None,
        A_eq=lp.A_eq if len(lp.b_eq) else None,
        b_eq=lp.b_eq if len(lp.b_eq) else None,
        bounds=np.column_stack([lp.lo, hi]),
        method="highs",
    )
    if res.status == 2:
        return LPResult("infeasible", np.inf, None, res.message)
    if res.status == 3:
        return LPResult("unbounded", -np.inf, None, res.message)
    if res.status != 0 or res.x is None:
        return LPResult("numerical", np.nan, None, res.message)
    x = np.clip(res.x, lp.lo, hi)
    scale = 1.0 + max(float(np.max(np.abs(lp.b_ub), initial=0.0)),
                      float(np.max(np.abs(lp.b_eq), initial=0.0)))
    if lp.violation(x) > tol * scale:
        return LPResult("numerical", float(res.fun) + lp.constant, x,
                        f"solution violates rows by {lp.violation(x):.3g}")
    return LPResult("optimal", float(lp.c @ x) + lp.constant, x)
