"""
Thin builder around the HiGHS solvers shipped with scipy.

Problems are assembled row by row, then solved with ``linprog`` when every
variable is continuous or with ``milp`` when some are integral.
"""

import logging
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "failed"

_STATUS = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}


class LpResult(NamedTuple):
    status: str
    x: Optional[np.ndarray]
    objective: Optional[float]

    @property
    def feasible(self) -> bool:
        return self.status == OPTIMAL


class LinearProblem:
    """
    Minimize c.x subject to linear rows, variable bounds and integrality.

    Example:
        problem = LinearProblem(2)
        problem.add_le([1, 1], 4)
        problem.set_objective([-1, -2])
        result = problem.solve()
    """

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self.objective = np.zeros(n_vars)
        self.lower = np.full(n_vars, -np.inf)
        self.upper = np.full(n_vars, np.inf)
        self.integrality = np.zeros(n_vars, dtype=int)
        self._ub_rows: List[np.ndarray] = []
        self._ub_rhs: List[float] = []
        self._eq_rows: List[np.ndarray] = []
        self._eq_rhs: List[float] = []

    def set_objective(self, coefficients: Sequence[float]) -> None:
        self.objective = np.asarray(coefficients, dtype=float)

    def set_bounds(self, index: int, lower: float, upper: float) -> None:
        self.lower[index] = lower
        self.upper[index] = upper

    def set_binary(self, index: int) -> None:
        self.set_bounds(index, 0.0, 1.0)
        self.integrality[index] = 1

    def add_le(self, row: Sequence[float], rhs: float) -> None:
        self._ub_rows.append(np.asarray(row, dtype=float))
        self._ub_rhs.append(float(rhs))

    def add_ge(self, row: Sequence[float], rhs: float) -> None:
        self.add_le(-np.asarray(row, dtype=float), -rhs)

    def add_eq(self, row: Sequence[float], rhs: float) -> None:
        self._eq_rows.append(np.asarray(row, dtype=float))
        self._eq_rhs.append(float(rhs))

    def add_abs_le(self, rows: np.ndarray, constant: np.ndarray, limit: np.ndarray) -> None:
        """Add |rows @ x + constant| <= limit for a block of rows."""
        rows = np.atleast_2d(rows)
        for row, c0, bound in zip(rows, np.atleast_1d(constant), np.atleast_1d(limit)):
            self.add_le(row, bound - c0)
            self.add_le(-row, bound + c0)

    def copy(self) -> "LinearProblem":
        clone = LinearProblem(self.n_vars)
        clone.objective = self.objective.copy()
        clone.lower = self.lower.copy()
        clone.upper = self.upper.copy()
        clone.integrality = self.integrality.copy()
        clone._ub_rows = list(self._ub_rows)
        clone._ub_rhs = list(self._ub_rhs)
        clone._eq_rows = list(self._eq_rows)
        clone._eq_rhs = list(self._eq_rhs)
        return clone

    def _matrices(self):
        a_ub = np.vstack(self._ub_rows) if self._ub_rows else None
        b_ub = np.array(self._ub_rhs) if self._ub_rows else None
        a_eq = np.vstack(self._eq_rows) if self._eq_rows else None
        b_eq = np.array(self._eq_rhs) if self._eq_rows else None
        return a_ub, b_ub, a_eq, b_eq

    def solve(self) -> LpResult:
        """Solve with HiGHS; integral variables switch to the MILP solver."""
        if self.integrality.any():
            return self._solve_milp()

        a_ub, b_ub, a_eq, b_eq = self._matrices()
        bounds = [
            (None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
            for lo, hi in zip(self.lower, self.upper)
        ]
        result = linprog(
            self.objective, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq,
            bounds=bounds, method="highs",
        )
        return self._wrap(result.status, result.x, result.fun)

    def _solve_milp(self) -> LpResult:
        a_ub, b_ub, a_eq, b_eq = self._matrices()
        constraints = []
        if a_ub is not None:
            constraints.append(LinearConstraint(a_ub, -np.inf, b_ub))
        if a_eq is not None:
            constraints.append(LinearConstraint(a_eq, b_eq, b_eq))

        result = milp(
            self.objective,
            constraints=constraints,
            integrality=self.integrality,
            bounds=Bounds(self.lower, self.upper),
        )
        return self._wrap(result.status, result.x, result.fun)

    def _wrap(self, status: int, x, fun) -> LpResult:
        label = _STATUS.get(status, FAILED)
        if label == FAILED:
            logger.warning("HiGHS stopped with status %s", status)
        if label != OPTIMAL:
            return LpResult(label, None, None)
        return LpResult(label, np.asarray(x, dtype=float), float(fun))
