"""
PDHG Module

First-order solver for linear programs in equality form

    min c^T x  subject to  A x = b, x >= 0

by the primal-dual hybrid gradient method with Ruiz equilibration, a
power-iteration step size, primal-weight balancing and adaptive restarts to
the better of the current and averaged iterates. HiGHS (through scipy) is
available as an alternative backend with the same result type.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from exceptions import SolverStallError

logger = logging.getLogger(__name__)

RUIZ_PASSES = 10
POWER_ITERATIONS = 50
CHECK_EVERY = 64
RESTART_FACTOR = 0.2


@dataclass
class LPResult:
    """Primal/dual solution with relative residuals"""
    x: np.ndarray
    y: np.ndarray
    value: float
    dual_value: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    converged: bool
    solver: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "dual_value": self.dual_value,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "gap": self.gap,
            "iterations": self.iterations,
            "converged": self.converged,
            "solver": self.solver,
        }


def kkt_errors(A: sp.csr_matrix, b: np.ndarray, c: np.ndarray, x: np.ndarray, y: np.ndarray):
    """(relative primal residual, relative dual residual, relative gap) of a candidate pair"""
    primal = float(np.linalg.norm(A @ x - b)) / (1.0 + float(np.linalg.norm(b)))
    reduced = c - A.T @ y
    dual = float(np.linalg.norm(np.minimum(reduced, 0.0))) / (1.0 + float(np.linalg.norm(c)))
    p_obj, d_obj = float(c @ x), float(b @ y)
    gap = abs(p_obj - d_obj) / (1.0 + abs(p_obj) + abs(d_obj))
    return primal, dual, gap


def ruiz_scaling(A: sp.csr_matrix, passes: int = RUIZ_PASSES):
    """Row and column factors D_r, D_c making D_r A D_c roughly unit in the max norm"""
    rows = np.ones(A.shape[0])
    cols = np.ones(A.shape[1])
    scaled = A.tocsr(copy=True)
    for _ in range(passes):
        row_max = np.sqrt(np.asarray(abs(scaled).max(axis=1).toarray()).ravel())
        col_max = np.sqrt(np.asarray(abs(scaled).max(axis=0).toarray()).ravel())
        row_max[row_max == 0.0] = 1.0
        col_max[col_max == 0.0] = 1.0
        scaled = sp.diags(1.0 / row_max) @ scaled @ sp.diags(1.0 / col_max)
        rows /= row_max
        cols /= col_max
    return scaled.tocsr(), rows, cols


def operator_norm(A: sp.csr_matrix, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Largest singular value of A by power iteration on A^T A"""
    v = np.random.default_rng(seed).standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iterations):
        w = A.T @ (A @ v)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        sigma = np.sqrt(norm)
    return float(sigma)


def solve_pdhg(
    A,
    b,
    c,
    tol: float = 1e-4,
    max_iterations: int = 200_000,
    stall_iterations: int = 10_000,
) -> LPResult:
    """
    Solve min c^T x s.t. Ax = b, x >= 0

    Raises:
        SolverStallError: If the KKT error has not improved for stall_iterations iterations
    """
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    As, rows, cols = ruiz_scaling(A)
    bs, cs = rows * b, cols * c
    step = 0.9 / max(operator_norm(As), 1e-12)
    b_norm, c_norm = float(np.linalg.norm(bs)), float(np.linalg.norm(cs))
    omega = c_norm / b_norm if b_norm > 0.0 and c_norm > 0.0 else 1.0

    x = np.zeros(A.shape[1])
    y = np.zeros(A.shape[0])
    x_sum, y_sum, n_avg = np.zeros_like(x), np.zeros_like(y), 0
    x_restart, y_restart = x.copy(), y.copy()
    restart_error = np.inf
    best_error, best_iteration = np.inf, 0

    def unscaled_error(xs, ys) -> float:
        return max(kkt_errors(A, b, c, cols * xs, rows * ys))

    iteration = 0
    converged = False
    while iteration < max_iterations:
        tau, sigma = step / omega, step * omega
        x_next = np.maximum(0.0, x - tau * (cs - As.T @ y))
        y = y + sigma * (bs - As @ (2.0 * x_next - x))
        x = x_next
        x_sum += x
        y_sum += y
        n_avg += 1
        iteration += 1

        if iteration % CHECK_EVERY:
            continue
        x_avg, y_avg = x_sum / n_avg, y_sum / n_avg
        err_current = unscaled_error(x, y)
        err_average = unscaled_error(x_avg, y_avg)
        if err_average < err_current:
            candidate, err = (x_avg, y_avg), err_average
        else:
            candidate, err = (x, y), err_current

        if err < best_error * (1.0 - 1e-6):
            best_error, best_iteration = err, iteration
        if err <= tol:
            x, y = candidate
            converged = True
            break
        if iteration - best_iteration >= stall_iterations:
            raise SolverStallError(
                f"no progress since iteration {best_iteration} (KKT error {best_error:.3g})", iteration
            )

        if err <= RESTART_FACTOR * restart_error:
            x, y = candidate[0].copy(), candidate[1].copy()
            dx = float(np.linalg.norm(x - x_restart))
            dy = float(np.linalg.norm(y - y_restart))
            if dx > 1e-10 and dy > 1e-10:
                omega = float(np.exp(0.5 * np.log(dy / dx) + 0.5 * np.log(omega)))
            x_restart, y_restart = x.copy(), y.copy()
            restart_error = err
            x_sum[:], y_sum[:], n_avg = 0.0, 0.0, 0

    if not converged:
        logger.warning(f"PDHG stopped at the iteration limit {max_iterations} (KKT error {best_error:.3g})")
    return _result(A, b, c, cols * x, rows * y, iteration, converged, "pdhg")


def solve_highs(A, b, c, tol: float = 1e-9) -> LPResult:
    """The same LP through scipy's HiGHS interface"""
    A = sp.csr_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0.0, None), method="highs", options={"primal_feasibility_tolerance": tol})
    if res.status != 0:
        raise SolverStallError(f"HiGHS finished with status {res.status}: {res.message}", int(res.nit or 0))
    y = np.asarray(res.eqlin.marginals, dtype=float)
    return _result(A, b, c, np.asarray(res.x), y, int(res.nit or 0), True, "highs")


def _result(A, b, c, x, y, iterations, converged, solver) -> LPResult:
    primal, dual, gap = kkt_errors(A, b, c, x, y)
    return LPResult(
        x=x,
        y=y,
        value=float(c @ x),
        dual_value=float(b @ y),
        primal_residual=primal,
        dual_residual=dual,
        gap=gap,
        iterations=iterations,
        converged=converged,
        solver=solver,
    )


def solve_lp(A, b, c, solver: str = "pdhg", tol: Optional[float] = None, **kwargs) -> LPResult:
    if solver == "pdhg":
        return solve_pdhg(A, b, c, tol=tol or 1e-4, **kwargs)
    if solver == "highs":
        return solve_highs(A, b, c)
    raise ValueError(f"unknown LP solver: {solver}")
