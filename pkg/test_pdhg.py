#!/usr/bin/env python3
"""
LP Solver Tests - PDHG, HiGHS backend, scaling and KKT residuals
"""

import numpy as np
import pytest
import scipy.sparse as sp

from exceptions import SolverStallError
from optimize.pdhg import kkt_errors, operator_norm, ruiz_scaling, solve_highs, solve_lp, solve_pdhg

# min x1 + 2 x2  s.t.  x1 + x2 = 1, x >= 0
A = sp.csr_matrix(np.array([[1.0, 1.0]]))
b = np.array([1.0])
c = np.array([1.0, 2.0])


@pytest.mark.parametrize("solver", ["pdhg", "highs"])
def test_small_lp(solver):
    result = solve_lp(A, b, c, solver, tol=1e-8) if solver == "pdhg" else solve_lp(A, b, c, solver)
    assert result.converged
    assert result.value == pytest.approx(1.0, abs=1e-6)
    assert np.allclose(result.x, [1.0, 0.0], atol=1e-5)
    assert result.solver == solver


def test_kkt_errors_vanish_at_the_optimum():
    primal, dual, gap = kkt_errors(A, b, c, np.array([1.0, 0.0]), np.array([1.0]))
    assert primal == 0.0
    assert dual == 0.0
    assert gap == 0.0


def test_kkt_errors_flag_infeasible_points():
    primal, _, _ = kkt_errors(A, b, c, np.array([2.0, 0.0]), np.array([1.0]))
    assert primal == pytest.approx(0.5)


def test_ruiz_scaling_equilibrates():
    M = sp.csr_matrix(np.array([[100.0, 1.0], [0.0, 0.01]]))
    scaled, rows, cols = ruiz_scaling(M)
    assert np.allclose(scaled.toarray(), np.diag(rows) @ M.toarray() @ np.diag(cols))
    assert np.max(np.abs(scaled.toarray())) == pytest.approx(1.0, abs=1e-2)


def test_operator_norm():
    assert operator_norm(sp.csr_matrix(np.diag([3.0, 1.0]))) == pytest.approx(3.0, rel=1e-6)
    assert operator_norm(sp.csr_matrix((2, 2))) == 0.0


def test_unknown_solver():
    with pytest.raises(ValueError):
        solve_lp(A, b, c, "simplex")


def test_highs_reports_infeasibility():
    # x1 + x2 = -1 has no nonnegative solution
    with pytest.raises(SolverStallError):
        solve_highs(A, np.array([-1.0]), c)


def test_pdhg_result_document():
    result = solve_pdhg(A, b, c, tol=1e-6)
    document = result.to_dict()
    assert document["solver"] == "pdhg"
    assert document["iterations"] == result.iterations > 0
    assert document["primal_residual"] <= 1e-6
