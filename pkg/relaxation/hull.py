"""
Velocity Hull Module

Membership of a (lifted) velocity in the convex hull of the admissible
velocities at a point, with a finite decomposition certificate, and the
convexified running cost obtained from the same linear program.

The base velocity fixes the mean control (f_1 and f_2 are independent), so
both questions reduce to small linear programs over a control grid.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy.optimize import linprog

from constants import TOLERANCES
from costs.lagrangians import lagrangian
from geometry.goursat import vector_field
from relaxation.problems import ProblemSpec, lifted_field

logger = logging.getLogger(__name__)

GRID_PER_AXIS = 41
_WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class HullCertificate:
    """Atoms u_i and weights w_i with sum_i w_i f~(x, u_i) = v"""
    atoms: np.ndarray
    weights: np.ndarray
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist(), "residual": self.residual}


def _mean_control(x: np.ndarray, v_base: np.ndarray):
    frame = np.column_stack((vector_field(1, x), vector_field(2, x)))
    mean, *_ = np.linalg.lstsq(frame, v_base, rcond=None)
    return mean, float(np.linalg.norm(frame @ mean - v_base))


def _control_atoms(spec: ProblemSpec) -> np.ndarray:
    return spec.instance.control_set.atom_grid(GRID_PER_AXIS)


def velocity_hull_membership(spec: ProblemSpec, x, v) -> Optional[HullCertificate]:
    """
    Decompose v over admissible velocities at x

    Args:
        spec: Problem; when lifted, v carries the running-cost rate as last entry
        x: Base point (d,)
        v: Velocity (d,) or (d+1,) for lifted problems

    Returns:
        A certificate with at most d+2 atoms, or None when v is not in the hull within 1e-9
    """
    x = np.asarray(x, dtype=float)[: spec.base_dim]
    v = np.asarray(v, dtype=float)
    tol = TOLERANCES["HULL_RESIDUAL"]
    mean, miss = _mean_control(x, v[: spec.base_dim])
    if miss > tol:
        return None

    atoms = _control_atoms(spec)
    rows = [atoms[:, 0], atoms[:, 1], np.ones(len(atoms))]
    rhs = [mean[0], mean[1], 1.0]
    if spec.lifted:
        states = np.broadcast_to(x, (len(atoms), len(x)))
        rows.append(np.asarray(lagrangian(spec.lagrangian, states, atoms, spec.instance)))
        rhs.append(v[spec.base_dim])
    result = linprog(
        np.zeros(len(atoms)),
        A_eq=np.array(rows),
        b_eq=np.array(rhs),
        bounds=(0.0, None),
        method="highs-ds",
    )
    if result.status != 0:
        return None

    keep = result.x > _WEIGHT_FLOOR
    weights = result.x[keep] / result.x[keep].sum()
    chosen = atoms[keep]
    velocities = lifted_field(spec, x, chosen) if spec.lifted else _base_velocities(x, chosen)
    residual = float(np.linalg.norm(weights @ velocities - v))
    if residual > tol:
        logger.debug(f"Hull decomposition rejected, residual {residual:.3g}")
        return None
    return HullCertificate(atoms=chosen, weights=weights, residual=residual)


def _base_velocities(x: np.ndarray, atoms: np.ndarray) -> np.ndarray:
    return atoms[:, :1] * vector_field(1, x) + atoms[:, 1:2] * vector_field(2, x)


def convexified_lagrangian(spec: ProblemSpec, x, v) -> float:
    """
    Smallest cost rate over the hull with base velocity v

    min sum_i w_i L(x, u_i) subject to sum_i w_i f(x, u_i) = v; +inf if v is not reachable.
    """
    x = np.asarray(x, dtype=float)[: spec.base_dim]
    mean, miss = _mean_control(x, np.asarray(v, dtype=float)[: spec.base_dim])
    if miss > TOLERANCES["HULL_RESIDUAL"]:
        return float("inf")
    atoms = _control_atoms(spec)
    costs = np.asarray(lagrangian(spec.lagrangian, np.broadcast_to(x, (len(atoms), len(x))), atoms, spec.instance))
    result = linprog(
        costs,
        A_eq=np.array([atoms[:, 0], atoms[:, 1], np.ones(len(atoms))]),
        b_eq=np.array([mean[0], mean[1], 1.0]),
        bounds=(0.0, None),
        method="highs-ds",
    )
    return float(result.fun) if result.status == 0 else float("inf")
