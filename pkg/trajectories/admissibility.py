"""
Admissibility Module

Checks of the state constraint and boundary conditions on refined grids, and
exact-flow densification of curves for the topological diagnostics.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from constants import TOLERANCES
from domain.instance import Instance
from domain.region import boundary_clearance, in_target
from geometry.goursat import flow_from
from trajectories.paths import Curve, segment_control_index

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of admissible()"""
    min_clearance: float
    endpoint_in_target: bool
    starts_at_x0: bool
    first_violation_time: Optional[float]
    state_feasible: bool
    admissible: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "min_clearance": self.min_clearance,
            "endpoint_in_target": self.endpoint_in_target,
            "starts_at_x0": self.starts_at_x0,
            "first_violation_time": self.first_violation_time,
            "state_feasible": self.state_feasible,
            "admissible": self.admissible,
        }


def _curve_controls(curve: Curve) -> Optional[np.ndarray]:
    """Control held on each curve segment, or None when no generating control is attached"""
    if curve.path is not None:
        path = curve.path
    elif curve.ypath is not None:
        path = curve.ypath.mean_path()
    else:
        return None
    if path.n_intervals == 0:
        return None
    return path.values[segment_control_index(path.breakpoints, curve.times)]


def refine_curve(curve: Curve, inst: Instance, refine: Optional[int] = None, max_step: Optional[float] = None) -> Curve:
    """
    Insert exact-flow samples inside every segment

    Args:
        curve: Curve with an attached path or ypath
        inst: Instance
        refine: Sub-samples per segment
        max_step: Alternative to refine: largest allowed time step

    Returns:
        The densified curve; curves without a generating control are returned unchanged
    """
    controls = _curve_controls(curve)
    if controls is None or len(curve.times) < 2:
        return curve
    h = np.diff(curve.times)
    if refine is None:
        refine = max(1, int(math.ceil(float(np.max(h)) / max_step))) if max_step else 1
    if refine <= 1:
        return curve

    fractions = np.arange(1, refine + 1) / refine
    offsets = h[:, None] * fractions[None, :]
    sub_points = flow_from(curve.points[:-1, None, :], controls[:, None, :], offsets)
    sub_points[:, -1] = curve.points[1:]
    sub_times = curve.times[:-1, None] + offsets
    sub_times[:, -1] = curve.times[1:]

    times = np.concatenate((curve.times[:1], sub_times.ravel()))
    points = np.vstack((curve.points[:1], sub_points.reshape(-1, curve.dim)))
    return Curve(
        times=times,
        points=points,
        min_clearance=curve.min_clearance,
        endpoint_in_target=curve.endpoint_in_target,
        path=curve.path,
        ypath=curve.ypath,
    )


def admissible(curve: Curve, inst: Instance, refine: int = 8, require_target: bool = True) -> AdmissibilityReport:
    """
    Check gamma(t) in closure(Omega), gamma(-a_delta) = x0 and gamma(a_delta) in X

    The clearance is evaluated on the curve refined by the exact flow of its control.
    """
    dense = refine_curve(curve, inst, refine=refine)
    clearance = np.asarray(boundary_clearance(dense.points, inst))
    tol = TOLERANCES["CLEARANCE"]
    violating = np.flatnonzero(clearance < -tol)
    first_violation = float(dense.times[violating[0]]) if violating.size else None

    state_feasible = violating.size == 0
    endpoint_ok = bool(in_target(curve.end, inst, TOLERANCES["ENDPOINT"]))
    starts_ok = bool(np.linalg.norm(curve.start - inst.x0) <= 1e-9)
    report = AdmissibilityReport(
        min_clearance=float(np.min(clearance)),
        endpoint_in_target=endpoint_ok,
        starts_at_x0=starts_ok,
        first_violation_time=first_violation,
        state_feasible=state_feasible,
        admissible=state_feasible and starts_ok and (endpoint_ok or not require_target),
    )
    if first_violation is not None:
        logger.debug(f"State constraint violated first at t={first_violation:.6g}")
    return report
