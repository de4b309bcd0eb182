"""
Winding Module

Winding integrals of planar curves, the shifted ring curve of a trajectory and
the winding lower bound ab - 2pi over a crossing of x1 from -a to a.

Windings accumulate per-segment angle increments, the imaginary part of
log(z_{k+1}/z_k) for the complex samples z_k; this is exact for polygons.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np

from constants import TOLERANCES
from domain.instance import Instance
from domain.region import spiral_center
from exceptions import NoCrossingError, OriginHitError
from geometry.goursat import phi_inv
from trajectories.admissibility import refine_curve
from trajectories.paths import Curve

logger = logging.getLogger(__name__)

# slack on ab - 2pi accepted by the pass flag
WINDING_SLACK = 0.1


@dataclass(frozen=True)
class PlanarCurve:
    """Sampled planar curve (the projection onto the last two coordinates)"""
    times: np.ndarray
    points: np.ndarray

    def as_complex(self) -> np.ndarray:
        return self.points[:, 0] + 1j * self.points[:, 1]

    def reversed(self) -> "PlanarCurve":
        return PlanarCurve(-self.times[::-1], self.points[::-1])


def winding_integral(pc: PlanarCurve) -> float:
    """
    Total signed angle swept around the origin, in radians

    Raises:
        OriginHitError: If a sample lies within 1e-12 of the origin
    """
    z = pc.as_complex()
    near = np.flatnonzero(np.abs(z) < TOLERANCES["ORIGIN"])
    if near.size:
        raise OriginHitError(f"sample {near[0]} lies at the origin", int(near[0]))
    if len(z) < 2:
        return 0.0
    return float(np.sum(np.angle(z[1:] / z[:-1])))


def ring_max_step(inst: Instance) -> float:
    """Time step below which the ring curve turns by well under pi per sample"""
    return 1.0 / (8.0 * inst.b * inst.control_set.half_width)


def ring_lift(curve: Curve, inst: Instance, dense: bool = True) -> PlanarCurve:
    """
    The shifted planar curve tau(phi^{-1}(gamma) + (0, xi_b(gamma_1)))

    Curves carrying their control are first densified with the exact flow so
    that consecutive samples turn by much less than pi.
    """
    if dense:
        curve = refine_curve(curve, inst, max_step=ring_max_step(inst))
    y = phi_inv(curve.points)
    center = spiral_center(y[:, 0], inst)
    return PlanarCurve(curve.times, y[:, -2:] + center[:, -2:])


def crossing_interval(curve: Curve, inst: Instance) -> Tuple[int, int, float, float]:
    """
    First passage of gamma_1 from -a to a

    Returns:
        (i0, i1, t0, t1): i1 is the first sample with gamma_1 >= a, i0 the last
        sample before it with gamma_1 <= -a; t0 and t1 are the interpolated
        crossing times of -a and a

    Raises:
        NoCrossingError: If gamma_1 never spans [-a, a]
    """
    x1 = curve.points[:, 0]
    below = np.flatnonzero(x1 <= -inst.a)
    if below.size:
        above = np.flatnonzero(x1 >= inst.a)
        above = above[above > below[0]]
        if above.size:
            i1 = int(above[0])
            i0 = int(below[below < i1][-1])
            t0 = _interpolate_time(curve, i0, -inst.a)
            t1 = _interpolate_time(curve, i1 - 1, inst.a)
            return i0, i1, t0, t1
    raise NoCrossingError(f"gamma_1 never runs from {-inst.a} to {inst.a}")


def _interpolate_time(curve: Curve, i: int, level: float) -> float:
    """Time in [t_i, t_{i+1}] where the linear interpolant of gamma_1 reaches level"""
    x_lo, x_hi = curve.points[i, 0], curve.points[i + 1, 0]
    if x_hi == x_lo:
        return float(curve.times[i])
    frac = float(np.clip((level - x_lo) / (x_hi - x_lo), 0.0, 1.0))
    return float(curve.times[i] + frac * (curve.times[i + 1] - curve.times[i]))


def restrict(curve: Curve, t0: float, t1: float) -> Curve:
    """Samples of the curve on [t0, t1] with linearly interpolated end samples"""
    inner = (curve.times > t0) & (curve.times < t1)
    ends = np.array([t0, t1])
    end_points = np.column_stack([np.interp(ends, curve.times, curve.points[:, k]) for k in range(curve.dim)])
    return Curve(
        times=np.concatenate(([t0], curve.times[inner], [t1])),
        points=np.vstack((end_points[:1], curve.points[inner], end_points[1:])),
    )


def crossing_curve(curve: Curve, inst: Instance) -> Curve:
    """Densified curve restricted to its crossing interval"""
    dense = refine_curve(curve, inst, max_step=ring_max_step(inst))
    _, _, t0, t1 = crossing_interval(dense, inst)
    return restrict(dense, t0, t1)


@dataclass(frozen=True)
class WindingCheck:
    """Winding of the ring curve over the crossing interval against ab - 2pi"""
    winding: float
    bound: float
    passed: bool
    interval: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "winding": self.winding,
            "bound": self.bound,
            "pass": self.passed,
            "interval": list(self.interval),
        }


def winding_bound_check(curve: Curve, inst: Instance, slack: float = WINDING_SLACK) -> WindingCheck:
    """
    Compare the ring winding over the crossing interval with ab - 2pi

    Raises:
        NoCrossingError: If the curve never crosses [-a, a]
    """
    piece = crossing_curve(curve, inst)
    winding = winding_integral(ring_lift(piece, inst, dense=False))
    bound = inst.a * inst.b - 2.0 * math.pi
    logger.debug(f"Ring winding {winding:.6f} against bound {bound:.6f}")
    return WindingCheck(
        winding=winding,
        bound=bound,
        passed=bool(winding >= bound - slack),
        interval=(float(piece.times[0]), float(piece.times[-1])),
    )
