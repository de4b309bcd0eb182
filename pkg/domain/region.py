"""
Spiral Region Module

The state constraint Omega = S u Gamma: a tube of radius 1/b around the spiral
center curve xi_b over |y1| <= a, closed off by two caps of profile P over
a < |y1| <= (2 lambda - 1) a. Every test is done in straightened coordinates
y = phi^{-1}(x).
"""

import logging
from enum import Enum
from typing import Tuple, Union

import numpy as np

from constants import TOLERANCES
from domain.instance import Instance
from exceptions import DomainViolationError
from geometry.goursat import phi_inv

logger = logging.getLogger(__name__)


class RegionTag(Enum):
    """Membership classes of a query point"""
    SPIRAL_S = "SPIRAL_S"
    CAP_GAMMA = "CAP_GAMMA"
    BOUNDARY = "BOUNDARY"
    OUTSIDE = "OUTSIDE"


def _scalar_or_array(value: np.ndarray) -> Union[float, np.ndarray]:
    return float(value) if np.ndim(value) == 0 else value


def _smoothstep(tau: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for tau <= 0, 1 for tau >= 1"""
    tau = np.asarray(tau, dtype=float)
    out = np.where(tau >= 1.0, 1.0, 0.0)
    inner = (tau > 0.0) & (tau < 1.0)
    if np.any(inner):
        t = tau[inner]
        with np.errstate(over="ignore"):
            out[inner] = 1.0 / (1.0 + np.exp(1.0 / t - 1.0 / (1.0 - t)))
    return out


def _bump_values(t: np.ndarray, inst: Instance) -> np.ndarray:
    abs_t = np.abs(np.asarray(t, dtype=float))
    width = 1.0 / inst.b**2 - 1.0 / inst.b**3
    values = _smoothstep((inst.support - abs_t) / width)
    return np.where(abs_t <= inst.plateau, 1.0, np.where(abs_t >= inst.support, 0.0, values))


def bump(t, inst: Instance):
    """
    Smooth bump p: 1 on |t| <= a - 1/b^2, 0 on |t| >= a - 1/b^3

    Raises:
        DomainViolationError: If some |t| > a
    """
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > inst.a):
        raise DomainViolationError(f"bump is defined on [-a, a] = [-{inst.a}, {inst.a}]", float(np.max(np.abs(t))))
    return _scalar_or_array(_bump_values(t, inst))


def spiral_center(t, inst: Instance) -> np.ndarray:
    """
    Spiral center xi_b(t), a vector of length d - 1 (shape (..., d-1) for arrays)

    xi_b = p(t) (0, ..., cos(bt)/b, sin(bt)/b) + (1 - p(t)) (0, ..., cos(ab)/b, sin(ab)/b);
    constant outside the support of p.
    """
    t = np.asarray(t, dtype=float)
    p = _bump_values(t, inst)
    b = inst.b
    end_cos, end_sin = np.cos(inst.a * b) / b, np.sin(inst.a * b) / b
    center = np.zeros(t.shape + (inst.d - 1,))
    center[..., -2] = p * np.cos(b * t) / b + (1.0 - p) * end_cos
    center[..., -1] = p * np.sin(b * t) / b + (1.0 - p) * end_sin
    return center


def cap_center(inst: Instance) -> np.ndarray:
    """The constant center of both caps, xi_b at |t| >= a"""
    return spiral_center(inst.a, inst)


def _cap_profile_values(abs_t: np.ndarray, inst: Instance) -> np.ndarray:
    a, lam, b = inst.a, inst.lam, inst.b
    span = (lam - 1.0) * a
    rise = np.clip((abs_t - a) / span, 0.0, 1.0)
    fall = np.clip((abs_t - lam * a) / span, 0.0, 1.0)
    rising = (1.0 + rise**3 * (10.0 - 15.0 * rise + 6.0 * rise**2)) / b
    falling = (2.0 / b) * np.sqrt(np.maximum(0.0, 1.0 - fall**2))
    return np.where(abs_t <= lam * a, rising, falling)


def cap_profile(t, inst: Instance):
    """
    Cap radius P(|t|) for a <= |t| <= (2 lambda - 1) a

    Quintic rise from 1/b to 2/b on [a, lambda a] (flat at both ends), then a
    quarter-ellipse fall to 0 with vertical tangent at the tip.

    Raises:
        DomainViolationError: Outside the cap range
    """
    abs_t = np.abs(np.asarray(t, dtype=float))
    tol = 1e-15
    if np.any(abs_t < inst.a - tol) or np.any(abs_t > inst.tip + tol):
        raise DomainViolationError(
            f"cap profile is defined for {inst.a} <= |t| <= {inst.tip}", float(np.max(abs_t))
        )
    return _scalar_or_array(_cap_profile_values(np.clip(abs_t, inst.a, inst.tip), inst))


def _region_geometry(x, inst: Instance) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(|y1|, allowed radius, distance to center) in straightened coordinates"""
    y = phi_inv(x)
    abs_y1 = np.abs(y[..., 0])
    center = spiral_center(np.clip(y[..., 0], -inst.a, inst.a), inst)
    dist = np.linalg.norm(y[..., 1:] - center, axis=-1)
    in_cap_range = (abs_y1 > inst.a) & (abs_y1 <= inst.tip)
    radius = np.where(
        abs_y1 <= inst.a,
        1.0 / inst.b,
        np.where(in_cap_range, _cap_profile_values(np.clip(abs_y1, inst.a, inst.tip), inst), 0.0),
    )
    return abs_y1, radius, dist


def boundary_clearance(x, inst: Instance):
    """
    Signed margin to the boundary of Omega: positive inside, negative outside

    Radius minus center distance over the tube and caps; beyond the cap tips
    the axial overshoot is subtracted as well. Unconstrained instances have
    infinite clearance everywhere.
    """
    x = np.asarray(x, dtype=float)
    if not inst.constrained:
        return _scalar_or_array(np.full(x.shape[:-1], np.inf))
    abs_y1, radius, dist = _region_geometry(x, inst)
    clearance = np.where(abs_y1 <= inst.tip, radius - dist, -(abs_y1 - inst.tip) - dist)
    return _scalar_or_array(clearance)


def classify_many(x, inst: Instance) -> np.ndarray:
    """Region tags (as an object array of RegionTag) for a stack of points"""
    x = np.asarray(x, dtype=float)
    y1 = np.abs(phi_inv(x)[..., 0])
    tags = np.empty(x.shape[:-1], dtype=object)
    if not inst.constrained:
        tags[...] = RegionTag.CAP_GAMMA
        tags[y1 <= inst.a] = RegionTag.SPIRAL_S
        return tags

    abs_y1, radius, dist = _region_geometry(x, inst)
    gap = radius - dist
    tol = TOLERANCES["BOUNDARY"]
    inside_range = abs_y1 <= inst.tip
    tags[...] = RegionTag.OUTSIDE
    tags[inside_range & (gap > tol) & (abs_y1 <= inst.a)] = RegionTag.SPIRAL_S
    tags[inside_range & (gap > tol) & (abs_y1 > inst.a)] = RegionTag.CAP_GAMMA
    tags[inside_range & (np.abs(gap) <= tol)] = RegionTag.BOUNDARY
    return tags


def classify(x, inst: Instance) -> RegionTag:
    """Region tag of a single point"""
    tags = classify_many(np.asarray(x, dtype=float).reshape(1, -1), inst)
    return tags[0]


def in_omega(x, inst: Instance, tol: float = 0.0) -> np.ndarray:
    """Closed-domain membership with an optional slack"""
    return np.asarray(boundary_clearance(x, inst)) >= -tol


def target_distance(x, inst: Instance):
    """Euclidean distance from x to the target ball (0 inside the ball)"""
    x = np.asarray(x, dtype=float)
    dist = np.linalg.norm(x - inst.target_center, axis=-1) - inst.radius_target
    return _scalar_or_array(np.maximum(0.0, dist))


def in_target(x, inst: Instance, tol: float = 0.0) -> np.ndarray:
    """
    Membership in X: the ball of radius (lambda - 1) a / 2 around x1, intersected with Omega

    Args:
        x: Point(s)
        inst: Instance
        tol: Slack applied to both the ball radius and the clearance

    Returns:
        Boolean (array)
    """
    x = np.asarray(x, dtype=float)
    in_ball = np.linalg.norm(x - inst.target_center, axis=-1) < inst.radius_target + tol
    result = in_ball & in_omega(x, inst, tol)
    return bool(result) if np.ndim(result) == 0 else result
