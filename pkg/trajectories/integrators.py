"""
Integrators Module

Fixed-step RK4 integration of the controlled field for classical and Young
controls, and the closed-form chained flow used as oracle and as the fast
propagator of the optimizers.
"""

import logging
from typing import Tuple

import numpy as np

from constants import TOLERANCES
from domain.instance import Instance
from domain.region import boundary_clearance, in_target
from geometry.goursat import chained_states, controlled_field
from trajectories.paths import ControlPath, Curve, YoungPath

logger = logging.getLogger(__name__)


def _refined_grid(path: ControlPath, steps_per_interval: int) -> Tuple[np.ndarray, np.ndarray]:
    """Sample times with every breakpoint included exactly, and the interval index of each step"""
    if path.n_intervals == 0:
        return path.breakpoints.copy(), np.zeros(0, dtype=int)
    pieces = [
        np.linspace(path.breakpoints[i], path.breakpoints[i + 1], steps_per_interval + 1)[:-1]
        for i in range(path.n_intervals)
    ]
    times = np.concatenate(pieces + [path.breakpoints[-1:]])
    owner = np.repeat(np.arange(path.n_intervals), steps_per_interval)
    return times, owner


def _finish_curve(inst: Instance, times, points, path=None, ypath=None) -> Curve:
    clearance = np.asarray(boundary_clearance(points, inst))
    return Curve(
        times=times,
        points=points,
        min_clearance=float(np.min(clearance)),
        endpoint_in_target=bool(in_target(points[-1], inst, TOLERANCES["ENDPOINT"])),
        path=path,
        ypath=ypath,
    )


def rk4_step(x: np.ndarray, u: np.ndarray, h: float) -> np.ndarray:
    """One classical Runge-Kutta step of x' = u1 f1(x) + u2 f2(x)"""
    k1 = controlled_field(x, u)
    k2 = controlled_field(x + 0.5 * h * k1, u)
    k3 = controlled_field(x + 0.5 * h * k2, u)
    k4 = controlled_field(x + h * k3, u)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_horizontal(inst: Instance, path: ControlPath, x0, steps_per_interval: int = 8) -> Curve:
    """
    Integrate gamma' = f(gamma, u) with RK4

    Args:
        inst: Instance
        path: Piecewise-constant control
        x0: Initial state
        steps_per_interval: Uniform RK4 steps per control interval (>= 1)

    Returns:
        Curve sampled at every RK4 node, breakpoints included
    """
    if steps_per_interval < 1:
        raise ValueError("steps_per_interval must be at least 1")
    times, owner = _refined_grid(path, steps_per_interval)
    points = np.empty((len(times), inst.d))
    points[0] = np.asarray(x0, dtype=float)
    for n, i in enumerate(owner):
        points[n + 1] = rk4_step(points[n], path.values[i], times[n + 1] - times[n])
    return _finish_curve(inst, times, points, path=path)


def integrate_young(inst: Instance, ypath: YoungPath, x0, steps_per_interval: int = 8) -> Curve:
    """
    Integrate gamma' = sum_m w_m f(gamma, u_m)

    The field is affine in u, so this is the classical flow of the mean control.
    """
    curve = integrate_horizontal(inst, ypath.mean_path(), x0, steps_per_interval)
    return Curve(
        times=curve.times,
        points=curve.points,
        min_clearance=curve.min_clearance,
        endpoint_in_target=curve.endpoint_in_target,
        path=None,
        ypath=ypath,
    )


def chained_flow(inst: Instance, path: ControlPath, x0, substeps: int = 1) -> Curve:
    """Exact states of the chained system on a grid with substeps samples per interval"""
    times, owner = _refined_grid(path, max(int(substeps), 1))
    points = chained_states(x0, path.values[owner], np.diff(times))
    return _finish_curve(inst, times, points, path=path)


def young_chained_flow(inst: Instance, ypath: YoungPath, x0, substeps: int = 1) -> Curve:
    """Exact relaxed trajectory (mean-control flow) with the Young path attached"""
    curve = chained_flow(inst, ypath.mean_path(), x0, substeps)
    return Curve(
        times=curve.times,
        points=curve.points,
        min_clearance=curve.min_clearance,
        endpoint_in_target=curve.endpoint_in_target,
        ypath=ypath,
    )
