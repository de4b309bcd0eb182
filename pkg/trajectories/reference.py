"""
Reference Contenders Module

The explicit relaxed minimizer (rest mixtures at the caps, the two-corner
mixture along the axis eta) and the classical profiles used to seed searches.
"""

import logging
from typing import Tuple

import numpy as np

from constants import CORNERS
from domain.instance import Instance
from trajectories.integrators import integrate_young
from trajectories.paths import ControlPath, Curve, YoungPath

logger = logging.getLogger(__name__)

_REST_ATOMS = np.array(CORNERS, dtype=float)
_REST_WEIGHTS = np.full(4, 0.25)
_AXIS_ATOMS = np.array([[1.0, 1.0], [1.0, -1.0]])
_AXIS_WEIGHTS = np.array([0.5, 0.5])


def reference_breakpoints(inst: Instance) -> np.ndarray:
    """[-a_delta, -lambda a, lambda a, a_delta]"""
    return np.array([-inst.a_delta, -inst.lam * inst.a, inst.lam * inst.a, inst.a_delta])


def reference_young_path(inst: Instance) -> YoungPath:
    return YoungPath(
        reference_breakpoints(inst),
        (_REST_ATOMS, _AXIS_ATOMS, _REST_ATOMS),
        (_REST_WEIGHTS, _AXIS_WEIGHTS, _REST_WEIGHTS),
    )


def reference_minimizer(inst: Instance, steps_per_interval: int = 8) -> Tuple[YoungPath, Curve]:
    """
    The relaxed contender of cost 2a

    Rest (mean control 0) on [-a_delta, -lambda a] and [lambda a, a_delta],
    and 1/2 delta_(1,1) + 1/2 delta_(1,-1) in between, so the curve runs along
    eta from x0 to x1 with mean control (1, 0).
    """
    ypath = reference_young_path(inst)
    curve = integrate_young(inst, ypath, inst.x0, steps_per_interval)
    return ypath, curve


def _overlap_fractions(inst: Instance, n_intervals: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform grid on the horizon and the share of each interval inside [-lambda a, lambda a]"""
    breakpoints = np.linspace(-inst.a_delta, inst.a_delta, n_intervals + 1)
    lo, hi = -inst.lam * inst.a, inst.lam * inst.a
    overlap = np.clip(np.minimum(breakpoints[1:], hi) - np.maximum(breakpoints[:-1], lo), 0.0, None)
    return breakpoints, overlap / np.diff(breakpoints)


def axis_path(inst: Instance, n_intervals: int) -> ControlPath:
    """
    Classical motion along eta on a uniform grid: u = (f, 0) with f the overlap fraction

    The path moves x1 from -lambda a to exactly lambda a.
    """
    breakpoints, fractions = _overlap_fractions(inst, n_intervals)
    return ControlPath(breakpoints, np.column_stack((fractions, np.zeros(n_intervals))))


def alternating_corner_path(inst: Instance, n_intervals: int) -> ControlPath:
    """Chattering contender: u = f (1, +-1) alternating on a uniform grid, f the overlap fraction"""
    breakpoints, fractions = _overlap_fractions(inst, n_intervals)
    signs = np.where(np.arange(n_intervals) % 2 == 0, 1.0, -1.0)
    return ControlPath(breakpoints, np.column_stack((fractions, signs * fractions)))
