"""
Cost Functionals Module

Running plus terminal cost of classical and relaxed trajectories.

Each curve segment is integrated with the exact flow of its (mean) control.
The support indicator chi_[-a,a](x1) is handled by clipping the segment to
the closed-form times where x1 crosses +-a (x1 is affine on a segment), and
the remaining smooth integrand is integrated by Simpson's rule with the
Simpson-trapezoid difference as error estimate.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from costs.lagrangians import (
    LagrangianLike,
    TerminalCost,
    as_lagrangian,
    control_part,
    mollifier_table,
    terminal_penalty,
)
from domain.instance import Instance
from geometry.goursat import flow_from, radial
from trajectories.paths import ControlPath, Curve, YoungPath, segment_control_index

logger = logging.getLogger(__name__)

_CHUNK = 64


@dataclass(frozen=True)
class CostBreakdown:
    """Cost of one contender"""
    running: float
    terminal: float
    error_estimate: float
    segment_values: np.ndarray

    @property
    def total(self) -> float:
        return self.running + self.terminal

    def cumulative(self) -> np.ndarray:
        """Running cost accumulated up to each curve sample"""
        return np.concatenate(([0.0], np.cumsum(self.segment_values)))

    def to_dict(self):
        return {
            "running": self.running,
            "terminal": self.terminal,
            "total": self.total,
            "error_estimate": self.error_estimate,
        }


def _support_window(start_x1: np.ndarray, u1: np.ndarray, h: np.ndarray, a: float) -> Tuple[np.ndarray, np.ndarray]:
    """Sub-interval [lo, hi] of [0, h] on which |start_x1 + u1 t| <= a (hi <= lo when empty)"""
    moving = u1 != 0.0
    safe_u1 = np.where(moving, u1, 1.0)
    t_minus = (-a - start_x1) / safe_u1
    t_plus = (a - start_x1) / safe_u1
    lo_moving = np.maximum(0.0, np.minimum(t_minus, t_plus))
    hi_moving = np.minimum(h, np.maximum(t_minus, t_plus))
    resting_inside = np.abs(start_x1) <= a
    lo = np.where(moving, lo_moving, 0.0)
    hi = np.where(moving, hi_moving, np.where(resting_inside, h, 0.0))
    return lo, hi


def segment_integrals(
    inst: Instance,
    lagr: LagrangianLike,
    x_starts: np.ndarray,
    atoms: np.ndarray,
    atom_weights: np.ndarray,
    durations: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integrate the density over K segments

    Args:
        inst: Instance
        lagr: Density kind
        x_starts: States at segment starts, shape (K, d)
        atoms: Control atoms, shape (K, M, 2)
        atom_weights: Atom weights, shape (K, M); zero weights pad short supports
        durations: Segment lengths, shape (K,)

    Returns:
        (integrals, error_estimates), both shape (K,)
    """
    lagr = as_lagrangian(lagr, inst)
    x_starts = np.asarray(x_starts, dtype=float).reshape(-1, inst.d)
    atoms = np.asarray(atoms, dtype=float)
    atom_weights = np.asarray(atom_weights, dtype=float)
    durations = np.asarray(durations, dtype=float)

    if lagr.is_mollified:
        nodes, node_weights = mollifier_table(inst.d + 2, lagr.nodes_per_axis)
        shift_x = lagr.eps * nodes[:, : inst.d]
        shift_u = lagr.eps * nodes[:, inst.d:]
    else:
        shift_x = np.zeros((1, inst.d))
        shift_u = np.zeros((1, 2))
        node_weights = np.ones(1)

    values = np.zeros(len(durations))
    errors = np.zeros(len(durations))
    for lo_k in range(0, len(durations), _CHUNK):
        sl = slice(lo_k, lo_k + _CHUNK)
        values[sl], errors[sl] = _integrate_chunk(
            inst, lagr, x_starts[sl], atoms[sl], atom_weights[sl], durations[sl], shift_x, shift_u, node_weights
        )
    return values, errors


def _integrate_chunk(inst, lagr, x_starts, atoms, atom_weights, durations, shift_x, shift_u, node_weights):
    mean_u = np.einsum("km,kmc->kc", atom_weights, atoms)
    # control part averaged over the atoms, per (segment, node)
    shifted_atoms = atoms[:, :, None, :] + shift_u[None, None, :, :]
    control = np.einsum("km,kmq->kq", atom_weights, control_part(lagr.base_kind, shifted_atoms))

    start_x1 = x_starts[:, None, 0] + shift_x[None, :, 0]
    u1 = np.broadcast_to(mean_u[:, None, 0], start_x1.shape)
    h = np.broadcast_to(durations[:, None], start_x1.shape)
    lo, hi = _support_window(start_x1, u1, h, inst.a)
    width = np.maximum(hi - lo, 0.0)

    sample_t = np.stack((lo, 0.5 * (lo + hi), hi), axis=-1)
    states = flow_from(x_starts[:, None, None, :], mean_u[:, None, None, :], sample_t)
    states = states + shift_x[None, :, None, :]
    f = control[..., None] + np.asarray(radial(states)) ** 2

    simpson = width / 6.0 * (f[..., 0] + 4.0 * f[..., 1] + f[..., 2])
    trapezoid = width / 2.0 * (f[..., 0] + f[..., 2])
    return simpson @ node_weights, np.abs(simpson - trapezoid) @ node_weights


def cost_breakdown(
    inst: Instance,
    kind: LagrangianLike,
    ypath: YoungPath,
    gamma: Curve,
    tc: Optional[TerminalCost] = None,
) -> CostBreakdown:
    """
    Running cost of (gamma, nu) segment by segment, plus the terminal penalty

    Raises:
        GridMismatchError: If the control breakpoints are not curve samples
    """
    if ypath.n_intervals == 0 or len(gamma.times) < 2:
        segment_values = np.zeros(max(len(gamma.times) - 1, 0))
        error = 0.0
    else:
        index = segment_control_index(ypath.breakpoints, gamma.times)
        atoms, weights = ypath.padded()
        segment_values, errors = segment_integrals(
            inst, kind, gamma.points[:-1], atoms[index], weights[index], np.diff(gamma.times)
        )
        error = float(errors.sum())

    terminal = float(terminal_penalty(tc, gamma.end, inst)) if tc is not None else 0.0
    return CostBreakdown(
        running=float(segment_values.sum()),
        terminal=terminal,
        error_estimate=error,
        segment_values=segment_values,
    )


def classical_cost(
    inst: Instance,
    kind: LagrangianLike,
    path: ControlPath,
    gamma: Curve,
    tc: Optional[TerminalCost] = None,
) -> float:
    """Integral of L(gamma, u) over the horizon, plus alpha * g_eps(gamma(end)) when tc is given"""
    return cost_breakdown(inst, kind, path.to_young(), gamma, tc).total


def relaxed_cost(
    inst: Instance,
    kind: LagrangianLike,
    ypath: YoungPath,
    gamma: Curve,
    tc: Optional[TerminalCost] = None,
) -> float:
    """Integral of the nu_t-average of L along gamma, plus the terminal penalty when tc is given"""
    return cost_breakdown(inst, kind, ypath, gamma, tc).total
