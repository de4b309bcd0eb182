"""
Problems Module

Problem specifications (density, terminal cost, target mode), the Mayer lift
that moves the running cost into an extra state coordinate, and the
penalized problems that replace the endpoint constraint by alpha * g_eps.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Mapping, Optional

import numpy as np

from constants import TOLERANCES
from costs.functionals import CostBreakdown, cost_breakdown
from costs.lagrangians import (
    Lagrangian,
    LagrangianKind,
    LagrangianLike,
    TerminalCost,
    as_lagrangian,
    lagrangian,
    terminal_penalty,
)
from domain.instance import Instance
from domain.region import boundary_clearance, in_target
from exceptions import AlphaTooSmallError, PreconditionError
from geometry.goursat import controlled_field
from trajectories.paths import Curve, YoungPath

logger = logging.getLogger(__name__)


class TargetMode(Enum):
    """How the endpoint is constrained"""
    POINT = "POINT"
    SET = "SET"
    NONE = "NONE"


@dataclass(frozen=True)
class ProblemSpec:
    """
    An optimal control problem on an instance

    Attributes:
        instance: Instance
        lagrangian: Running-cost density of the base problem
        terminal: Terminal cost g (None for g = 0)
        target_mode: Endpoint constraint: x1 itself, the set X, or none
        lifted: Whether the running cost has been moved into coordinate d+1
    """
    instance: Instance
    lagrangian: Lagrangian
    terminal: Optional[TerminalCost] = None
    target_mode: TargetMode = TargetMode.SET
    lifted: bool = False

    @property
    def base_dim(self) -> int:
        return self.instance.d

    @property
    def state_dim(self) -> int:
        return self.base_dim + 1 if self.lifted else self.base_dim

    def running_density(self, x, u) -> np.ndarray:
        """L of the problem: zero once lifted"""
        if self.lifted:
            return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(u)[:-1]))
        return lagrangian(self.lagrangian, x, u, self.instance)

    def field(self, x, u) -> np.ndarray:
        """Dynamics of the problem; lifted problems append L(pi(x), u)"""
        if not self.lifted:
            return controlled_field(x, u)
        return lifted_field(self, x, u)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lagrangian": self.lagrangian.kind.value,
            "eps": self.lagrangian.eps,
            "terminal": self.terminal.to_dict() if self.terminal is not None else None,
            "target_mode": self.target_mode.value,
            "lifted": self.lifted,
        }


def problem_spec(
    inst: Instance,
    kind: LagrangianLike = LagrangianKind.VEEVEE,
    terminal: Optional[TerminalCost] = None,
    target_mode: TargetMode = TargetMode.SET,
) -> ProblemSpec:
    return ProblemSpec(inst, as_lagrangian(kind, inst), terminal, target_mode)


def spec_from_dict(inst: Instance, data: Mapping[str, Any]) -> ProblemSpec:
    """Decode the `problem` block of an instance document"""
    kind = LagrangianKind(data.get("lagrangian", "VEEVEE"))
    lagr = Lagrangian(kind, float(data.get("eps", 0.0))) if kind is LagrangianKind.MOLLIFIED else Lagrangian(kind)
    lagr.validate(inst)
    terminal = data.get("terminal")
    return ProblemSpec(
        instance=inst,
        lagrangian=lagr,
        terminal=TerminalCost(**terminal) if terminal else None,
        target_mode=TargetMode(data.get("target_mode", "SET")),
        lifted=bool(data.get("lifted", False)),
    )


def mayer_lift(spec: ProblemSpec) -> ProblemSpec:
    """
    Move the running cost into an extra coordinate

    The lifted problem has zero running cost, dynamics (f(pi x, u), L(pi x, u))
    and terminal cost x_{d+1} + g(pi x).

    Raises:
        PreconditionError: If the spec is already lifted
    """
    if spec.lifted:
        raise PreconditionError("problem is already lifted", "mayer_lift")
    return replace(spec, lifted=True)


def lifted_field(spec: ProblemSpec, x, u) -> np.ndarray:
    """(f(pi x, u), L(pi x, u)) for lifted states x of dimension d+1"""
    x = np.asarray(x, dtype=float)
    base = x[..., : spec.base_dim]
    velocity = controlled_field(base, u)
    cost = np.asarray(lagrangian(spec.lagrangian, base, u, spec.instance))
    return np.concatenate((velocity, cost[..., None]), axis=-1)


def contender_cost(spec: ProblemSpec, curve: Curve, ypath: Optional[YoungPath] = None) -> CostBreakdown:
    """Running plus terminal cost of a (classical or Young) contender of the base problem"""
    ypath = ypath if ypath is not None else _measure_of(curve)
    return cost_breakdown(spec.instance, spec.lagrangian, ypath, curve, spec.terminal)


def _measure_of(curve: Curve) -> YoungPath:
    if curve.ypath is not None:
        return curve.ypath
    if curve.path is not None:
        return curve.path.to_young()
    raise PreconditionError("curve carries neither a control nor a Young measure", "contender_cost")


def _support_cuts(x1: float, u1: float, h: float, a: float) -> np.ndarray:
    """Times in (0, h) at which x1 + u1 t crosses +-a"""
    if u1 == 0.0:
        return np.zeros(0)
    cuts = np.sort([(edge - x1) / u1 for edge in (-a, a)])
    margin = 1e-12 * max(h, 1.0)
    return cuts[(cuts > margin) & (cuts < h - margin)]


def _relaxed_lifted_velocity(lifted: ProblemSpec, x: np.ndarray, atoms: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return weights @ lifted_field(lifted, np.broadcast_to(x, (len(weights), len(x))), atoms)


def _lifted_rk4_step(
    lifted: ProblemSpec, x: np.ndarray, atoms: np.ndarray, weights: np.ndarray, h: float, cost_on: float
) -> np.ndarray:
    mask = np.ones(len(x))
    mask[-1] = cost_on
    k1 = mask * _relaxed_lifted_velocity(lifted, x, atoms, weights)
    k2 = mask * _relaxed_lifted_velocity(lifted, x + 0.5 * h * k1, atoms, weights)
    k3 = mask * _relaxed_lifted_velocity(lifted, x + 0.5 * h * k2, atoms, weights)
    k4 = mask * _relaxed_lifted_velocity(lifted, x + h * k3, atoms, weights)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lift_curve(
    spec: ProblemSpec,
    curve: Curve,
    ypath: Optional[YoungPath] = None,
    steps_per_interval: int = 4,
) -> Curve:
    """
    Lifted trajectory: RK4 solution of the relaxed lifted dynamics from (x0, 0)

    The state runs along sum_m w_m (f(pi x, u_m), L(pi x, u_m)) for the Young
    measure of the curve. Control intervals are split where x1 crosses +-a so
    the support indicator is constant on every RK4 piece; the last coordinate
    is frozen on pieces outside the support. Mollified densities are smooth in
    x1 and are stepped without splitting.

    Args:
        spec: The base (unlifted) problem
        curve: Base trajectory; only its start point is used
        ypath: Its Young measure (taken from the curve when omitted)
        steps_per_interval: RK4 steps per piece (>= 1)

    Raises:
        PreconditionError: If the spec is already lifted or the curve carries no controls
    """
    if spec.lifted:
        raise PreconditionError("lift_curve expects the base problem", "lift_curve")
    if steps_per_interval < 1:
        raise ValueError("steps_per_interval must be at least 1")
    ypath = ypath if ypath is not None else _measure_of(curve)
    lifted = mayer_lift(spec)
    inst = spec.instance
    split = not spec.lagrangian.is_mollified

    times = [float(ypath.breakpoints[0])]
    points = [np.concatenate((np.asarray(curve.start, dtype=float), [0.0]))]
    for i, (atoms, weights) in enumerate(zip(ypath.atoms, ypath.weights)):
        t0, t1 = ypath.breakpoints[i], ypath.breakpoints[i + 1]
        u1 = float(weights @ atoms[:, 0])
        x1_start = points[-1][0]
        cuts = _support_cuts(x1_start, u1, t1 - t0, inst.a) if split else np.zeros(0)
        edges = np.concatenate(([0.0], cuts, [t1 - t0]))
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid_x1 = x1_start + u1 * 0.5 * (lo + hi)
            cost_on = 1.0 if (not split or abs(mid_x1) <= inst.a) else 0.0
            h = (hi - lo) / steps_per_interval
            for t in np.linspace(t0 + lo, t0 + hi, steps_per_interval + 1)[1:]:
                points.append(_lifted_rk4_step(lifted, points[-1], atoms, weights, h, cost_on))
                times.append(float(t))
        times[-1] = float(t1)

    points = np.array(points)
    base = points[:, : spec.base_dim]
    return Curve(
        times=np.array(times),
        points=points,
        min_clearance=float(np.min(boundary_clearance(base, inst))),
        endpoint_in_target=bool(in_target(base[-1], inst, TOLERANCES["ENDPOINT"])),
        path=curve.path,
        ypath=ypath,
    )


def lifted_terminal_value(lifted: ProblemSpec, lifted_curve: Curve) -> float:
    """g~(x) = x_{d+1} + g(pi(x)) at the end of a lifted curve"""
    end = lifted_curve.end
    value = float(end[lifted.base_dim])
    if lifted.terminal is not None:
        value += float(terminal_penalty(lifted.terminal, end[: lifted.base_dim], lifted.instance))
    return value


def penalized_spec(
    inst: Instance,
    alpha: float,
    eps: float,
    kind: LagrangianLike = LagrangianKind.VEEVEE,
    nodes_per_axis: int = 5,
) -> ProblemSpec:
    """
    Free-endpoint problem with running cost plus alpha * g_eps(gamma(a_delta))

    Raises:
        AlphaTooSmallError: If alpha <= 2a
    """
    if not alpha > 2.0 * inst.a:
        raise AlphaTooSmallError(f"alpha = {alpha!r} must exceed 2a = {2.0 * inst.a!r}", alpha)
    return ProblemSpec(
        instance=inst,
        lagrangian=as_lagrangian(kind, inst),
        terminal=TerminalCost(float(alpha), float(eps), nodes_per_axis),
        target_mode=TargetMode.NONE,
    )
