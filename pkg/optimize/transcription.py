"""
Direct Transcription Module

Finite-dimensional surrogate of the classical problem: N piecewise-constant
controls on a uniform grid of [-a_delta, a_delta], propagated with the exact
chained flow, scored by the quadrature cost plus penalties on the state
constraint and the endpoint, and minimized by compass search with penalty
continuation.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from constants import PENALTY_SCHEDULE, TOLERANCES
from costs.functionals import segment_integrals
from costs.lagrangians import Lagrangian, terminal_penalty
from domain.instance import ControlSetKind, Instance
from domain.region import boundary_clearance, in_target, target_distance
from exceptions import FeasibilityError, PreconditionError
from geometry.goursat import chained_states
from relaxation.problems import ProblemSpec, TargetMode, problem_spec
from trajectories.paths import ControlPath

logger = logging.getLogger(__name__)

MIN_INTERVALS = 10


@dataclass(frozen=True)
class Evaluation:
    """Objective value of one decision vector and its feasibility data"""
    objective: float
    cost: float
    min_clearance: float
    endpoint_error: float
    feasible: bool


@dataclass
class TranscribedProblem:
    """
    Attributes:
        instance: Instance
        N: Number of control intervals (>= 10)
        spec: Problem; defaults to the VEEVEE problem with endpoint in X
        penalty_schedule: Penalty weights applied in turn
        seed: Seed of the coordinate order
        max_evaluations: Objective evaluations per search, split across the schedule
        substeps: Exact-flow samples per interval for the clearance penalty
        initial_step: First compass step
        min_step: The search stops once the step falls below this
        frozen: Boolean mask (N, 2) of controls the search may not move
    """
    instance: Instance
    N: int = 200
    spec: Optional[ProblemSpec] = None
    penalty_schedule: Sequence[float] = PENALTY_SCHEDULE
    seed: int = 0
    max_evaluations: int = 4000
    substeps: int = 4
    initial_step: float = 0.5
    min_step: float = 1e-3
    frozen: Optional[np.ndarray] = None
    breakpoints: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.N < MIN_INTERVALS:
            raise PreconditionError(f"N must be at least {MIN_INTERVALS}", "TranscribedProblem")
        if self.spec is None:
            self.spec = problem_spec(self.instance)
        if self.frozen is None:
            self.frozen = np.zeros((self.N, 2), dtype=bool)
        else:
            self.frozen = np.broadcast_to(np.asarray(self.frozen, dtype=bool).reshape(self.N, -1), (self.N, 2))
        self.breakpoints = np.linspace(-self.instance.a_delta, self.instance.a_delta, self.N + 1)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def search_lagrangian(self) -> Lagrangian:
        """Mollified densities are searched with their base density and re-scored afterwards"""
        lagr = self.spec.lagrangian
        return Lagrangian(lagr.base_kind) if lagr.is_mollified else lagr

    def clamp(self, controls) -> np.ndarray:
        return self.instance.control_set.project(np.asarray(controls, dtype=float).reshape(self.N, 2))

    def to_path(self, controls) -> ControlPath:
        return ControlPath(self.breakpoints, self.clamp(controls))

    def states(self, controls: np.ndarray) -> np.ndarray:
        """Exact states on the grid with `substeps` samples per interval"""
        s = max(int(self.substeps), 1)
        return chained_states(
            self.instance.x0,
            np.repeat(controls, s, axis=0),
            np.repeat(self.durations / s, s),
        )

    def _endpoint_error(self, end: np.ndarray) -> float:
        inst = self.instance
        if self.spec.target_mode is TargetMode.SET:
            return float(target_distance(end, inst))
        if self.spec.target_mode is TargetMode.POINT:
            return float(np.linalg.norm(end - inst.x1))
        return 0.0

    def _endpoint_ok(self, end: np.ndarray) -> bool:
        tol = TOLERANCES["ENDPOINT"]
        if self.spec.target_mode is TargetMode.SET:
            return bool(in_target(end, self.instance, tol))
        if self.spec.target_mode is TargetMode.POINT:
            return bool(np.linalg.norm(end - self.instance.x1) <= tol)
        return True

    def evaluate(self, controls: np.ndarray, weight: float) -> Evaluation:
        inst = self.instance
        states = self.states(controls)
        starts = states[:: max(int(self.substeps), 1)][:-1]
        running, _ = segment_integrals(
            inst,
            self.search_lagrangian,
            starts,
            controls[:, None, :],
            np.ones((self.N, 1)),
            self.durations,
        )
        cost = float(running.sum())
        end = states[-1]
        if self.spec.target_mode is TargetMode.NONE and self.spec.terminal is not None:
            cost += float(terminal_penalty(self.spec.terminal, end, inst))

        clearance = np.asarray(boundary_clearance(states, inst))
        min_clearance = float(np.min(clearance))
        clearance_penalty = float(np.mean(np.maximum(0.0, -inst.b * clearance) ** 2))
        endpoint_error = self._endpoint_error(end)
        endpoint_penalty = (endpoint_error / inst.radius_target) ** 2

        feasible = min_clearance >= -TOLERANCES["CLEARANCE"] and self._endpoint_ok(end)
        return Evaluation(
            objective=cost + weight * (clearance_penalty + endpoint_penalty),
            cost=cost,
            min_clearance=min_clearance,
            endpoint_error=endpoint_error,
            feasible=feasible,
        )


def _moves(tp: TranscribedProblem, value: float, step: float) -> Tuple[float, ...]:
    if tp.instance.control_set.kind is ControlSetKind.CORNERS:
        return (-value,)
    width = tp.instance.control_set.half_width
    return tuple(v for v in (min(value + step, width), max(value - step, -width)) if v != value)


def local_search(
    tp: TranscribedProblem,
    start,
    rng: Optional[np.random.Generator] = None,
    start_index: Optional[int] = None,
) -> Tuple[ControlPath, float]:
    """
    Compass search on the penalized objective, one penalty weight after another

    Coordinates are visited in a fresh random order every sweep; the first
    improving move is taken and the step halves after a sweep without
    improvement. The best feasible iterate seen at any weight is returned.

    Args:
        tp: Transcribed problem
        start: Initial controls, shape (N, 2); clamped to U
        rng: Generator for the visiting order (seeded from tp.seed when omitted)
        start_index: Label used in diagnostics

    Returns:
        (path, cost) of the best feasible iterate, cost under the search density

    Raises:
        FeasibilityError: If no feasible iterate was met
    """
    rng = rng if rng is not None else np.random.default_rng(tp.seed)
    controls = tp.clamp(start)
    free = np.flatnonzero(~tp.frozen.ravel())
    budget = max(1, tp.max_evaluations // max(len(tp.penalty_schedule), 1))
    evaluations = 0
    best: Optional[Tuple[float, np.ndarray]] = None

    def consider(evaluation: Evaluation, candidate: np.ndarray):
        nonlocal best
        if evaluation.feasible and (best is None or evaluation.cost < best[0]):
            best = (evaluation.cost, candidate.copy())

    for weight in tp.penalty_schedule:
        current = tp.evaluate(controls, weight)
        evaluations += 1
        consider(current, controls)
        used = 1
        step = tp.initial_step
        while step >= tp.min_step and used < budget and free.size:
            improved = False
            for flat in rng.permutation(free):
                i, c = divmod(int(flat), 2)
                for value in _moves(tp, controls[i, c], step):
                    trial = controls.copy()
                    trial[i, c] = value
                    result = tp.evaluate(trial, weight)
                    used += 1
                    consider(result, trial)
                    if result.objective < current.objective:
                        controls, current, improved = trial, result, True
                        break
                if used >= budget:
                    break
            if not improved:
                if tp.instance.control_set.kind is ControlSetKind.CORNERS:
                    break
                step *= 0.5
        evaluations += used - 1
        logger.debug(
            f"start {start_index}: weight {weight:g} objective {current.objective:.6g} "
            f"clearance {current.min_clearance:.3g} endpoint {current.endpoint_error:.3g}"
        )

    if best is None:
        raise FeasibilityError(f"start {start_index} found no feasible path in {evaluations} evaluations", start_index)
    return tp.to_path(best[1]), best[0]
