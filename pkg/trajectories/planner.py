"""
Cap Connector Planner

Kinodynamic RRT over bang primitives: every edge of the tree holds one corner
of U_:: for a fixed duration tau = a / (5b) or one of its dyadic refinements
tau / 2^k. The tree grows in straightened coordinates, where the flow of a
primitive is exact, and every edge is checked against the cap it must stay
in. A goal-biased sample picks the nearest node, which is expanded by its
best unused primitive towards the sample. The search ends when a node lands
within goal_tolerance of the goal or the expansion budget runs out.

The corner sequence found by the tree can optionally be polished by bounded
least squares on its durations.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from constants import CORNERS, TOLERANCES
from domain.instance import Instance
from domain.region import RegionTag, boundary_clearance, classify
from exceptions import PlannerFailedError, PreconditionError
from geometry.goursat import phi, phi_inv, straightened_flow
from trajectories.paths import ControlPath, arc_length

logger = logging.getLogger(__name__)

_CORNERS = np.array(CORNERS, dtype=float)
_PENALTY_WEIGHT = 1e2
_INITIAL_CAPACITY = 1024


@dataclass
class PlannerSettings:
    """
    Budget of the connector search

    Attributes:
        primitive_fraction: Primitive duration in units of a / b
        refinements: Extra primitives of duration tau / 2^k, k = 1..refinements
        goal_tolerance: Euclidean miss allowed at the goal (straightened coordinates)
        goal_bias: Probability of sampling the goal itself
        max_expansions: Node expansions before giving up
        samples_per_segment: Containment samples along each primitive
        polish: Refine the durations of the found corner sequence by least squares
        max_nfev: Function evaluations of the polishing step
    """
    primitive_fraction: float = 0.2
    refinements: int = 3
    goal_tolerance: float = TOLERANCES["PLANNER_GOAL"]
    goal_bias: float = 0.3
    max_expansions: int = 1_000_000
    samples_per_segment: int = 8
    polish: bool = False
    max_nfev: int = 400

    def primitive_duration(self, inst: Instance) -> float:
        return self.primitive_fraction * inst.a / inst.b


def straightened_states(y0: np.ndarray, controls: np.ndarray, durations: np.ndarray, samples: int = 1) -> np.ndarray:
    """
    States along a piecewise-constant control in straightened coordinates

    Returns:
        Array (K, samples, d): sample s of segment k is taken at fraction (s+1)/samples
    """
    d = len(y0)
    out = np.empty((len(durations), samples, d))
    fractions = np.arange(1, samples + 1) / samples
    y = np.asarray(y0, dtype=float)
    for k, (u, h) in enumerate(zip(controls, durations)):
        out[k] = straightened_flow(y, u, h * fractions)
        y = out[k, -1]
    return out


def _side_of(y: np.ndarray, inst: Instance, tol: float) -> int:
    if y[0] >= inst.a - tol:
        return 1
    if y[0] <= -inst.a + tol:
        return -1
    return 0


def _in_cap(y_samples: np.ndarray, inst: Instance, side: int, tol: float) -> np.ndarray:
    """Containment margin of straightened samples: min(clearance, side*y1 - a)"""
    clearance = np.asarray(boundary_clearance(phi(y_samples), inst))
    return np.minimum(clearance, side * y_samples[..., 0] - inst.a) + tol


class BangTree:
    """
    Search tree of bang primitives rooted at a straightened start point

    Node n stores its state, its parent and the primitive of the edge into it.
    used[n, m] marks primitives already tried from node n.
    """

    def __init__(self, root: np.ndarray, n_primitives: int):
        self.states = np.empty((_INITIAL_CAPACITY, len(root)))
        self.parents = np.full(_INITIAL_CAPACITY, -1, dtype=int)
        self.edges = np.full(_INITIAL_CAPACITY, -1, dtype=int)
        self.used = np.zeros((_INITIAL_CAPACITY, n_primitives), dtype=bool)
        self.states[0] = root
        self.size = 1

    def _grow(self) -> None:
        capacity = 2 * len(self.states)
        self.states = np.resize(self.states, (capacity, self.states.shape[1]))
        self.parents = np.resize(self.parents, capacity)
        self.edges = np.resize(self.edges, capacity)
        used = np.zeros((capacity, self.used.shape[1]), dtype=bool)
        used[: self.size] = self.used[: self.size]
        self.used = used

    def add(self, state: np.ndarray, parent: int, primitive: int) -> int:
        if self.size == len(self.states):
            self._grow()
        n = self.size
        self.states[n] = state
        self.parents[n] = parent
        self.edges[n] = primitive
        self.used[n] = False
        self.size += 1
        return n

    def nearest(self, target: np.ndarray) -> int:
        return int(np.argmin(np.linalg.norm(self.states[: self.size] - target, axis=1)))

    def primitives_to(self, node: int) -> np.ndarray:
        """Primitive indices along the branch from the root to node"""
        branch = []
        while node > 0:
            branch.append(self.edges[node])
            node = self.parents[node]
        return np.array(branch[::-1], dtype=int)


def _primitive_table(settings: PlannerSettings, inst: Instance):
    tau = settings.primitive_duration(inst)
    durations = tau * 0.5 ** np.arange(settings.refinements + 1)
    controls = np.repeat(_CORNERS, len(durations), axis=0)
    return controls, np.tile(durations, len(_CORNERS))


def _sampling_box(y_start: np.ndarray, y_goal: np.ndarray, inst: Instance):
    reach = float(np.linalg.norm(y_goal - y_start)) + 1.0 / inst.b
    pad = reach ** np.arange(1, len(y_start) + 1, dtype=float)
    pad[1] = reach
    return np.minimum(y_start, y_goal) - pad, np.maximum(y_start, y_goal) + pad


def grow_bang_tree(
    inst: Instance,
    y_start: np.ndarray,
    y_goal: np.ndarray,
    side: int,
    rng: np.random.Generator,
    settings: PlannerSettings,
):
    """
    Run the RRT until a node is within goal_tolerance of y_goal

    Returns:
        (tree, goal_node, best_miss, expansions); goal_node is None when the budget ran out
    """
    controls, durations = _primitive_table(settings, inst)
    fractions = np.arange(1, settings.samples_per_segment + 1) / settings.samples_per_segment
    # edges keep half of the clearance tolerance in reserve
    tol = 0.5 * TOLERANCES["CLEARANCE"]
    lo, hi = _sampling_box(y_start, y_goal, inst)
    tree = BangTree(y_start, len(durations))
    best_miss = float(np.linalg.norm(y_start - y_goal))

    for expansion in range(1, settings.max_expansions + 1):
        target = y_goal if rng.random() < settings.goal_bias else rng.uniform(lo, hi)
        node = tree.nearest(target)
        open_ = np.flatnonzero(~tree.used[node])
        if not open_.size:
            continue
        samples = straightened_flow(
            tree.states[node], controls[open_, None, :], durations[open_, None] * fractions[None, :]
        )
        if inst.constrained:
            inside = np.all(_in_cap(samples, inst, side, tol) >= 0.0, axis=1)
            tree.used[node, open_[~inside]] = True
            open_, samples = open_[inside], samples[inside]
            if not open_.size:
                continue
        ends = samples[:, -1]
        pick = int(np.argmin(np.linalg.norm(ends - target, axis=1)))
        tree.used[node, open_[pick]] = True
        child = tree.add(ends[pick], node, int(open_[pick]))
        miss = float(np.linalg.norm(ends[pick] - y_goal))
        best_miss = min(best_miss, miss)
        if miss <= settings.goal_tolerance:
            logger.debug(f"Bang tree reached the goal after {expansion} expansions ({tree.size} nodes)")
            return tree, child, best_miss, expansion
    return tree, None, best_miss, settings.max_expansions


def plan_cap_connector(
    inst: Instance,
    start,
    goal,
    side: int,
    seed: int = 0,
    settings: Optional[PlannerSettings] = None,
) -> ControlPath:
    """
    Join two points of the closed cap on the given side by a U_:: curve staying in the cap

    Args:
        inst: Instance
        start: Starting point (original coordinates)
        goal: Goal point (original coordinates)
        side: +1 for the cap beyond a, -1 for the cap before -a
        seed: Seed of the tree's sampler
        settings: Search budget

    Returns:
        ControlPath starting at time 0; empty when start equals goal

    Raises:
        PreconditionError: If an endpoint is outside the cap of the given side
        PlannerFailedError: If no connector is found within the budget
    """
    settings = settings or PlannerSettings()
    tol = TOLERANCES["CLEARANCE"]
    if side not in (-1, 1):
        raise PreconditionError("side must be +1 or -1", "plan_cap_connector")

    y_start = phi_inv(np.asarray(start, dtype=float))
    y_goal = phi_inv(np.asarray(goal, dtype=float))
    for name, point, y in (("start", start, y_start), ("goal", goal, y_goal)):
        if inst.constrained and classify(point, inst) is RegionTag.OUTSIDE:
            raise PreconditionError(f"{name} point lies outside Omega", "plan_cap_connector")
        if _side_of(y, inst, tol) != side:
            raise PreconditionError(f"{name} point is not in the cap on side {side:+d}", "plan_cap_connector")

    if np.linalg.norm(y_goal - y_start) <= settings.goal_tolerance:
        return ControlPath(np.zeros(1), np.zeros((0, 2)))

    tree, goal_node, best_miss, expansions = grow_bang_tree(
        inst, y_start, y_goal, side, np.random.default_rng(seed), settings
    )
    if goal_node is None:
        raise PlannerFailedError(
            f"no cap connector within {expansions} expansions (best endpoint miss {best_miss:.3g}); "
            f"delta may be too small",
            best_miss,
        )

    controls, durations = _primitive_table(settings, inst)
    branch = tree.primitives_to(goal_node)
    path = ControlPath.from_durations(0.0, durations[branch], controls[branch])
    if settings.polish:
        path = polish_connector(inst, y_start, y_goal, path, side, settings)

    length = arc_length(path)
    logger.debug(f"Connector found with {path.n_intervals} bang segments, length {length:.6g}")
    if length > 0.5 * inst.delta:
        logger.warning(f"Connector length {length:.6g} exceeds delta/2 = {0.5 * inst.delta:.6g}")
    return path


def _endpoint_miss(y_start: np.ndarray, y_goal: np.ndarray, path: ControlPath) -> float:
    return float(np.linalg.norm(straightened_states(y_start, path.values, path.durations)[-1, -1] - y_goal))


def polish_connector(
    inst: Instance,
    y_start: np.ndarray,
    y_goal: np.ndarray,
    path: ControlPath,
    side: int,
    settings: PlannerSettings,
) -> ControlPath:
    """
    Refit the durations of a corner sequence by bounded least squares

    The corners stay fixed. The refit is kept only when it stays in the cap and
    misses the goal by less than the tree's path.
    """
    controls = path.values

    def residuals(durations):
        states = straightened_states(y_start, controls, durations, settings.samples_per_segment)
        miss = states[-1, -1] - y_goal
        if not inst.constrained:
            return miss
        violation = np.minimum(_in_cap(states, inst, side, 0.0), 0.0).ravel()
        return np.concatenate((miss, _PENALTY_WEIGHT * violation))

    fit = least_squares(residuals, path.durations, bounds=(0.0, np.inf), max_nfev=settings.max_nfev)
    keep = fit.x > 1e-12
    if not np.any(keep):
        return path
    polished = ControlPath.from_durations(0.0, fit.x[keep], controls[keep])
    states = straightened_states(y_start, polished.values, polished.durations, settings.samples_per_segment)
    if inst.constrained and np.any(_in_cap(states, inst, side, TOLERANCES["CLEARANCE"]) < 0.0):
        return path
    if _endpoint_miss(y_start, y_goal, polished) >= _endpoint_miss(y_start, y_goal, path):
        return path
    logger.debug(f"Polished connector miss {_endpoint_miss(y_start, y_goal, polished):.3g}")
    return polished
