"""
Separation Module

Distance between classical trajectories from perturbed starts and the relaxed
reference trajectory, measured on Mayer-lifted curves (state plus accumulated
running cost). Under the state constraint the classical family stays a fixed
distance away; without it chattering riders approach the reference.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from constants import CORNERS, TOLERANCES
from costs.lagrangians import LagrangianKind, LagrangianLike
from domain.instance import Instance
from domain.region import boundary_clearance
from exceptions import PlannerFailedError, PreconditionError
from logging_config import PerformanceLogger
from optimize.gap import planner_seeded_path, resample_controls
from relaxation.problems import lift_curve, problem_spec
from trajectories.integrators import chained_flow
from trajectories.paths import ControlPath
from trajectories.planner import PlannerSettings
from trajectories.reference import alternating_corner_path, reference_minimizer

logger = logging.getLogger(__name__)

FAMILIES = ("axis", "chattering", "bangs", "planner")
_ATTEMPTS_PER_CURVE = 20


@dataclass
class SeparationResult:
    min_sup_distance: float
    n_curves: int
    n_attempts: int
    delta: float
    seed: int
    families: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "min_sup_distance": self.min_sup_distance,
            "n_curves": self.n_curves,
            "n_attempts": self.n_attempts,
            "delta": self.delta,
            "seed": self.seed,
            "families": self.families,
        }


def _grid(inst: Instance, N: int) -> np.ndarray:
    return np.linspace(-inst.a_delta, inst.a_delta, N + 1)


def _axis_rider(inst: Instance, N: int, rng: np.random.Generator, offset: float) -> np.ndarray:
    """Rest, then u = (1, 0) until x1 reaches lambda a (half the time) or a random stop"""
    la = inst.lam * inst.a
    distance = 2.0 * la - offset
    if rng.random() >= 0.5:
        distance *= rng.uniform(0.5, 1.0)
    go = rng.uniform(-inst.a_delta, inst.a_delta - distance)
    path = ControlPath(np.array([go, go + distance]), np.array([[1.0, 0.0]]))
    return resample_controls(path, _grid(inst, N))


def _chattering_rider(inst: Instance, N: int, rng: np.random.Generator, offset: float) -> np.ndarray:
    values = alternating_corner_path(inst, N).values.copy()
    if rng.random() < 0.5:
        values[:, 1] *= -1.0
    return values


def _random_bangs(inst: Instance, N: int, rng: np.random.Generator, offset: float) -> np.ndarray:
    corners = np.array(CORNERS, dtype=float)
    n_pieces = int(rng.integers(4, 16))
    cuts = np.sort(rng.uniform(-inst.a_delta, inst.a_delta, n_pieces - 1))
    breakpoints = np.concatenate(([-inst.a_delta], cuts, [inst.a_delta]))
    values = corners[rng.integers(0, 4, n_pieces)] * rng.uniform(0.0, 1.0, (n_pieces, 1))
    return resample_controls(ControlPath(breakpoints, values), _grid(inst, N))


def fw_separation_experiment(
    inst: Instance,
    delta: float,
    n_curves: int,
    seed: int = 0,
    N: int = 400,
    kind: LagrangianLike = LagrangianKind.VEEVEE,
    extra_paths: Optional[Sequence[ControlPath]] = None,
    planner: Optional[PlannerSettings] = None,
) -> SeparationResult:
    """
    Minimum lifted sup-distance from sampled classical curves to the relaxed reference

    Starts are x0 + delta * s e1 with s uniform in [-1, 1]. Samples cycle
    through axis riders, chattering riders, random bang sequences and the
    planner-seeded corner path; extra_paths (e.g. optimizer outputs) are
    scored from x0 first. Candidates leaving the closed domain are discarded,
    and at most 20 * n_curves candidates are drawn.

    Returns:
        Result with min_sup_distance = inf when n_curves = 0 or nothing was accepted

    Raises:
        PreconditionError: If the delta-ball around x0 is not inside the domain
    """
    if n_curves <= 0:
        return SeparationResult(math.inf, 0, 0, delta, seed)
    if inst.constrained and not float(boundary_clearance(inst.x0, inst)) > delta:
        raise PreconditionError(f"the {delta:g}-ball around x0 leaves the domain", "fw_separation_experiment")

    spec = problem_spec(inst, kind)
    ypath, reference = reference_minimizer(inst)
    lifted_reference = lift_curve(spec, reference, ypath)
    rng = np.random.default_rng(seed)

    try:
        seeded = planner_seeded_path(inst, N, seed=seed, settings=planner)
        planner_controls = resample_controls(seeded, _grid(inst, N))
    except (PlannerFailedError, PreconditionError) as e:
        logger.warning(f"Planner family disabled: {e}")
        planner_controls = None

    samplers: Dict[str, Callable] = {
        "axis": _axis_rider,
        "chattering": _chattering_rider,
        "bangs": _random_bangs,
    }
    if planner_controls is not None:
        samplers["planner"] = lambda inst_, N_, rng_, offset_: planner_controls
    order = [name for name in FAMILIES if name in samplers]

    stats = {name: {"accepted": 0, "attempted": 0, "min": math.inf} for name in order}
    best = math.inf
    accepted = attempts = 0

    def score(path: ControlPath, x_start: np.ndarray, family: str) -> None:
        nonlocal best, accepted
        stats.setdefault(family, {"accepted": 0, "attempted": 0, "min": math.inf})
        stats[family]["attempted"] += 1
        curve = chained_flow(inst, path, x_start, substeps=2)
        if curve.min_clearance < -TOLERANCES["CLEARANCE"]:
            return
        distance = lift_curve(spec, curve).sup_distance(lifted_reference)
        accepted += 1
        stats[family]["accepted"] += 1
        stats[family]["min"] = min(stats[family]["min"], distance)
        best = min(best, distance)

    with PerformanceLogger("fw_separation_experiment"):
        for path in extra_paths or ():
            score(path, inst.x0, "extra")
        while accepted < n_curves and attempts < _ATTEMPTS_PER_CURVE * n_curves:
            family = order[attempts % len(order)]
            offset = delta * rng.uniform(-1.0, 1.0)
            x_start = inst.x0.copy()
            x_start[0] += offset
            controls = samplers[family](inst, N, rng, offset)
            attempts += 1
            score(ControlPath(_grid(inst, N), inst.control_set.project(controls)), x_start, family)

    if accepted < n_curves:
        logger.warning(f"Only {accepted} of {n_curves} candidates stayed in the domain after {attempts} draws")
    logger.info(f"Minimum lifted sup-distance {best:.6g} over {accepted} curves")
    return SeparationResult(
        min_sup_distance=best,
        n_curves=accepted,
        n_attempts=attempts,
        delta=delta,
        seed=seed,
        families=stats,
    )
