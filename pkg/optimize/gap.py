"""
Gap Experiment Module

Multistart direct transcription of the classical problem against the explicit
relaxed minimizer, per-output topological diagnostics (ring winding, shell
partition with its polygonal bound, a-priori radius check), and the lower
bound on how close classical costs can come to 2a given an empirical
ball-box constant.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.special import zeta

from constants import PENALTY_SCHEDULE, SHELL_INDEX_CAP
from costs.functionals import classical_cost
from costs.lagrangians import LagrangianKind, LagrangianLike
from domain.instance import Instance
from exceptions import FeasibilityError, GapForgeError, NoCrossingError, PlannerFailedError, PreconditionError
from logging_config import PerformanceLogger
from optimize.transcription import TranscribedProblem, local_search
from relaxation.problems import ProblemSpec, TargetMode, contender_cost, problem_spec
from topology.shells import apriori_radius_check, polygonal_winding_bound, shell_partition
from topology.winding import winding_bound_check
from trajectories.admissibility import admissible
from trajectories.integrators import chained_flow
from trajectories.paths import ControlPath, Curve
from trajectories.planner import PlannerSettings, plan_cap_connector
from trajectories.reference import alternating_corner_path, axis_path, reference_minimizer

logger = logging.getLogger(__name__)

_BISECTION_FLOOR = 1e-16
_BISECTION_STEPS = 200

# allowed shortfall of the polygonal bound below |winding|
POLYGONAL_SLACK = 0.05


@dataclass(frozen=True)
class TopologyOptions:
    """
    Limits of the per-output diagnostics

    Attributes:
        shell_cap: Largest shell index kept in a partition
        max_blocks: Block budget per shell run
        coverage_threshold: The polygonal bound is only enforced when the
            shells cover at least this share of the crossing interval
        refine: Exact-flow sub-samples per segment in the admissibility check
    """
    shell_cap: int = SHELL_INDEX_CAP
    max_blocks: int = 1_000_000
    coverage_threshold: float = 0.999
    refine: int = 8


@dataclass
class GapReport:
    """
    Outcome of a multistart experiment

    Attributes:
        relaxed_cost: Cost of the relaxed reference minimizer
        best_classical_cost: Smallest cost over feasible, admissible outputs (inf if none)
        margin: best_classical_cost - relaxed_cost
        n_starts: Starts attempted
        n_feasible: Starts ending with an admissible path
        winding: min/max winding and pass count over the checked outputs
        shells: Polygonal-bound counts (checked, enforced, passed)
        radius: A-priori radius check counts (checked, passed)
        lower_bound_eps: Smallest cost excess classical curves can reach, when cbar is known
        lp_value: Occupation LP value, when computed
        diagnostics: One entry per start, in start order
        curves: Admissible classical curves, in start order (not serialized)
    """
    relaxed_cost: float
    best_classical_cost: float
    margin: float
    n_starts: int
    n_feasible: int
    lagrangian: str
    seed: int
    N: int
    winding: Dict[str, Any] = field(default_factory=dict)
    shells: Dict[str, Any] = field(default_factory=dict)
    radius: Dict[str, Any] = field(default_factory=dict)
    lower_bound_eps: Optional[float] = None
    lp_value: Optional[float] = None
    diagnostics: List[Dict[str, Any]] = field(default_factory=list)
    curves: List[Curve] = field(default_factory=list, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "relaxed_cost": self.relaxed_cost,
            "best_classical_cost": self.best_classical_cost,
            "margin": self.margin,
            "n_starts": self.n_starts,
            "n_feasible": self.n_feasible,
            "lagrangian": self.lagrangian,
            "seed": self.seed,
            "N": self.N,
            "winding": self.winding,
            "shells": self.shells,
            "radius": self.radius,
            "lower_bound_eps": self.lower_bound_eps,
            "lp_value": self.lp_value,
            "diagnostics": self.diagnostics,
        }

    def summary_rows(self) -> List[List[Any]]:
        """(quantity, value) rows of the demo-gap table"""
        return [
            ["relaxed_cost", self.relaxed_cost],
            ["best_classical_cost", self.best_classical_cost],
            ["margin", self.margin],
            ["lower_bound_eps", self.lower_bound_eps],
            ["lp_value", self.lp_value],
            ["n_starts", self.n_starts],
            ["n_feasible", self.n_feasible],
            ["winding_min", self.winding.get("min")],
            ["winding_max", self.winding.get("max")],
            ["winding_passed", self.winding.get("passed")],
            ["polygonal_passed", self.shells.get("passed")],
            ["radius_passed", self.radius.get("passed")],
        ]


def resample_controls(path: ControlPath, breakpoints: np.ndarray) -> np.ndarray:
    """Cell averages of a piecewise-constant control on another grid (zero where the path is undefined)"""
    if path.n_intervals == 0:
        return np.zeros((len(breakpoints) - 1, 2))
    cumulative = np.vstack((np.zeros(2), np.cumsum(path.values * path.durations[:, None], axis=0)))
    integral = np.column_stack([np.interp(breakpoints, path.breakpoints, cumulative[:, k]) for k in range(2)])
    return np.diff(integral, axis=0) / np.diff(breakpoints)[:, None]


def planner_seeded_path(
    inst: Instance,
    n_chatter: int,
    seed: int = 0,
    settings: Optional[PlannerSettings] = None,
) -> ControlPath:
    """
    Corner path x0 -> eta(-a) -> eta(a) -> x1: cap connectors at both ends and
    (1, +-1) chattering along the axis, starting at -a_delta
    """
    head = plan_cap_connector(inst, inst.x0, inst.axis_point(-inst.a), side=-1, seed=seed, settings=settings)
    tail = plan_cap_connector(inst, inst.axis_point(inst.a), inst.x1, side=1, seed=seed + 1, settings=settings)
    h = 2.0 * inst.a / n_chatter
    signs = np.where(np.arange(n_chatter) % 2 == 0, 1.0, -1.0)
    middle = ControlPath.from_durations(0.0, np.full(n_chatter, h), np.column_stack((np.ones(n_chatter), signs)))
    return head.shifted(-inst.a_delta - head.start).concatenate(middle).concatenate(tail)


def start_controls(
    tp: TranscribedProblem,
    index: int,
    rng: np.random.Generator,
    noise: float = 0.3,
    planner: Optional[PlannerSettings] = None,
) -> np.ndarray:
    """
    Initial controls of start `index`

    0 rides the axis, 1 chatters between (1, 1) and (1, -1), 2 is seeded by the
    cap planner, the rest perturb the axis profile with Gaussian noise.
    """
    inst = tp.instance
    if index == 0:
        return axis_path(inst, tp.N).values.copy()
    if index == 1:
        return alternating_corner_path(inst, tp.N).values.copy()
    if index == 2:
        try:
            seeded = planner_seeded_path(inst, tp.N, seed=int(rng.integers(2**31)), settings=planner)
            return resample_controls(seeded, tp.breakpoints)
        except (PlannerFailedError, PreconditionError) as e:
            logger.warning(f"Planner seed unavailable, using the chattering profile: {e}")
            return alternating_corner_path(inst, tp.N).values.copy()
    base = axis_path(inst, tp.N).values
    return tp.clamp(base + rng.normal(0.0, noise, size=base.shape))


def shell_report(
    curve: Curve,
    inst: Instance,
    winding: float,
    options: TopologyOptions = TopologyOptions(),
) -> Dict[str, Any]:
    """
    Shell partition of the crossing interval and the polygonal bound against |winding|

    Raises:
        NoCrossingError: If the curve never crosses [-a, a]
    """
    partition = shell_partition(curve, inst, options.shell_cap, options.max_blocks)
    bound = polygonal_winding_bound(curve, inst, partition)
    enforced = partition.covered_fraction >= options.coverage_threshold
    report = partition.to_dict()
    report.update(
        polygonal_bound=bound,
        enforced=bool(enforced),
        passed=bool(bound >= abs(winding) - POLYGONAL_SLACK) if enforced else None,
    )
    return report


def radius_report(curve: Curve, inst: Instance) -> Dict[str, Any]:
    """A-priori radius check at the curve's own VEE excess over 2a"""
    vee = classical_cost(inst, LagrangianKind.VEE, curve.path, curve)
    eps = max(vee - 2.0 * inst.a, 0.0) + 1e-12
    report = apriori_radius_check(curve, inst, eps).to_dict()
    report["eps"] = eps
    return report


def _run_start(
    tp: TranscribedProblem,
    spec: ProblemSpec,
    index: int,
    seed: int,
    noise: float,
    planner: Optional[PlannerSettings],
    options: TopologyOptions,
):
    inst = tp.instance
    rng = np.random.default_rng([seed, index])
    entry: Dict[str, Any] = {"index": index}
    try:
        start = start_controls(tp, index, rng, noise, planner)
        path, search_cost = local_search(tp, start, rng=rng, start_index=index)
    except FeasibilityError as e:
        entry.update(status="FAILED_FEASIBILITY", message=e.message)
        return entry, None

    curve = chained_flow(inst, path, inst.x0, substeps=tp.substeps)
    report = admissible(curve, inst, refine=options.refine, require_target=spec.target_mode is not TargetMode.NONE)
    entry.update(search_cost=search_cost, admissible=report.to_dict())
    if not report.admissible:
        entry["status"] = "INADMISSIBLE"
        return entry, None

    entry["cost"] = contender_cost(spec, curve).total
    try:
        winding = winding_bound_check(curve, inst)
        entry["winding"] = winding.to_dict()
        entry["shells"] = shell_report(curve, inst, winding.winding, options)
        entry["radius"] = radius_report(curve, inst)
    except NoCrossingError:
        entry.update(winding=None, shells=None, radius=None)
    except GapForgeError as e:
        logger.warning(f"Start {index}: topology diagnostics failed: {e}")
        entry.update(winding=None, shells=None, radius=None)
        entry["topology_error"] = {"code": e.error_code, "message": e.message}
    entry["status"] = "FEASIBLE"
    return entry, curve


def multistart_gap_experiment(
    inst: Instance,
    n_starts: int,
    N: int,
    seed: int = 0,
    spec: Optional[ProblemSpec] = None,
    kind: LagrangianLike = LagrangianKind.VEEVEE,
    workers: int = 1,
    max_evaluations: int = 4000,
    substeps: int = 4,
    noise: float = 0.3,
    cbar: Optional[float] = None,
    lp_value: Optional[float] = None,
    penalty_schedule: Sequence[float] = PENALTY_SCHEDULE,
    initial_step: float = 0.5,
    min_step: float = 1e-3,
    planner: Optional[PlannerSettings] = None,
    topology: Optional[TopologyOptions] = None,
) -> GapReport:
    """
    Best classical cost over n_starts local searches against the relaxed cost 2a

    Starts run on a thread pool; start i draws from default_rng([seed, i]) and
    reports are merged in start order, so results do not depend on `workers`.

    Raises:
        PreconditionError: If n_starts < 1
    """
    if n_starts < 1:
        raise PreconditionError("n_starts must be at least 1", "multistart_gap_experiment")
    spec = spec if spec is not None else problem_spec(inst, kind)
    options = topology if topology is not None else TopologyOptions()

    with PerformanceLogger("multistart_gap_experiment"):
        ypath, reference = reference_minimizer(inst)
        relaxed = contender_cost(spec, reference, ypath).total
        tp = TranscribedProblem(
            inst,
            N=N,
            spec=spec,
            penalty_schedule=tuple(penalty_schedule),
            seed=seed,
            max_evaluations=max_evaluations,
            substeps=substeps,
            initial_step=initial_step,
            min_step=min_step,
        )

        with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
            outcomes = list(pool.map(lambda i: _run_start(tp, spec, i, seed, noise, planner, options), range(n_starts)))

    diagnostics = [entry for entry, _ in outcomes]
    feasible = [(entry, curve) for entry, curve in outcomes if curve is not None]
    best = min((entry["cost"] for entry, _ in feasible), default=math.inf)
    windings = [entry["winding"] for entry, _ in feasible if entry.get("winding")]
    winding = {
        "checked": len(windings),
        "passed": sum(1 for w in windings if w["pass"]),
        "min": min((w["winding"] for w in windings), default=None),
        "max": max((w["winding"] for w in windings), default=None),
        "bound": inst.a * inst.b - 2.0 * math.pi,
    }
    shell_entries = [entry["shells"] for entry, _ in feasible if entry.get("shells")]
    shells = {
        "checked": len(shell_entries),
        "enforced": sum(1 for s in shell_entries if s["enforced"]),
        "passed": sum(1 for s in shell_entries if s["passed"]),
    }
    radius_entries = [entry["radius"] for entry, _ in feasible if entry.get("radius")]
    radius = {
        "checked": len(radius_entries),
        "passed": sum(1 for r in radius_entries if r["pass"]),
    }
    if not feasible:
        logger.warning(f"No feasible classical path over {n_starts} starts")

    report = GapReport(
        relaxed_cost=relaxed,
        best_classical_cost=best,
        margin=best - relaxed,
        n_starts=n_starts,
        n_feasible=len(feasible),
        lagrangian=spec.lagrangian.label,
        seed=seed,
        N=N,
        winding=winding,
        shells=shells,
        radius=radius,
        lower_bound_eps=gap_lower_bound_eps(inst, cbar) if cbar is not None else None,
        lp_value=lp_value,
        diagnostics=diagnostics,
        curves=[curve for _, curve in feasible],
    )
    logger.info(
        f"Relaxed {relaxed:.6f}, best classical {best:.6f}, margin {report.margin:.6f} "
        f"({len(feasible)}/{n_starts} feasible)"
    )
    return report


def shell_tail(inst: Instance, cbar: float, eps: float) -> float:
    """sum_{j >= J} 6 a cbar / j^{3/2} with J = ceil(1 / (5 eps^{1/4}))"""
    J = max(1, math.ceil(1.0 / (5.0 * eps**0.25)))
    return 6.0 * inst.a * cbar * float(zeta(1.5, J))


def gap_lower_bound_eps(inst: Instance, cbar: float, s0: Optional[float] = None) -> float:
    """
    Largest eps for which ab - 2pi <= tail(eps) fails

    Classical curves of cost at most 2a + eps would force ab - 2pi below the
    shell tail; below the returned threshold the tail is too small, so no such
    curve exists. The bracket is (0, min(1, (s0 / 5^{5/2})^{8/5})], s0 = sqrt(2)/b.

    Returns:
        0 when the inequality holds even at 1e-16, the bracket end when it fails throughout

    Raises:
        PreconditionError: If cbar <= 0
    """
    if not cbar > 0.0:
        raise PreconditionError("cbar must be positive", "gap_lower_bound_eps")
    s0 = s0 if s0 is not None else math.sqrt(2.0) / inst.b
    target = inst.a * inst.b - 2.0 * math.pi
    hi = min(1.0, (s0 / 5.0**2.5) ** 1.6)

    def violated(eps: float) -> bool:
        return shell_tail(inst, cbar, eps) < target

    if not violated(_BISECTION_FLOOR):
        return 0.0
    if violated(hi):
        return hi
    lo_log, hi_log = math.log(_BISECTION_FLOOR), math.log(hi)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo_log + hi_log)
        if violated(math.exp(mid)):
            lo_log = mid
        else:
            hi_log = mid
        if hi_log - lo_log < 1e-12:
            break
    return math.exp(lo_log)
