"""
Shells Module

Shell decomposition V_j = {t : r(gamma(t)) in (1/(j+1), 1/j]} of the crossing
interval, greedy block covers of length j^{-5/2}, the polygonal winding
bound sum_j 2j sum_k |chord_k|, and the a-priori radius check 5 eps^{1/4}.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from constants import SHELL_BLOCK_EXPONENT, SHELL_INDEX_CAP
from costs.functionals import classical_cost
from costs.lagrangians import LagrangianKind
from domain.instance import Instance
from exceptions import CostPreconditionError, PreconditionError
from geometry.goursat import phi_inv, radial
from topology.winding import crossing_curve
from trajectories.paths import Curve

logger = logging.getLogger(__name__)


@dataclass
class ShellRun:
    """A maximal run of consecutive samples in one shell"""
    j: int
    start: float
    end: float
    blocks: List[Tuple[float, float]] = field(default_factory=list)
    collapsed: bool = False

    @property
    def length(self) -> float:
        return self.end - self.start


@dataclass
class ShellPartition:
    """
    Shell runs of the crossing interval

    Attributes:
        runs: Shell runs in time order
        interval: The crossing interval (t0, t1)
        covered_fraction: Share of the interval lying in some shell j <= cap
        tail_flagged: Whether samples with j above the cap were dropped
        blocks_collapsed: Whether some run exceeded the block budget and was
            measured by its polygonal length instead of its blocks
    """
    runs: List[ShellRun]
    interval: Tuple[float, float]
    covered_fraction: float
    tail_flagged: bool = False
    blocks_collapsed: bool = False

    def shell_indices(self) -> List[int]:
        return sorted({run.j for run in self.runs})

    def measure(self, j: int) -> float:
        """|V_j|"""
        return float(sum(run.length for run in self.runs if run.j == j))

    def block_count(self, j: int) -> int:
        return sum(len(run.blocks) for run in self.runs if run.j == j)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "interval": list(self.interval),
            "covered_fraction": self.covered_fraction,
            "tail_flagged": self.tail_flagged,
            "blocks_collapsed": self.blocks_collapsed,
            "shells": {
                str(j): {"measure": self.measure(j), "blocks": self.block_count(j)} for j in self.shell_indices()
            },
        }


def block_length(j: int) -> float:
    """l_j = j^{-5/2}"""
    return float(j) ** (-SHELL_BLOCK_EXPONENT)


def _greedy_blocks(start: float, end: float, length: float, max_blocks: int) -> Tuple[List[Tuple[float, float]], bool]:
    count = int(np.ceil((end - start) / length))
    if count > max_blocks:
        return [], True
    starts = start + length * np.arange(max(count, 1))
    ends = np.minimum(starts + length, end)
    return [(float(s), float(e)) for s, e in zip(starts, ends) if e > s], False


def shell_partition(
    curve: Curve,
    inst: Instance,
    cap: int = SHELL_INDEX_CAP,
    max_blocks: int = 1_000_000,
) -> ShellPartition:
    """
    Decompose the crossing interval into shell runs with greedy block covers

    Each segment of the densified crossing curve is assigned the shell of its
    left sample. Samples with r = 0 lie in no shell; samples with j > cap are
    dropped and flag the tail.
    """
    piece = crossing_curve(curve, inst)
    times = piece.times
    r = np.asarray(radial(piece.points[:-1]))
    with np.errstate(divide="ignore"):
        j_values = np.where(r > 0.0, np.floor(1.0 / np.where(r > 0.0, r, 1.0)), 0.0)
    j_values = np.where(np.abs(piece.points[:-1, 0]) <= inst.a, j_values, 0.0)
    tail = j_values > cap
    j_values = np.where(tail, 0.0, j_values).astype(np.int64)

    runs: List[ShellRun] = []
    collapsed_any = False
    change = np.flatnonzero(np.diff(j_values)) + 1
    bounds = np.concatenate(([0], change, [len(j_values)]))
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        j = int(j_values[lo])
        if j <= 0:
            continue
        run = ShellRun(j=j, start=float(times[lo]), end=float(times[hi]))
        run.blocks, run.collapsed = _greedy_blocks(run.start, run.end, block_length(j), max_blocks)
        collapsed_any = collapsed_any or run.collapsed
        runs.append(run)

    total = float(times[-1] - times[0])
    covered = float(sum(run.length for run in runs))
    if tail.any():
        logger.debug(f"{int(tail.sum())} samples above shell cap {cap} dropped")
    return ShellPartition(
        runs=runs,
        interval=(float(times[0]), float(times[-1])),
        covered_fraction=covered / total if total > 0.0 else 0.0,
        tail_flagged=bool(tail.any()),
        blocks_collapsed=collapsed_any,
    )


def polygonal_winding_bound(curve: Curve, inst: Instance, partition: ShellPartition = None) -> float:
    """
    sum_j 2j sum_k |tau(phi^{-1} gamma)(block end) - tau(phi^{-1} gamma)(block start)|

    Block ends are located by linear interpolation on the densified crossing
    curve. Runs whose block count exceeded the budget contribute 2j times
    their polygonal length.

    Raises:
        NoCrossingError: If the curve never crosses [-a, a]
    """
    partition = partition if partition is not None else shell_partition(curve, inst)
    piece = crossing_curve(curve, inst)
    planar = phi_inv(piece.points)[:, -2:]

    def tau_at(t: np.ndarray) -> np.ndarray:
        return np.column_stack([np.interp(t, piece.times, planar[:, k]) for k in range(2)])

    total = 0.0
    for run in partition.runs:
        if run.collapsed:
            inside = (piece.times > run.start) & (piece.times < run.end)
            nodes = np.concatenate(([run.start], piece.times[inside], [run.end]))
            chords = np.diff(tau_at(nodes), axis=0)
        elif run.blocks:
            blocks = np.array(run.blocks)
            chords = tau_at(blocks[:, 1]) - tau_at(blocks[:, 0])
        else:
            continue
        total += 2.0 * run.j * float(np.sum(np.linalg.norm(chords, axis=1)))
    return total


@dataclass(frozen=True)
class RadiusCheck:
    """sup r over the crossing interval against 5 eps^{1/4}"""
    sup_r: float
    bound: float
    passed: bool
    cost: float

    def to_dict(self) -> Dict[str, Any]:
        return {"sup_r": self.sup_r, "bound": self.bound, "pass": self.passed, "cost": self.cost}


def apriori_radius_check(curve: Curve, inst: Instance, eps: float) -> RadiusCheck:
    """
    For curves of VEE cost at most 2a + eps, sup r on the crossing interval is at most 5 eps^{1/4}

    Raises:
        PreconditionError: If the curve carries no classical control
        CostPreconditionError: If the VEE cost exceeds 2a + eps
    """
    if curve.path is None:
        raise PreconditionError("the a-priori radius check needs the generating control", "apriori_radius_check")
    cost = classical_cost(inst, LagrangianKind.VEE, curve.path, curve)
    if cost > 2.0 * inst.a + eps:
        raise CostPreconditionError(f"VEE cost {cost:.6g} exceeds 2a + eps = {2.0 * inst.a + eps:.6g}", cost)
    piece = crossing_curve(curve, inst)
    sup_r = float(np.max(radial(piece.points)))
    bound = 5.0 * eps**0.25
    return RadiusCheck(sup_r=sup_r, bound=bound, passed=sup_r <= bound, cost=cost)
