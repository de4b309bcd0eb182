"""
Paths Module

Piecewise-constant classical controls (ControlPath), finitely supported Young
measures (YoungPath), sampled trajectories (Curve), arc length, and the
JSON/CSV codecs used by the CLI.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from constants import TOLERANCES
from exceptions import GridMismatchError, WeightNormalizationError
from utils import save_csv_file

logger = logging.getLogger(__name__)


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _check_breakpoints(breakpoints: np.ndarray) -> None:
    if breakpoints.ndim != 1 or breakpoints.size < 1:
        raise ValueError("breakpoints must be a non-empty 1-D array")
    if not np.all(np.isfinite(breakpoints)):
        raise ValueError("breakpoints must be finite")
    if np.any(np.diff(breakpoints) <= 0.0):
        raise ValueError("breakpoints must be strictly increasing")


@dataclass(frozen=True)
class ControlPath:
    """
    Piecewise-constant control: values[i] is held on [breakpoints[i], breakpoints[i+1])

    A path with a single breakpoint and no values is empty (zero duration).
    """
    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        breakpoints = _frozen(self.breakpoints)
        values = _frozen(np.asarray(self.values, dtype=float).reshape(-1, 2))
        _check_breakpoints(breakpoints)
        if len(values) != len(breakpoints) - 1:
            raise ValueError("need exactly one control value per interval")
        if not np.all(np.isfinite(values)):
            raise ValueError("control values must be finite")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_durations(cls, start: float, durations: Sequence[float], values) -> "ControlPath":
        durations = np.asarray(durations, dtype=float)
        return cls(start + np.concatenate(([0.0], np.cumsum(durations))), values)

    @property
    def n_intervals(self) -> int:
        return len(self.values)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def start(self) -> float:
        return float(self.breakpoints[0])

    @property
    def end(self) -> float:
        return float(self.breakpoints[-1])

    def control_at(self, t: float) -> np.ndarray:
        index = int(np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1, 0, self.n_intervals - 1))
        return self.values[index]

    def shifted(self, dt: float) -> "ControlPath":
        return ControlPath(self.breakpoints + dt, self.values)

    def concatenate(self, other: "ControlPath") -> "ControlPath":
        """Append other, re-timed to start where this path ends"""
        if other.n_intervals == 0:
            return self
        if self.n_intervals == 0:
            return other.shifted(self.end - other.start)
        tail = other.breakpoints[1:] - other.start + self.end
        return ControlPath(
            np.concatenate((self.breakpoints, tail)),
            np.vstack((self.values, other.values)),
        )

    def to_young(self) -> "YoungPath":
        """Dirac Young measure of this control"""
        return YoungPath(
            self.breakpoints,
            tuple(v.reshape(1, 2) for v in self.values),
            tuple(np.ones(1) for _ in self.values),
        )

    def to_list(self) -> List[Dict[str, Any]]:
        return self.to_young().to_list()


@dataclass(frozen=True)
class YoungPath:
    """
    Piecewise-constant Young measure: on interval i the measure sum_m weights[i][m] delta_{atoms[i][m]}

    Raises:
        WeightNormalizationError: If some weights are not positive or do not sum to 1
    """
    breakpoints: np.ndarray
    atoms: tuple
    weights: tuple

    def __post_init__(self):
        breakpoints = _frozen(self.breakpoints)
        _check_breakpoints(breakpoints)
        atoms = tuple(_frozen(np.asarray(a, dtype=float).reshape(-1, 2)) for a in self.atoms)
        weights = tuple(_frozen(np.asarray(w, dtype=float).reshape(-1)) for w in self.weights)
        if len(atoms) != len(breakpoints) - 1 or len(weights) != len(atoms):
            raise ValueError("need one atom list and one weight list per interval")
        for i, (a, w) in enumerate(zip(atoms, weights)):
            if len(a) != len(w) or len(w) == 0:
                raise WeightNormalizationError("atoms and weights must pair up", i)
            if np.any(w <= 0.0) or abs(w.sum() - 1.0) > TOLERANCES["WEIGHT_SUM"]:
                raise WeightNormalizationError(
                    f"interval {i}: weights must be positive and sum to 1 (sum {w.sum()!r})", i
                )
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def n_intervals(self) -> int:
        return len(self.atoms)

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def max_atoms(self) -> int:
        return max((len(w) for w in self.weights), default=0)

    def mean_controls(self) -> np.ndarray:
        """Barycenters sum_m w_m u_m per interval, shape (K, 2)"""
        if self.n_intervals == 0:
            return np.zeros((0, 2))
        return np.array([w @ a for a, w in zip(self.atoms, self.weights)])

    def mean_path(self) -> ControlPath:
        return ControlPath(self.breakpoints, self.mean_controls())

    def padded(self):
        """Atoms (K, M, 2) and weights (K, M), zero-padded to the largest support"""
        k, m = self.n_intervals, max(self.max_atoms, 1)
        atoms = np.zeros((k, m, 2))
        weights = np.zeros((k, m))
        for i, (a, w) in enumerate(zip(self.atoms, self.weights)):
            atoms[i, : len(w)] = a
            weights[i, : len(w)] = w
        return atoms, weights

    def concatenate(self, other: "YoungPath") -> "YoungPath":
        if other.n_intervals == 0:
            return self
        tail = other.breakpoints[1:] - other.breakpoints[0] + self.breakpoints[-1]
        return YoungPath(
            np.concatenate((self.breakpoints, tail)),
            self.atoms + other.atoms,
            self.weights + other.weights,
        )

    def to_list(self) -> List[Dict[str, Any]]:
        """JSON form: [{t0, t1, atoms: [{u1, u2, w}]}]"""
        return [
            {
                "t0": float(self.breakpoints[i]),
                "t1": float(self.breakpoints[i + 1]),
                "atoms": [
                    {"u1": float(u[0]), "u2": float(u[1]), "w": float(w)}
                    for u, w in zip(self.atoms[i], self.weights[i])
                ],
            }
            for i in range(self.n_intervals)
        ]

    @classmethod
    def from_list(cls, items: Sequence[Dict[str, Any]]) -> "YoungPath":
        if not items:
            raise ValueError("a path document needs at least one interval")
        breakpoints = [float(items[0]["t0"])] + [float(item["t1"]) for item in items]
        atoms = tuple(np.array([[a["u1"], a["u2"]] for a in item["atoms"]]) for item in items)
        weights = tuple(np.array([a["w"] for a in item["atoms"]]) for item in items)
        return cls(np.array(breakpoints), atoms, weights)


def control_path_from_list(items: Sequence[Dict[str, Any]]) -> ControlPath:
    """Decode a classical path; every interval must carry a single atom"""
    ypath = YoungPath.from_list(items)
    if ypath.max_atoms != 1:
        raise ValueError("classical control paths carry one atom per interval")
    return ypath.mean_path()


@dataclass(frozen=True)
class Curve:
    """
    A sampled trajectory

    Attributes:
        times: Sample times, strictly increasing
        points: States, shape (len(times), d)
        min_clearance: Smallest boundary clearance over the samples
        endpoint_in_target: Whether the final state lies in X
        path: The classical control that generated the curve, if any
        ypath: The Young measure that generated the curve, if any
    """
    times: np.ndarray
    points: np.ndarray
    min_clearance: float = float("nan")
    endpoint_in_target: bool = False
    path: Optional[ControlPath] = field(default=None, compare=False)
    ypath: Optional[YoungPath] = field(default=None, compare=False)

    def __post_init__(self):
        times = _frozen(self.times)
        points = _frozen(self.points)
        if points.ndim != 2 or len(points) != len(times):
            raise ValueError("points must have one row per sample time")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def sup_distance(self, other: "Curve") -> float:
        """max_t |gamma(t) - theta(t)|, both curves interpolated on the union of their grids"""
        grid = np.union1d(self.times, other.times)
        mine = np.column_stack([np.interp(grid, self.times, self.points[:, k]) for k in range(self.dim)])
        theirs = np.column_stack([np.interp(grid, other.times, other.points[:, k]) for k in range(other.dim)])
        return float(np.max(np.linalg.norm(mine - theirs, axis=1)))


def arc_length(path: ControlPath) -> float:
    """Sum over intervals of duration times |u|_2"""
    if path.n_intervals == 0:
        return 0.0
    return float(np.sum(path.durations * np.linalg.norm(path.values, axis=1)))


def save_curve_csv(curve: Curve, clearance: np.ndarray, file_path: str) -> str:
    """CSV with header t,x1,...,xd,clearance"""
    header = ["t"] + [f"x{k + 1}" for k in range(curve.dim)] + ["clearance"]
    rows = (
        [float(t)] + [float(v) for v in point] + [float(c)]
        for t, point, c in zip(curve.times, curve.points, np.broadcast_to(clearance, curve.times.shape))
    )
    return save_csv_file(file_path, header, rows)


def segment_control_index(breakpoints: np.ndarray, times: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """
    Index of the control interval covering each segment of a sample grid

    Raises:
        GridMismatchError: If the grid does not span the controls or misses a breakpoint
    """
    if abs(times[0] - breakpoints[0]) > tol or abs(times[-1] - breakpoints[-1]) > tol:
        raise GridMismatchError(
            f"curve spans [{times[0]}, {times[-1]}] but controls span [{breakpoints[0]}, {breakpoints[-1]}]"
        )
    pos = np.searchsorted(times, breakpoints)
    right = times[np.clip(pos, 0, len(times) - 1)]
    left = times[np.clip(pos - 1, 0, len(times) - 1)]
    if np.any(np.minimum(np.abs(right - breakpoints), np.abs(left - breakpoints)) > tol):
        raise GridMismatchError("control breakpoints are not curve sample times")
    mids = 0.5 * (times[:-1] + times[1:])
    return np.clip(np.searchsorted(breakpoints, mids, side="right") - 1, 0, len(breakpoints) - 2)
