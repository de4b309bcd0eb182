"""
Occupation Measure LP Module

Grid discretization of the occupation-measure relaxation. The unknowns are
nonnegative masses on (time node, state point, control atom) triples and a
terminal mass on state points inside X. The rows are the Liouville identities

    sum mu (d_s phi + grad phi . f) - sum mu_T phi(T, .) = -phi(0, x0)

for tensor monomials in scaled (s, x) and for piecewise-linear hats in x1,
one mass row per time node and the unit terminal mass.

State points form a fixed lattice: Gauss abscissae in x1 over cells with
breakpoints at +-a, +-lambda a and +-(2 lambda - 1) a, crossed with a symmetric
tensor grid in x_2..x_d over a box containing the closed domain, with the
points classified OUTSIDE removed. Every time node may use every state point.
Time s = t + a_delta runs over [0, 2 a_delta] with two Gauss nodes per cell;
on [-lambda a, lambda a] the time cells share their breakpoints with the x1
cells.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from costs.lagrangians import LagrangianKind, LagrangianLike, as_lagrangian, lagrangian
from domain.instance import Instance
from domain.region import RegionTag, classify_many, in_target
from geometry.goursat import controlled_field, phi
from logging_config import PerformanceLogger
from optimize.pdhg import LPResult, solve_lp
from performance import check_memory_budget

logger = logging.getLogger(__name__)

_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)
_CHUNK = 2048


@dataclass(frozen=True)
class OccupationGrid:
    """
    Resolution of the occupation LP

    Attributes:
        n_mid_cells: Cells on [-a, a], in time and in x1
        n_slab_cells: Cells on each of [-lambda a, -a] and [a, lambda a]
        n_rest_cells: Time cells on each rest interval
        n_cap_cells: x1 cells on each cap end [lambda a, (2 lambda - 1) a]
        n_cross: Lattice points per coordinate x_2..x_d (odd, so the axis is included)
        atoms_per_axis: Control grid resolution
        degree: Largest per-variable degree of the monomial tests
    """
    n_mid_cells: int = 8
    n_slab_cells: int = 2
    n_rest_cells: int = 2
    n_cap_cells: int = 1
    n_cross: int = 5
    atoms_per_axis: int = 3
    degree: int = 2

    def __post_init__(self):
        if min(self.n_mid_cells, self.n_slab_cells, self.n_rest_cells, self.n_cap_cells) < 1:
            raise ValueError("every time and x1 region needs at least one cell")
        if self.n_cross < 1 or self.n_cross % 2 == 0:
            raise ValueError(f"n_cross must be odd and positive, got {self.n_cross}")

    def refined(self) -> "OccupationGrid":
        """Twice as many cells everywhere; the cross lattice keeps its old points"""
        return replace(
            self,
            n_mid_cells=2 * self.n_mid_cells,
            n_slab_cells=2 * self.n_slab_cells,
            n_rest_cells=2 * self.n_rest_cells,
            n_cap_cells=2 * self.n_cap_cells,
            n_cross=2 * self.n_cross - 1,
        )

    def moving_boundaries(self, inst: Instance) -> np.ndarray:
        """Cell boundaries on [-lambda a, lambda a], shared by time and x1"""
        la = inst.lam * inst.a
        pieces = [
            np.linspace(-la, -inst.a, self.n_slab_cells + 1),
            np.linspace(-inst.a, inst.a, self.n_mid_cells + 1)[1:],
            np.linspace(inst.a, la, self.n_slab_cells + 1)[1:],
        ]
        return np.concatenate(pieces)

    def cell_boundaries(self, inst: Instance) -> np.ndarray:
        """Time cell boundaries in original time t"""
        la = inst.lam * inst.a
        return np.concatenate(
            (
                np.linspace(-inst.a_delta, -la, self.n_rest_cells + 1)[:-1],
                self.moving_boundaries(inst),
                np.linspace(la, inst.a_delta, self.n_rest_cells + 1)[1:],
            )
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_mid_cells": self.n_mid_cells,
            "n_slab_cells": self.n_slab_cells,
            "n_rest_cells": self.n_rest_cells,
            "n_cap_cells": self.n_cap_cells,
            "n_cross": self.n_cross,
            "atoms_per_axis": self.atoms_per_axis,
            "degree": self.degree,
        }


@dataclass
class OccupationLP:
    """
    Assembled LP: min cost @ z subject to matrix @ z = rhs, z >= 0

    Interior variable (i, p, k) sits at index (i * n_states + p) * n_atoms + k;
    the terminal masses follow.
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    cost: np.ndarray
    node_times: np.ndarray
    node_weights: np.ndarray
    states: np.ndarray
    atoms: np.ndarray
    terminal_points: np.ndarray
    row_counts: Dict[str, int] = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_interior(self) -> int:
        return len(self.node_times) * self.n_states * len(self.atoms)

    @property
    def n_variables(self) -> int:
        return self.n_interior + len(self.terminal_points)

    @property
    def n_constraints(self) -> int:
        return self.matrix.shape[0]

    def variable(self, node: int, point: int, atom: int) -> int:
        return (node * self.n_states + point) * len(self.atoms) + atom

    def residual(self, z: np.ndarray) -> float:
        """Relative constraint residual |Az - b| / (1 + |b|)"""
        return float(np.linalg.norm(self.matrix @ z - self.rhs)) / (1.0 + float(np.linalg.norm(self.rhs)))

    def objective(self, z: np.ndarray) -> float:
        return float(self.cost @ z)


@dataclass
class OccupationResult:
    value: float
    residuals: Dict[str, float]
    n_states: int
    n_variables: int
    n_constraints: int
    iterations: int
    converged: bool
    solver: str
    grid: Dict[str, Any]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "residuals": self.residuals,
            "n_states": self.n_states,
            "n_variables": self.n_variables,
            "n_constraints": self.n_constraints,
            "iterations": self.iterations,
            "converged": self.converged,
            "solver": self.solver,
            "grid": self.grid,
        }


def _gauss_nodes(bounds: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    halves = 0.5 * np.diff(bounds)
    nodes = (mids[:, None] + halves[:, None] * _GAUSS[None, :]).ravel()
    return nodes, np.repeat(halves, len(_GAUSS))


def _time_nodes(inst: Instance, grid: OccupationGrid) -> Tuple[np.ndarray, np.ndarray]:
    return _gauss_nodes(grid.cell_boundaries(inst))


def x1_lattice(inst: Instance, grid: OccupationGrid) -> np.ndarray:
    """Sorted x1 values of the state lattice"""
    la = inst.lam * inst.a
    moving, _ = _gauss_nodes(grid.moving_boundaries(inst))
    cap, _ = _gauss_nodes(np.linspace(la, inst.tip, grid.n_cap_cells + 1))
    return np.sort(np.concatenate((-cap, [-la], moving, [la], cap)))


def cross_half_widths(inst: Instance, x1_values: np.ndarray) -> np.ndarray:
    """
    Half-widths of a box in x_2..x_d containing every lattice slice of the domain

    In straightened coordinates the tube and caps lie within 2/b of the axis in
    y_2..y_{d-2} and within 3/b in the last two coordinates; phi is linear in
    y_2..y_d for fixed y1, so the corners of that box bound its image.
    """
    widths = np.full(inst.d - 1, 2.0 / inst.b)
    widths[-2:] = 3.0 / inst.b
    corners = np.array(list(itertools.product((-1.0, 1.0), repeat=inst.d - 1))) * widths
    y = np.column_stack((np.repeat(x1_values, len(corners)), np.tile(corners, (len(x1_values), 1))))
    return np.max(np.abs(phi(y)[:, 1:]), axis=0)


def lattice_states(inst: Instance, grid: OccupationGrid) -> np.ndarray:
    """Lattice points of the state box that are not classified OUTSIDE; shape (S, d)"""
    x1_values = x1_lattice(inst, grid)
    half = cross_half_widths(inst, x1_values)
    axes = [np.linspace(-h, h, grid.n_cross) for h in half]
    cross = np.array(list(itertools.product(*axes)))
    points = np.column_stack((np.repeat(x1_values, len(cross)), np.tile(cross, (len(x1_values), 1))))
    keep = np.array([tag is not RegionTag.OUTSIDE for tag in classify_many(points, inst)])
    return points[keep]


def _scales(inst: Instance, horizon: float) -> np.ndarray:
    """Affine maps to O(1) variables: s -> 2s/T - 1, x1 -> x1/tip, x_k -> b x_k"""
    return np.concatenate(([2.0 / horizon, 1.0 / inst.tip], np.full(inst.d - 1, inst.b)))


def _scaled(s: np.ndarray, x: np.ndarray, scales: np.ndarray) -> np.ndarray:
    return np.column_stack((s * scales[0] - 1.0, x * scales[1:]))


def _exponents(n_vars: int, degree: int) -> np.ndarray:
    return np.array(list(itertools.product(range(degree + 1), repeat=n_vars)), dtype=int)


def _monomial_values(v: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """phi_e(v) for every row e; shape (len(v), len(exponents))"""
    return np.prod(v[:, None, :] ** exponents[None, :, :], axis=2)


def _monomial_derivatives(v: np.ndarray, rates: np.ndarray, exponents: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """d/ds phi_e along velocity rates (ds/ds = 1 first, then f); shape (len(v), len(exponents))"""
    powers = v[:, None, :] ** exponents[None, :, :]
    lowered = np.where(
        exponents[None, :, :] > 0,
        exponents[None, :, :] * v[:, None, :] ** np.maximum(exponents[None, :, :] - 1, 0),
        0.0,
    )
    total = np.zeros(powers.shape[:2])
    for k in range(v.shape[1]):
        others = np.prod(np.delete(powers, k, axis=2), axis=2)
        total += lowered[:, :, k] * scales[k] * rates[:, None, k] * others
    return total


def _hat_nodes(inst: Instance, grid: OccupationGrid) -> np.ndarray:
    return np.concatenate(([-inst.tip], np.linspace(-inst.a, inst.a, grid.n_mid_cells + 1), [inst.tip]))


def _hat_values(x1: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    eye = np.eye(len(nodes))
    return np.column_stack([np.interp(x1, nodes, eye[m], left=0.0, right=0.0) for m in range(len(nodes))])


def _hat_slopes(x1: np.ndarray, u1: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    """One-sided hat derivatives in the direction of motion sign(u1); zero outside the node range"""
    right = np.searchsorted(nodes, x1, side="right") - 1
    left = np.searchsorted(nodes, x1, side="left") - 1
    interval = np.where(u1 > 0.0, right, left)
    inside = (interval >= 0) & (interval < len(nodes) - 1) & (u1 != 0.0)
    k = np.clip(interval, 0, len(nodes) - 2)
    width = nodes[k + 1] - nodes[k]
    slopes = np.zeros((len(x1), len(nodes)))
    rows = np.flatnonzero(inside)
    slopes[rows, k[rows]] = -1.0 / width[rows]
    slopes[rows, k[rows] + 1] = 1.0 / width[rows]
    return slopes


def assemble_occupation_lp(
    inst: Instance,
    grid: Optional[OccupationGrid] = None,
    kind: LagrangianLike = LagrangianKind.VEEVEE,
    memory_fraction: float = 0.5,
) -> OccupationLP:
    """
    Build the occupation LP on a grid

    Raises:
        MemoryBudgetError: If the dense constraint blocks would not fit the memory budget
    """
    grid = grid or OccupationGrid()
    lagr = as_lagrangian(kind, inst)
    horizon = 2.0 * inst.a_delta
    times, weights = _time_nodes(inst, grid)
    states = lattice_states(inst, grid)
    atoms = inst.control_set.atom_grid(grid.atoms_per_axis)
    n_times, n_states, n_atoms = len(times), len(states), len(atoms)

    var_node = np.repeat(np.arange(n_times), n_states * n_atoms)
    var_point = np.tile(np.repeat(np.arange(n_states), n_atoms), n_times)
    var_atom = np.tile(np.arange(n_atoms), n_times * n_states)
    terminal_points = np.flatnonzero(in_target(states, inst))
    n_int, n_term = len(var_node), len(terminal_points)

    exponents = _exponents(inst.d + 1, grid.degree)
    hat_nodes = _hat_nodes(inst, grid)
    n_rows = len(exponents) + len(hat_nodes) + n_times + 1
    check_memory_budget(8 * (len(exponents) + len(hat_nodes)) * (n_int + n_term) * 3, memory_fraction, "occupation LP")

    scales = _scales(inst, horizon)
    x_pairs = np.repeat(states, n_atoms, axis=0)
    u_pairs = np.tile(atoms, (n_states, 1))
    pair_cost = np.asarray(lagrangian(lagr, x_pairs, u_pairs, inst), dtype=float)
    cost = np.concatenate((np.tile(pair_cost, n_times), np.zeros(n_term)))
    pair_rates = np.column_stack((np.ones(len(x_pairs)), controlled_field(x_pairs, u_pairs)))
    x = np.tile(x_pairs, (n_times, 1))
    u = np.tile(u_pairs, (n_times, 1))
    rates = np.tile(pair_rates, (n_times, 1))
    s = times[var_node] + inst.a_delta

    mono = np.empty((n_int, len(exponents)))
    for lo in range(0, n_int, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        mono[sl] = _monomial_derivatives(_scaled(s[sl], x[sl], scales), rates[sl], exponents, scales)
    term_states = states[terminal_points]
    mono_term = -_monomial_values(_scaled(np.full(n_term, horizon), term_states, scales), exponents)
    mono_rhs = -_monomial_values(_scaled(np.zeros(1), inst.x0[None, :], scales), exponents)[0]

    hats = _hat_slopes(x[:, 0], u[:, 0], hat_nodes) * u[:, :1]
    hats_term = -_hat_values(term_states[:, 0], hat_nodes)
    hats_rhs = -_hat_values(inst.x0[:1], hat_nodes)[0]

    blocks = sp.vstack(
        [
            sp.csr_matrix(np.vstack((mono, mono_term)).T),
            sp.csr_matrix(np.vstack((hats, hats_term)).T),
            sp.csr_matrix((np.ones(n_int), (var_node, np.arange(n_int))), shape=(n_times, n_int + n_term)),
            sp.csr_matrix(np.concatenate((np.zeros(n_int), np.ones(n_term)))[None, :]),
        ]
    ).tocsr()
    blocks.eliminate_zeros()
    rhs = np.concatenate((mono_rhs, hats_rhs, weights, [1.0]))
    logger.debug(
        f"Occupation LP: {n_states} states, {n_int + n_term} variables, "
        f"{n_rows} constraints, {blocks.nnz} nonzeros"
    )
    return OccupationLP(
        matrix=blocks,
        rhs=rhs,
        cost=cost,
        node_times=times,
        node_weights=weights,
        states=states,
        atoms=atoms,
        terminal_points=terminal_points,
        row_counts={
            "monomials": len(exponents),
            "hats": len(hat_nodes),
            "mass": n_times,
            "terminal": 1,
        },
    )


def _atom_index(atoms: np.ndarray, u: Sequence[float]) -> int:
    matches = np.flatnonzero(np.all(np.isclose(atoms, u), axis=1))
    if not matches.size:
        raise ValueError(f"control {tuple(u)} is not an LP atom")
    return int(matches[0])


def state_index(lp: OccupationLP, point: np.ndarray) -> int:
    """Index of a lattice state; raises ValueError when the point is not on the lattice"""
    matches = np.flatnonzero(np.all(np.isclose(lp.states, point, rtol=0.0, atol=1e-12), axis=1))
    if not matches.size:
        raise ValueError(f"state {tuple(np.round(point, 6))} is not on the LP lattice")
    return int(matches[0])


def assemble_reference_measure(lp: OccupationLP, inst: Instance) -> np.ndarray:
    """
    The occupation measure of the relaxed reference minimizer on the LP grid

    Each time node carries its Gauss weight at the axis point x1 = t (x0 before
    the motion, x1 after it): a quarter on every corner at rest, half on (1, 1)
    and (1, -1) while moving. The terminal mass sits on x1.
    """
    la = inst.lam * inst.a
    z = np.zeros(lp.n_variables)
    rest = [_atom_index(lp.atoms, c) for c in ((1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0))]
    moving = [_atom_index(lp.atoms, c) for c in ((1.0, 1.0), (1.0, -1.0))]
    start, end = state_index(lp, inst.x0), state_index(lp, inst.x1)
    for i, (t, w) in enumerate(zip(lp.node_times, lp.node_weights)):
        if t <= -la:
            point, chosen, share = start, rest, 0.25
        elif t >= la:
            point, chosen, share = end, rest, 0.25
        else:
            axis = np.zeros(inst.d)
            axis[0] = t
            point, chosen, share = state_index(lp, axis), moving, 0.5
        for atom in chosen:
            z[lp.variable(i, point, atom)] += share * w
    terminal = np.flatnonzero(lp.terminal_points == end)
    z[lp.n_interior + terminal[0]] = 1.0
    return z


def occupation_lp(
    inst: Instance,
    grid: Optional[OccupationGrid] = None,
    kind: LagrangianLike = LagrangianKind.VEEVEE,
    solver: str = "pdhg",
    tol: float = 1e-4,
    max_iterations: int = 200_000,
    stall_iterations: int = 10_000,
    memory_fraction: float = 0.5,
) -> OccupationResult:
    """
    Minimize the running cost over grid occupation measures

    Raises:
        MemoryBudgetError: If the grid is too fine for the memory budget
        SolverStallError: If the solver stops making progress
    """
    grid = grid or OccupationGrid()
    with PerformanceLogger(f"occupation_lp[{solver}]"):
        lp = assemble_occupation_lp(inst, grid, kind, memory_fraction)
        if solver == "pdhg":
            result: LPResult = solve_lp(
                lp.matrix, lp.rhs, lp.cost, "pdhg", tol=tol,
                max_iterations=max_iterations, stall_iterations=stall_iterations,
            )
        else:
            result = solve_lp(lp.matrix, lp.rhs, lp.cost, solver)
    logger.info(
        f"Occupation LP value {result.value:.6f} on {lp.n_states} states "
        f"({result.solver}, {result.iterations} iterations)"
    )
    return OccupationResult(
        value=result.value,
        residuals={
            "primal": result.primal_residual,
            "dual": result.dual_residual,
            "gap": result.gap,
        },
        n_states=lp.n_states,
        n_variables=lp.n_variables,
        n_constraints=lp.n_constraints,
        iterations=result.iterations,
        converged=result.converged,
        solver=result.solver,
        grid=grid.to_dict(),
    )


def lp_refinement_study(
    inst: Instance, grid: Optional[OccupationGrid] = None, steps: int = 1, **kwargs
) -> List[Dict[str, Any]]:
    """LP values on the grid and `steps` successive refinements"""
    grid = grid or OccupationGrid()
    study = []
    for _ in range(steps + 1):
        result = occupation_lp(inst, grid, **kwargs)
        study.append(
            {"grid": grid.to_dict(), "value": result.value, "n_states": result.n_states, "residuals": result.residuals}
        )
        grid = grid.refined()
    return study
