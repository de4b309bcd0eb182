"""
Lagrangians Module

The running-cost densities L^v (VEE), L^vv (VEEVEE), L^- (FLAT) and the
mollified L^vv, together with the smoothed terminal penalty alpha * g_eps.

All densities share the form chi_[-a,a](x1) * (A(u) + r(x)^2) where only the
control part A differs, which is what the segment quadrature relies on.
"""

import itertools
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from constants import CORNERS
from domain.instance import Instance
from domain.region import in_target
from exceptions import InstanceValidationError, WeightNormalizationError
from geometry.goursat import phi, radial

logger = logging.getLogger(__name__)

_CORNERS = np.array(CORNERS, dtype=float)


class LagrangianKind(Enum):
    """Running-cost densities"""
    VEE = "VEE"
    VEEVEE = "VEEVEE"
    FLAT = "FLAT"
    MOLLIFIED = "MOLLIFIED"


@dataclass(frozen=True)
class Lagrangian:
    """
    A density together with its mollification radius

    Attributes:
        kind: Density kind
        eps: Mollification radius (MOLLIFIED only)
        nodes_per_axis: Gauss-Legendre nodes per axis of the mollifier table
    """
    kind: LagrangianKind
    eps: float = 0.0
    nodes_per_axis: int = 5

    @classmethod
    def mollified(cls, eps: float, nodes_per_axis: int = 5) -> "Lagrangian":
        return cls(LagrangianKind.MOLLIFIED, float(eps), int(nodes_per_axis))

    @property
    def is_mollified(self) -> bool:
        return self.kind is LagrangianKind.MOLLIFIED

    @property
    def base_kind(self) -> LagrangianKind:
        """The unsmoothed density the mollifier acts on"""
        return LagrangianKind.VEEVEE if self.is_mollified else self.kind

    @property
    def label(self) -> str:
        return f"MOLLIFIED({self.eps:g})" if self.is_mollified else self.kind.value

    def validate(self, inst: Instance) -> None:
        """
        Raises:
            InstanceValidationError: If a mollification radius is outside (0, (lambda - 1) a)
        """
        if self.is_mollified and not 0.0 < self.eps < (inst.lam - 1.0) * inst.a:
            raise InstanceValidationError(
                "Invalid mollifier",
                [("EPS_RANGE", f"eps must lie in (0, {(inst.lam - 1.0) * inst.a:g}), got {self.eps!r}")],
            )


LagrangianLike = Union[Lagrangian, LagrangianKind, str]


def as_lagrangian(kind: LagrangianLike, inst: Instance = None) -> Lagrangian:
    """
    Normalize a kind, kind name or Lagrangian into a Lagrangian

    A bare MOLLIFIED kind takes its radius from the instance's eps_moll.
    """
    if isinstance(kind, Lagrangian):
        lagr = kind
    else:
        kind = LagrangianKind(kind.value if isinstance(kind, LagrangianKind) else str(kind).upper())
        eps = inst.eps_moll if (kind is LagrangianKind.MOLLIFIED and inst is not None) else 0.0
        lagr = Lagrangian(kind, eps)
    if inst is not None:
        lagr.validate(inst)
    return lagr


def delta_wells(u) -> np.ndarray:
    """Delta(u): Euclidean distance from u to the nearest corner (+-1, +-1)"""
    u = np.asarray(u, dtype=float)
    dist = np.linalg.norm(u[..., None, :] - _CORNERS, axis=-1).min(axis=-1)
    return float(dist) if np.ndim(dist) == 0 else dist


def control_part(kind: LagrangianKind, u) -> np.ndarray:
    """A(u) such that L = chi(x1) (A(u) + r^2)"""
    u = np.asarray(u, dtype=float)
    if kind is LagrangianKind.VEE:
        return np.max(np.abs(u), axis=-1)
    if kind is LagrangianKind.VEEVEE:
        return 1.0 + 2.0 * np.asarray(delta_wells(u))
    if kind is LagrangianKind.FLAT:
        return np.ones(u.shape[:-1])
    raise ValueError(f"{kind} has no pointwise control part")


def support_indicator(x1, inst: Instance) -> np.ndarray:
    """chi_[-a,a](x1)"""
    return (np.abs(np.asarray(x1, dtype=float)) <= inst.a).astype(float)


def _pointwise(kind: LagrangianKind, x: np.ndarray, u: np.ndarray, inst: Instance) -> np.ndarray:
    r = np.asarray(radial(x))
    return support_indicator(x[..., 0], inst) * (control_part(kind, u) + r**2)


@lru_cache(maxsize=16)
def mollifier_table(dim: int, nodes_per_axis: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Quadrature table for the normalized bump exp(-1/(1-|z|^2)) on the unit ball of R^dim

    Tensor Gauss-Legendre nodes on [-1,1]^dim, restricted to the open ball and
    renormalized. The returned arrays are read-only and shared between threads.

    Raises:
        WeightNormalizationError: If no node falls inside the ball
    """
    nodes_1d, weights_1d = np.polynomial.legendre.leggauss(nodes_per_axis)
    nodes = np.array(list(itertools.product(nodes_1d, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(weights_1d, repeat=dim))), axis=1)
    norm2 = np.sum(nodes**2, axis=1)
    inside = norm2 < 1.0
    nodes = nodes[inside]
    weights = weights[inside] * np.exp(-1.0 / (1.0 - norm2[inside]))
    total = weights.sum()
    if not total > 0.0:
        raise WeightNormalizationError(
            f"{nodes_per_axis} nodes per axis place no node inside the unit ball of R^{dim}"
        )
    weights = weights / total
    nodes.setflags(write=False)
    weights.setflags(write=False)
    logger.debug(f"Mollifier table dim={dim} n={nodes_per_axis}: {len(weights)} nodes")
    return nodes, weights


def lagrangian(kind: LagrangianLike, x, u, inst: Instance) -> np.ndarray:
    """
    Evaluate a running-cost density at state(s) x and control(s) u

    MOLLIFIED evaluates the convolution with the bump of radius eps in
    (x, u)-space by the cached quadrature table.
    """
    lagr = as_lagrangian(kind, inst)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if not lagr.is_mollified:
        value = _pointwise(lagr.kind, x, u, inst)
    else:
        nodes, weights = mollifier_table(inst.d + 2, lagr.nodes_per_axis)
        xs = x[..., None, :] + lagr.eps * nodes[:, : inst.d]
        us = u[..., None, :] + lagr.eps * nodes[:, inst.d:]
        value = _pointwise(LagrangianKind.VEEVEE, xs, us, inst) @ weights
    return float(value) if np.ndim(value) == 0 else value


def mollification_constant(
    inst: Instance,
    eps: float,
    n_samples: int = 10_000,
    seed: int = 0,
    nodes_per_axis: int = 5,
    corner_share: float = 0.1,
    chunk: int = 256,
) -> float:
    """
    sup |L_eps - L^vv| / eps over a random sample away from the support edges

    States are phi(y) with y1 uniform on [-a_delta, a_delta] minus the eps-bands
    around +-a and the trailing coordinates uniform in a box of half-width 2/b.
    Controls are uniform on the square; a `corner_share` of them sit on a corner,
    where the wells of L^vv have their kinks.
    """
    lagr = as_lagrangian(Lagrangian.mollified(eps, nodes_per_axis), inst)
    rng = np.random.default_rng(seed)
    y1 = np.empty(0)
    while len(y1) < n_samples:
        draw = rng.uniform(-inst.a_delta, inst.a_delta, size=2 * n_samples)
        y1 = np.concatenate((y1, draw[np.abs(np.abs(draw) - inst.a) > eps]))
    trailing = rng.uniform(-2.0 / inst.b, 2.0 / inst.b, size=(n_samples, inst.d - 1))
    x = phi(np.column_stack((y1[:n_samples], trailing)))

    half = inst.control_set.half_width
    u = rng.uniform(-half, half, size=(n_samples, 2))
    snap = rng.random(n_samples) < corner_share
    u[snap] = half * _CORNERS[rng.integers(len(_CORNERS), size=int(snap.sum()))]

    worst = 0.0
    for lo in range(0, n_samples, chunk):
        sl = slice(lo, lo + chunk)
        smooth = lagrangian(lagr, x[sl], u[sl], inst)
        base = _pointwise(LagrangianKind.VEEVEE, x[sl], u[sl], inst)
        worst = max(worst, float(np.max(np.abs(smooth - base))))
    logger.debug(f"Mollification constant at eps={eps:g}: {worst / eps:.6g}")
    return worst / eps


@dataclass(frozen=True)
class TerminalCost:
    """alpha * g_eps with g_eps the mollified indicator of the complement of X"""
    alpha: float
    eps: float
    nodes_per_axis: int = 5

    def __post_init__(self):
        if not (self.alpha > 0.0 and self.eps > 0.0):
            raise ValueError("terminal cost needs alpha > 0 and eps > 0")

    def to_dict(self):
        return {"alpha": self.alpha, "eps": self.eps, "nodes_per_axis": self.nodes_per_axis}


def terminal_penalty(tc: TerminalCost, x, inst: Instance):
    """
    alpha * g_eps(x), a value in [0, alpha]

    g_eps is 1 wherever the whole eps-ball around x misses X and 0 wherever it lies inside X.
    """
    x = np.asarray(x, dtype=float)
    nodes, weights = mollifier_table(inst.d, tc.nodes_per_axis)
    shifted = x[..., None, :] + tc.eps * nodes
    outside = 1.0 - np.asarray(in_target(shifted, inst), dtype=float)
    value = tc.alpha * (outside @ weights)
    return float(value) if np.ndim(value) == 0 else value
