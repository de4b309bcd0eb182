"""
Goursat Structure Module

Closed-form chained fields f_1, ..., f_d on R^d, their Lie brackets, the
straightening map phi(x) = A_{x1} x and the radial coordinate r.

Indices of vector fields are 1-based (f_1 is the drift along e_1); array
coordinates are 0-based. Every function accepts a single point of shape (d,)
or a stack of points of shape (..., d).
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from constants import BRACKET_STEP
from exceptions import IndexRangeError

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def _inverse_factorials(n: int) -> np.ndarray:
    table = np.array([1.0 / math.factorial(j) for j in range(n + 1)])
    table.setflags(write=False)
    return table


def _scaled_powers(t: np.ndarray, n: int) -> np.ndarray:
    """Stack of t^m / m! for m = 0..n along a new last axis"""
    t = np.asarray(t, dtype=float)
    powers = np.empty(t.shape + (n + 1,))
    powers[..., 0] = 1.0
    for m in range(1, n + 1):
        powers[..., m] = powers[..., m - 1] * t / m
    return powers


@dataclass(frozen=True)
class FrameMatrix:
    """The matrix A_t whose columns are f_1, ..., f_d evaluated on the axis at time t"""
    t: float
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def inverse(self) -> "FrameMatrix":
        return frame_matrix(-self.t, self.dim)


def frame_matrix(t: float, d: int) -> FrameMatrix:
    """
    Build A_t: first column e_1, entries t^{j-k}/(j-k)! below the diagonal of the rest

    A_t is lower-triangular with unit diagonal and A_t^{-1} = A_{-t}.
    """
    powers = _scaled_powers(float(t), d)
    entries = np.zeros((d, d))
    entries[0, 0] = 1.0
    for k in range(1, d):
        entries[k:, k] = powers[: d - k]
    entries.setflags(write=False)
    return FrameMatrix(t=float(t), entries=entries)


def vector_field(k: int, x) -> np.ndarray:
    """
    Evaluate f_k at x

    Args:
        k: Field index, 1 <= k <= d
        x: Point(s) of shape (..., d)

    Returns:
        f_1 = e_1; for k >= 2 the entry j (1-based) is x_1^{j-k}/(j-k)! when j >= k

    Raises:
        IndexRangeError: If k is outside 1..d
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if not 1 <= k <= d:
        raise IndexRangeError(f"field index {k} outside 1..{d}", k)

    out = np.zeros_like(x)
    if k == 1:
        out[..., 0] = 1.0
        return out

    powers = _scaled_powers(x[..., 0], d - k)
    out[..., k - 1:] = powers
    return out


def controlled_field(x, u) -> np.ndarray:
    """u_1 f_1(x) + u_2 f_2(x) for point(s) x and control(s) u of shape (..., 2)"""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return u[..., 0:1] * vector_field(1, x) + u[..., 1:2] * vector_field(2, x)


def lie_bracket_check(k: int, l: int, x, h: float = BRACKET_STEP) -> np.ndarray:
    """
    Central-difference approximation of [f_k, f_l](x) = Df_l f_k - Df_k f_l

    Only used as an oracle against the closed-form fields; the error is O(h^2).
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    x = np.asarray(x, dtype=float)
    fk = vector_field(k, x)
    fl = vector_field(l, x)
    dl_along_k = (vector_field(l, x + h * fk) - vector_field(l, x - h * fk)) / (2.0 * h)
    dk_along_l = (vector_field(k, x + h * fl) - vector_field(k, x - h * fl)) / (2.0 * h)
    return dl_along_k - dk_along_l


def _apply_frame(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    # A_t x without forming the matrices: y_j = sum_{k=1}^{j} t^{j-k}/(j-k)! x_k
    d = x.shape[-1]
    powers = _scaled_powers(t, d - 2)
    y = np.array(x, dtype=float, copy=True)
    for j in range(2, d):
        y[..., j] = np.sum(powers[..., j - 1:: -1][..., :j] * x[..., 1: j + 1], axis=-1)
    return y


def phi(x) -> np.ndarray:
    """Straightening map phi(x) = A_{x1} x"""
    x = np.asarray(x, dtype=float)
    return _apply_frame(x, x[..., 0])


def phi_inv(x) -> np.ndarray:
    """Inverse straightening map phi^{-1}(x) = A_{-x1} x"""
    x = np.asarray(x, dtype=float)
    return _apply_frame(x, -x[..., 0])


def radial(x) -> np.ndarray:
    """r(x): Euclidean norm of coordinates 3..d of phi^{-1}(x)"""
    y = phi_inv(x)
    r = np.linalg.norm(y[..., 2:], axis=-1)
    return float(r) if np.ndim(r) == 0 else r


def straightened_field(y, u) -> np.ndarray:
    """Dynamics in straightened coordinates: y1' = u1, y2' = u2, y_k' = -u1 y_{k-1} for k >= 3"""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    out = np.zeros(np.broadcast_shapes(y.shape, u.shape[:-1] + (y.shape[-1],)))
    out[..., 0] = u[..., 0]
    out[..., 1] = u[..., 1]
    out[..., 2:] = -u[..., 0:1] * y[..., 1:-1]
    return out


def flow_from(x, u, s) -> np.ndarray:
    """
    Exact state after holding control u for time s starting at x

    x_1 moves affinely and x_k gains u_2 times the integral of x_1^{k-2}/(k-2)!,
    which has a finite expansion. Broadcasts over leading axes of x, u and s.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    d = x.shape[-1]
    shape = np.broadcast_shapes(x.shape[:-1], u.shape[:-1], s.shape)
    out = np.array(np.broadcast_to(x, shape + (d,)), dtype=float)
    out[..., 0] = x[..., 0] + u[..., 0] * s
    out[..., 1:] += u[..., 1:2] * _axis_increments(x[..., 0], u[..., 0], s, d)
    return out


def _axis_increments(x1, u1, s, d: int) -> np.ndarray:
    """I_m = integral over [0, s] of (x1 + u1 t)^m / m! for m = 0..d-2"""
    x1 = np.asarray(x1, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    s = np.asarray(s, dtype=float)
    shape = np.broadcast_shapes(x1.shape, u1.shape, s.shape)
    inv_fact = _inverse_factorials(d)
    x_pows = _scaled_powers(np.broadcast_to(x1, shape), d - 2)
    us = np.broadcast_to(u1 * s, shape)
    s_b = np.broadcast_to(s, shape)
    increments = np.zeros(shape + (d - 1,))
    # term j: x1^{m-j}/(m-j)! * u1^j s^{j+1}/(j+1)!
    for j in range(d - 1):
        term = s_b * us**j * inv_fact[j + 1]
        increments[..., j:] += x_pows[..., : d - 1 - j] * term[..., None]
    return increments


def chained_states(x0, controls, durations) -> np.ndarray:
    """
    Exact states at the breakpoints of a piecewise-constant control

    Because f_2 depends on x_1 only, every increment is fixed by the x_1 value
    at the start of its interval, so the whole chain is a pair of cumulative sums.

    Args:
        x0: Initial point (d,)
        controls: Array (K, 2) of interval controls
        durations: Array (K,) of nonnegative interval lengths

    Returns:
        Array (K + 1, d) of states, the first row being x0
    """
    x0 = np.asarray(x0, dtype=float)
    controls = np.asarray(controls, dtype=float).reshape(-1, 2)
    durations = np.asarray(durations, dtype=float).reshape(-1)
    d = x0.shape[0]
    states = np.empty((len(durations) + 1, d))
    states[0] = x0
    if len(durations) == 0:
        return states

    steps_x1 = controls[:, 0] * durations
    x1_starts = x0[0] + np.concatenate(([0.0], np.cumsum(steps_x1)[:-1]))
    deltas = np.empty((len(durations), d))
    deltas[:, 0] = steps_x1
    deltas[:, 1:] = controls[:, 1:2] * _axis_increments(x1_starts, controls[:, 0], durations, d)
    states[1:] = x0 + np.cumsum(deltas, axis=0)
    return states


def straightened_flow(y, u, s) -> np.ndarray:
    """
    Exact flow of the straightened dynamics

    y_k(s) = sum_{j=2}^{k} (-u1 s)^{k-j}/(k-j)! y_j + u2 (-u1)^{k-2} s^{k-1}/(k-1)!
    for k >= 2 (1-based). Evaluating in these coordinates avoids the cancellation
    that phi^{-1} of an original-coordinate flow suffers for tiny displacements.
    """
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    s = np.asarray(s, dtype=float)
    d = y.shape[-1]
    shape = np.broadcast_shapes(y.shape[:-1], u.shape[:-1], s.shape)
    u1 = np.broadcast_to(u[..., 0], shape)
    u2 = np.broadcast_to(u[..., 1], shape)
    s_b = np.broadcast_to(s, shape)
    y_b = np.broadcast_to(y, shape + (d,))

    decay = _scaled_powers(-u1 * s_b, d - 2)
    out = np.empty(shape + (d,))
    out[..., 0] = y_b[..., 0] + u1 * s_b
    inv_fact = _inverse_factorials(d)
    for k in range(1, d):
        # 0-based k corresponds to 1-based k + 1
        acc = np.sum(decay[..., k - 1:: -1][..., :k] * y_b[..., 1: k + 1], axis=-1)
        acc = acc + u2 * (-u1) ** (k - 1) * s_b**k * inv_fact[k]
        out[..., k] = acc
    return out
