"""
Ball-Box Module

Empirical ball-box diagnostics: random U_square-horizontal curves of arc
length at most rho from a base point, their displacements in privileged
coordinates at that point, the fitted log-log scaling exponents and the
empirical constant C = max_j disp_j / rho^{j-1}.

In straightened coordinates y = (y1, w) the dynamics read y1' = u1 and
w' = -u1 S w + u2 e_1 with S the lower shift, so the part of w(t) carried
along from w(0) is the u2 = 0 flow. Subtracting it leaves the displacement in
privileged coordinates, which is independent of the base point.

Every radius gets its own samples, drawn from default_rng([seed, k]) for the
k-th radius.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np

from constants import BALLBOX_EXPONENTS
from domain.instance import Instance
from domain.region import spiral_center
from exceptions import PreconditionError
from geometry.goursat import phi, phi_inv, straightened_flow

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]


@dataclass(frozen=True)
class BallBoxSample:
    """Largest displacement per privileged coordinate over all sampled curves"""
    rho: float
    displacements: np.ndarray
    n_samples: int
    base_point: Optional[np.ndarray] = None

    def to_dict(self) -> Dict[str, Any]:
        data = {"rho": self.rho, "displacements": self.displacements.tolist(), "n_samples": self.n_samples}
        if self.base_point is not None:
            data["base_point"] = self.base_point.tolist()
        return data


def default_radii(inst: Instance, exponents: Sequence[int] = BALLBOX_EXPONENTS) -> np.ndarray:
    """rho = 2^{-k} (2/b)"""
    return np.array([2.0 ** (-k) * 2.0 / inst.b for k in exponents])


def generic_base_point(inst: Instance) -> np.ndarray:
    """
    An interior point of the spiral tube away from the axis

    y1 = 0.37 a and the trailing coordinates sit halfway to the tube center,
    pushed 0.2/b along y2, which keeps them 0.54/b from the center.
    """
    y1 = 0.37 * inst.a
    y = np.zeros(inst.d)
    y[0] = y1
    y[1:] = 0.5 * spiral_center(y1, inst)
    y[1] += 0.2 / inst.b
    return phi(y)


def _draw(rng: np.random.Generator, n_samples: int, segments: int):
    controls = rng.uniform(-1.0, 1.0, size=(n_samples, segments, 2))
    shares = rng.dirichlet(np.ones(segments), size=n_samples)
    fractions = rng.uniform(0.0, 1.0, size=n_samples)
    speeds = np.maximum(np.linalg.norm(controls, axis=2), 1e-12)
    # durations giving arc length fraction * rho at rho = 1
    unit_durations = shares * fractions[:, None] / speeds
    return controls, unit_durations


def privileged_displacements(y0: np.ndarray, controls: np.ndarray, durations: np.ndarray) -> np.ndarray:
    """
    Largest |displacement| per coordinate along each sampled curve, in privileged coordinates at y0

    Args:
        y0: Base point in straightened coordinates (d,)
        controls: Segment controls (n, segments, 2)
        durations: Segment durations (n, segments)

    Returns:
        Array (d,) of maxima over curves and breakpoints
    """
    n, segments = durations.shape
    drift_controls = controls.copy()
    drift_controls[..., 1] = 0.0
    y = np.broadcast_to(y0, (n, len(y0))).copy()
    carried = y.copy()
    largest = np.zeros(len(y0))
    for k in range(segments):
        y = straightened_flow(y, controls[:, k], durations[:, k])
        carried = straightened_flow(carried, drift_controls[:, k], durations[:, k])
        z = y - carried
        z[:, 0] = y[:, 0] - y0[0]
        largest = np.maximum(largest, np.max(np.abs(z), axis=0))
    return largest


def ballbox_probe(
    inst: Instance,
    p=None,
    rho: float = None,
    n_samples: int = 1000,
    seed: Seed = 0,
    segments: int = 8,
) -> BallBoxSample:
    """
    Max privileged displacement per coordinate over n random horizontal curves of arc length <= rho from p

    Args:
        inst: Instance
        p: Base point (defaults to generic_base_point)
        rho: Arc-length radius, 0 < rho <= 2/b
        n_samples: Number of random curves
        seed: Generator seed, an int or a sequence of ints
        segments: Piecewise-constant segments per curve

    Raises:
        PreconditionError: If rho is outside (0, 2/b]
    """
    if rho is None or not 0.0 < rho <= 2.0 / inst.b * (1.0 + 1e-12):
        raise PreconditionError(f"rho must lie in (0, 2/b] = (0, {2.0 / inst.b:.6g}]", "ballbox_probe")
    p = generic_base_point(inst) if p is None else np.asarray(p, dtype=float)

    controls, unit_durations = _draw(np.random.default_rng(seed), n_samples, segments)
    largest = privileged_displacements(phi_inv(p), controls, rho * unit_durations)
    return BallBoxSample(rho=float(rho), displacements=largest, n_samples=n_samples, base_point=p)


def sample_radii(
    inst: Instance,
    rhos: Optional[Sequence[float]] = None,
    p=None,
    n_samples: int = 1000,
    seed: int = 0,
    segments: int = 8,
) -> list:
    """One sample set per radius, each drawn from its own generator"""
    rhos = default_radii(inst) if rhos is None else rhos
    samples = [ballbox_probe(inst, p, float(rho), n_samples, [seed, k], segments) for k, rho in enumerate(rhos)]
    logger.debug(f"Ball-box samples at {len(samples)} radii, {n_samples} curves each")
    return samples


def fit_scaling_exponents(samples: Sequence[BallBoxSample]) -> np.ndarray:
    """Least-squares slopes of log(displacement_j) against log(rho), one per coordinate"""
    log_rho = np.log([s.rho for s in samples])
    log_disp = np.log(np.maximum(np.array([s.displacements for s in samples]), np.finfo(float).tiny))
    return np.array([np.polyfit(log_rho, log_disp[:, j], 1)[0] for j in range(log_disp.shape[1])])


def estimate_cbar(samples: Sequence[BallBoxSample]) -> float:
    """max over coordinates j >= 3 and radii of disp_j / rho^{j-1}"""
    best = 0.0
    for sample in samples:
        for j in range(3, len(sample.displacements) + 1):
            best = max(best, float(sample.displacements[j - 1] / sample.rho ** (j - 1)))
    return best
