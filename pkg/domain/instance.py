"""
Instance Module

The counterexample parameters (d, a, b, lambda, delta, eps_moll, control set),
their derived points and target, and the versioned JSON document format.
"""

import copy
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np

from constants import CORNERS, DEFAULT_INSTANCE, PATHS, SCHEMA_VERSION
from exceptions import InstanceValidationError, SchemaError
from utils import load_json_file, save_json_file
from validators import instance_violations, validate_instance_document

logger = logging.getLogger(__name__)

_REPO_ROOT = Path(__file__).resolve().parent.parent


class ControlSetKind(Enum):
    """Supported control sets"""
    SQUARE = "SQUARE"
    CORNERS = "CORNERS"
    CONVEX_SUPERSET = "CONVEX_SUPERSET"


@dataclass(frozen=True)
class ControlSet:
    """
    Control set U

    SQUARE is [-1,1]^2, CORNERS the four points (+-1, +-1), and CONVEX_SUPERSET
    a box [-bound, bound]^2 containing the square.
    """
    kind: ControlSetKind = ControlSetKind.SQUARE
    bound: float = 1.0

    @property
    def half_width(self) -> float:
        return self.bound if self.kind is ControlSetKind.CONVEX_SUPERSET else 1.0

    def corners(self) -> np.ndarray:
        return np.array(CORNERS, dtype=float)

    def contains(self, u, tol: float = 1e-12) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind is ControlSetKind.CORNERS:
            return np.all(np.abs(np.abs(u) - 1.0) <= tol, axis=-1)
        return np.all(np.abs(u) <= self.half_width + tol, axis=-1)

    def project(self, u) -> np.ndarray:
        """Nearest admissible control (clip for boxes, sign for corners)"""
        u = np.asarray(u, dtype=float)
        if self.kind is ControlSetKind.CORNERS:
            return np.where(u >= 0.0, 1.0, -1.0)
        return np.clip(u, -self.half_width, self.half_width)

    def atom_grid(self, per_axis: int) -> np.ndarray:
        """Uniform per_axis x per_axis grid over the box, corners of the square appended if missing"""
        if self.kind is ControlSetKind.CORNERS:
            return self.corners()
        axis = np.linspace(-self.half_width, self.half_width, per_axis)
        u1, u2 = np.meshgrid(axis, axis, indexing="ij")
        grid = np.column_stack([u1.ravel(), u2.ravel()])
        missing = [c for c in self.corners() if not np.any(np.all(np.isclose(grid, c), axis=1))]
        if missing:
            grid = np.vstack([grid, np.array(missing)])
        return grid

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "bound": float(self.bound)}


@dataclass(frozen=True)
class Instance:
    """
    Counterexample instance

    Attributes:
        d: State dimension (>= 4)
        a: Half-length of the spiral segment
        b: Spiral frequency
        lam: Cap stretch factor lambda in (1, 2)
        delta: Cap time budget; the horizon is [-a_delta, a_delta]
        eps_moll: Mollification radius of the smooth Lagrangian (0 disables it)
        control_set: Control set U
        constrained: False switches to the unconstrained problem on R^d
        target_radius: Radius of the target ball around x1
    """
    d: int
    a: float
    b: float
    lam: float
    delta: float
    eps_moll: float = 0.0
    control_set: ControlSet = field(default_factory=ControlSet)
    constrained: bool = True
    target_radius: Optional[float] = None

    @property
    def a_delta(self) -> float:
        return self.a + self.delta

    @property
    def tip(self) -> float:
        """|y1| at which the cap closes"""
        return (2.0 * self.lam - 1.0) * self.a

    @property
    def plateau(self) -> float:
        """Half-width of the interval where the bump equals 1"""
        return self.a - 1.0 / self.b**2

    @property
    def support(self) -> float:
        """Half-width beyond which the bump vanishes"""
        return self.a - 1.0 / self.b**3

    @property
    def turns(self) -> float:
        """ab / 2pi, the number of spiral turns"""
        return self.a * self.b / (2.0 * math.pi)

    @property
    def radius_target(self) -> float:
        if self.target_radius is not None:
            return float(self.target_radius)
        return 0.5 * (self.lam - 1.0) * self.a

    def axis_point(self, t: float) -> np.ndarray:
        """eta(t) = (t, 0, ..., 0)"""
        point = np.zeros(self.d)
        point[0] = t
        return point

    @property
    def x0(self) -> np.ndarray:
        return self.axis_point(-self.lam * self.a)

    @property
    def x1(self) -> np.ndarray:
        return self.axis_point(self.lam * self.a)

    @property
    def target_center(self) -> np.ndarray:
        return self.x1

    def with_changes(self, **changes) -> "Instance":
        return replace(self, **changes)

    def unconstrained(self) -> "Instance":
        return replace(self, constrained=False)

    def to_params(self) -> Dict[str, Any]:
        params = {
            "d": self.d,
            "a": self.a,
            "b": self.b,
            "lambda": self.lam,
            "delta": self.delta,
            "eps_moll": self.eps_moll,
            "control_set": self.control_set.to_dict(),
            "constrained": self.constrained,
        }
        if self.target_radius is not None:
            params["target_radius"] = self.target_radius
        return params

    def summary(self) -> Dict[str, Any]:
        """Derived quantities echoed by the CLI and embedded in reports"""
        return {
            "a_delta": self.a_delta,
            "ab": self.a * self.b,
            "turns": self.turns,
            "winding_bound": self.a * self.b - 2.0 * math.pi,
            "tip": self.tip,
            "target_radius": self.radius_target,
        }


def build_instance(params: Optional[Mapping[str, Any]] = None, **overrides) -> Instance:
    """
    Validate raw parameters and build an Instance

    Missing parameters fall back to the reference instance (a = 0.1, b = 40 pi).

    Raises:
        InstanceValidationError: Listing every violated constraint by code
    """
    merged = copy.deepcopy(DEFAULT_INSTANCE)
    merged.update(dict(params or {}))
    merged.update(overrides)

    violations = instance_violations(merged)
    if violations:
        raise InstanceValidationError("Invalid instance", violations)

    control = merged.get("control_set", {"kind": "SQUARE", "bound": 1.0})
    inst = Instance(
        d=int(merged["d"]),
        a=float(merged["a"]),
        b=float(merged["b"]),
        lam=float(merged["lambda"]),
        delta=float(merged["delta"]),
        eps_moll=float(merged.get("eps_moll", 0.0)),
        control_set=ControlSet(ControlSetKind(control["kind"]), float(control.get("bound", 1.0))),
        constrained=bool(merged.get("constrained", True)),
        target_radius=(
            float(merged["target_radius"]) if merged.get("target_radius") is not None else None
        ),
    )
    logger.debug(f"Built instance d={inst.d} a={inst.a} b={inst.b} turns={inst.turns:.4f}")
    return inst


def load_schema(schema_path: Optional[str] = None) -> Dict[str, Any]:
    path = Path(schema_path) if schema_path else _REPO_ROOT / PATHS["SCHEMA_FILE"]
    return load_json_file(str(path))


def instance_to_document(inst: Instance, problem: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """Versioned JSON document for an instance (and optionally its problem spec)"""
    document = inst.to_params()
    document.pop("target_radius", None)
    document["schema_version"] = SCHEMA_VERSION
    document["target"] = {
        "center": inst.target_center.tolist(),
        "radius": inst.radius_target,
    }
    if problem is not None:
        document["problem"] = dict(problem)
    return document


def instance_from_document(document: Mapping[str, Any], schema: Optional[Mapping[str, Any]] = None) -> Instance:
    """
    Build an Instance from a parsed document

    Raises:
        SchemaError: If the document does not match the schema
        InstanceValidationError: If the parameters violate the standing assumptions
    """
    schema = schema if schema is not None else load_schema()
    is_valid, message = validate_instance_document(document, schema)
    if not is_valid:
        raise SchemaError(f"{message} (see {PATHS['SCHEMA_FILE']})")

    params = {k: v for k, v in document.items() if k not in ("schema_version", "target", "problem")}
    target = document.get("target")
    if target is not None:
        params["target_radius"] = target.get("radius")
    inst = build_instance(params)
    if target is not None and "center" in target:
        if not np.allclose(np.asarray(target["center"], dtype=float), inst.target_center):
            raise SchemaError("target.center must equal x1 = eta(lambda a)", "target")
    return inst


def load_instance(path: str, schema_path: Optional[str] = None) -> Instance:
    """Load and validate an instance JSON file"""
    try:
        document = load_json_file(path)
    except (OSError, ValueError) as e:
        raise SchemaError(f"Cannot read instance file {path}: {e}", path)
    if not isinstance(document, dict):
        raise SchemaError(f"Instance file {path} must contain a JSON object", path)
    return instance_from_document(document, load_schema(schema_path))


def save_instance(inst: Instance, path: str, problem: Optional[Mapping[str, Any]] = None) -> str:
    """Write the instance document atomically"""
    return save_json_file(path, instance_to_document(inst, problem))
