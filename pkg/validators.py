#!/usr/bin/env python3
"""
Input Validation Module for gapforge

Validation functions for instance parameters, instance documents, control
sets, seeds and command-line overrides. Validators return (is_valid, message)
tuples; instance_violations() returns every violated constraint by name.
"""

import math
from typing import Any, Iterable, List, Mapping, Tuple

from constants import ERROR_MESSAGES, SCHEMA_VERSION

CONTROL_SET_KINDS = ("SQUARE", "CORNERS", "CONVEX_SUPERSET")

_TYPE_CHECKS = {
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "object": lambda v: isinstance(v, dict),
    "array": lambda v: isinstance(v, list),
    "string": lambda v: isinstance(v, str),
}


def _is_real(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def instance_violations(params: Mapping[str, Any]) -> List[Tuple[str, str]]:
    """
    Collect every violated standing assumption

    Args:
        params: Raw instance parameters (d, a, b, lambda, delta, eps_moll, control_set)

    Returns:
        List of (error_code, message) pairs, empty when the parameters are valid
    """
    violations: List[Tuple[str, str]] = []

    d = params.get("d")
    if not (isinstance(d, int) and not isinstance(d, bool) and d >= 4):
        violations.append(("DIM_RANGE", f"{ERROR_MESSAGES['DIM_RANGE']} (got {d!r})"))

    a = params.get("a")
    a_ok = _is_real(a) and 0.0 < a < 1.0
    if not a_ok:
        violations.append(("A_RANGE", f"{ERROR_MESSAGES['A_RANGE']} (got {a!r})"))

    b = params.get("b")
    b_ok = _is_real(b) and b > 1.0
    if not b_ok:
        violations.append(("B_RANGE", f"{ERROR_MESSAGES['B_RANGE']} (got {b!r})"))

    lam = params.get("lambda")
    lam_ok = _is_real(lam) and 1.0 < lam < 2.0
    if not lam_ok:
        violations.append(("LAMBDA_RANGE", f"{ERROR_MESSAGES['LAMBDA_RANGE']} (got {lam!r})"))

    if _is_real(a) and _is_real(b) and a * b <= 2.0 * math.pi:
        violations.append(("AB_TOO_SMALL", f"{ERROR_MESSAGES['AB_TOO_SMALL']} (a*b = {a * b:.6g})"))

    delta = params.get("delta")
    if not _is_real(delta) or delta <= 0.0:
        violations.append(("DELTA_RANGE", f"{ERROR_MESSAGES['DELTA_RANGE']} (got {delta!r})"))
    elif a_ok and lam_ok and delta < (lam - 1.0) * a:
        violations.append(("DELTA_RANGE", f"{ERROR_MESSAGES['DELTA_RANGE']} (got {delta!r})"))

    eps = params.get("eps_moll", 0.0)
    if not _is_real(eps) or eps < 0.0:
        violations.append(("EPS_RANGE", f"{ERROR_MESSAGES['EPS_RANGE']} (got {eps!r})"))
    elif a_ok and lam_ok and eps >= (lam - 1.0) * a:
        violations.append(("EPS_RANGE", f"{ERROR_MESSAGES['EPS_RANGE']} (got {eps!r})"))

    control_set = params.get("control_set", {"kind": "SQUARE", "bound": 1.0})
    is_valid, message = validate_control_set(control_set)
    if not is_valid:
        violations.append(("CONTROL_SET", message))

    radius = params.get("target_radius")
    if radius is not None and (not _is_real(radius) or radius <= 0.0):
        violations.append(("TARGET_RADIUS", f"{ERROR_MESSAGES['TARGET_RADIUS']} (got {radius!r})"))

    return violations


def validate_control_set(control_set: Any) -> Tuple[bool, str]:
    """
    Validate a control set mapping

    Args:
        control_set: Mapping with 'kind' and optional 'bound'

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(control_set, Mapping):
        return False, ERROR_MESSAGES["CONTROL_SET"]

    kind = control_set.get("kind")
    if kind not in CONTROL_SET_KINDS:
        return False, f"{ERROR_MESSAGES['CONTROL_SET']} (got kind {kind!r})"

    bound = control_set.get("bound", 1.0)
    if not _is_real(bound) or bound < 1.0:
        return False, f"{ERROR_MESSAGES['CONTROL_SET']} (got bound {bound!r})"
    if kind != "CONVEX_SUPERSET" and bound != 1.0:
        return False, f"{kind} control sets have bound 1"

    return True, ""


def validate_instance_document(document: Any, schema: Mapping[str, Any]) -> Tuple[bool, str]:
    """
    Validate an instance JSON document against the shipped schema

    Args:
        document: Parsed JSON document
        schema: Parsed schema (required list plus property types)

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(document, dict):
        return False, "Instance document must be a JSON object"

    missing = [key for key in schema.get("required", []) if key not in document]
    if missing:
        return False, f"Missing required keys: {', '.join(missing)}"

    version = document.get("schema_version")
    if version != schema.get("schema_version", SCHEMA_VERSION):
        return False, f"Unsupported schema_version {version!r}"

    properties = schema.get("properties", {})
    unknown = sorted(set(document) - set(properties))
    if unknown:
        return False, f"Unknown fields: {', '.join(unknown)}"

    for name, spec in properties.items():
        if name not in document:
            continue
        check = _TYPE_CHECKS.get(spec.get("type"))
        if check is not None and not check(document[name]):
            return False, f"Field '{name}' must be of type {spec.get('type')}"

    return True, ""


def validate_override(override: str, known_keys: Iterable[str]) -> Tuple[bool, str]:
    """
    Validate a key=value override

    Args:
        override: Override string from the command line
        known_keys: Dot-notation keys accepted by the configuration

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(override, str) or "=" not in override:
        return False, f"Override must have the form key=value (got {override!r})"

    key, _, value = override.partition("=")
    key = key.strip()
    if not key:
        return False, "Override key cannot be empty"
    if key not in set(known_keys):
        return False, f"Unknown configuration key: {key}"
    if not value.strip():
        return False, f"Override for {key} has an empty value"
    return True, ""


def validate_seed(seed: Any) -> Tuple[bool, str]:
    """
    Validate a random seed

    Args:
        seed: Seed value

    Returns:
        Tuple of (is_valid, error_message)
    """
    if not isinstance(seed, int) or isinstance(seed, bool):
        return False, "Seed must be an integer"
    if seed < 0:
        return False, "Seed must be non-negative"
    return True, ""
