#!/usr/bin/env python3
"""
Constants for gapforge

Centralized defaults, tolerances and messages.
"""

import math

# Application metadata
APP_NAME = "gapforge"
APP_DESCRIPTION = "Numerical toolkit for the state-constrained relaxation gap counterexample"

# Instance JSON schema version
SCHEMA_VERSION = 1

# Reference instance (two full spiral turns: a*b / 2pi = 2)
DEFAULT_INSTANCE = {
    "d": 4,
    "a": 0.1,
    "b": 40.0 * math.pi,
    "lambda": 1.2,
    "delta": 0.05,
    "eps_moll": 0.0,
    "control_set": {"kind": "SQUARE", "bound": 1.0},
    "constrained": True,
}

# Dimension used by the Mayer variant
MAYER_DIMENSION = 5

# Numerical tolerances
TOLERANCES = {
    "BOUNDARY": 1e-10,
    "ROUND_TRIP": 1e-12,
    "WEIGHT_SUM": 1e-12,
    "CLEARANCE": 1e-6,
    "ENDPOINT": 1e-4,
    "ORIGIN": 1e-12,
    "HULL_RESIDUAL": 1e-9,
    "PLANNER_GOAL": 1e-4,
    "LP_GAP": 1e-4,
}

# Finite-difference step for the bracket oracle
BRACKET_STEP = 1e-5

# Shell partition limits
SHELL_INDEX_CAP = 10_000
SHELL_BLOCK_EXPONENT = 2.5

# Ball-box default radii: rho = 2^-k * (2/b)
BALLBOX_EXPONENTS = (4, 5, 6, 7, 8, 9)

# Local search penalty continuation
PENALTY_SCHEDULE = (1e2, 1e3, 1e4)

# Control corners U_:: in the order used by connectors
CORNERS = ((1.0, 1.0), (1.0, -1.0), (-1.0, -1.0), (-1.0, 1.0))

# File paths and directories
PATHS = {
    "CONFIG_DIR": "config",
    "LOGS_DIR": "logs",
    "OUTPUT_DIR": "out",
    "SCHEMA_FILE": "config/instance_schema.json",
}

# CLI exit codes
EXIT_CODES = {
    "SUCCESS": 0,
    "VALIDATION": 1,
    "EXPERIMENT": 2,
}

# Error messages
ERROR_MESSAGES = {
    "DIM_RANGE": "dimension d must be an integer >= 4",
    "A_RANGE": "a must lie in (0, 1)",
    "B_RANGE": "b must exceed 1",
    "LAMBDA_RANGE": "lambda must lie in (1, 2)",
    "AB_TOO_SMALL": "a*b must exceed 2*pi",
    "DELTA_RANGE": "delta must be at least (lambda-1)*a",
    "EPS_RANGE": "eps_moll must lie in [0, (lambda-1)*a)",
    "CONTROL_SET": "control set must be SQUARE, CORNERS or CONVEX_SUPERSET with bound >= 1",
    "TARGET_RADIUS": "target radius must be positive",
}
