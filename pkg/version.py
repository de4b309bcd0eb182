#!/usr/bin/env python3
"""
Version Information for gapforge

Version constants embedded in every report. No wall-clock or host data is
included so that reports stay byte-identical across runs.
"""

import sys
from typing import Any, Dict

__version__ = "1.0.0"
__description__ = "Numerical toolkit for the state-constrained relaxation gap counterexample"

# Experiment families shipped with this version
FEATURES = {
    "goursat_geometry": True,
    "spiral_domain": True,
    "mollified_lagrangian": True,
    "young_measures": True,
    "cap_planner": True,
    "winding_certificates": True,
    "ballbox_probe": True,
    "mayer_lift": True,
    "penalized_problems": True,
    "occupation_lp": True,
    "fw_separation": True,
}

# Dependencies
DEPENDENCIES = {
    "numpy": ">=1.24.0",
    "scipy": ">=1.10.0",
    "matplotlib": ">=3.7.0",
    "psutil": ">=5.9.0",
    "colorlog": ">=6.7.0",
    "pyyaml": ">=6.0.0",
}


def get_version_info() -> Dict[str, Any]:
    """Version block embedded in JSON reports"""
    return {
        "version": __version__,
        "description": __description__,
        "features": sorted(name for name, enabled in FEATURES.items() if enabled),
    }


def check_compatibility() -> Dict[str, bool]:
    """Check interpreter compatibility"""
    return {"python_version": sys.version_info >= (3, 9)}
