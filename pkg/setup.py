#!/usr/bin/env python3
"""
Install the numerical stack for gapforge: numpy, scipy and matplotlib come
from requirements.txt together with the rest of the pinned dependencies.
"""

import subprocess
import sys

from version import check_compatibility

CORE_MODULES = ("numpy", "scipy", "matplotlib")


def install_requirements() -> bool:
    try:
        subprocess.run([sys.executable, "-m", "pip", "install", "-r", "requirements.txt"], check=True)
    except subprocess.CalledProcessError as e:
        print(f"pip failed: {e}")
        return False
    return True


def missing_core_modules() -> list:
    missing = []
    for name in CORE_MODULES:
        try:
            __import__(name)
        except ImportError:
            missing.append(name)
    return missing


def main():
    if not check_compatibility()["python_version"]:
        print("Python 3.9 or higher is required")
        sys.exit(1)
    if not install_requirements():
        sys.exit(1)
    missing = missing_core_modules()
    if missing:
        print(f"Not importable after install: {', '.join(missing)}")
        sys.exit(1)
    print(f"Installed {', '.join(CORE_MODULES)}")


if __name__ == "__main__":
    main()
