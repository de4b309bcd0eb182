#!/usr/bin/env python3
"""
Utility Functions for gapforge

Artifact persistence: deterministic JSON and CSV files written atomically,
plus helpers shared by the CLI and the experiments.
"""

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def ensure_directory(path: str) -> bool:
    """
    Ensure directory exists, create if necessary

    Args:
        path: Directory path

    Returns:
        True if directory exists or was created successfully
    """
    if not path:
        return True
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
        return True
    except OSError as e:
        logger.error(f"Failed to create directory {path}: {e}")
        return False


def sanitize_json(value: Any) -> Any:
    """
    Convert a value tree into plain JSON types

    Numpy scalars and arrays become Python numbers and lists; non-finite
    floats become the strings "inf", "-inf" and "nan".
    """
    if isinstance(value, dict):
        return {str(k): sanitize_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [sanitize_json(v) for v in value]
    if isinstance(value, np.ndarray):
        return [sanitize_json(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def dumps_json(data: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline"""
    return json.dumps(sanitize_json(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _atomic_write_text(file_path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(file_path))
    ensure_directory(directory)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(file_path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, file_path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def save_json_file(file_path: str, data: Any) -> str:
    """
    Save data to a JSON file atomically (write-then-rename)

    Args:
        file_path: Path to save JSON file
        data: Data to save

    Returns:
        The path written
    """
    _atomic_write_text(file_path, dumps_json(data))
    logger.debug(f"Wrote {file_path}")
    return file_path


def save_text_file(file_path: str, text: str) -> str:
    """Write text atomically (SVG and other text artifacts)"""
    _atomic_write_text(file_path, text)
    logger.debug(f"Wrote {file_path}")
    return file_path


def load_json_file(file_path: str, default: Any = None) -> Any:
    """
    Load JSON file with error handling

    Args:
        file_path: Path to JSON file
        default: Default value if loading fails; None re-raises

    Returns:
        Loaded JSON data or default value
    """
    try:
        with open(file_path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        if default is None:
            raise
        logger.warning(f"Failed to load JSON file {file_path}: {e}")
        return default


def format_float(value: float) -> str:
    """Shortest round-tripping text for a float"""
    return repr(float(value))


def save_csv_file(file_path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """
    Save rows to a CSV file atomically

    Args:
        file_path: Destination path
        header: Column names
        rows: Row values; floats use round-tripping repr

    Returns:
        The path written
    """
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            format_float(v) if isinstance(v, (float, np.floating)) else v for v in row
        )
    _atomic_write_text(file_path, buffer.getvalue())
    logger.debug(f"Wrote {file_path}")
    return file_path


def calculate_file_hash(file_path: str, algorithm: str = "sha256") -> Optional[str]:
    """
    Calculate hash of a file

    Args:
        file_path: Path to file
        algorithm: Hash algorithm

    Returns:
        Hex digest or None if the file cannot be read
    """
    try:
        digest = hashlib.new(algorithm)
        with open(file_path, "rb") as f:
            for chunk in iter(lambda: f.read(65536), b""):
                digest.update(chunk)
        return digest.hexdigest()
    except OSError as e:
        logger.error(f"Failed to hash {file_path}: {e}")
        return None
