#!/usr/bin/env python3
"""
Logging Configuration for gapforge

Colored console logs on stderr (stdout carries the command summaries) and an
optional rotating file under the log directory. Experiment timings are logged
here and recorded in the performance monitor; they never reach an artifact.
"""

import logging
import logging.handlers
import sys
import time
from pathlib import Path
from typing import Dict, Optional

import colorlog

from performance import get_performance_monitor

COMPONENT_LOGGERS = (
    "geometry",
    "domain",
    "costs",
    "trajectories",
    "topology",
    "relaxation",
    "optimize",
    "performance",
)

FILE_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
FILE_DATEFMT = "%Y-%m-%d %H:%M:%S"
CONSOLE_FORMAT = "%(log_color)s%(levelname)s - %(name)s - %(message)s"
LEVEL_COLORS = {
    "DEBUG": "cyan",
    "INFO": "green",
    "WARNING": "yellow",
    "ERROR": "red",
    "CRITICAL": "bold_red",
}


def _level(level: str) -> int:
    return getattr(logging, str(level).upper(), logging.INFO)


def setup_logging(
    level: str = "INFO",
    log_dir: str = "logs",
    log_file: str = "gapforge.log",
    max_bytes: int = 10 * 1024 * 1024,  # 10MB
    backup_count: int = 5,
    console_output: bool = True,
    file_output: bool = True,
) -> logging.Logger:
    """
    Configure the root logger for one CLI run

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        log_dir: Directory for the rotating log file
        log_file: Log file name
        max_bytes: Size at which the log file rotates
        backup_count: Rotated files kept
        console_output: Log to stderr
        file_output: Log to the rotating file

    Returns:
        The root logger
    """
    log_level = _level(level)
    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    if file_output:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        file_handler = logging.handlers.RotatingFileHandler(
            Path(log_dir) / log_file, maxBytes=max_bytes, backupCount=backup_count, encoding="utf-8"
        )
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT, datefmt=FILE_DATEFMT))
        root_logger.addHandler(file_handler)

    if console_output:
        console_handler = colorlog.StreamHandler(sys.stderr)
        console_handler.setFormatter(colorlog.ColoredFormatter(CONSOLE_FORMAT, log_colors=LEVEL_COLORS))
        root_logger.addHandler(console_handler)

    for handler in root_logger.handlers:
        handler.setLevel(log_level)
    root_logger.debug(f"Logging at {logging.getLevelName(log_level)} (file output: {file_output})")
    return root_logger


def setup_component_loggers(level: str = "INFO") -> None:
    """Set levels for the per-package loggers; timings stay visible at INFO"""
    log_level = _level(level)
    for name in COMPONENT_LOGGERS:
        logging.getLogger(name).setLevel(log_level)
    logging.getLogger("performance").setLevel(min(log_level, logging.INFO))


def log_performance_metrics(totals: Dict[str, float]) -> None:
    """Log total wall time per experiment, slowest first"""
    if not totals:
        return
    logger = logging.getLogger("performance")
    logger.info("Experiment timings:")
    for name, seconds in sorted(totals.items(), key=lambda item: -item[1]):
        logger.info(f"  {name}: {seconds:.4f}s")


class PerformanceLogger:
    """Times one experiment and records it in the performance monitor"""

    def __init__(self, operation_name: str):
        self.operation_name = operation_name
        self.logger = logging.getLogger("performance")
        self.start_time: Optional[float] = None
        self.duration: Optional[float] = None

    def __enter__(self) -> "PerformanceLogger":
        self.start_time = time.perf_counter()
        self.logger.debug(f"{self.operation_name}: started")
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.duration = time.perf_counter() - self.start_time
        get_performance_monitor().record_metric(self.operation_name, self.duration, category="experiment")

        if exc_type is None:
            self.logger.info(f"{self.operation_name}: done in {self.duration:.4f}s")
        else:
            self.logger.error(f"{self.operation_name}: failed after {self.duration:.4f}s ({exc_val})")
        return False
