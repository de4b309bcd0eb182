#!/usr/bin/env python3
"""
Performance Monitoring Module

Thread-safe experiment timings and psutil-backed memory budget checks.
Timings are logged only; they never enter JSON artifacts.
"""

import logging
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Deque, Dict, Optional

import psutil

from exceptions import MemoryBudgetError


@dataclass
class PerformanceMetric:
    """One recorded measurement"""
    name: str
    value: float
    timestamp: float
    unit: str = "seconds"
    category: str = "experiment"


class PerformanceMonitor:
    """
    Timings recorded by experiments, possibly from pool worker threads

    Each metric name keeps its most recent `max_history` measurements.
    """

    def __init__(self, max_history: int = 1000):
        self.max_history = max_history
        self.metrics: Dict[str, Deque[PerformanceMetric]] = defaultdict(lambda: deque(maxlen=max_history))
        self.lock = threading.Lock()
        self.logger = logging.getLogger("performance")

    def record_metric(self, name: str, value: float, unit: str = "seconds", category: str = "experiment") -> None:
        """Append a measurement under `name`"""
        metric = PerformanceMetric(name, float(value), time.time(), unit, category)
        with self.lock:
            self.metrics[name].append(metric)
        self.logger.debug(f"{category}/{name}: {value:.6g} {unit}")

    def get_metric_stats(self, name: str) -> Dict[str, float]:
        """
        Summary of the measurements recorded under a name

        Returns:
            count, min, max, average, latest and total; empty for unknown names
        """
        with self.lock:
            values = [m.value for m in self.metrics.get(name, ())]
        if not values:
            return {}

        total = sum(values)
        return {
            "count": len(values),
            "min": min(values),
            "max": max(values),
            "average": total / len(values),
            "latest": values[-1],
            "total": total,
        }

    def totals(self) -> Dict[str, float]:
        """Total recorded value per metric name"""
        with self.lock:
            return {name: sum(m.value for m in history) for name, history in self.metrics.items()}

    def clear_metrics(self) -> None:
        with self.lock:
            self.metrics.clear()


def available_memory_bytes() -> int:
    """Bytes of memory currently available to the process"""
    return int(psutil.virtual_memory().available)


def check_memory_budget(required_bytes: int, fraction: float = 0.5, label: str = "allocation") -> None:
    """
    Refuse allocations larger than a fraction of available memory

    Args:
        required_bytes: Estimated size of the allocation
        fraction: Share of available memory the allocation may use
        label: Name used in the error message

    Raises:
        MemoryBudgetError: If the estimate exceeds the budget
    """
    budget = fraction * available_memory_bytes()
    if required_bytes > budget:
        raise MemoryBudgetError(
            f"{label} needs {required_bytes / 2**20:.1f} MiB, budget is {budget / 2**20:.1f} MiB",
            int(required_bytes),
        )
    logging.getLogger("performance").debug(
        f"{label}: {required_bytes / 2**20:.1f} MiB within budget {budget / 2**20:.1f} MiB"
    )


# Global instance
_performance_monitor: Optional[PerformanceMonitor] = None


def get_performance_monitor() -> PerformanceMonitor:
    """Get the global performance monitor instance"""
    global _performance_monitor
    if _performance_monitor is None:
        _performance_monitor = PerformanceMonitor()
    return _performance_monitor
