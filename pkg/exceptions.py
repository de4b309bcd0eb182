#!/usr/bin/env python3
"""
Custom Exceptions for gapforge

Defines the error hierarchy shared by every module. Each error carries a
stable error code that the CLI maps onto exit codes and report diagnostics.
"""

from typing import List, Optional, Tuple


class GapForgeError(Exception):
    """Base exception class for gapforge"""

    def __init__(self, message: str, error_code: str = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code

    def __str__(self):
        if self.error_code:
            return f"[{self.error_code}] {self.message}"
        return self.message


class InstanceValidationError(GapForgeError):
    """Exception raised when counterexample parameters violate the standing assumptions"""

    def __init__(
        self,
        message: str = "Instance validation failed",
        violations: Optional[List[Tuple[str, str]]] = None,
    ):
        self.violations = list(violations or [])
        code = self.violations[0][0] if self.violations else "VALIDATION_001"
        if self.violations:
            details = "; ".join(f"{c}: {m}" for c, m in self.violations)
            message = f"{message}: {details}"
        super().__init__(message, code)

    @property
    def codes(self) -> List[str]:
        return [code for code, _ in self.violations]


class DomainViolationError(GapForgeError):
    """Exception raised when an argument lies outside an operation's domain"""

    def __init__(self, message: str = "Argument outside the admissible domain", value: float = None):
        super().__init__(message, "DOMAIN_VIOLATION")
        self.value = value


class IndexRangeError(GapForgeError):
    """Exception raised when a vector field index is out of range"""

    def __init__(self, message: str = "Index out of range", index: int = None):
        super().__init__(message, "INDEX_RANGE")
        self.index = index


class OriginHitError(GapForgeError):
    """Exception raised when a planar curve passes through the origin"""

    def __init__(self, message: str = "Planar curve touches the origin", sample_index: int = None):
        super().__init__(message, "ORIGIN_HIT")
        self.sample_index = sample_index


class NoCrossingError(GapForgeError):
    """Exception raised when a curve never traverses the spiral segment"""

    def __init__(self, message: str = "Curve never crosses x1 from -a to a"):
        super().__init__(message, "NO_CROSSING")


class CostPreconditionError(GapForgeError):
    """Exception raised when a curve's cost is too large for an a-priori estimate"""

    def __init__(self, message: str = "Cost premise not satisfied", cost: float = None):
        super().__init__(message, "COST_PRECONDITION")
        self.cost = cost


class PlannerFailedError(GapForgeError):
    """Exception raised when no cap connector is found within the budget"""

    def __init__(self, message: str = "No cap connector found", best_residual: float = None):
        super().__init__(message, "PLANNER_FAILED")
        self.best_residual = best_residual


class PreconditionError(GapForgeError):
    """Exception raised when an operation's precondition does not hold"""

    def __init__(self, message: str = "Precondition failed", operation: str = None):
        super().__init__(message, "PRECONDITION")
        self.operation = operation


class FeasibilityError(GapForgeError):
    """Exception raised when a local search ends without a feasible path"""

    def __init__(self, message: str = "No feasible path found", start_index: int = None):
        super().__init__(message, "FAILED_FEASIBILITY")
        self.start_index = start_index


class SolverStallError(GapForgeError):
    """Exception raised when the LP solver stops making progress"""

    def __init__(self, message: str = "LP solver stalled", iterations: int = None):
        super().__init__(message, "SOLVER_STALL")
        self.iterations = iterations


class AlphaTooSmallError(GapForgeError):
    """Exception raised when a terminal penalty weight cannot dominate the cost"""

    def __init__(self, message: str = "Penalty weight must exceed 2a", alpha: float = None):
        super().__init__(message, "ALPHA_TOO_SMALL")
        self.alpha = alpha


class GridMismatchError(GapForgeError):
    """Exception raised when a control path and a curve use incompatible grids"""

    def __init__(self, message: str = "Control path and curve grids do not align"):
        super().__init__(message, "GRID_MISMATCH")


class WeightNormalizationError(GapForgeError):
    """Exception raised when Young measure weights are not a probability vector"""

    def __init__(self, message: str = "Young measure weights must be positive and sum to 1", interval: int = None):
        super().__init__(message, "WEIGHT_NORMALIZATION")
        self.interval = interval


class MemoryBudgetError(GapForgeError):
    """Exception raised when an LP grid would not fit in the memory budget"""

    def __init__(self, message: str = "Grid exceeds the memory budget", required_bytes: int = None):
        super().__init__(message, "MEMORY_BUDGET")
        self.required_bytes = required_bytes


class ConfigurationError(GapForgeError):
    """Exception raised when configuration is invalid"""

    def __init__(self, message: str = "Configuration error", config_key: str = None):
        super().__init__(message, "CONFIG_001")
        self.config_key = config_key


class SchemaError(GapForgeError):
    """Exception raised when a JSON document does not match its schema"""

    def __init__(self, message: str = "Document does not match schema", field_name: str = None):
        super().__init__(message, "SCHEMA_001")
        self.field_name = field_name


class UnknownPlotKindError(GapForgeError):
    """Exception raised for unsupported plot kinds"""

    def __init__(self, message: str = "Unknown plot kind", kind: str = None):
        super().__init__(message, "PLOT_KIND")
        self.kind = kind


# Exception mapping for easy lookup
EXCEPTION_MAP = {
    "DOMAIN_VIOLATION": DomainViolationError,
    "INDEX_RANGE": IndexRangeError,
    "ORIGIN_HIT": OriginHitError,
    "NO_CROSSING": NoCrossingError,
    "COST_PRECONDITION": CostPreconditionError,
    "PLANNER_FAILED": PlannerFailedError,
    "PRECONDITION": PreconditionError,
    "FAILED_FEASIBILITY": FeasibilityError,
    "SOLVER_STALL": SolverStallError,
    "ALPHA_TOO_SMALL": AlphaTooSmallError,
    "GRID_MISMATCH": GridMismatchError,
    "WEIGHT_NORMALIZATION": WeightNormalizationError,
    "MEMORY_BUDGET": MemoryBudgetError,
    "CONFIG_001": ConfigurationError,
    "SCHEMA_001": SchemaError,
    "PLOT_KIND": UnknownPlotKindError,
}

# Errors that signal bad input rather than a failed experiment
VALIDATION_ERRORS = (
    InstanceValidationError,
    DomainViolationError,
    IndexRangeError,
    ConfigurationError,
    SchemaError,
    UnknownPlotKindError,
    AlphaTooSmallError,
    PreconditionError,
    GridMismatchError,
    WeightNormalizationError,
)


def create_exception(error_code: str, message: str = None) -> GapForgeError:
    """
    Create exception by error code

    Args:
        error_code: Error code (e.g., 'NO_CROSSING')
        message: Optional custom message

    Returns:
        Appropriate exception instance
    """
    exception_class = EXCEPTION_MAP.get(error_code)
    if exception_class is None:
        return GapForgeError(message or "Unknown error", error_code)

    if message:
        return exception_class(message)
    return exception_class()
