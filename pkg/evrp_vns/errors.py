"""
Exception hierarchy for evrp-vns.

Constraint violations found while validating a tour are reported as data
(see core.ValidationReport), never raised.
"""

from typing import Optional


class EvrpError(Exception):
    """Base class for every error raised by this package."""


class InstanceFormatError(EvrpError, ValueError):
    """An instance file could not be parsed."""

    def __init__(self, message: str, line_no: Optional[int] = None, line: Optional[str] = None):
        self.line_no = line_no
        self.line = line
        if line_no is not None:
            message = f"line {line_no}: {message}"
            if line is not None:
                message += f" ({line.strip()!r})"
        super().__init__(message)


class SolutionFormatError(EvrpError, ValueError):
    """A solution file could not be parsed."""


class MoveError(EvrpError, ValueError):
    """A move descriptor does not fit the tour it is applied to."""


class BudgetExhausted(EvrpError):
    """The evaluation cap or the wall-clock deadline has been reached."""


class RepairError(EvrpError, RuntimeError):
    """Relaxed ZGA could not reach any recharge point."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (stuck at output position {position})")


class ConstructionError(EvrpError, RuntimeError):
    """An initial tour could not be built."""


class SolverError(EvrpError, RuntimeError):
    """A solver run failed."""


class OracleLimitError(EvrpError, ValueError):
    """The instance is too large for exhaustive enumeration."""
