"""Exception hierarchy shared by every module.

The CLI turns any `CalibrationToolError` into exit code 2 plus a JSON error
object on stderr, so library code raises these instead of bare exceptions.
"""

from __future__ import annotations

from typing import Optional


class CalibrationToolError(Exception):
    """Base class for every error this package raises."""


class DistributionError(CalibrationToolError, ValueError):
    """A probability mass function, CDF or coupling violates its invariants."""


class ConfigError(CalibrationToolError, ValueError):
    """A system configuration or JSON document is malformed."""


class UnknownUserError(CalibrationToolError, KeyError):
    """A secret pair or realization names a user that is not in the config."""

    def __init__(self, user_id: str):
        super().__init__(user_id)
        self.user_id = user_id

    def __str__(self) -> str:
        return f"unknown user id {self.user_id!r}"


class BudgetError(CalibrationToolError, ValueError):
    """ε or θ outside its admissible range."""


class RootFindingError(CalibrationToolError, RuntimeError):
    """Brent's method failed to converge on a bracketed root."""


class IngestError(CalibrationToolError, ValueError):
    """CSV ingestion failed; `line` is the 1-based CSV line when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
