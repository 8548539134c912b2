"""Exception hierarchy shared by the library and the command line.

Every error carries the process exit code the CLI should use and a
machine-readable report.
"""
from __future__ import annotations

from typing import Any, Dict, List, Optional


class MCMError(Exception):
    """Base class for all mcm_sim failures."""

    exit_code = 1
    kind = "error"

    def __init__(self, message: str, *, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def to_report(self) -> Dict[str, Any]:
        report: Dict[str, Any] = {
            "error": self.kind,
            "message": self.message,
            "exit_code": self.exit_code,
        }
        if self.details:
            report["details"] = self.details
        return report


class ConfigError(MCMError):
    """Schema violation, malformed quantity or rejected command-line flag."""

    exit_code = 2
    kind = "config"

    def __init__(self, message: str, *, diagnostics: Optional[List[Dict[str, str]]] = None,
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details=details)
        self.diagnostics = list(diagnostics or [])

    def to_report(self) -> Dict[str, Any]:
        report = super().to_report()
        if self.diagnostics:
            report["diagnostics"] = self.diagnostics
        return report


class SequenceError(MCMError):
    """Sequence configuration that cannot be compiled into a consistent schedule."""

    exit_code = 2
    kind = "sequence"


class DomainError(MCMError, ValueError):
    """An operation was called outside its precondition."""

    exit_code = 3
    kind = "domain"


class SolverError(MCMError):
    """A root finder or optimizer could not reach the requested target."""

    exit_code = 3
    kind = "solver"


class FitError(MCMError):
    """Degenerate data handed to a least-squares fit."""

    exit_code = 3
    kind = "fit"


class QuadratureError(MCMError):
    """Numerical integration did not converge."""

    exit_code = 3
    kind = "quadrature"
