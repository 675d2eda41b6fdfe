"""Custom exceptions for Spectra DD."""

from typing import Dict, Optional


class SpectraError(Exception):
    """Base exception for Spectra DD."""
    pass


class ScenarioValidationError(SpectraError):
    """Raised when a scenario or scenario document is inconsistent."""
    pass


class ConfigurationError(SpectraError):
    """Raised when a solver or experiment configuration is invalid."""
    pass


class SolverError(SpectraError):
    """Raised when a per-tone or dual solver cannot produce a result."""
    pass


class GridSizeError(SolverError):
    """Raised when a per-tone enumeration would exceed the configured cap."""
    pass


class OracleLimitError(SpectraError):
    """Raised when a brute-force reference problem is too large to enumerate."""
    pass


class UnknownPresetError(SpectraError):
    """Raised when a requested scenario preset does not exist."""
    pass


class VerificationError(SpectraError):
    """Raised when a convergence guarantee check fails.

    Carries the measured quantities next to their bounds so the failure
    message is self-contained.
    """

    def __init__(
        self,
        message: str,
        measured: Optional[Dict[str, float]] = None,
        bounds: Optional[Dict[str, float]] = None,
    ):
        super().__init__(message)
        self.measured = dict(measured or {})
        self.bounds = dict(bounds or {})
