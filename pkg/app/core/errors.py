"""
Exception hierarchy. Every error carries the CLI exit code it maps to.
"""


class PolyFrameError(Exception):
    """Base class for all library errors."""

    exit_code: int = 1


class ConfigError(PolyFrameError):
    """Invalid experiment configuration or settings."""

    exit_code = 2


class NumericError(PolyFrameError):
    """Non-finite values or a failed dense decomposition."""

    exit_code = 3


class SamplingError(PolyFrameError):
    """Rejection sampling exhausted its proposal budget."""

    exit_code = 4

    def __init__(self, message: str, acceptance_rate: float = 0.0):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate


class ParameterError(PolyFrameError, ValueError):
    """Argument outside its admissible range."""

    exit_code = 2


class ShapeError(ParameterError):
    """Dimension or length mismatch between arrays."""


class SizeLimitError(ParameterError):
    """Index set would exceed the configured cardinality cap."""


class BudgetError(ParameterError):
    """Sample budget cannot support any index set."""


class DomainError(ParameterError):
    """Point lies outside the bounding box D."""
