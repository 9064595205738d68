"""
Exception hierarchy for the qubitdyne simulator.
"""
from typing import Optional


class QubitdyneError(Exception):
    """Base class for all simulator errors."""


class TruncationError(QubitdyneError, ValueError):
    """A prepared state leaks into the top Fock level."""


class GridError(QubitdyneError, ValueError):
    """An evaluation grid is too coarse or too narrow."""


class DimensionMismatchError(QubitdyneError, ValueError):
    """Operands live in Fock spaces of different truncation."""


class NormalizationUnderflowError(QubitdyneError, ArithmeticError):
    """A conditional state lost its norm."""


class BasisMismatchError(QubitdyneError, ValueError):
    """A record was measured in a basis that does not map to the requested quadrature."""


class BasisPatternError(QubitdyneError, ValueError):
    """A heterodyne record does not alternate Y and X measurements."""


class DivergentNormalizationError(QubitdyneError, ArithmeticError):
    """A filter normalization integral vanished."""


class CompletenessError(QubitdyneError, ValueError):
    """A POVM does not resolve the identity."""


class FitError(QubitdyneError, ValueError):
    """Not enough data to fit a distribution."""


class EmptySampleError(QubitdyneError, ValueError):
    """A statistic was requested on an empty sample."""


class ConfigError(QubitdyneError, ValueError):
    """An experiment configuration failed validation."""

    def __init__(self, message: str, errors: Optional[list] = None):
        super().__init__(message)
        self.errors = errors or []


class TrajectoryError(QubitdyneError, RuntimeError):
    """A trajectory failed; carries the trajectory index."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"Trajectory {index} failed: {cause}")
        self.index = index
        self.cause = cause
