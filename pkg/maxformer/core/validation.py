"""
Validation utilities and the exception hierarchy for the core domain.

Predicates return bool; callers decide which error to raise. Every error
carries the offending value so the CLI can map it to an exit code and a
message without string parsing.
"""

import math
from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike


def validate_delta(delta: float, width: float, tokens: int) -> bool:
    """
    Validate a token-separation margin.

    The T+1 shifted token boxes only stay disjoint with the region
    selector ramps inside the gaps when 0 < delta < width / (T+1).

    Args:
        delta: Proposed separation margin
        width: Side length of the (unshifted) token box
        tokens: Sequence length T

    Returns:
        True if valid, False otherwise
    """
    if not math.isfinite(delta):
        return False
    return 0.0 < delta < width / (tokens + 1)


def validate_tolerance(tol: float) -> bool:
    """Exactness checks need a strictly positive, finite tolerance"""
    return math.isfinite(tol) and tol > 0.0


def validate_finite(values: ArrayLike) -> bool:
    """Check that every entry of a (nested) array is a finite real"""
    return bool(np.all(np.isfinite(np.asarray(values, dtype=np.float64))))


class MaxformerError(Exception):
    """Base class for all domain errors"""


class SpecParseError(MaxformerError):
    """Raised when a document does not follow the spec file schema"""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"Invalid field '{field}': {message}")


class SpecValidationError(MaxformerError):
    """Raised when a well-formed document violates a type invariant"""

    def __init__(self, message: str):
        super().__init__(message)


class ShapeMismatchError(MaxformerError):
    """Raised when array shapes disagree"""

    def __init__(self, expected: object, actual: object, where: str):
        self.expected = expected
        self.actual = actual
        self.where = where
        super().__init__(f"{where}: expected shape {expected}, got {actual}")


class PreconditionError(MaxformerError):
    """Raised when an operation precondition does not hold"""

    def __init__(self, condition: str):
        self.condition = condition
        super().__init__(f"Precondition violated: {condition}")


class NonFiniteActivationError(MaxformerError):
    """Raised when a forward pass produces inf or nan"""

    def __init__(self, block_index: int):
        self.block_index = block_index
        super().__init__(f"Non-finite activation after block {block_index}")


class NonConvexOracleError(MaxformerError):
    """Raised when a tangent plane lies above the function it was taken from"""

    def __init__(self, point: Sequence[float], excess: float):
        self.point = tuple(point)
        self.excess = excess
        super().__init__(
            f"Oracle is not convex: a tangent plane exceeds it by {excess:.3e} "
            f"at {list(self.point)}"
        )


class RepositoryError(MaxformerError):
    """Raised when a file cannot be read or written"""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
