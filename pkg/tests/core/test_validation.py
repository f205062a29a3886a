"""
Tests for core validation utilities.
"""

import math

import numpy as np
import pytest

from maxformer.core.validation import (
    MaxformerError,
    NonConvexOracleError,
    NonFiniteActivationError,
    PreconditionError,
    RepositoryError,
    ShapeMismatchError,
    SpecParseError,
    SpecValidationError,
    validate_delta,
    validate_finite,
    validate_tolerance,
)


class TestValidateDelta:
    """Tests for the token separation margin"""

    def test_inside_interval(self) -> None:
        """Test that deltas inside (0, width/(T+1)) are valid"""
        assert validate_delta(0.1, 2.0, 3) is True

    def test_upper_limit_excluded(self) -> None:
        """Test that delta = width/(T+1) is invalid"""
        assert validate_delta(0.5, 2.0, 3) is False

    def test_zero_excluded(self) -> None:
        """Test that zero is invalid"""
        assert validate_delta(0.0, 2.0, 3) is False

    def test_nan_invalid(self) -> None:
        """Test that nan is invalid"""
        assert validate_delta(math.nan, 2.0, 3) is False


class TestValidateTolerance:
    """Tests for exactness tolerances"""

    def test_positive_valid(self) -> None:
        """Test that a small positive tolerance is valid"""
        assert validate_tolerance(1e-9) is True

    def test_zero_invalid(self) -> None:
        """Test that zero tolerance is rejected"""
        assert validate_tolerance(0.0) is False

    def test_infinite_invalid(self) -> None:
        """Test that an infinite tolerance is rejected"""
        assert validate_tolerance(math.inf) is False


class TestValidateFinite:
    """Tests for finiteness checks"""

    def test_finite_values(self) -> None:
        """Test that ordinary floats pass"""
        assert validate_finite([0.0, -1.5, 1e300]) is True

    def test_inf_and_nan(self) -> None:
        """Test that inf or nan fail"""
        assert validate_finite([0.0, math.inf]) is False
        assert validate_finite([math.nan]) is False

    def test_nested_arrays(self) -> None:
        """Test that nested sequences and arrays are checked entry by entry"""
        assert validate_finite(((0.0, 1.0), (2.0, -3.0))) is True
        assert validate_finite(np.array([[0.0], [np.inf]])) is False


class TestErrors:
    """Tests for the exception hierarchy"""

    @pytest.mark.parametrize(
        "error",
        [
            SpecParseError("W", "missing"),
            SpecValidationError("bad chain"),
            ShapeMismatchError((2, 3), (3, 2), "head"),
            PreconditionError("p > T"),
            NonFiniteActivationError(4),
            NonConvexOracleError([0.0], 0.1),
            RepositoryError("/tmp/x.json", "missing"),
        ],
    )
    def test_all_are_domain_errors(self, error: Exception) -> None:
        """Test that every error subclasses MaxformerError"""
        assert isinstance(error, MaxformerError)

    def test_parse_error_names_field(self) -> None:
        """Test that SpecParseError stores and reports the field"""
        error = SpecParseError("layers.0.W", "missing")
        assert error.field == "layers.0.W"
        assert "layers.0.W" in str(error)

    def test_shape_error_stores_shapes(self) -> None:
        """Test that ShapeMismatchError carries expected, actual and location"""
        error = ShapeMismatchError((2, 3), (3, 2), "AttentionHead.w_o")
        assert (error.expected, error.actual, error.where) == ((2, 3), (3, 2), "AttentionHead.w_o")

    def test_precondition_names_condition(self) -> None:
        """Test that PreconditionError reports the violated condition"""
        error = PreconditionError("p=5 > T=2")
        assert error.condition == "p=5 > T=2"
        assert "p=5 > T=2" in str(error)

    def test_repository_error_names_path(self) -> None:
        """Test that RepositoryError reports the path"""
        error = RepositoryError("/data/spec.json", "no such file")
        assert error.path == "/data/spec.json"
        assert "/data/spec.json" in str(error)

    def test_non_convex_point(self) -> None:
        """Test that NonConvexOracleError stores the offending point"""
        error = NonConvexOracleError([0.5, -0.5], 0.2)
        assert error.point == (0.5, -0.5)
        assert error.excess == 0.2
