"""
Tests for sweep point outcomes.
"""

import dataclasses

import pytest

from maxformer.core.models.result import SweepPoint


class TestSweepPoint:
    """Tests for SweepPoint"""

    def test_measured_point_is_kept(self) -> None:
        """A measured point carries its error and no note"""
        point = SweepPoint.measured(1e3, 2.5e-4)

        assert point.kept is True
        assert point.error == 2.5e-4
        assert point.reason is None
        assert point.note() == ""

    def test_zero_error_is_still_kept(self) -> None:
        """An exact zero error is a measurement, not a drop"""
        assert SweepPoint.measured(1e5, 0.0).kept is True

    def test_dropped_point_notes_lambda_and_reason(self) -> None:
        """A dropped point names its lambda and the failure"""
        point = SweepPoint.dropped(1e5, "non-finite activation after block 4")

        assert point.kept is False
        assert point.error is None
        assert point.note() == "dropped lambda=100000: non-finite activation after block 4"

    def test_point_is_immutable(self) -> None:
        """SweepPoint is a frozen dataclass"""
        point = SweepPoint.measured(10.0, 0.1)

        with pytest.raises(dataclasses.FrozenInstanceError):
            point.error = 0.0  # type: ignore[misc]
