import pytest
from pydantic import ValidationError

from maxformer.cli import RunConfig
from maxformer.core.models import AttentionKind


class TestRunConfig:
    """Test suite for per-command flag validation"""

    def test_bounds_fields_follow_kind(self) -> None:
        """Test that each bound kind names its own missing flags"""
        with pytest.raises(ValidationError, match="bounds needs --n0, --widths, --k, --n"):
            RunConfig(command="bounds", bound_kind="maxout")
        with pytest.raises(ValidationError, match="bounds needs --kind"):
            RunConfig(command="bounds")

    def test_regions_needs_a_function(self) -> None:
        """Test that regions needs a net or a spec"""
        with pytest.raises(ValidationError, match="--net or --spec"):
            RunConfig(command="regions", slice="slice.json")

    def test_softmax_needs_lambda(self) -> None:
        """Test that softmax verification requires --lam"""
        with pytest.raises(ValidationError, match="--lam"):
            RunConfig(command="verify", net="n.json", spec="s.json", mode=AttentionKind.SOFTMAX)
        config = RunConfig(command="verify", net="n.json", spec="s.json", mode="softmax", lam=100.0)
        assert config.lam == 100.0

    def test_selftest_needs_nothing(self) -> None:
        """Test that selftest validates with defaults only"""
        config = RunConfig(command="selftest")
        assert not config.quick
        assert config.threads is None

    @pytest.mark.parametrize("field,value", [("s", 1), ("samples", 0), ("threads", 0), ("resolution", 8)])
    def test_ranges(self, field: str, value: int) -> None:
        """Test that numeric flags are range-checked"""
        with pytest.raises(ValidationError):
            RunConfig.model_validate({"command": "selftest", field: value})
