"""
Tests for named random streams.
"""

import numpy as np

from maxformer.core.rng import stream


class TestStream:
    """Tests for stream splitting"""

    def test_same_seed_and_name_repeat(self) -> None:
        """Test that a stream is a pure function of seed and name"""
        np.testing.assert_array_equal(stream(42, "verify.exact").random(5), stream(42, "verify.exact").random(5))

    def test_names_are_independent(self) -> None:
        """Test that different names give different draws"""
        assert not np.array_equal(stream(42, "a").random(5), stream(42, "b").random(5))

    def test_seeds_are_independent(self) -> None:
        """Test that different seeds give different draws"""
        assert not np.array_equal(stream(1, "a").random(5), stream(2, "a").random(5))
