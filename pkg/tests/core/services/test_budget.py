"""Tests for architecture budget formulas and audits."""

import numpy as np
import pytest

from maxformer.core.models import (
    AffineMap,
    DomainBox,
    NetSpec,
    ReluNetSpec,
    SpecDims,
    TheoremId,
)
from maxformer.core.services.budget import (
    BudgetDims,
    audit_compiled,
    budget_dims_for,
    check_architecture_budget,
    claimed_budget,
    measure_architecture,
    theorem_for,
)
from maxformer.core.services.compiler import TransformerCompiler
from maxformer.core.services.netspec_io import random_spec
from maxformer.core.validation import PreconditionError


def _box(n: int = 1, T: int = 2) -> DomainBox:
    return DomainBox(a=-1.0, b=1.0, n=n, T=T)


def _spec(kind: str, seed: int = 1, **dims: int) -> NetSpec:
    spec = random_spec(kind, SpecDims(**dims), 1.0, seed)  # type: ignore[arg-type]
    assert not isinstance(spec, DomainBox)
    return spec


class TestClaimedBudget:
    """Tests for the closed-form size tuples"""

    def test_shallow(self) -> None:
        """Test the rank <= T single-layer tuple"""
        claimed = claimed_budget(TheoremId.SHALLOW_PLET, BudgetDims(n=1, T=2, m=1, p=2))
        assert claimed.as_tuple() == (3, 10, 2, 4, 40)

    def test_relu(self) -> None:
        """Test that ReLU nets pay one block for the readout"""
        claimed = claimed_budget("relu", BudgetDims(n=1, T=2, m=1, p=2, D=2))
        assert claimed.as_tuple() == (7, 13, 2, 6, 60)

    def test_cpwl_tournament_depth(self) -> None:
        """Test that CPWL depth follows ceil((N-1)/(T-1)) when N > T"""
        claimed = claimed_budget(TheoremId.CPWL, BudgetDims(n=1, T=2, m=1, p=4))
        assert claimed.as_tuple() == (9, 24, 2, 12, 100)

    @pytest.mark.parametrize("p,s,depth", [(2, 2, 1), (3, 2, 2), (5, 2, 4), (5, 3, 2), (7, 4, 2)])
    def test_tournament_depth(self, p: int, s: int, depth: int) -> None:
        """Test L = 3 ceil((p-1)/(s-1)) for shallow tournaments"""
        claimed = claimed_budget(TheoremId.SHALLOW_PGTT, BudgetDims(n=1, T=max(s, 2), m=1, p=p, s=s))
        assert claimed.L == 3 * depth

    def test_deep_tournament_scales_with_depth(self) -> None:
        """Test that deep tournaments multiply by D"""
        one = claimed_budget(TheoremId.DEEP_PGTT, BudgetDims(n=1, T=2, m=1, p=3, s=2, D=1))
        three = claimed_budget(TheoremId.DEEP_PGTT, BudgetDims(n=1, T=2, m=1, p=3, s=2, D=3))
        assert three.L == 3 * one.L
        assert three.d == one.d

    def test_tournament_needs_width(self) -> None:
        """Test that tournament formulas require s"""
        with pytest.raises(PreconditionError):
            claimed_budget(TheoremId.SHALLOW_PGTT, BudgetDims(n=1, T=2, m=1, p=3))

    def test_unknown_theorem(self) -> None:
        """Test that unknown identifiers are preconditions"""
        with pytest.raises(PreconditionError, match="unknown theorem_id"):
            claimed_budget("nope", BudgetDims(n=1, T=2, m=1, p=2))


class TestRouting:
    """Tests for theorem_for and budget_dims_for"""

    def test_theorem_for(self) -> None:
        """Test the construction chosen per spec kind and rank"""
        box = _box()
        assert theorem_for(_spec("maxout_layer", p=2), box) == TheoremId.SHALLOW_PLET
        assert theorem_for(_spec("maxout_layer", p=3), box) == TheoremId.SHALLOW_PGTT
        assert theorem_for(_spec("maxout_layer", p=2), box, s=2) == TheoremId.SHALLOW_PGTT
        assert theorem_for(_spec("deep_maxout", p=2, D=2), box) == TheoremId.DEEP_PLET
        assert theorem_for(_spec("deep_maxout", p=3, D=2), box) == TheoremId.DEEP_PGTT
        assert theorem_for(_spec("relu_net", D=1), box) == TheoremId.RELU
        assert theorem_for(_spec("cpwl_pair", p=3), box) == TheoremId.CPWL

    def test_relu_width_counts_readout(self) -> None:
        """Test that a wide readout sets m for ReLU nets"""
        spec = ReluNetSpec(
            weights=(((1.0,), (1.0,)),),
            biases=((0.0, 0.0),),
            readout=AffineMap(weight=((1.0, 1.0),) * 6, bias=(0.0,) * 6),
        )
        dims = budget_dims_for(spec, _box())
        assert dims.m == 3
        assert dims.p == 2

    def test_high_rank_defaults_width_to_T(self) -> None:
        """Test that ranks above T use s = T"""
        dims = budget_dims_for(_spec("deep_maxout", p=4, D=2, T=3), _box(1, 3))
        assert dims.s == 3
        assert dims.D == 2
        assert dims.p == 4


class TestAudit:
    """Tests comparing compiled nets with their budgets"""

    @pytest.mark.parametrize(
        "kind,dims",
        [
            ("maxout_layer", {"n": 1, "T": 2, "p": 2, "m": 1}),
            ("maxout_layer", {"n": 2, "T": 3, "p": 3, "m": 2}),
            ("deep_maxout", {"n": 1, "T": 2, "p": 2, "m": 1, "D": 2}),
            ("relu_net", {"n": 1, "T": 2, "m": 1, "D": 2}),
            ("maxout_layer", {"n": 1, "T": 2, "p": 4, "m": 1}),
            ("deep_maxout", {"n": 1, "T": 2, "p": 3, "m": 1, "D": 2}),
            ("cpwl_pair", {"n": 1, "T": 2, "p": 4, "m": 1}),
        ],
    )
    def test_compiled_nets_fit(self, kind: str, dims: dict[str, int]) -> None:
        """Test that every construction stays within its claimed tuple"""
        spec = _spec(kind, 3, **dims)
        box = _box(dims["n"], dims["T"])
        net = TransformerCompiler().compile_general(spec, box)
        audit = audit_compiled(net, spec, box)

        assert audit.theorem_id == theorem_for(spec, box)
        assert audit.within_budget, audit.notes

    def test_measure_architecture(self) -> None:
        """Test the measured tuple of a shallow compile"""
        spec = _spec("maxout_layer", p=2)
        net = TransformerCompiler().compile_general(spec, _box())
        actual = measure_architecture(net)

        assert actual.L == net.depth == 3
        assert actual.d == net.dim
        assert actual.k == 2
        assert actual.H >= 1

    def test_exceeding_budget_is_reported(self) -> None:
        """Test that a net audited against a smaller construction fails with notes"""
        spec = _spec("maxout_layer", n=2, T=3, p=3, m=2)
        net = TransformerCompiler().compile_general(spec, _box(2, 3))
        audit = check_architecture_budget(net, TheoremId.SHALLOW_PLET, BudgetDims(n=1, T=3, m=1, p=1))

        assert not audit.within_budget
        assert audit.notes.startswith("exceeds budget in")
        assert np.all(np.array(audit.claimed.as_tuple()) > 0)
