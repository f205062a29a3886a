"""
Tests for weight synthesis.

Compiled nets are compared with their reference evaluators on random
points of the box; under hardmax attention they must agree to float
rounding.
"""

import math

import numpy as np
import pytest

from maxformer.core.models import (
    AffineMap,
    AttentionMode,
    CompileOptions,
    CpwlPairSpec,
    DeepMaxoutSpec,
    DomainBox,
    MaxoutLayerSpec,
    NetSpec,
    ReluNetSpec,
    ResidualPolicy,
    SpecDims,
    TheoremId,
    TransformerNet,
)
from maxformer.core.services.compiler import (
    TransformerCompiler,
    decompose_rank,
    layer_bound,
    plan_stage,
    relu_layers,
    stack_cpwl,
    stage_bounds,
)
from maxformer.core.services.maxout_eval import (
    eval_cpwl_pair,
    eval_deep_maxout,
    eval_maxout_layer,
    sequence_oracle,
)
from maxformer.core.services.netspec_io import random_spec
from maxformer.core.services.transformer_eval import transformer_forward_batch
from maxformer.core.validation import PreconditionError, ShapeMismatchError


def _box(n: int = 1, T: int = 2) -> DomainBox:
    return DomainBox(a=-1.0, b=1.0, n=n, T=T)


def _gap(net: TransformerNet, spec: NetSpec, box: DomainBox, samples: int = 300, seed: int = 0) -> float:
    """Largest |compiled - reference| / (1 + |reference|) on random box points"""
    X = np.random.default_rng(seed).uniform(box.a, box.b, size=(samples, box.n, box.seq_len))
    compiled = transformer_forward_batch(net, X, AttentionMode.hardmax())
    expected = sequence_oracle(spec, box.n, box.seq_len)(X)
    return float(np.max(np.abs(compiled - expected) / (1.0 + np.abs(expected))))


def _spec(kind: str, seed: int, **dims: int) -> NetSpec:
    spec = random_spec(kind, SpecDims(**dims), 1.0, seed)  # type: ignore[arg-type]
    assert not isinstance(spec, DomainBox)
    return spec


@pytest.fixture
def compiler() -> TransformerCompiler:
    return TransformerCompiler()


class TestDecomposeRank:
    """Tests for rank decomposition into tournaments"""

    @pytest.mark.parametrize("p,s", [(3, 2), (4, 2), (5, 2), (4, 3), (5, 3), (7, 4)])
    def test_depth_and_equality(self, p: int, s: int) -> None:
        """Test depth ceil((p-1)/(s-1)) and exact agreement with the original layer"""
        rng = np.random.default_rng(p * 10 + s)
        layer = MaxoutLayerSpec.from_arrays(rng.uniform(-1, 1, (3, p, 2)), rng.uniform(-1, 1, (3, p)))
        deep = decompose_rank(layer, s)

        assert deep.depth == math.ceil((p - 1) / (s - 1))
        assert all(l.p == s for l in deep.layers)
        V = rng.uniform(-1, 1, size=(500, 2))
        assert np.max(np.abs(eval_deep_maxout(deep, V) - eval_maxout_layer(layer, V))) <= 1e-12

    def test_tokenwise_layout(self) -> None:
        """Test that a sequence layer keeps its per-token output layout"""
        layer = _spec("maxout_layer", 4, n=2, T=2, p=5, m=2)
        assert isinstance(layer, MaxoutLayerSpec)
        deep = decompose_rank(layer, 2, seq_len=2)
        V = np.random.default_rng(1).uniform(-1, 1, size=(200, 4))
        assert deep.m_out == layer.m_out
        assert np.max(np.abs(eval_deep_maxout(deep, V) - eval_maxout_layer(layer, V))) <= 1e-12

    def test_low_rank_unchanged(self) -> None:
        """Test that p <= s returns the layer itself"""
        layer = MaxoutLayerSpec.from_arrays(np.ones((1, 2, 1)))
        assert decompose_rank(layer, 3).layers == (layer,)

    def test_width_one_rejected(self) -> None:
        """Test that s < 2 is rejected"""
        with pytest.raises(PreconditionError):
            decompose_rank(MaxoutLayerSpec.from_arrays(np.ones((1, 3, 1))), 1)


class TestSpecTransformations:
    """Tests for ReLU and CPWL rewrites and bounds"""

    def test_relu_layers_pad_to_tokens(self) -> None:
        """Test that hidden widths are padded to multiples of T with zero units"""
        spec = ReluNetSpec(
            weights=(((1.0, 0.0), (0.0, 1.0), (1.0, 1.0)),),
            biases=((0.0, 0.0, 0.0),),
            readout=AffineMap(weight=((1.0, 1.0, 1.0), (0.0, 1.0, 0.0)), bias=(0.0, 0.0)),
        )
        layers, weight, bias = relu_layers(spec, 2)
        assert layers[0].m_out == 4
        assert layers[0].p == 2
        assert weight.shape == (2, 4)
        np.testing.assert_array_equal(weight[:, 3], 0.0)

    def test_stack_cpwl_difference(self) -> None:
        """Test that stacked g and h outputs difference to g - h"""
        pair = _spec("cpwl_pair", 2, n=1, T=2, p=3, m=1)
        assert isinstance(pair, CpwlPairSpec)
        stacked = stack_cpwl(pair, 2)
        V = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
        out = eval_maxout_layer(stacked, V)
        # token k holds (g_k, h_k)
        np.testing.assert_allclose(out[:, [0, 2]] - out[:, [1, 3]], eval_cpwl_pair(pair, V), atol=1e-12)

    def test_layer_bound_floor(self) -> None:
        """Test that output bounds are floored at 1"""
        tiny = MaxoutLayerSpec.from_arrays(np.full((1, 1, 1), 0.01))
        assert layer_bound(tiny, 1.0) == 1.0

    def test_stage_bounds(self) -> None:
        """Test M1, M2 and the propagated output bounds"""
        layer = MaxoutLayerSpec.from_arrays(np.array([[[2.0, -1.0]]]), np.array([[0.5]]))
        m1, m2s, bounds = stage_bounds([layer], DomainBox(a=-2.0, b=1.0, n=1, T=2))
        assert m1 == 2.0
        assert m2s == [3.0]
        assert bounds == [6.5]


class TestPlanStage:
    """Tests for splitting outputs into head and selector rows"""

    def test_token_local_rows(self) -> None:
        """Test that pass-through units need no heads"""
        eye = np.eye(2)[:, None, :].repeat(2, axis=1)
        plan = plan_stage(MaxoutLayerSpec.from_arrays(eye), 2)
        assert plan.local == (0,)
        assert plan.general == ()

    def test_general_rows(self) -> None:
        """Test that random units are computed by heads"""
        layer = _spec("maxout_layer", 3, n=1, T=2, p=2, m=2)
        assert isinstance(layer, MaxoutLayerSpec)
        plan = plan_stage(layer, 2)
        assert plan.general == (0, 1)
        assert plan.scratch_rows == 2 * 2 * 3

    def test_dimension_not_multiple_of_T(self) -> None:
        """Test that layer dimensions must split into tokens"""
        with pytest.raises(ShapeMismatchError):
            plan_stage(MaxoutLayerSpec.from_arrays(np.ones((3, 1, 2))), 2)


class TestCompileMaxout:
    """Tests for shallow and deep maxout compiles"""

    @pytest.mark.parametrize("seed,n,T,p,m", [(1, 1, 2, 2, 1), (2, 2, 3, 3, 2), (3, 3, 4, 2, 1), (4, 1, 4, 4, 3)])
    def test_shallow_exact(self, compiler: TransformerCompiler, seed: int, n: int, T: int, p: int, m: int) -> None:
        """Test that a shallow compile equals its layer on the box"""
        layer = _spec("maxout_layer", seed, n=n, T=T, p=p, m=m)
        assert isinstance(layer, MaxoutLayerSpec)
        box = _box(n, T)
        net = compiler.compile_maxout_layer_seq(layer, box)

        assert net.depth == 3
        assert net.info.theorem_id == TheoremId.SHALLOW_PLET.value
        assert _gap(net, layer, box) <= 1e-9

    def test_rank_above_T_rejected(self, compiler: TransformerCompiler) -> None:
        """Test that p > T needs compile_general"""
        layer = _spec("maxout_layer", 1, n=1, T=2, p=3, m=1)
        assert isinstance(layer, MaxoutLayerSpec)
        with pytest.raises(PreconditionError):
            compiler.compile_maxout_layer_seq(layer, _box(1, 2))

    def test_token_compile(self, compiler: TransformerCompiler) -> None:
        """Test that a token compile writes f at its token and zero elsewhere"""
        rng = np.random.default_rng(5)
        layer = MaxoutLayerSpec.from_arrays(rng.uniform(-1, 1, (2, 2, 3)), rng.uniform(-1, 1, (2, 2)))
        box = _box(1, 3)
        net = compiler.compile_maxout_token(layer, box, token=2)
        X = rng.uniform(-1, 1, size=(100, 1, 3))
        out = transformer_forward_batch(net, X, AttentionMode.hardmax())
        expected = eval_maxout_layer(layer, X[:, 0, :])

        np.testing.assert_allclose(out[:, :, 1], expected, atol=1e-9)
        np.testing.assert_allclose(out[:, :, [0, 2]], 0.0, atol=1e-9)

    def test_token_out_of_range(self, compiler: TransformerCompiler) -> None:
        """Test that the target token must exist"""
        with pytest.raises(PreconditionError):
            compiler.compile_maxout_token(MaxoutLayerSpec.from_arrays(np.ones((1, 1, 2))), _box(1, 2), token=3)

    @pytest.mark.parametrize("seed,depth,T", [(1, 2, 2), (2, 3, 2), (3, 2, 3)])
    def test_deep_exact(self, compiler: TransformerCompiler, seed: int, depth: int, T: int) -> None:
        """Test that a deep compile has 3D blocks and equals its network"""
        spec = _spec("deep_maxout", seed, n=1, T=T, p=2, m=1, D=depth)
        assert isinstance(spec, DeepMaxoutSpec)
        box = _box(1, T)
        net = compiler.compile_deep_maxout(spec, box)

        assert net.depth == 3 * depth
        assert len(net.info.stages) == depth
        assert net.info.stages[-1].shift_delta is None
        assert all(stage.shift_delta is not None for stage in net.info.stages[:-1])
        assert _gap(net, spec, box) <= 1e-9

    def test_first_layer_must_read_box(self, compiler: TransformerCompiler) -> None:
        """Test that the first layer's input dimension must be nT"""
        layer = _spec("maxout_layer", 1, n=2, T=2, p=2, m=1)
        assert isinstance(layer, MaxoutLayerSpec)
        with pytest.raises(ShapeMismatchError):
            compiler.compile_maxout_layer_seq(layer, _box(1, 2))


class TestCompileOptions:
    """Tests for delta schedules and residual policies"""

    def test_delta_schedule_length(self) -> None:
        """Test that the schedule needs one delta per shifted stage"""
        spec = _spec("deep_maxout", 1, n=1, T=2, p=2, m=1, D=3)
        assert isinstance(spec, DeepMaxoutSpec)
        compiler = TransformerCompiler(CompileOptions(delta_schedule=(0.1,)))
        with pytest.raises(PreconditionError):
            compiler.compile_deep_maxout(spec, _box())

    def test_delta_out_of_range(self) -> None:
        """Test that deltas must stay below 2M/(T+1)"""
        spec = _spec("deep_maxout", 1, n=1, T=2, p=2, m=1, D=2)
        assert isinstance(spec, DeepMaxoutSpec)
        compiler = TransformerCompiler(CompileOptions(delta_schedule=(1e6,)))
        with pytest.raises(PreconditionError):
            compiler.compile_deep_maxout(spec, _box())

    def test_explicit_delta_schedule(self) -> None:
        """Test that a valid schedule is used and stays exact"""
        spec = _spec("deep_maxout", 2, n=1, T=2, p=2, m=1, D=2)
        assert isinstance(spec, DeepMaxoutSpec)
        net = TransformerCompiler(CompileOptions(delta_schedule=(0.05,))).compile_deep_maxout(spec, _box())
        assert net.info.stages[0].shift_delta == 0.05
        assert _gap(net, spec, _box()) <= 1e-9

    def test_single_stage_drops_scratch_in_readout(self, compiler: TransformerCompiler) -> None:
        """Test that AUTO leaves scratch rows for the readout on one stage"""
        layer = _spec("maxout_layer", 1, n=1, T=2, p=2, m=1)
        assert isinstance(layer, MaxoutLayerSpec)
        assert compiler.compile_maxout_layer_seq(layer, _box()).info.residual == "readout_drop"

    def test_forced_cancellation_stays_exact(self) -> None:
        """Test that FF_CANCEL clears scratch rows without changing outputs"""
        layer = _spec("maxout_layer", 1, n=1, T=2, p=2, m=1)
        assert isinstance(layer, MaxoutLayerSpec)
        net = TransformerCompiler(CompileOptions(residual=ResidualPolicy.FF_CANCEL)).compile_maxout_layer_seq(layer, _box())
        assert net.info.residual == "ff_cancel"
        assert _gap(net, layer, _box()) <= 1e-9


class TestCompileGeneral:
    """Tests for routing, tournaments, ReLU and CPWL compiles"""

    def test_low_rank_compiles_directly(self, compiler: TransformerCompiler) -> None:
        """Test that ranks <= T need no decomposition"""
        layer = _spec("maxout_layer", 1, n=1, T=3, p=3, m=1)
        net = compiler.compile_general(layer, _box(1, 3))
        assert net.info.theorem_id == TheoremId.SHALLOW_PLET.value
        assert net.info.s is None

    @pytest.mark.parametrize("p,T", [(3, 2), (5, 2), (5, 3)])
    def test_high_rank_tournament(self, compiler: TransformerCompiler, p: int, T: int) -> None:
        """Test that p > T decomposes with s = T into 3 ceil((p-1)/(T-1)) blocks"""
        layer = _spec("maxout_layer", p, n=1, T=T, p=p, m=1)
        box = _box(1, T)
        net = compiler.compile_general(layer, box)

        assert net.info.theorem_id == TheoremId.SHALLOW_PGTT.value
        assert net.info.s == T
        assert net.depth == 3 * math.ceil((p - 1) / (T - 1))
        assert _gap(net, layer, box) <= 1e-9

    def test_deep_tournament(self, compiler: TransformerCompiler) -> None:
        """Test a deep net with ranks above T"""
        spec = _spec("deep_maxout", 9, n=1, T=2, p=3, m=1, D=2)
        net = compiler.compile_general(spec, _box())
        assert net.info.theorem_id == TheoremId.DEEP_PGTT.value
        assert _gap(net, spec, _box()) <= 1e-9

    def test_explicit_width_above_T_rejected(self) -> None:
        """Test that s must not exceed T"""
        layer = _spec("maxout_layer", 1, n=1, T=2, p=3, m=1)
        with pytest.raises(PreconditionError):
            TransformerCompiler(CompileOptions(s=3)).compile_general(layer, _box())

    @pytest.mark.parametrize("seed,depth", [(1, 1), (2, 2)])
    def test_relu_exact(self, compiler: TransformerCompiler, seed: int, depth: int) -> None:
        """Test that ReLU compiles have 3D+1 blocks and equal the net"""
        spec = _spec("relu_net", seed, n=1, T=2, m=2, D=depth)
        net = compiler.compile_general(spec, _box())

        assert net.depth == 3 * depth + 1
        assert net.info.theorem_id == TheoremId.RELU.value
        assert _gap(net, spec, _box()) <= 1e-9

    def test_relu_output_must_split_into_tokens(self, compiler: TransformerCompiler) -> None:
        """Test that the readout dimension must be a multiple of T"""
        spec = ReluNetSpec(
            weights=(((1.0, 0.0), (0.0, 1.0)),),
            biases=((0.0, 0.0),),
            readout=AffineMap(weight=((1.0, 1.0),), bias=(0.0,)),
        )
        with pytest.raises(ShapeMismatchError):
            compiler.compile_general(spec, _box())

    def test_relu_needs_two_tokens(self, compiler: TransformerCompiler) -> None:
        """Test that T = 1 leaves no room for rank-2 units"""
        spec = ReluNetSpec(
            weights=(((1.0,),),), biases=((0.0,),), readout=AffineMap(weight=((1.0,),), bias=(0.0,))
        )
        with pytest.raises(PreconditionError):
            compiler.compile_general(spec, _box(1, 1))

    def test_cpwl_identity(self, compiler: TransformerCompiler) -> None:
        """Test that max(x, 0) - max(-x, 0) compiles to the identity"""
        eye = np.eye(2)
        g = MaxoutLayerSpec.from_arrays(np.stack([eye, np.zeros((2, 2))], axis=1))
        h = MaxoutLayerSpec.from_arrays(np.stack([-eye, np.zeros((2, 2))], axis=1))
        pair = CpwlPairSpec(g=g, h=h)
        net = compiler.compile_cpwl(pair, _box())
        X = np.random.default_rng(0).uniform(-1, 1, size=(100, 1, 2))

        assert net.info.theorem_id == TheoremId.CPWL.value
        np.testing.assert_allclose(transformer_forward_batch(net, X, AttentionMode.hardmax()), X, atol=1e-9)

    @pytest.mark.parametrize("p", [2, 4])
    def test_cpwl_random(self, compiler: TransformerCompiler, p: int) -> None:
        """Test random pairs, with and without decomposition"""
        pair = _spec("cpwl_pair", p, n=1, T=2, p=p, m=1)
        net = compiler.compile_general(pair, _box())
        assert _gap(net, pair, _box()) <= 1e-9
