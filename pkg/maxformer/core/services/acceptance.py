"""
The self-test suite: twelve end-to-end checks over random compiles.

Each check returns a CriterionOutcome; a domain error inside a check fails
that check only. ``quick`` shrinks every count so the suite runs in seconds.
"""

import logging
import math
import time
from typing import Callable, Optional

import numpy as np

from maxformer.core.models import (
    AttentionMode,
    CompileOptions,
    CpwlPairSpec,
    CriterionOutcome,
    DeepMaxoutSpec,
    DomainBox,
    MaxoutLayerSpec,
    ReluNetSpec,
    SelftestReport,
    Slice,
    SpecDims,
    SpecKind,
)
from maxformer.core.rng import stream
from maxformer.core.services.budget import audit_compiled
from maxformer.core.services.compiler import TransformerCompiler, decompose_rank
from maxformer.core.services.convex_fit import fit_report, max_affine_fit, tile_to_tokens
from maxformer.core.services.maxout_eval import eval_deep_maxout, eval_maxout_layer, sequence_oracle
from maxformer.core.services.netspec_io import random_spec
from maxformer.core.services.regions import (
    count_regions_1d,
    maxout_region_lower_bound,
    transformer_region_lower_bound,
)
from maxformer.core.services.transformer_eval import net_evaluator
from maxformer.core.services.verify import Verifier
from maxformer.core.validation import MaxformerError

logger = logging.getLogger(__name__)

SWEEP_LAMBDAS = (1e2, 1e3, 1e4, 1e5)


def _box(n: int, T: int) -> DomainBox:
    return DomainBox(a=-1.0, b=1.0, n=n, T=T)


class AcceptanceSuite:
    """
    Args:
        verifier: Sample evaluator
        options: Compile options for every compile
        quick: Reduced counts
        seed: Run seed
    """

    def __init__(self, verifier: Verifier, options: CompileOptions, quick: bool = False, seed: int = 42):
        self.verifier = verifier
        self.compiler = TransformerCompiler(options)
        self.quick = quick
        self.seed = seed

    def _count(self, full: int, quick: int) -> int:
        return quick if self.quick else full

    @property
    def _samples(self) -> int:
        return self._count(1000, 200)

    def run(self) -> SelftestReport:
        checks: list[tuple[int, str, Callable[[], tuple[bool, str]]]] = [
            (1, "shallow exactness", self.shallow_exactness),
            (2, "deep exactness and shifts", self.deep_exactness),
            (3, "rank decomposition", self.rank_decomposition),
            (4, "relu compiles", self.relu_compiles),
            (5, "softmax rate", self.softmax_rate),
            (6, "softmax-max gap", self.softmax_max),
            (7, "lipschitz", self.lipschitz),
            (8, "budget audits", self.budget_audits),
            (9, "convex fit", self.convex_fit),
            (10, "cpwl compiles", self.cpwl_compiles),
            (11, "region formulas", self.region_formulas),
            (12, "region counting", self.region_counting),
        ]
        outcomes = []
        for number, name, check in checks:
            started = time.perf_counter()
            try:
                passed, detail = check()
            except MaxformerError as exc:
                passed, detail = False, f"{type(exc).__name__}: {exc}"
            logger.info("criterion %d (%s): passed=%s in %.1fs", number, name, passed, time.perf_counter() - started)
            outcomes.append(CriterionOutcome(criterion=number, name=name, passed=passed, detail=detail))
        return SelftestReport(
            outcomes=tuple(outcomes),
            passed=all(o.passed for o in outcomes),
            quick=self.quick,
            seed=self.seed,
        )

    def _random_layer_case(self, rng: np.random.Generator, index: int) -> tuple[MaxoutLayerSpec, DomainBox]:
        n, T = int(rng.integers(1, 4)), int(rng.choice([2, 3, 4]))
        dims = SpecDims(n=n, T=T, p=int(rng.integers(1, T + 1)), m=int(rng.integers(1, 4)))
        spec = random_spec("maxout_layer", dims, 1.0, self.seed + index)
        assert isinstance(spec, MaxoutLayerSpec)
        return spec, _box(n, T)

    def shallow_exactness(self) -> tuple[bool, str]:
        rng = stream(self.seed, "acceptance.shallow")
        worst = 0.0
        count = self._count(50, 5)
        for i in range(count):
            spec, box = self._random_layer_case(rng, i)
            net = self.compiler.compile_maxout_layer_seq(spec, box)
            report = self.verifier.check_exact_equivalence(net, spec, box, self._samples, 1e-9, self.seed + i)
            worst = max(worst, report.max_rel_error)
            if not report.passed:
                return False, f"net {i} failed with relative error {report.max_rel_error:.3e}"
        return True, f"{count} nets, worst relative error {worst:.3e}"

    def deep_exactness(self) -> tuple[bool, str]:
        rng = stream(self.seed, "acceptance.deep")
        count = self._count(20, 4)
        for i in range(count):
            T = int(rng.choice([2, 3]))
            dims = SpecDims(n=int(rng.integers(1, 3)), T=T, p=int(rng.integers(1, T + 1)), m=int(rng.integers(1, 3)), D=2 + i % 2)
            spec = random_spec("deep_maxout", dims, 1.0, self.seed + 100 + i)
            assert isinstance(spec, DeepMaxoutSpec)
            box = _box(dims.n, T)
            net = self.compiler.compile_deep_maxout(spec, box)
            report = self.verifier.check_exact_equivalence(net, spec, box, self._samples, 1e-9, self.seed + i)
            if not report.passed:
                return False, f"net {i} failed with relative error {report.max_rel_error:.3e}"
            shifts = self.verifier.check_shift_invariant(net, box, self._count(200, 50), self.seed + i)
            if not shifts.passed:
                return False, f"net {i} left its shifted boxes by {shifts.max_abs_error:.3e}"
        return True, f"{count} deep nets exact, shifted tokens inside their boxes"

    def rank_decomposition(self) -> tuple[bool, str]:
        rng = stream(self.seed, "acceptance.decompose")
        points = rng.uniform(-1.0, 1.0, size=(self._samples, 4))
        for p in (3, 4, 5):
            for s in (2, 3):
                layer = MaxoutLayerSpec.from_arrays(rng.uniform(-1, 1, (2, p, 4)), rng.uniform(-1, 1, (2, p)))
                deep = decompose_rank(layer, s)
                expected_depth = math.ceil((p - 1) / (s - 1))
                if deep.depth != expected_depth:
                    return False, f"p={p}, s={s}: depth {deep.depth} != {expected_depth}"
                gap = float(np.max(np.abs(eval_deep_maxout(deep, points) - eval_maxout_layer(layer, points))))
                if gap > 1e-12:
                    return False, f"p={p}, s={s}: composed layers differ by {gap:.3e}"
        return True, "depths match and composed evaluation is exact"

    def relu_compiles(self) -> tuple[bool, str]:
        rng = stream(self.seed, "acceptance.relu")
        count = self._count(20, 4)
        for i in range(count):
            T = int(rng.choice([2, 3]))
            depth = 1 + i % 2
            dims = SpecDims(n=int(rng.integers(1, 3)), T=T, m=int(rng.integers(1, 3)), D=depth)
            spec = random_spec("relu_net", dims, 1.0, self.seed + 200 + i)
            assert isinstance(spec, ReluNetSpec)
            box = _box(dims.n, T)
            net = self.compiler.compile_general(spec, box)
            if net.depth != 3 * depth + 1:
                return False, f"net {i}: L={net.depth}, expected {3 * depth + 1}"
            report = self.verifier.check_exact_equivalence(net, spec, box, self._samples, 1e-9, self.seed + i)
            if not report.passed:
                return False, f"net {i} failed with relative error {report.max_rel_error:.3e}"
        return True, f"{count} ReLU nets with L = 3D+1 match"

    def softmax_rate(self) -> tuple[bool, str]:
        rng = stream(self.seed, "acceptance.softmax")
        count = self._count(10, 2)
        slopes = []
        for i in range(count):
            T = int(rng.choice([2, 3]))
            dims = SpecDims(n=1, T=T, p=2, m=1)
            spec = random_spec("maxout_layer", dims, 1.0, self.seed + 300 + i)
            assert isinstance(spec, MaxoutLayerSpec)
            box = _box(1, T)
            net = self.compiler.compile_maxout_layer_seq(spec, box)
            sweep = self.verifier.measure_softmax_error(
                net, spec, box, SWEEP_LAMBDAS, self._count(200, 50), self.seed + i
            )
            allowed = math.floor(0.05 * max(0, len(sweep.errors) - 1))
            if sweep.fitted_slope is None or sweep.fitted_slope > -0.9:
                return False, f"net {i}: fitted slope {sweep.fitted_slope}"
            if sweep.monotone_violations > allowed:
                return False, f"net {i}: {sweep.monotone_violations} increases along the sweep"
            slopes.append(sweep.fitted_slope)
        return True, f"slopes in [{min(slopes):.3f}, {max(slopes):.3f}]"

    def softmax_max(self) -> tuple[bool, str]:
        trials = self._count(100_000, 10_000)
        per_case = max(1, trials // 8)
        for dim in range(1, 9):
            for lam in (1.0, 10.0, 100.0):
                report = self.verifier.check_softmax_max_bound(dim, lam, per_case, self.seed)
                if not report.passed:
                    return False, f"d={dim}, lambda={lam}: {report.notes}"
        return True, f"{8 * per_case} vectors per lambda, no violations"

    def lipschitz(self) -> tuple[bool, str]:
        rng = stream(self.seed, "acceptance.lipschitz")
        count = self._count(50, 5)
        for i in range(count):
            spec, box = self._random_layer_case(rng, 400 + i)
            net = self.compiler.compile_maxout_layer_seq(spec, box)
            estimate = self.verifier.estimate_lipschitz(
                net_evaluator(net, AttentionMode.hardmax()), box, self._count(400, 100), self.seed + i
            )
            bound = spec.p * spec.m2
            if estimate > bound * (1.0 + 1e-6):
                return False, f"net {i}: estimate {estimate:.6g} > p M2 = {bound:.6g}"
        return True, f"{count} estimates within p M2"

    def budget_audits(self) -> tuple[bool, str]:
        cases: list[tuple[SpecKind, SpecDims]] = [
            ("maxout_layer", SpecDims(n=2, T=3, p=2, m=2)),
            ("deep_maxout", SpecDims(n=1, T=2, p=2, m=2, D=2)),
            ("relu_net", SpecDims(n=2, T=2, m=2, D=2)),
            ("maxout_layer", SpecDims(n=1, T=2, p=5, m=1)),
            ("deep_maxout", SpecDims(n=1, T=3, p=5, m=1, D=2)),
            ("cpwl_pair", SpecDims(n=1, T=2, p=4, m=1)),
        ]
        seen = []
        for idx, (kind, dims) in enumerate(cases):
            spec = random_spec(kind, dims, 1.0, self.seed + 500 + idx)
            assert not isinstance(spec, DomainBox)
            box = _box(dims.n, dims.seq_len)
            net = self.compiler.compile_general(spec, box)
            audit = audit_compiled(net, spec, box)
            if not audit.within_budget:
                return False, f"{audit.theorem_id.value}: actual {audit.actual.as_tuple()} > claimed {audit.claimed.as_tuple()}"
            seen.append(audit.theorem_id.value)
        return True, "within budget: " + ", ".join(seen)

    def convex_fit(self) -> tuple[bool, str]:
        box = _box(1, 2)

        def square(points: np.ndarray) -> np.ndarray:
            return points[:, 0] ** 2

        details = []
        for p in (4, 8, 16):
            fit = max_affine_fit(square, box, p, self.seed, axes=[0])
            report = fit_report(square, fit, box, axes=[0], seed=self.seed)
            if report.sup_error > 1.0 / p**2 + 1e-9 or not report.within_bound:
                return False, f"p={p}: sup error {report.sup_error:.3e}, bound {report.bound:.3e}"
            tiled = tile_to_tokens(fit, box.seq_len)
            net = self.compiler.compile_general(tiled, box)
            exact = self.verifier.check_exact_equivalence(net, tiled, box, self._samples, 1e-9, self.seed)
            if not exact.passed:
                return False, f"p={p}: compiled fit differs by {exact.max_rel_error:.3e}"
            details.append(f"p={p}: {report.sup_error:.2e}")
        return True, "; ".join(details)

    def cpwl_compiles(self) -> tuple[bool, str]:
        box = _box(1, 2)
        eye = np.eye(2)
        g = MaxoutLayerSpec.from_arrays(np.stack([eye, np.zeros((2, 2))], axis=1))
        h = MaxoutLayerSpec.from_arrays(np.stack([-eye, np.zeros((2, 2))], axis=1))
        identity = CpwlPairSpec(g=g, h=h)
        net = self.compiler.compile_cpwl(identity, box)
        report = self.verifier.check_exact_equivalence(net, lambda X: X, box, self._samples, 1e-9, self.seed)
        if not report.passed:
            return False, f"ReLU(x) - ReLU(-x) is not the identity: {report.max_rel_error:.3e}"
        rng = stream(self.seed, "acceptance.cpwl")
        count = self._count(10, 2)
        for i in range(count):
            T = int(rng.choice([2, 3]))
            dims = SpecDims(n=1, T=T, p=int(rng.integers(1, 5)), m=1)
            pair = random_spec("cpwl_pair", dims, 1.0, self.seed + 600 + i)
            assert isinstance(pair, CpwlPairSpec)
            pair_box = _box(1, T)
            net = self.compiler.compile_cpwl(pair, pair_box)
            report = self.verifier.check_exact_equivalence(net, pair, pair_box, self._samples, 1e-9, self.seed + i)
            if not report.passed:
                return False, f"pair {i} failed with relative error {report.max_rel_error:.3e}"
        return True, f"identity pair and {count} random pairs match"

    def region_formulas(self) -> tuple[bool, str]:
        maxout = (
            maxout_region_lower_bound(1, [1], 2, 1),
            maxout_region_lower_bound(1, [2], 3, 1),
            maxout_region_lower_bound(1, [2, 1], 2, 1),
        )
        transformer = (
            transformer_region_lower_bound(1, 1, 2, 6, 1),
            transformer_region_lower_bound(1, 2, 2, 9, 2),
        )
        if maxout != (2, 5, 6) or transformer != (9, 891):
            return False, f"maxout {maxout}, transformer {transformer}"
        growth = [transformer_region_lower_bound(1, 1, 2, D, 1) for D in range(3, 16)]
        if any(b < a for a, b in zip(growth, growth[1:])):
            return False, f"not monotone in D: {growth}"
        return True, f"maxout {maxout}, transformer {transformer}"

    def region_counting(self) -> tuple[bool, str]:
        line_slice = Slice(base=((0.0,),), dirs=(((1.0,),),), extent=((-1.0, 1.0),))
        for k in range(1, 7):
            knots = np.linspace(-0.8, 0.8, k) if k > 1 else np.zeros(1)

            def lines(X: np.ndarray, knots: np.ndarray = knots) -> np.ndarray:
                s = X[:, 0, 0][:, None]
                return np.max(2.0 * knots[None] * s - knots[None] ** 2, axis=1)[:, None, None]

            counted = count_regions_1d(lines, line_slice).count
            if counted != k:
                return False, f"max of {k} lines counted as {counted}"

        rng = stream(self.seed, "acceptance.regions")
        count = self._count(10, 3)
        for i in range(count):
            spec, box = self._random_layer_case(rng, 700 + i)
            net = self.compiler.compile_maxout_layer_seq(spec, box)
            direction = rng.uniform(-1.0, 1.0, size=(box.n, box.seq_len))
            direction /= np.max(np.abs(direction))
            slc = Slice(
                base=tuple(tuple(row) for row in np.zeros((box.n, box.seq_len)).tolist()),
                dirs=(tuple(tuple(row) for row in direction.tolist()),),
                extent=((-1.0, 1.0),),
            )
            compiled = count_regions_1d(net_evaluator(net, AttentionMode.hardmax()), slc).count
            oracle = count_regions_1d(sequence_oracle(spec, box.n, box.seq_len), slc).count
            if compiled != oracle:
                return False, f"net {i}: compiled net has {compiled} regions, oracle {oracle}"
        return True, f"max-of-k lines exact for k <= 6, {count} compiled slices match"


def run_selftest(
    quick: bool = False, seed: int = 42, threads: int = 1, options: Optional[CompileOptions] = None
) -> SelftestReport:
    """Run all twelve checks with a fresh verifier and compiler"""
    suite = AcceptanceSuite(Verifier(threads), options or CompileOptions(), quick=quick, seed=seed)
    report = suite.run()
    logger.info("selftest %s (%d/%d criteria)", "passed" if report.passed else "failed",
                sum(o.passed for o in report.outcomes), len(report.outcomes))
    return report
