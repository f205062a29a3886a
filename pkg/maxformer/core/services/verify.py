"""
Numerical checks of compiled networks against their reference functions.

Samples are drawn up front from named random streams and then evaluated in
chunks on a thread pool; every reduction is a maximum, so reports depend
only on the seed and never on the thread count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Union

import numpy as np

from maxformer.core.models import (
    AttentionMode,
    CpwlPairSpec,
    Criterion,
    DeepMaxoutSpec,
    DomainBox,
    LambdaSweep,
    MaxoutLayerSpec,
    NetSpec,
    ReluNetSpec,
    SweepPoint,
    TransformerNet,
    VerificationReport,
)
from maxformer.core.protocols import BatchEvaluable
from maxformer.core.rng import stream
from maxformer.core.services.maxout_eval import devectorize, relu_as_maxout, sequence_oracle, vectorize
from maxformer.core.services.transformer_eval import net_evaluator, transformer_forward_batch
from maxformer.core.validation import (
    NonFiniteActivationError,
    PreconditionError,
    ShapeMismatchError,
    validate_tolerance,
)

logger = logging.getLogger(__name__)

# Gap between the two top pieces that maximizes g / (1 + exp(lambda g)), times lambda
TIE_GAP = 1.2785

# Errors below this are float noise and are left out of the log-log fit
ERROR_FLOOR = 1e-12

# Adjacent log-slopes inside this band count as the 1/lambda regime
REGIME_BAND = (-1.5, -0.5)

CHUNK = 256

Reference = Union[NetSpec, BatchEvaluable]


def sample_box(box: DomainBox, samples: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw (samples, n, T) points: uniform, with a tenth of them pushed near the faces.

    In the near-face points each entry moves, with probability 1/2, to
    within delta/10 of a or b.
    """
    shape = (samples, box.n, box.seq_len)
    X = rng.uniform(box.a, box.b, size=shape)
    edge = samples // 10
    if edge:
        moved = rng.random((edge, box.n, box.seq_len)) < 0.5
        low = rng.random((edge, box.n, box.seq_len)) < 0.5
        dist = rng.uniform(0.0, box.delta / 10.0, size=(edge, box.n, box.seq_len))
        near = np.where(low, box.a + dist, box.b - dist)
        X[:edge] = np.where(moved, near, X[:edge])
    return X


def softmax_max_gap(x: np.ndarray, lam: float) -> np.ndarray:
    """max(x) - x . softmax(lam x) along the last axis"""
    x = np.asarray(x, dtype=np.float64)
    top = np.max(x, axis=-1, keepdims=True)
    weights = np.exp(lam * (x - top))
    weights /= np.sum(weights, axis=-1, keepdims=True)
    return top[..., 0] - np.sum(weights * x, axis=-1)


def first_layer(spec: NetSpec) -> MaxoutLayerSpec:
    """The maxout layer whose piece ties govern the first softmax error"""
    if isinstance(spec, MaxoutLayerSpec):
        return spec
    if isinstance(spec, DeepMaxoutSpec):
        return spec.layers[0]
    if isinstance(spec, ReluNetSpec):
        return relu_as_maxout(spec).layers[0]
    if isinstance(spec, CpwlPairSpec):
        return spec.g
    raise TypeError(f"not a network spec: {type(spec).__name__}")


def tie_points(
    layer: MaxoutLayerSpec, box: DomainBox, X: np.ndarray, lam: float, rng: np.random.Generator
) -> np.ndarray:
    """
    Points where one unit's two top pieces differ by exactly TIE_GAP / lam.

    Each base point is moved along the difference of the two top piece
    gradients onto their tie and then off it by the tie gap; points that
    leave the box or change the top pair are dropped.
    """
    if layer.p < 2:
        return np.zeros((0, box.n, box.seq_len))
    V = vectorize(X)
    W, b = layer.weights(), layer.biases()
    units = rng.integers(0, layer.m_out, size=V.shape[0])
    points = []
    for v, u in zip(V, units):
        values = W[u] @ v + b[u]
        j1, j2 = np.argsort(values)[::-1][:2]
        direction = W[u, j1] - W[u, j2]
        norm2 = float(direction @ direction)
        if norm2 == 0.0:
            continue
        gap = values[j1] - values[j2]
        point = v + (TIE_GAP / lam - gap) * direction / norm2
        if np.any(point < box.a) or np.any(point > box.b):
            continue
        moved = W[u] @ point + b[u]
        k1, k2 = np.argsort(moved)[::-1][:2]
        if (k1, k2) != (j1, j2):
            continue
        points.append(point)
    if not points:
        return np.zeros((0, box.n, box.seq_len))
    return devectorize(np.asarray(points), box.n, box.seq_len)


def fit_log_slope(lambdas: Sequence[float], errors: Sequence[float]) -> Optional[float]:
    """Least-squares slope of ln(error) against ln(lambda), ignoring errors under the float floor"""
    points = [(math.log(l), math.log(e)) for l, e in zip(lambdas, errors) if e >= ERROR_FLOOR]
    if len(points) < 2:
        return None
    xs, ys = np.array(points).T
    slope, _ = np.polyfit(xs, ys, 1)
    return float(slope)


def regime_onset(lambdas: Sequence[float], errors: Sequence[float]) -> Optional[float]:
    """First lambda from which every adjacent log-slope lies in REGIME_BAND"""
    if len(lambdas) < 2 or any(e < ERROR_FLOOR for e in errors):
        return None
    slopes = [
        (math.log(e2) - math.log(e1)) / (math.log(l2) - math.log(l1))
        for (l1, e1), (l2, e2) in zip(zip(lambdas, errors), zip(lambdas[1:], errors[1:]))
    ]
    lo, hi = REGIME_BAND
    onset = None
    for idx in range(len(slopes) - 1, -1, -1):
        if not lo <= slopes[idx] <= hi:
            break
        onset = lambdas[idx]
    return onset


class Verifier:
    """
    Sampled verification of compiled networks.

    Args:
        threads: Worker threads used to evaluate sample chunks
    """

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise PreconditionError(f"threads={threads} must be at least 1")
        self.threads = threads

    def _map(self, fn: BatchEvaluable, X: np.ndarray) -> np.ndarray:
        chunks = [X[i : i + CHUNK] for i in range(0, X.shape[0], CHUNK)]
        if self.threads == 1 or len(chunks) == 1:
            return np.concatenate([fn(c) for c in chunks], axis=0)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return np.concatenate(list(pool.map(fn, chunks)), axis=0)

    @staticmethod
    def _reference(reference: Reference, box: DomainBox) -> BatchEvaluable:
        if isinstance(reference, (MaxoutLayerSpec, DeepMaxoutSpec, ReluNetSpec, CpwlPairSpec)):
            return sequence_oracle(reference, box.n, box.seq_len)
        return reference

    def _compare(self, net_fn: BatchEvaluable, oracle: BatchEvaluable, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        compiled = self._map(net_fn, X)
        expected = self._map(oracle, X)
        if compiled.shape != expected.shape:
            raise ShapeMismatchError(expected.shape[1:], compiled.shape[1:], "net output vs oracle output")
        return compiled, expected

    def check_exact_equivalence(
        self,
        net: TransformerNet,
        reference: Reference,
        box: DomainBox,
        samples: int = 1000,
        tol: float = 1e-9,
        seed: int = 42,
        criterion: Criterion = Criterion.RELATIVE,
    ) -> VerificationReport:
        """
        Compare a hardmax net with its reference on sampled inputs.

        Args:
            net: Compiled network
            reference: Spec (wrapped as Vec^{-1} f Vec) or any batch evaluator
            box: Sampling domain
            samples: Number of sample sequences, at least 1
            tol: Positive tolerance
            seed: Run seed
            criterion: Relative |c-o| <= tol (1+|o|) or absolute |c-o| <= tol

        Raises:
            PreconditionError: If samples < 1 or tol is not positive
            ShapeMismatchError: If net and reference outputs differ in shape
        """
        if samples < 1:
            raise PreconditionError(f"samples={samples} must be at least 1")
        if not validate_tolerance(tol):
            raise PreconditionError(f"tolerance {tol} must be positive and finite")
        X = sample_box(box, samples, stream(seed, "verify.exact"))
        compiled, expected = self._compare(
            net_evaluator(net, AttentionMode.hardmax()), self._reference(reference, box), X
        )
        diff = np.abs(compiled - expected)
        max_abs = float(np.max(diff)) if diff.size else 0.0
        max_rel = float(np.max(diff / (1.0 + np.abs(expected)))) if diff.size else 0.0
        per_token = tuple(float(e) for e in np.max(diff, axis=(0, 1))) if diff.size else ()
        measured = max_rel if criterion is Criterion.RELATIVE else max_abs
        passed = measured <= tol
        log = logger.info if passed else logger.warning
        log("exactness on %d samples: max abs %.3e, max rel %.3e, passed=%s", samples, max_abs, max_rel, passed)
        return VerificationReport(
            max_abs_error=max_abs,
            max_rel_error=max_rel,
            tolerance=tol,
            criterion=criterion,
            samples=samples,
            seed=seed,
            per_token_errors=per_token,
            passed=passed,
        )

    def _softmax_error(
        self, net: TransformerNet, oracle: BatchEvaluable, X: np.ndarray, lam: float
    ) -> SweepPoint:
        try:
            compiled, expected = self._compare(net_evaluator(net, AttentionMode.softmax(lam)), oracle, X)
        except NonFiniteActivationError as exc:
            return SweepPoint.dropped(lam, str(exc))
        return SweepPoint.measured(lam, float(np.max(np.abs(compiled - expected))))

    def check_softmax_error(
        self,
        net: TransformerNet,
        reference: Reference,
        box: DomainBox,
        lam: float,
        samples: int = 1000,
        tol: float = 1e-9,
        seed: int = 42,
    ) -> VerificationReport:
        """
        Absolute sup-error of the softmax net at one lambda.

        Raises:
            PreconditionError: If samples < 1, tol is not positive or lam <= 0
            NonFiniteActivationError: If the forward pass overflows
        """
        if samples < 1 or not lam > 0.0:
            raise PreconditionError(f"need samples >= 1 and lambda > 0 (got {samples}, {lam})")
        if not validate_tolerance(tol):
            raise PreconditionError(f"tolerance {tol} must be positive and finite")
        X = sample_box(box, samples, stream(seed, "verify.softmax"))
        compiled, expected = self._compare(
            net_evaluator(net, AttentionMode.softmax(lam)), self._reference(reference, box), X
        )
        error = float(np.max(np.abs(compiled - expected))) if compiled.size else 0.0
        logger.info("softmax error at lambda=%g on %d samples: %.3e", lam, samples, error)
        return VerificationReport(
            max_abs_error=error,
            tolerance=tol,
            criterion=Criterion.ABSOLUTE,
            samples=samples,
            seed=seed,
            passed=error <= tol,
            notes=f"lambda={lam!r}",
        )

    def measure_softmax_error(
        self,
        net: TransformerNet,
        spec: NetSpec,
        box: DomainBox,
        lambdas: Sequence[float],
        samples: int = 1000,
        seed: int = 42,
        ties: bool = True,
    ) -> LambdaSweep:
        """
        Sup-error of the softmax net against the reference along a lambda grid.

        The sample set is shared by every lambda; tie points built from the
        first layer are added per lambda. A lambda whose forward pass
        overflows is dropped with a note.

        Raises:
            PreconditionError: If fewer than three increasing positive lambdas are given
        """
        lams = [float(l) for l in lambdas]
        if len(lams) < 3:
            raise PreconditionError(f"a sweep needs at least 3 lambdas, got {len(lams)}")
        if any(l <= 0.0 for l in lams) or any(b <= a for a, b in zip(lams, lams[1:])):
            raise PreconditionError("lambdas must be positive and strictly increasing")
        if samples < 1:
            raise PreconditionError(f"samples={samples} must be at least 1")
        if lams[-1] / lams[0] < 100.0:
            logger.warning("lambda grid spans fewer than two decades")

        oracle = self._reference(spec, box)
        X = sample_box(box, samples, stream(seed, "verify.sweep"))
        layer = first_layer(spec)

        kept_l: list[float] = []
        kept_e: list[float] = []
        notes: list[str] = []
        for lam in lams:
            points = X
            if ties:
                extra = tie_points(layer, box, X, lam, stream(seed, f"verify.ties.{lam!r}"))
                points = np.concatenate([X, extra], axis=0)
            outcome = self._softmax_error(net, oracle, points, lam)
            if outcome.error is None:
                logger.warning("%s", outcome.note())
                notes.append(outcome.note())
                continue
            kept_l.append(lam)
            kept_e.append(outcome.error)

        slope = fit_log_slope(kept_l, kept_e)
        if slope is None:
            notes.append("slope undefined: fewer than two errors above the float floor")
        violations = sum(1 for e1, e2 in zip(kept_e, kept_e[1:]) if e2 > e1)
        logger.info("softmax sweep over %d lambdas: slope %s", len(kept_l), slope)
        return LambdaSweep(
            lambdas=tuple(kept_l),
            errors=tuple(kept_e),
            fitted_slope=slope,
            regime_onset=regime_onset(kept_l, kept_e),
            monotone_violations=violations,
            samples=samples,
            seed=seed,
            notes="; ".join(notes),
        )

    def check_softmax_max_bound(self, dim: int, lam: float, trials: int = 1000, seed: int = 42) -> VerificationReport:
        """
        Check max(x) - x . softmax(lam x) <= dim / (e lam) for random x in [-10, 10]^dim.

        Raises:
            PreconditionError: If dim < 1, lam <= 0 or trials < 1
        """
        if dim < 1 or not lam > 0.0 or trials < 1:
            raise PreconditionError(f"need dim >= 1, lambda > 0, trials >= 1 (got {dim}, {lam}, {trials})")
        x = stream(seed, f"verify.softmax_max.{dim}.{lam!r}").uniform(-10.0, 10.0, size=(trials, dim))
        gaps = softmax_max_gap(x, lam)
        bound = dim / (math.e * lam) + ERROR_FLOOR
        violations = int(np.sum(gaps > bound))
        return VerificationReport(
            max_abs_error=float(max(0.0, np.max(gaps))),
            tolerance=bound,
            criterion=Criterion.ABSOLUTE,
            samples=trials,
            seed=seed,
            passed=violations == 0,
            notes=f"{violations} violations of d/(e lambda)" if violations else "",
        )

    def estimate_lipschitz(
        self, fn: BatchEvaluable, box: DomainBox, samples: int = 1000, seed: int = 42
    ) -> float:
        """
        Largest ||f(X1) - f(X2)||_inf / ||X1 - X2||_inf over sampled pairs.

        Half the pairs are near-pairs (entries perturbed by up to 1e-4 of the
        box width), half are independent. The result bounds the true
        constant from below.
        """
        if samples < 1:
            raise PreconditionError(f"samples={samples} must be at least 1")
        rng = stream(seed, "verify.lipschitz")
        shape = (samples, box.n, box.seq_len)
        X1 = rng.uniform(box.a, box.b, size=shape)
        X2 = rng.uniform(box.a, box.b, size=shape)
        near = samples // 2
        step = 1e-4 * box.width
        X2[:near] = np.clip(X1[:near] + rng.uniform(-step, step, size=(near, box.n, box.seq_len)), box.a, box.b)
        F1, F2 = self._map(fn, X1), self._map(fn, X2)
        dx = np.max(np.abs(X1 - X2), axis=(1, 2))
        df = np.max(np.abs(F1 - F2), axis=(1, 2))
        keep = dx > 0.0
        if not np.any(keep):
            return 0.0
        return float(np.max(df[keep] / dx[keep]))

    def check_shift_invariant(
        self, net: TransformerNet, box: DomainBox, samples: int = 200, seed: int = 42, tol: float = 1e-9
    ) -> VerificationReport:
        """
        Confirm that after every shifted stage token t's output rows lie in
        [shift(t) - M, shift(t) + M], M the stage's output bound.
        """
        X = sample_box(box, samples, stream(seed, "verify.shift"))
        trace: list[np.ndarray] = []
        transformer_forward_batch(net, X, AttentionMode.hardmax(), trace=trace)
        worst = 0.0
        block = 0
        checked = 0
        for record in net.info.stages:
            block += 3
            if record.shift_delta is not None:
                Z = trace[block]
                rows = Z[:, : record.width_out, : box.seq_len]
                centres = np.array([record.shift(t) for t in range(1, box.seq_len + 1)])
                outside = np.abs(rows - centres[None, None, :]) - record.bound_out
                slack = tol * (1.0 + float(np.max(np.abs(centres))))
                worst = max(worst, float(np.max(outside)) - slack)
                checked += 1
            if record.readout:
                block += 1
        violation = max(0.0, worst)
        return VerificationReport(
            max_abs_error=violation,
            tolerance=tol,
            criterion=Criterion.ABSOLUTE,
            samples=samples,
            seed=seed,
            passed=violation == 0.0,
            notes=f"{checked} shifted stages checked",
        )
