"""
Max-affine approximation of convex functions by tangent planes.

The fit is a rank-p maxout unit on R^{nT}; ``tile_to_tokens`` turns it into
a sequence-to-sequence layer the compiler accepts.
"""

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from maxformer.core.models import DomainBox, FitReport, MaxoutLayerSpec
from maxformer.core.rng import stream
from maxformer.core.services.maxout_eval import eval_maxout_layer
from maxformer.core.validation import NonConvexOracleError, PreconditionError, ShapeMismatchError

logger = logging.getLogger(__name__)

# Maps a batch of points (B, nT) to values (B,)
ScalarOracle = Callable[[np.ndarray], np.ndarray]

# Central-difference step relative to the box width
FD_STEP = 1e-6


def _axes(box: DomainBox, axes: Optional[Sequence[int]]) -> list[int]:
    if axes is None:
        return list(range(box.dim))
    chosen = sorted(set(int(a) for a in axes))
    if not chosen or chosen[0] < 0 or chosen[-1] >= box.dim:
        raise PreconditionError(f"axes {list(axes)} must be a nonempty subset of 0..{box.dim - 1}")
    return chosen


def _call(oracle: ScalarOracle, points: np.ndarray) -> np.ndarray:
    values = np.asarray(oracle(points), dtype=np.float64).reshape(-1)
    if values.shape != (points.shape[0],):
        raise ShapeMismatchError((points.shape[0],), values.shape, "scalar oracle output")
    return values


def tangent_points(box: DomainBox, p: int, seed: int, axes: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    p quasi-uniform points of the box, shape (p, nT).

    One varying axis gives the midpoints of p equal cells; more axes use a
    scrambled Halton sequence. Coordinates off the axes sit at the box centre.
    """
    chosen = _axes(box, axes)
    points = np.full((p, box.dim), 0.5 * (box.a + box.b))
    if len(chosen) == 1:
        unit = (np.arange(p) + 0.5) / p
    else:
        sampler = qmc.Halton(d=len(chosen), scramble=True, seed=stream(seed, "convex_fit.halton"))
        unit = sampler.random(p)
    points[:, chosen] = box.a + box.width * unit.reshape(p, len(chosen))
    return points


def max_affine_fit(
    oracle: ScalarOracle,
    box: DomainBox,
    p: int,
    seed: int = 42,
    axes: Optional[Sequence[int]] = None,
) -> MaxoutLayerSpec:
    """
    Fit a convex function by the max of p tangent planes.

    Gradients come from central differences along ``axes`` (all coordinates
    by default); planes have zero slope along the other coordinates.

    Args:
        oracle: Convex function on the box, evaluated on batches (B, nT)
        box: Domain
        p: Number of planes, at least 1
        seed: Seed for the Halton scrambling
        axes: Coordinates the function varies along

    Returns:
        A layer with n_in = nT, rank p and one output

    Raises:
        PreconditionError: If p < 1
        NonConvexOracleError: If a tangent plane exceeds the oracle at another
            tangent point by more than the finite-difference slack
    """
    if p < 1:
        raise PreconditionError(f"piece count p={p} must be at least 1")
    chosen = _axes(box, axes)
    points = tangent_points(box, p, seed, chosen)
    values = _call(oracle, points)

    h = FD_STEP * box.width
    grads = np.zeros((p, box.dim))
    for axis in chosen:
        step = np.zeros(box.dim)
        step[axis] = h
        ahead = _call(oracle, points + step)
        behind = _call(oracle, points - step)
        grads[:, axis] = (ahead - behind) / (2.0 * h)
    offsets = values - np.einsum("pd,pd->p", grads, points)

    planes = grads @ points.T + offsets[:, None]
    excess = planes - values[None, :]
    slack = 1e-6 * (1.0 + float(np.max(np.abs(values))))
    worst = np.unravel_index(int(np.argmax(excess)), excess.shape)
    if excess[worst] > slack:
        raise NonConvexOracleError(points[worst[1]].tolist(), float(excess[worst]))

    logger.debug("fitted %d tangent planes over %d axes", p, len(chosen))
    return MaxoutLayerSpec.from_arrays(grads[None], offsets[None])


def convex_fit_bound(n: int, seq_len: int, lipschitz: float, diameter: float, p: int) -> float:
    """Sup-error bound 72 n T^2 C diam p^(-2/(nT)) for a p-piece max-affine fit"""
    if p < 1:
        raise PreconditionError(f"piece count p={p} must be at least 1")
    return 72.0 * n * seq_len**2 * lipschitz * diameter * p ** (-2.0 / (n * seq_len))


def _test_points(box: DomainBox, chosen: list[int], resolution: int, seed: int) -> np.ndarray:
    if len(chosen) == 1:
        grid = np.linspace(box.a, box.b, resolution)
        points = np.full((resolution, box.dim), 0.5 * (box.a + box.b))
        points[:, chosen[0]] = grid
        return points
    rng = stream(seed, "convex_fit.test_points")
    points = np.full((resolution, box.dim), 0.5 * (box.a + box.b))
    points[:, chosen] = rng.uniform(box.a, box.b, size=(resolution, len(chosen)))
    return points


def estimate_oracle_lipschitz(oracle: ScalarOracle, points: np.ndarray) -> float:
    """Largest Euclidean difference quotient between consecutive test points"""
    values = _call(oracle, points)
    gaps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    keep = gaps > 0.0
    if not np.any(keep):
        return 0.0
    return float(np.max(np.abs(np.diff(values))[keep] / gaps[keep]))


def fit_report(
    oracle: ScalarOracle,
    layer: MaxoutLayerSpec,
    box: DomainBox,
    axes: Optional[Sequence[int]] = None,
    resolution: int = 4001,
    seed: int = 42,
) -> FitReport:
    """
    Measure a fit's sup error on a dense test set and compare it with the bound.

    The Lipschitz constant is estimated from the same test points and the
    diameter is the Euclidean diameter of the whole box.
    """
    chosen = _axes(box, axes)
    points = _test_points(box, chosen, resolution, seed)
    sup_error = float(np.max(np.abs(_call(oracle, points) - eval_maxout_layer(layer, points)[:, 0])))
    lipschitz = estimate_oracle_lipschitz(oracle, points)
    diameter = box.width * math.sqrt(box.dim)
    bound = convex_fit_bound(box.n, box.seq_len, lipschitz, diameter, layer.p)
    return FitReport(
        pieces=layer.p,
        sup_error=sup_error,
        lipschitz_estimate=lipschitz,
        diameter=diameter,
        bound=bound,
        within_bound=sup_error <= bound,
    )


def tile_to_tokens(layer: MaxoutLayerSpec, seq_len: int) -> MaxoutLayerSpec:
    """Repeat a layer's output units for every token, giving m_out = m T"""
    return MaxoutLayerSpec.from_arrays(
        np.tile(layer.weights(), (seq_len, 1, 1)), np.tile(layer.biases(), (seq_len, 1))
    )
