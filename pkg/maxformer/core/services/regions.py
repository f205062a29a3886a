"""
Linear regions: counting on 1D/2D slices and the closed-form lower bounds.

Counts on slices are estimates of the restriction of a CPWL map to an
affine line or plane; a region there is a maximal connected set on which
every output coordinate is affine.
"""

import logging
import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from maxformer.core.models import DeepMaxoutSpec, MaxoutLayerSpec, NetSpec, RegionCount, RegionMethod, Slice
from maxformer.core.protocols import BatchEvaluable
from maxformer.core.rng import stream
from maxformer.core.validation import PreconditionError

logger = logging.getLogger(__name__)

BISECTION_WIDTH = 1e-10
SIGNATURE_STEP = 1e-6
PLANE_RESIDUAL = 1e-8
SUBDIVISION_POINTS = 33
MAX_SUBDIVISION_POINTS = 4097
# Windows are not resampled below this fraction of the slice extent
SUBDIVISION_FLOOR = 1e-7


def slice_points(slc: Slice, coords: np.ndarray) -> np.ndarray:
    """Map slice coordinates (B, k) to inputs base + sum_i coords[:, i] dirs[i], shape (B, n, T)"""
    base = np.asarray(slc.base, dtype=np.float64)
    dirs = np.asarray(slc.dirs, dtype=np.float64)
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, len(slc.dirs))
    return base[None] + np.einsum("bk,knt->bnt", coords, dirs)


def _values(fn: BatchEvaluable, slc: Slice, coords: np.ndarray) -> np.ndarray:
    out = np.asarray(fn(slice_points(slc, coords)), dtype=np.float64)
    return out.reshape(out.shape[0], -1)


# =============================================================================
# 1D slices
# =============================================================================

# (x0, y0, slope) of an affine piece along the line
Line = tuple[float, np.ndarray, np.ndarray]


def _line_values(line: Line, xs: np.ndarray) -> np.ndarray:
    x0, y0, slope = line
    return y0[None] + slope[None] * (np.asarray(xs, dtype=np.float64)[:, None] - x0)


def _on_line(value: np.ndarray, line: Line, x: float, scale: float) -> bool:
    return bool(np.max(np.abs(value - _line_values(line, np.array([x]))[0])) <= 1e-11 * scale)


def _bisect(fn: BatchEvaluable, slc: Slice, line: Line, inside: float, outside: float) -> float:
    """Bisect for the end of ``line``; the function lies on it at ``inside`` and off it at ``outside``"""
    scale = 1.0 + float(np.max(np.abs(line[1])))
    while abs(outside - inside) > BISECTION_WIDTH:
        mid = 0.5 * (inside + outside)
        if _on_line(_values(fn, slc, np.array([[mid]]))[0], line, mid, scale):
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def _intersection(left: Line, right: Line) -> Optional[float]:
    """Least-squares meeting point of two pieces; None when their slopes agree"""
    (xl, yl, sl), (xr, yr, sr) = left, right
    gap = sl - sr
    if float(np.max(np.abs(gap))) <= 1e-9 * (1.0 + float(np.max(np.abs(sl)))):
        return None
    offset = (yl - sl * xl) - (yr - sr * xr)
    return float(-np.dot(gap, offset) / np.dot(gap, gap))


def _single_breakpoint(
    fn: BatchEvaluable, slc: Slice, grid: np.ndarray, F: np.ndarray, slopes: np.ndarray, a: int, b: int
) -> Optional[float]:
    """
    The breakpoint inside (grid[a], grid[b]) if the window holds exactly one.

    Intervals a-1 and b carry no breakpoint and anchor the outer pieces. At
    an end of the grid the missing anchor is replaced by bisection from the
    other side. Returns None when the window needs a finer grid.
    """
    last = len(slopes) - 1
    lo, hi = float(grid[a]), float(grid[b])
    left: Optional[Line] = (float(grid[a - 1]), F[a - 1], slopes[a - 1]) if a > 0 else None
    right: Optional[Line] = (hi, F[b], slopes[b]) if b <= last else None
    scale = 1.0 + float(np.max(np.abs(F[max(a - 1, 0): b + 2])))

    k: Optional[float]
    if left is not None and right is not None:
        k = _intersection(left, right)
    elif left is not None:
        k = None if _on_line(F[b], left, hi, scale) else _bisect(fn, slc, left, lo, hi)
    elif right is not None:
        k = None if _on_line(F[a], right, lo, scale) else _bisect(fn, slc, right, hi, lo)
    else:
        return None
    if k is None or not lo < k < hi:
        return None

    if left is None:
        assert right is not None
        y_k = _line_values(right, np.array([k]))[0]
        left = (lo, F[a], (y_k - F[a]) / (k - lo))
    if right is None:
        y_k = _line_values(left, np.array([k]))[0]
        right = (k, y_k, (F[b] - y_k) / (hi - k))

    # Both pieces must reproduce the window; points close to k expose a hidden middle piece
    near = (hi - lo) * np.array([1e-2, 1e-4, 1e-6])
    near = near[near >= 100 * BISECTION_WIDTH]
    extra = np.concatenate([[0.5 * (lo + k), 0.5 * (k + hi)], k - near, k + near])
    extra = extra[(extra > lo) & (extra < hi)]
    xs = np.concatenate([grid[a: b + 1], extra])
    ys = np.concatenate([F[a: b + 1], _values(fn, slc, extra[:, None])])
    expected = np.where((xs <= k)[:, None], _line_values(left, xs), _line_values(right, xs))
    if float(np.max(np.abs(ys - expected))) > 1e-9 * scale:
        return None
    return k


def _scan_1d(
    fn: BatchEvaluable, slc: Slice, lo: float, hi: float, points: int, floor: float
) -> tuple[list[float], int]:
    """Breakpoints located in (lo, hi), and the number of windows that could not be resolved"""
    grid = np.linspace(lo, hi, points)
    F = _values(fn, slc, grid[:, None])
    slopes = np.diff(F, axis=0) / np.diff(grid)[:, None]
    tol = 1e-6 * (1.0 + float(np.max(np.abs(slopes))))
    changed = np.flatnonzero(np.max(np.abs(np.diff(slopes, axis=0)), axis=1) > tol)

    # A breakpoint on a grid point changes one slope pair, one inside an interval two
    runs: list[list[int]] = []
    for i in changed:
        if runs and i == runs[-1][-1] + 1:
            runs[-1].append(int(i))
        else:
            runs.append([int(i)])

    found: list[float] = []
    unresolved = 0
    for run in runs:
        a, b = run[0], run[-1] + 2
        k = _single_breakpoint(fn, slc, grid, F, slopes, a, b)
        if k is not None:
            found.append(k)
            continue
        sub_points = max(SUBDIVISION_POINTS, 2 * (b - a) + 1)
        if sub_points > MAX_SUBDIVISION_POINTS or (grid[b] - grid[a]) / (sub_points - 1) < floor:
            unresolved += 1
            continue
        inner, missed = _scan_1d(fn, slc, float(grid[a]), float(grid[b]), sub_points, floor)
        found.extend(inner)
        # the window changed slope, so it holds at least one breakpoint
        unresolved += missed if inner or missed else 1
    return found, unresolved


def count_regions_1d(fn: BatchEvaluable, slc: Slice, resolution: Optional[int] = None) -> RegionCount:
    """
    Count the maximal intervals of constant slope along a line.

    The line is sampled on a uniform grid; a slope change between adjacent
    grid intervals above 1e-6 (1 + max |slope|) marks a window holding
    breakpoints. A window with one breakpoint is located from the clean
    pieces on either side of it; any other window is sampled again on a
    finer grid. Windows still unresolved near the float floor count as one
    breakpoint each and make the count a lower bound; only located
    breakpoints are reported.

    Raises:
        PreconditionError: If the slice is not one-dimensional or resolution < 16
    """
    if slc.dimension != 1:
        raise PreconditionError(f"count_regions_1d needs a 1D slice, got {slc.dimension} directions")
    res = resolution or slc.resolution
    if res < 16:
        raise PreconditionError(f"resolution {res} must be at least 16")
    lo, hi = slc.extent[0]
    found, unresolved = _scan_1d(fn, slc, lo, hi, res, SUBDIVISION_FLOOR * (hi - lo))
    breakpoints = sorted(found)
    notes = ""
    if unresolved:
        notes = f"{unresolved} window(s) with unresolved breakpoints; count is a lower bound"
        logger.warning("1D region count at resolution %d is a lower bound", res)
    return RegionCount(
        count=1 + len(breakpoints) + unresolved,
        method=RegionMethod.EXACT_1D,
        resolution=res,
        is_lower_bound=unresolved > 0,
        breakpoints=tuple(breakpoints),
        notes=notes,
    )


# =============================================================================
# 2D slices
# =============================================================================

class _UnionFind:
    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _cell_gradients(
    fn: BatchEvaluable, slc: Slice, points: np.ndarray, h: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Values, central-difference gradients (B, 2, K) and a flag for stencils that straddle a kink"""
    B = points.shape[0]
    offsets = np.array([[0.0, 0.0], [h, 0.0], [-h, 0.0], [0.0, h], [0.0, -h]])
    stencil = (points[:, None, :] + offsets[None]).reshape(-1, 2)
    V = _values(fn, slc, stencil).reshape(B, 5, -1)
    fwd = np.stack([V[:, 1] - V[:, 0], V[:, 3] - V[:, 0]], axis=1) / h
    bwd = np.stack([V[:, 0] - V[:, 2], V[:, 0] - V[:, 4]], axis=1) / h
    grads = 0.5 * (fwd + bwd)
    scale = 1.0 + np.max(np.abs(grads), axis=(1, 2))
    kinked = np.max(np.abs(fwd - bwd), axis=(1, 2)) > 1e-6 * scale
    return V[:, 0], grads, kinked


def _plane_residual(coords: np.ndarray, values: np.ndarray) -> float:
    design = np.column_stack([coords, np.ones(coords.shape[0])])
    solution, *_ = np.linalg.lstsq(design, values, rcond=None)
    fit = design @ solution
    return float(np.max(np.abs(fit - values)) / (1.0 + np.max(np.abs(values))))


def count_regions_2d(
    fn: BatchEvaluable,
    slc: Slice,
    resolution: Optional[int] = None,
    seed: int = 42,
    csv_path: Optional[Path] = None,
) -> RegionCount:
    """
    Estimate the number of linear regions on a plane.

    Every grid cell gets a gradient signature (central differences at a
    jittered interior point, rounded to 1e-6); cells whose stencil crosses a
    kink are re-jittered once and otherwise left unlabelled. Equal-signature
    cells are grouped into 4-connected components, and adjacent components
    whose signatures differ by rounding only are merged when one plane fits
    both.

    Args:
        fn: Batch evaluator
        slc: Two-direction slice
        resolution: Cells per axis (defaults to the slice's)
        seed: Seed for the jitter
        csv_path: If given, per-cell rows "i,j,component,gradients..." are written there

    Raises:
        PreconditionError: If the slice is not two-dimensional or resolution < 16
    """
    if slc.dimension != 2:
        raise PreconditionError(f"count_regions_2d needs a 2D slice, got {slc.dimension} directions")
    res = resolution or slc.resolution
    if res < 16:
        raise PreconditionError(f"resolution {res} must be at least 16")
    (lo0, hi0), (lo1, hi1) = slc.extent
    w0, w1 = (hi0 - lo0) / res, (hi1 - lo1) / res
    rng = stream(seed, "regions.jitter")
    ii, jj = np.meshgrid(np.arange(res), np.arange(res), indexing="ij")
    corners = np.column_stack([lo0 + ii.ravel() * w0, lo1 + jj.ravel() * w1])
    cell = np.array([w0, w1])
    h = 1e-4 * min(w0, w1)

    points = corners + cell * rng.uniform(0.2, 0.8, size=corners.shape)
    values, grads, kinked = _cell_gradients(fn, slc, points, h)
    retry = np.flatnonzero(kinked)
    if retry.size:
        again = corners[retry] + cell * rng.uniform(0.2, 0.8, size=(retry.size, 2))
        v2, g2, k2 = _cell_gradients(fn, slc, again, h)
        points[retry], values[retry], grads[retry], kinked[retry] = again, v2, g2, k2

    flat = grads.reshape(grads.shape[0], -1)
    signatures = np.round(flat / SIGNATURE_STEP).astype(np.int64)
    _, sig_id = np.unique(signatures, axis=0, return_inverse=True)
    sig_id = sig_id.reshape(-1)
    sig_grid = np.where(kinked, -1, sig_id).reshape(res, res)

    labels = np.full((res, res), -1, dtype=np.int64)
    next_label = 0
    for sid in np.unique(sig_grid[sig_grid >= 0]):
        comp, count = ndimage.label(sig_grid == sid)
        mask = comp > 0
        labels[mask] = comp[mask] - 1 + next_label
        next_label += count

    if next_label == 0:
        return RegionCount(count=1, method=RegionMethod.GRID_2D, resolution=res, notes="no resolved cells")

    flat_labels = labels.reshape(-1)
    members = [np.flatnonzero(flat_labels == lab) for lab in range(next_label)]
    label_sig = np.array([signatures[m[0]] for m in members])

    collisions = 0
    for lab, m in enumerate(members):
        if m.size >= 3 and _plane_residual(points[m], values[m]) > PLANE_RESIDUAL:
            collisions += 1

    pairs = set()
    for a, b in ((labels[:-1, :], labels[1:, :]), (labels[:, :-1], labels[:, 1:])):
        both = (a >= 0) & (b >= 0) & (a != b)
        pairs.update(zip(a[both].tolist(), b[both].tolist()))
    groups = _UnionFind(next_label)
    for a, b in sorted(pairs):
        if np.max(np.abs(label_sig[a] - label_sig[b])) > 1:
            continue
        union = np.concatenate([members[a], members[b]])
        if _plane_residual(points[union], values[union]) <= PLANE_RESIDUAL:
            groups.union(a, b)

    roots = np.array([groups.find(lab) for lab in range(next_label)])
    count = int(np.unique(roots).size)

    if csv_path is not None:
        component = np.where(flat_labels >= 0, roots[np.maximum(flat_labels, 0)], -1)
        table = np.column_stack([ii.ravel(), jj.ravel(), component, flat])
        header = "i,j,component," + ",".join(f"g{q}" for q in range(flat.shape[1]))
        np.savetxt(csv_path, table, delimiter=",", header=header, comments="", fmt="%.17g")
        logger.debug("wrote region cells to %s", csv_path)

    notes = []
    if collisions:
        notes.append(f"{collisions} components failed the plane check (signature collision)")
    unresolved = int(np.sum(kinked))
    if unresolved:
        notes.append(f"{unresolved} cells straddle a kink and are unlabelled")
    return RegionCount(count=count, method=RegionMethod.GRID_2D, resolution=res, notes="; ".join(notes))


# =============================================================================
# Lower bounds
# =============================================================================

def maxout_region_lower_bound(
    n0: int, widths: Sequence[int], k: int, n: int, adjust: bool = False
) -> int:
    """
    Regions realizable by a rank-k maxout net with n0 inputs and the given widths.

    prod_{l<L} (n_l/n (k-1) + 1)^n * sum_{j<=n} C(n_L, j) (k-1)^j, exact.

    Args:
        n0: Input dimension
        widths: Layer widths n_1..n_L
        k: Rank, at least 2
        n: Integer with n <= n0 and n <= n_l/2 for l < L
        adjust: Replace n_l/n by its largest even lower bound instead of
            requiring it to be an even integer

    Raises:
        PreconditionError: Naming the violated condition
    """
    if not widths:
        raise PreconditionError("need at least one layer width")
    if k < 2:
        raise PreconditionError(f"rank k={k} must be at least 2")
    if n < 1 or n > n0:
        raise PreconditionError(f"need 1 <= n <= n0, got n={n}, n0={n0}")
    factors = []
    for l, width in enumerate(widths[:-1], start=1):
        if n > width / 2:
            raise PreconditionError(f"need n <= n_{l}/2, got n={n}, n_{l}={width}")
        if adjust:
            ratio = 2 * (width // (2 * n))
        else:
            if width % n or (width // n) % 2:
                raise PreconditionError(f"n_{l}/n = {width}/{n} must be an even integer")
            ratio = width // n
        factors.append((ratio * (k - 1) + 1) ** n)
    last = widths[-1]
    tail = sum(math.comb(last, j) * (k - 1) ** j for j in range(n + 1))
    return math.prod(factors) * tail


def architecture_lower_bound(spec: NetSpec) -> Optional[int]:
    """
    Largest maxout region lower bound over the admissible n for a maxout spec's widths.

    None for other spec kinds, for mixed or unit ranks, and when no n meets
    the preconditions of maxout_region_lower_bound.
    """
    if isinstance(spec, MaxoutLayerSpec):
        layers = [spec]
    elif isinstance(spec, DeepMaxoutSpec):
        layers = list(spec.layers)
    else:
        return None
    ranks = {layer.p for layer in layers}
    if len(ranks) != 1 or layers[0].p < 2:
        return None
    n0, widths = layers[0].n_in, [layer.m_out for layer in layers]
    values: list[int] = []
    for n in range(1, n0 + 1):
        try:
            values.append(maxout_region_lower_bound(n0, widths, layers[0].p, n))
        except PreconditionError:
            continue
    return max(values, default=None)


def transformer_region_lower_bound(n: int, m: int, T: int, D: int, q: int) -> int:
    """
    Regions realizable by depth-D Transformers on R^{n x T} -> R^{m x T}.

    [mT/q (T-1) + 1]^{q(floor(D/3) - 1)} * sum_{j<=q} C(mT, j) (T-1)^j.

    Raises:
        PreconditionError: Unless D >= 3, 1 <= q <= min(nT, mT/2) and mT/q is even
    """
    if D < 3:
        raise PreconditionError(f"depth D={D} must be at least 3")
    if T < 2:
        raise PreconditionError(f"T={T} must be at least 2")
    if q < 1 or q > min(n * T, m * T / 2):
        raise PreconditionError(f"need 1 <= q <= min(nT, mT/2) = {min(n * T, m * T / 2)}, got q={q}")
    if (m * T) % q or ((m * T) // q) % 2:
        raise PreconditionError(f"mT/q = {m * T}/{q} must be an even integer")
    layers = D // 3
    return maxout_region_lower_bound(n * T, [m * T] * layers, T, q)
