"""
Token geometry and the small weight gadgets the compiler is assembled from.

A RegionGeometry places token t's coordinates in the box
[lo + off(t), hi + off(t)] with off(t) = (t-1)(hi-lo) + t*delta, so the
T+1 boxes are separated by gaps of exactly delta. Every gadget here writes
into a residual stream of dimension d whose last T+1 rows hold the one-hot
token position.
"""

from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field

from maxformer.core.models import AttentionHead, DomainBox, FeedForward
from maxformer.core.validation import PreconditionError, ShapeMismatchError


class RegionGeometry(BaseModel):
    model_config = {"frozen": True}

    lo: float
    hi: float
    delta: float = Field(gt=0.0)
    seq_len: int = Field(ge=1)

    @classmethod
    def from_box(cls, box: DomainBox) -> "RegionGeometry":
        return cls(lo=box.a, hi=box.b, delta=box.delta, seq_len=box.seq_len)

    @classmethod
    def symmetric(cls, bound: float, delta: float, seq_len: int) -> "RegionGeometry":
        """Geometry of shifted layer outputs, values in [-bound, bound]"""
        return cls(lo=-bound, hi=bound, delta=delta, seq_len=seq_len)

    def offset(self, t: int) -> float:
        return (t - 1) * (self.hi - self.lo) + t * self.delta

    def interval(self, t: int) -> tuple[float, float]:
        off = self.offset(t)
        return self.lo + off, self.hi + off

    def center(self, t: int) -> float:
        return 0.5 * (self.lo + self.hi) + self.offset(t)

    def breakpoints(self, t: int) -> tuple[float, float, float, float]:
        start, end = self.interval(t)
        return start - self.delta, start, end, end + self.delta


def position_rows(d: int, seq_len: int) -> list[int]:
    """Row index of the one-hot position of token t (t = 1..T+1) is entry t-1"""
    return list(range(d - seq_len - 1, d))


def build_positional_embedding(box: DomainBox, d: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Embedding E(X) = A X + B.

    Rows 0..n-1 carry x_t + p_t where p_t = (b-a)(t-1) + t*delta, the
    auxiliary column holds the centre of box T+1, and the bottom T+1 rows
    of B are the identity.

    Raises:
        PreconditionError: If d < n + T + 1
    """
    n, seq_len = box.n, box.seq_len
    if d < n + seq_len + 1:
        raise PreconditionError(f"embedding dimension d={d} < n+T+1={n + seq_len + 1}")
    geometry = RegionGeometry.from_box(box)
    A = np.zeros((d, n))
    A[:n, :n] = np.eye(n)
    B = np.zeros((d, seq_len + 1))
    for t in range(1, seq_len + 1):
        B[:n, t - 1] = geometry.offset(t)
    B[:n, seq_len] = geometry.center(seq_len + 1)
    B[d - seq_len - 1 :, :] = np.eye(seq_len + 1)
    return A, B


def build_region_selector_ff(
    pieces: Sequence[tuple[np.ndarray, np.ndarray]],
    geometry: RegionGeometry,
    d: int,
    in_rows: Sequence[int],
    out_rows: Sequence[int],
) -> FeedForward:
    """
    One-hidden-layer ReLU gadget applying a different affine map on each token box.

    For a column whose input coordinates u lie inside box t, the gadget adds
    V^t u + c^t to ``out_rows``. Each (region, coordinate) pair uses four
    units forming phi_t(u) = u on box t and 0 on the other boxes; four more
    units per region on the first coordinate form the indicator psi_t that
    carries the constant c^t. Hidden width is 4(n'+1)(T+1).

    Args:
        pieces: (V^t of shape (k', n'), c^t of shape (k',)) for t = 1..T+1
        geometry: Token boxes
        d: Residual stream dimension
        in_rows: The n' coordinate rows read
        out_rows: The k' rows written

    Raises:
        ShapeMismatchError: If piece shapes disagree with the row lists
        PreconditionError: If the number of pieces is not T+1
    """
    regions = geometry.seq_len + 1
    if len(pieces) != regions:
        raise PreconditionError(f"need {regions} region pieces, got {len(pieces)}")
    n_sel, k_sel = len(in_rows), len(out_rows)
    width = 4 * (n_sel + 1) * regions
    w1 = np.zeros((width, d))
    b1 = np.zeros(width)
    w2 = np.zeros((d, width))
    out_idx = np.asarray(out_rows, dtype=int)
    psi_coef = np.array([1.0, -1.0, -1.0, 1.0]) / geometry.delta

    unit = 0
    for t, (V, c) in enumerate(pieces, start=1):
        V = np.asarray(V, dtype=np.float64)
        c = np.asarray(c, dtype=np.float64)
        if V.shape != (k_sel, n_sel):
            raise ShapeMismatchError((k_sel, n_sel), V.shape, f"selector piece {t}")
        if c.shape != (k_sel,):
            raise ShapeMismatchError((k_sel,), c.shape, f"selector bias {t}")
        knots = geometry.breakpoints(t)
        start, end = knots[1], knots[2]
        delta = geometry.delta
        phi_coef = np.array(
            [start / delta, 1.0 - start / delta, (-end - delta) / delta, end / delta]
        )
        for col, row in enumerate(in_rows):
            for q in range(4):
                w1[unit, row] = 1.0
                b1[unit] = -knots[q]
                w2[out_idx, unit] = phi_coef[q] * V[:, col]
                unit += 1
        for q in range(4):
            w1[unit, in_rows[0]] = 1.0
            b1[unit] = -knots[q]
            w2[out_idx, unit] = psi_coef[q] * c
            unit += 1
    return FeedForward(w1=w1, b1=b1, w2=w2, b2=np.zeros(d))


def build_cancellation_ff(rows: Sequence[int], d: int) -> FeedForward:
    """Zero the given rows: ReLU(-x) - ReLU(x) = -x, two units per row"""
    width = 2 * len(rows)
    w1 = np.zeros((width, d))
    w2 = np.zeros((d, width))
    for idx, row in enumerate(rows):
        w1[2 * idx, row] = -1.0
        w2[row, 2 * idx] = 1.0
        w1[2 * idx + 1, row] = 1.0
        w2[row, 2 * idx + 1] = -1.0
    return FeedForward(w1=w1, b1=np.zeros(width), w2=w2, b2=np.zeros(d))


def build_aux_shift_ff(aux_row: int, rows: Sequence[int], shift: float, d: int) -> FeedForward:
    """Add ``shift`` to ``rows`` of the auxiliary column only (reads its one-hot row)"""
    w1 = np.zeros((1, d))
    w1[0, aux_row] = 1.0
    w2 = np.zeros((d, 1))
    w2[list(rows), 0] = shift
    return FeedForward(w1=w1, b1=np.zeros(1), w2=w2, b2=np.zeros(d))


def stack_feedforwards(parts: Sequence[FeedForward], d: int) -> FeedForward:
    """Concatenate hidden units; the residual updates add up"""
    if not parts:
        return FeedForward.zero(d)
    return FeedForward(
        w1=np.vstack([p.w1 for p in parts]),
        b1=np.concatenate([p.b1 for p in parts]),
        w2=np.hstack([p.w2 for p in parts]),
        b2=np.sum([p.b2 for p in parts], axis=0),
    )


def aggregation_head(
    d: int, pos: Sequence[int], value_row: int, out_row: int, query_token: int, scale: float
) -> AttentionHead:
    """
    Sum a row over the T sequence tokens into column ``query_token``.

    Column query_token attends uniformly to tokens 1..T, every other column
    attends to the auxiliary token; with the value scaled by T the written
    entry is the plain sum.
    """
    seq_len = len(pos) - 1
    w_k = np.zeros((2, d))
    w_k[0, pos[:seq_len]] = 1.0
    w_k[1, pos[seq_len]] = 1.0
    w_q = np.zeros((2, d))
    w_q[0, pos[query_token - 1]] = 1.0
    w_q[1, [r for t, r in enumerate(pos, start=1) if t != query_token]] = 1.0
    w_v = np.zeros((2, d))
    w_v[0, value_row] = scale
    w_o = np.zeros((d, 2))
    w_o[out_row, 0] = 1.0
    return AttentionHead(w_k=w_k, w_q=w_q, w_v=w_v, w_o=w_o)


def max_head(
    d: int, pos: Sequence[int], value_row: int, out_row: int, target_token: int, rank: int,
    mask: float,
) -> AttentionHead:
    """
    Write the max of a row over columns 1..rank into column ``target_token``.

    The target column's logits are the row entries, with columns beyond the
    rank pushed down by ``mask``; every other column is steered onto the
    columns beyond the rank, where the row is zero.
    """
    seq_len = len(pos) - 1
    if rank > seq_len:
        raise PreconditionError(f"rank p={rank} exceeds T={seq_len}")
    w_k = np.zeros((2, d))
    w_k[0, value_row] = 1.0
    w_k[0, pos[rank:]] = -mask
    w_k[1, pos[:rank]] = -mask
    w_q = np.zeros((2, d))
    w_q[0, pos[target_token - 1]] = 1.0
    w_q[1, [r for t, r in enumerate(pos, start=1) if t != target_token]] = 1.0
    w_v = np.zeros((2, d))
    w_v[0, value_row] = 1.0
    w_o = np.zeros((d, 2))
    w_o[out_row, 0] = 1.0
    return AttentionHead(w_k=w_k, w_q=w_q, w_v=w_v, w_o=w_o)
