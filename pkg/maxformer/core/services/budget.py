"""
Architecture budgets: closed-form size tuples (L, d, k, H, r) per construction
and their comparison against compiled networks.
"""

import logging
import math
from typing import Optional, Union

from pydantic import BaseModel, Field

from maxformer.core.models import (
    BudgetAudit,
    BudgetTuple,
    CpwlPairSpec,
    DeepMaxoutSpec,
    DomainBox,
    MaxoutLayerSpec,
    NetSpec,
    ReluNetSpec,
    TheoremId,
    TransformerNet,
)
from maxformer.core.validation import PreconditionError

logger = logging.getLogger(__name__)


class BudgetDims(BaseModel):
    """Dimensions the size formulas are stated in."""

    model_config = {"frozen": True}

    n: int = Field(ge=1)
    T: int = Field(ge=1)
    # Width per token
    m: int = Field(ge=1)
    # Rank (N for CPWL pairs)
    p: int = Field(ge=1)
    D: int = Field(default=1, ge=1)
    s: Optional[int] = Field(default=None, ge=2)


def _tournament_depth(p: int, s: int) -> int:
    return max(1, math.ceil((p - 1) / (s - 1)))


def _ff_width(r_inner: int, T: int) -> int:
    return 4 * (r_inner + 1) * (T + 3)


def _shallow_pleT(x: BudgetDims) -> BudgetTuple:
    n, T, m, p = x.n, x.T, x.m, x.p
    return BudgetTuple(
        L=3,
        d=max(n, m * (T * p + T + 1)) + T + 1,
        k=2,
        H=T * m * p,
        r=_ff_width(n, T),
    )


def _deep_pleT(x: BudgetDims) -> BudgetTuple:
    n, T, m, p = x.n, x.T, x.m, x.p
    return BudgetTuple(
        L=3 * x.D,
        d=max(n, m * ((T + 1) * (p + 1) + 1)) + T + 1,
        k=2,
        H=(T + 1) * m * p,
        r=_ff_width(max(n, m * p), T),
    )


def _relu(x: BudgetDims) -> BudgetTuple:
    n, T, m = x.n, x.T, x.m
    return BudgetTuple(
        L=3 * x.D + 1,
        d=max(n, m * (3 * (T + 1) + 1)) + T + 1,
        k=2,
        H=2 * (T + 1) * m,
        r=_ff_width(max(n, 2 * m), T),
    )


def _tournament(x: BudgetDims) -> int:
    if x.s is None:
        raise PreconditionError("tournament budgets need the width s")
    return x.s


def _shallow_pgtT(x: BudgetDims) -> BudgetTuple:
    n, T, m, p = x.n, x.T, x.m, x.p
    s = _tournament(x)
    if s >= p:
        inner_d, inner_r = max(n, m * (T * p + T + 1)), n
    else:
        inner_d, inner_r = n + m * ((T + 1) * (s + 1) + 1), max(n + m, m * s)
    return BudgetTuple(
        L=3 * _tournament_depth(p, s),
        d=inner_d + T + 1,
        k=2,
        H=(T + 1) * m * min(s, p),
        r=_ff_width(inner_r, T),
    )


def _deep_pgtT(x: BudgetDims) -> BudgetTuple:
    n, T, m, p = x.n, x.T, x.m, x.p
    s = _tournament(x)
    if s >= p:
        inner_d, inner_r = max(n, m * ((T + 1) * (p + 1) + 1)), max(n, m * p)
    else:
        inner_d = max(n, m) + m * ((T + 1) * (s + 1) + 1)
        inner_r = max(n + m, m * s)
    return BudgetTuple(
        L=3 * _tournament_depth(p, s) * x.D,
        d=inner_d + T + 1,
        k=2,
        H=(T + 1) * m * min(s, p),
        r=_ff_width(inner_r, T),
    )


def _cpwl(x: BudgetDims) -> BudgetTuple:
    n, T, m, N = x.n, x.T, x.m, x.p
    L = 3 if N <= T else 3 * _tournament_depth(N, T)
    return BudgetTuple(
        L=L,
        d=n + 2 * m * (T + 1) ** 2 + 2 * m + T + 1,
        k=2,
        H=2 * m * T * (T + 1),
        r=_ff_width(max(n + 2 * m, 2 * m * T), T),
    )


_FORMULAS = {
    TheoremId.SHALLOW_PLET: _shallow_pleT,
    TheoremId.DEEP_PLET: _deep_pleT,
    TheoremId.RELU: _relu,
    TheoremId.SHALLOW_PGTT: _shallow_pgtT,
    TheoremId.DEEP_PGTT: _deep_pgtT,
    TheoremId.CPWL: _cpwl,
}


def _theorem(theorem_id: Union[TheoremId, str]) -> TheoremId:
    try:
        return TheoremId(theorem_id)
    except ValueError as exc:
        known = ", ".join(t.value for t in TheoremId)
        raise PreconditionError(f"unknown theorem_id {theorem_id!r}; expected one of {known}") from exc


def claimed_budget(theorem_id: Union[TheoremId, str], dims: BudgetDims) -> BudgetTuple:
    """Size tuple stated for a construction"""
    return _FORMULAS[_theorem(theorem_id)](dims)


def measure_architecture(net: TransformerNet) -> BudgetTuple:
    """
    Actual (L, d, k, H, r): blocks, stream dimension, largest head size,
    most heads in one block, widest feed-forward.
    """
    return BudgetTuple(
        L=net.depth,
        d=net.dim,
        k=max((head.size for block in net.blocks for head in block.heads), default=0),
        H=max((len(block.heads) for block in net.blocks), default=0),
        r=max((block.ff.width for block in net.blocks), default=0),
    )


def check_architecture_budget(
    net: TransformerNet, theorem_id: Union[TheoremId, str], dims: BudgetDims
) -> BudgetAudit:
    """
    Compare a compiled net against the size tuple of a construction.

    Raises:
        PreconditionError: If theorem_id is unknown
    """
    theorem = _theorem(theorem_id)
    claimed = claimed_budget(theorem, dims)
    actual = measure_architecture(net)
    within = actual.fits_within(claimed)
    notes = ""
    if not within:
        over = [
            name
            for name, a, c in zip("LdkHr", actual.as_tuple(), claimed.as_tuple())
            if a > c
        ]
        notes = "exceeds budget in " + ", ".join(over)
        logger.warning("%s audit failed: actual %s > claimed %s", theorem.value, actual.as_tuple(), claimed.as_tuple())
    return BudgetAudit(theorem_id=theorem, claimed=claimed, actual=actual, within_budget=within, notes=notes)


def _per_token(width: int, seq_len: int) -> int:
    return max(1, math.ceil(width / seq_len))


def theorem_for(spec: NetSpec, box: DomainBox, s: Optional[int] = None) -> TheoremId:
    """The construction compile_general uses for a spec"""
    if isinstance(spec, CpwlPairSpec):
        return TheoremId.CPWL
    if isinstance(spec, ReluNetSpec):
        return TheoremId.RELU
    layers = [spec] if isinstance(spec, MaxoutLayerSpec) else list(spec.layers)
    tournament = s is not None or max(layer.p for layer in layers) > box.seq_len
    if isinstance(spec, MaxoutLayerSpec):
        return TheoremId.SHALLOW_PGTT if tournament else TheoremId.SHALLOW_PLET
    return TheoremId.DEEP_PGTT if tournament else TheoremId.DEEP_PLET


def budget_dims_for(spec: NetSpec, box: DomainBox, s: Optional[int] = None) -> BudgetDims:
    """
    Formula dimensions of a spec compiled on a box.

    m is the largest per-token width of any layer (hidden widths padded to
    multiples of T; for ReLU nets the readout counts as well). For CPWL
    pairs p is the common rank N and m the per-token output width of g.
    """
    T = box.seq_len
    if isinstance(spec, CpwlPairSpec):
        return BudgetDims(
            n=box.n, T=T, m=_per_token(spec.m_out, T), p=max(spec.g.p, spec.h.p), s=s
        )
    if isinstance(spec, ReluNetSpec):
        widths = [len(bias) for bias in spec.biases] + [spec.m_out]
        return BudgetDims(
            n=box.n, T=T, m=max(_per_token(w, T) for w in widths), p=2, D=max(1, spec.depth)
        )
    layers: list[MaxoutLayerSpec] = [spec] if isinstance(spec, MaxoutLayerSpec) else list(spec.layers)
    if s is None and max(layer.p for layer in layers) > T:
        s = T if T >= 2 else None
    return BudgetDims(
        n=box.n,
        T=T,
        m=max(_per_token(layer.m_out, T) for layer in layers),
        p=max(layer.p for layer in layers),
        D=len(layers) if isinstance(spec, DeepMaxoutSpec) else 1,
        s=s,
    )


def audit_compiled(net: TransformerNet, spec: NetSpec, box: DomainBox) -> BudgetAudit:
    """Audit a net against the construction recorded in its provenance"""
    theorem = net.info.theorem_id or theorem_for(spec, box, net.info.s)
    return check_architecture_budget(net, theorem, budget_dims_for(spec, box, net.info.s))
