"""
Synthesis of Transformer weights realizing maxout, ReLU and CPWL networks.

Each maxout layer becomes one stage of three blocks:

- block A: a region-selector feed-forward writes, for every token t, the
  contribution of token t to every piece of every output unit (Y rows) and
  clears the stage input rows;
- block B: aggregation heads sum those contributions over tokens and park
  piece j of unit (k, i) in column j of a Z row;
- block C: max heads pick the largest piece of each Z row and write it into
  output row i of column k; its feed-forward clears Y and Z.

Non-final stages add the token shift 2M(t-1) + t*delta to their outputs so
the next stage's selector can tell tokens apart again. Output units whose
pieces coincide and only read their own token skip the heads and are written
by the selector directly.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from maxformer.core.models import (
    CompileInfo,
    CompileOptions,
    CpwlPairSpec,
    DeepMaxoutSpec,
    DomainBox,
    FeedForward,
    MaxoutLayerSpec,
    NetSpec,
    ReluNetSpec,
    ResidualPolicy,
    StageRecord,
    TheoremId,
    TransformerBlock,
    TransformerNet,
)
from maxformer.core.services.geometry import (
    RegionGeometry,
    aggregation_head,
    build_aux_shift_ff,
    build_cancellation_ff,
    build_positional_embedding,
    build_region_selector_ff,
    max_head,
    position_rows,
    stack_feedforwards,
)
from maxformer.core.validation import PreconditionError, ShapeMismatchError

logger = logging.getLogger(__name__)


# =============================================================================
# Spec transformations
# =============================================================================

def decompose_rank(layer: MaxoutLayerSpec, s: int, seq_len: int = 1) -> DeepMaxoutSpec:
    """
    Rewrite a rank-p layer as ceil((p-1)/(s-1)) rank-s layers.

    Layer 1 takes the max of the first s pieces; every later layer takes the
    max of the running max and the next s-1 pieces (the last piece repeats
    as padding). Intermediate layers output, per token, the m running maxes
    followed by the token's n input coordinates, carried by rank-s units
    whose rows all equal the coordinate row.

    Args:
        layer: Layer on R^{nT} -> R^{mT}
        s: Tournament width, at least 2
        seq_len: Number of tokens T the input and output are split into

    Raises:
        PreconditionError: If s < 2
        ShapeMismatchError: If the dimensions are not multiples of T
    """
    if s < 2:
        raise PreconditionError(f"tournament width s={s} < 2")
    p = layer.p
    if p <= s:
        return DeepMaxoutSpec(layers=(layer,))
    if layer.n_in % seq_len or layer.m_out % seq_len:
        raise ShapeMismatchError(f"multiples of T={seq_len}", (layer.n_in, layer.m_out), "decompose_rank")
    n, m = layer.n_in // seq_len, layer.m_out // seq_len
    carry = m + n
    depth = math.ceil((p - 1) / (s - 1))
    W, b = layer.weights(), layer.biases()

    def carried(unit: int, piece: int) -> np.ndarray:
        # Original piece re-indexed onto the carried coordinates
        row = np.zeros(carry * seq_len)
        for t in range(seq_len):
            row[t * carry + m : (t + 1) * carry] = W[unit, piece, t * n : (t + 1) * n]
        return row

    layers = []
    for level in range(depth):
        last = level == depth - 1
        width_in = n if level == 0 else carry
        width_out = m if last else carry
        Wl = np.zeros((width_out * seq_len, s, width_in * seq_len))
        bl = np.zeros((width_out * seq_len, s))
        start = s + (level - 1) * (s - 1)
        for k in range(seq_len):
            for i in range(m):
                unit = k * m + i
                out = k * width_out + i
                if level == 0:
                    Wl[out] = W[unit, :s]
                    bl[out] = b[unit, :s]
                    continue
                Wl[out, 0, k * carry + i] = 1.0
                for slot in range(1, s):
                    piece = min(start + slot - 1, p - 1)
                    Wl[out, slot] = carried(unit, piece)
                    bl[out, slot] = b[unit, piece]
            if not last:
                for c in range(n):
                    source = k * width_in + (c if level == 0 else m + c)
                    Wl[k * width_out + m + c, :, source] = 1.0
        layers.append(MaxoutLayerSpec.from_arrays(Wl, bl))
    return DeepMaxoutSpec(layers=tuple(layers))


def relu_layers(spec: ReluNetSpec, seq_len: int) -> tuple[list[MaxoutLayerSpec], np.ndarray, np.ndarray]:
    """
    Hidden ReLU layers as rank-2 maxout layers {Wx + b, 0}, padded to multiples of T.

    Returns:
        The maxout layers, and the readout weight and bias with columns
        padded to match the last padded width
    """
    layers = []
    prev_real, prev_padded = spec.n_in, spec.n_in
    for weight, bias in spec.layer_arrays():
        rows = weight.shape[0]
        padded = seq_len * math.ceil(rows / seq_len)
        Wl = np.zeros((padded, 2, prev_padded))
        bl = np.zeros((padded, 2))
        Wl[:rows, 0, :prev_real] = weight
        bl[:rows, 0] = bias
        layers.append(MaxoutLayerSpec.from_arrays(Wl, bl))
        prev_real, prev_padded = rows, padded
    weight, bias = spec.readout_arrays()
    readout = np.zeros((weight.shape[0], prev_padded))
    readout[:, :prev_real] = weight
    return layers, readout, bias


def stack_cpwl(pair: CpwlPairSpec, seq_len: int) -> MaxoutLayerSpec:
    """
    Stack g and h into one layer with 2m outputs per token.

    Token k's outputs are g's m units followed by h's; the lower-rank side
    repeats its last piece up to the common rank.
    """
    if pair.m_out % seq_len:
        raise ShapeMismatchError(f"multiple of T={seq_len}", pair.m_out, "compile_cpwl output")
    m = pair.m_out // seq_len
    rank = max(pair.g.p, pair.h.p)

    def padded(layer: MaxoutLayerSpec) -> tuple[np.ndarray, np.ndarray]:
        W, b = layer.weights(), layer.biases()
        extra = rank - layer.p
        if extra:
            W = np.concatenate([W, np.repeat(W[:, -1:], extra, axis=1)], axis=1)
            b = np.concatenate([b, np.repeat(b[:, -1:], extra, axis=1)], axis=1)
        return W, b

    Wg, bg = padded(pair.g)
    Wh, bh = padded(pair.h)
    W = np.zeros((2 * pair.m_out, rank, pair.n_in))
    b = np.zeros((2 * pair.m_out, rank))
    for k in range(seq_len):
        src = slice(k * m, (k + 1) * m)
        W[2 * k * m : (2 * k + 1) * m], b[2 * k * m : (2 * k + 1) * m] = Wg[src], bg[src]
        W[(2 * k + 1) * m : (2 * k + 2) * m], b[(2 * k + 1) * m : (2 * k + 2) * m] = Wh[src], bh[src]
    return MaxoutLayerSpec.from_arrays(W, b)


def layer_bound(layer: MaxoutLayerSpec, bound_in: float) -> float:
    """Interval bound max |output| over inputs with |x| <= bound_in, floored at 1"""
    rows = np.abs(layer.weights()).sum(axis=2)
    return float(max(1.0, (rows * bound_in + np.abs(layer.biases())).max()))


def stage_bounds(layers: Sequence[MaxoutLayerSpec], box: DomainBox) -> tuple[float, list[float], list[float]]:
    """
    Constants governing offsets and masks.

    Returns:
        (M1, per-layer M2, per-layer output bounds M_l)
    """
    m1 = box.m1
    m2s, bounds = [], []
    bound = m1
    for layer in layers:
        m2s.append(layer.m2)
        bound = layer_bound(layer, bound)
        bounds.append(bound)
    return m1, m2s, bounds


# =============================================================================
# Stage planning
# =============================================================================

def _token_local(W: np.ndarray, b: np.ndarray, token: int, width_in: int) -> bool:
    """All pieces equal and reading only ``token``'s coordinates (1-based)"""
    if not (np.all(W == W[0]) and np.all(b == b[0])):
        return False
    outside = np.ones(W.shape[1], dtype=bool)
    outside[(token - 1) * width_in : token * width_in] = False
    return not np.any(W[:, outside])


@dataclass(frozen=True)
class StagePlan:
    layer: MaxoutLayerSpec
    seq_len: int
    width_in: int
    width_out: int
    targets: tuple[int, ...]
    general: tuple[int, ...]
    local: tuple[int, ...]

    def unit(self, token: int, row: int) -> int:
        """Index of output (token, row) in the layer's flattened outputs"""
        if len(self.targets) == self.seq_len:
            return (token - 1) * self.width_out + row
        return row

    @property
    def rank(self) -> int:
        return self.layer.p

    @property
    def scratch_rows(self) -> int:
        return len(self.targets) * len(self.general) * (self.rank + 1)


def plan_stage(layer: MaxoutLayerSpec, seq_len: int, targets: Optional[tuple[int, ...]] = None) -> StagePlan:
    """
    Split a layer's output rows into head-computed and selector-computed rows.

    With ``targets`` None the layer maps R^{w_in T} -> R^{w_out T}; a single
    target token k means the layer's m_out outputs all belong to token k.
    """
    if layer.n_in % seq_len:
        raise ShapeMismatchError(f"multiple of T={seq_len}", layer.n_in, "layer input dimension")
    width_in = layer.n_in // seq_len
    if targets is None:
        if layer.m_out % seq_len:
            raise ShapeMismatchError(f"multiple of T={seq_len}", layer.m_out, "layer output dimension")
        targets = tuple(range(1, seq_len + 1))
        width_out = layer.m_out // seq_len
    else:
        width_out = layer.m_out
    W, b = layer.weights(), layer.biases()
    plan = StagePlan(layer, seq_len, width_in, width_out, targets, (), ())
    general, local = [], []
    for row in range(width_out):
        units = [(k, plan.unit(k, row)) for k in targets]
        if all(_token_local(W[u], b[u], k, width_in) for k, u in units):
            local.append(row)
        else:
            general.append(row)
    return StagePlan(layer, seq_len, width_in, width_out, targets, tuple(general), tuple(local))


@dataclass(frozen=True)
class ReadoutPlan:
    """Affine map applied after the last stage, realized by one extra block"""
    weight: np.ndarray
    bias: np.ndarray
    per_token: int


def _stage_dim(plan: StagePlan, readout: Optional[ReadoutPlan]) -> int:
    rows = plan.width_out + plan.scratch_rows
    if readout is not None:
        rows = max(rows, plan.width_out + (plan.seq_len + 1) * readout.per_token)
    return max(plan.width_in, rows)


# =============================================================================
# Stage construction
# =============================================================================

def _affine_to_region(V: np.ndarray, c: np.ndarray, geometry: RegionGeometry, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Re-express V x + c in the shifted coordinates u = x + off(t)"""
    return V, c - geometry.offset(t) * V.sum(axis=1)


def _build_stage(
    plan: StagePlan,
    geo_in: RegionGeometry,
    bound_in: float,
    geo_out: Optional[RegionGeometry],
    bound_out: float,
    d: int,
    cancel: bool,
    readout: Optional[ReadoutPlan],
    alpha_margin: float,
) -> tuple[list[TransformerBlock], StageRecord]:
    T = plan.seq_len
    pos = position_rows(d, T)
    W, b = plan.layer.weights(), plan.layer.biases()
    p = plan.rank
    G, A = len(plan.general), len(plan.targets)
    if G and p > T:
        raise PreconditionError(f"rank p={p} exceeds T={T}")
    y0 = plan.width_out
    z0 = y0 + A * G * p

    def y_row(a: int, g: int, j: int) -> int:
        return y0 + (a * G + g) * p + j

    def z_row(a: int, g: int) -> int:
        return z0 + a * G + g

    shift: Callable[[int], float] = (lambda t: geo_out.offset(t)) if geo_out else (lambda t: 0.0)
    in_rows = list(range(plan.width_in))
    out_rows = [y_row(a, g, j) for a in range(A) for g in range(G) for j in range(p)]
    out_rows += list(plan.local)

    pieces = []
    for t in range(1, T + 1):
        cols = slice((t - 1) * plan.width_in, t * plan.width_in)
        V = np.zeros((len(out_rows), plan.width_in))
        c = np.zeros(len(out_rows))
        r = 0
        for k in plan.targets:
            for row in plan.general:
                u = plan.unit(k, row)
                for j in range(p):
                    V[r] = W[u, j, cols]
                    if t == 1:
                        c[r] = b[u, j] + shift(k)
                    r += 1
        for row in plan.local:
            if t in plan.targets:
                u = plan.unit(t, row)
                V[r] = W[u, 0, cols]
                c[r] = b[u, 0] + shift(t)
            r += 1
        pieces.append(_affine_to_region(V, c, geo_in, t))
    pieces.append((np.zeros((len(out_rows), plan.width_in)), np.zeros(len(out_rows))))

    block_a = TransformerBlock(
        heads=(),
        ff=stack_feedforwards(
            [
                build_region_selector_ff(pieces, geo_in, d, in_rows, out_rows),
                build_cancellation_ff(in_rows, d),
            ],
            d,
        ),
    )

    heads_b = tuple(
        aggregation_head(d, pos, y_row(a, g, j), z_row(a, g), j + 1, float(T))
        for a in range(A)
        for g in range(G)
        for j in range(p)
    )
    ff_b = (
        build_aux_shift_ff(pos[T], range(plan.width_out), shift(T + 1), d)
        if geo_out is not None
        else FeedForward.zero(d)
    )
    block_b = TransformerBlock(heads=heads_b, ff=ff_b)

    m2 = plan.layer.m2
    max_shift = max(shift(k) for k in plan.targets)
    alpha = 2.0 * ((bound_in + 1.0) * m2 + max_shift) + 1.0 + alpha_margin
    heads_c = tuple(
        max_head(d, pos, z_row(a, g), row, k, p, alpha)
        for a, k in enumerate(plan.targets)
        for g, row in enumerate(plan.general)
    )
    parts_c = []
    if cancel:
        parts_c.append(build_cancellation_ff(list(range(y0, y0 + plan.scratch_rows)), d))
    blocks_extra: list[TransformerBlock] = []
    if readout is not None:
        assert geo_out is not None
        ff_r, block_d = _readout_blocks(plan, readout, geo_out, d, pos)
        parts_c.append(ff_r)
        blocks_extra.append(block_d)
    block_c = TransformerBlock(heads=heads_c, ff=stack_feedforwards(parts_c, d))

    record = StageRecord(
        width_in=plan.width_in,
        width_out=plan.width_out,
        general_units=G,
        rank=p,
        lo=geo_in.lo,
        hi=geo_in.hi,
        delta=geo_in.delta,
        alpha=alpha,
        m2=m2,
        bound_out=bound_out,
        shift_delta=geo_out.delta if geo_out is not None else None,
        readout=readout is not None,
    )
    logger.info(
        "stage %d->%d per token: %d general / %d local rows, rank %d, alpha=%.6g",
        plan.width_in, plan.width_out, G, len(plan.local), p, alpha,
    )
    return [block_a, block_b, block_c, *blocks_extra], record


def _readout_rows(plan: StagePlan, readout: ReadoutPlan) -> tuple[int, int]:
    """First Y row and first output row used by the readout block"""
    y0 = plan.width_out
    return y0, y0 + plan.seq_len * readout.per_token


def _readout_blocks(
    plan: StagePlan, readout: ReadoutPlan, geo_out: RegionGeometry, d: int, pos: list[int]
) -> tuple[FeedForward, TransformerBlock]:
    T = plan.seq_len
    m_o = readout.per_token
    y0, o0 = _readout_rows(plan, readout)
    rows = [y0 + k * m_o + i for k in range(T) for i in range(m_o)]
    pieces = []
    for t in range(1, T + 1):
        cols = slice((t - 1) * plan.width_out, t * plan.width_out)
        V = readout.weight[:, cols].copy()
        c = readout.bias.copy() if t == 1 else np.zeros(len(rows))
        pieces.append(_affine_to_region(V, c, geo_out, t))
    pieces.append((np.zeros((len(rows), plan.width_out)), np.zeros(len(rows))))
    ff = build_region_selector_ff(pieces, geo_out, d, list(range(plan.width_out)), rows)
    heads = tuple(
        aggregation_head(d, pos, y0 + (k - 1) * m_o + i, o0 + i, k, float(T))
        for k in range(1, T + 1)
        for i in range(m_o)
    )
    return ff, TransformerBlock(heads=heads, ff=FeedForward.zero(d))


# =============================================================================
# Network assembly
# =============================================================================

def _shift_deltas(options: CompileOptions, bounds: Sequence[float], seq_len: int) -> list[float]:
    """One delta per shifted stage output, validated against (0, 2M/(T+1))"""
    if options.delta_schedule is None:
        return [bound / (seq_len + 1) for bound in bounds]
    if len(options.delta_schedule) != len(bounds):
        raise PreconditionError(
            f"delta schedule has {len(options.delta_schedule)} entries, "
            f"the compile needs {len(bounds)}"
        )
    for delta, bound in zip(options.delta_schedule, bounds):
        limit = 2.0 * bound / (seq_len + 1)
        if not 0.0 < delta < limit:
            raise PreconditionError(f"delta={delta} outside (0, 2M/(T+1)) = (0, {limit})")
    return list(options.delta_schedule)


def assemble(
    layers: Sequence[MaxoutLayerSpec],
    box: DomainBox,
    options: CompileOptions,
    *,
    targets: Optional[tuple[int, ...]] = None,
    readout: Optional[ReadoutPlan] = None,
    readout_matrix: Optional[Callable[[int, int], np.ndarray]] = None,
    theorem_id: Optional[TheoremId] = None,
    source_kind: str = "",
    s_used: Optional[int] = None,
) -> TransformerNet:
    """
    Compile a chain of maxout layers into one Transformer.

    Args:
        layers: Layers applied in order; the first reads R^{nT}
        box: Input domain
        options: Compile options (mask margin, delta schedule, residual policy)
        targets: A single output token for token compiles, None for sequences
        readout: Affine map applied after the last layer (one extra block)
        readout_matrix: Builds C from (width_out, d); identity on the output
            rows when omitted
        theorem_id: Recorded in the net's provenance
        source_kind: Recorded in the net's provenance
        s_used: Tournament width recorded in the provenance

    Raises:
        ShapeMismatchError: If the layer chain does not fit the box
        PreconditionError: If a rank exceeds T or a delta is out of range
    """
    T = box.seq_len
    plans = [plan_stage(layer, T, targets) for layer in layers]
    if plans[0].width_in != box.n:
        raise ShapeMismatchError(box.n * T, layers[0].n_in, "first layer input dimension")
    for idx in range(1, len(plans)):
        if plans[idx].width_in != plans[idx - 1].width_out:
            raise ShapeMismatchError(
                plans[idx - 1].width_out, plans[idx].width_in, f"stage {idx} input width"
            )
    for idx, plan in enumerate(plans):
        if plan.general and plan.rank > T:
            raise PreconditionError(f"layer {idx} has rank p={plan.rank} > T={T}")

    m1, m2s, bounds = stage_bounds(layers, box)
    shifted = len(plans) - (0 if readout is not None else 1)
    deltas = _shift_deltas(options, bounds[:shifted], T)

    if options.residual is ResidualPolicy.AUTO:
        cancel_last = len(plans) > 1
    else:
        cancel_last = options.residual is ResidualPolicy.FF_CANCEL
    cancel_last = cancel_last or readout is not None

    last = len(plans) - 1
    d_inner = max(
        _stage_dim(plan, readout if idx == last else None) for idx, plan in enumerate(plans)
    )
    d = max(box.n, d_inner) + T + 1

    blocks: list[TransformerBlock] = []
    records: list[StageRecord] = []
    geo_in = RegionGeometry.from_box(box)
    bound_in = m1
    for idx, plan in enumerate(plans):
        geo_out = (
            RegionGeometry.symmetric(bounds[idx], deltas[idx], T) if idx < shifted else None
        )
        stage_blocks, record = _build_stage(
            plan,
            geo_in,
            bound_in,
            geo_out,
            bounds[idx],
            d,
            cancel=cancel_last if idx == last else True,
            readout=readout if idx == last else None,
            alpha_margin=options.alpha_margin,
        )
        blocks.extend(stage_blocks)
        records.append(record)
        if geo_out is not None:
            geo_in = geo_out
        bound_in = bounds[idx]

    A, B = build_positional_embedding(box, d)
    final = plans[-1]
    if readout is not None:
        _, o0 = _readout_rows(final, readout)
        C = np.zeros((readout.per_token, d))
        C[np.arange(readout.per_token), o0 + np.arange(readout.per_token)] = 1.0
    elif readout_matrix is not None:
        C = readout_matrix(final.width_out, d)
    else:
        C = np.zeros((final.width_out, d))
        C[np.arange(final.width_out), np.arange(final.width_out)] = 1.0

    info = CompileInfo(
        theorem_id=theorem_id.value if theorem_id else None,
        source_kind=source_kind,
        m1=m1,
        m2=max(m2s),
        s=s_used,
        residual="ff_cancel" if cancel_last else "readout_drop",
        stages=tuple(records),
    )
    logger.info("compiled %s: L=%d, d=%d", source_kind or "net", len(blocks), d)
    return TransformerNet(
        embed_a=A,
        embed_b=B,
        blocks=tuple(blocks),
        readout=C,
        n=box.n,
        m=C.shape[0],
        seq_len=T,
        uses_aux_token=True,
        info=info,
    )


class TransformerCompiler:
    """
    Compiles network specs into hardmax Transformers that equal them on a box.

    The attention mode in the options only matters to callers evaluating
    the result; the weights are the same for hardmax and softmax.
    """

    def __init__(self, options: Optional[CompileOptions] = None):
        self.options = options or CompileOptions()

    def _tournament_width(self, seq_len: int) -> int:
        s = self.options.s if self.options.s is not None else seq_len
        if s < 2 or s > seq_len:
            raise PreconditionError(f"tournament width must satisfy 2 <= s <= T={seq_len}, got s={s}")
        return s

    def compile_maxout_token(self, layer: MaxoutLayerSpec, box: DomainBox, token: int) -> TransformerNet:
        """
        Realize f: R^{nT} -> R^m at output token ``token`` and zero elsewhere.

        Raises:
            PreconditionError: If p > T or the token is out of range
        """
        if not 1 <= token <= box.seq_len:
            raise PreconditionError(f"target token {token} outside 1..{box.seq_len}")
        if layer.p > box.seq_len:
            raise PreconditionError(f"rank p={layer.p} exceeds T={box.seq_len}")
        return assemble([layer], box, self.options, targets=(token,), source_kind="maxout_token")

    def compile_maxout_layer_seq(self, layer: MaxoutLayerSpec, box: DomainBox) -> TransformerNet:
        """
        Realize Vec^{-1} o f o Vec for a layer with m_out = mT and p <= T.

        Raises:
            PreconditionError: If p > T
        """
        if layer.p > box.seq_len:
            raise PreconditionError(f"rank p={layer.p} exceeds T={box.seq_len}")
        return assemble(
            [layer], box, self.options, theorem_id=TheoremId.SHALLOW_PLET, source_kind="maxout_layer"
        )

    def compile_deep_maxout(self, net: DeepMaxoutSpec, box: DomainBox) -> TransformerNet:
        """
        Realize a deep maxout network with every rank <= T, one stage per layer.

        Raises:
            PreconditionError: If a rank exceeds T or a delta is out of range
        """
        for idx, layer in enumerate(net.layers):
            if layer.p > box.seq_len:
                raise PreconditionError(f"layer {idx} rank p={layer.p} exceeds T={box.seq_len}")
        return assemble(
            list(net.layers), box, self.options, theorem_id=TheoremId.DEEP_PLET, source_kind="deep_maxout"
        )

    def compile_general(self, spec: NetSpec, box: DomainBox) -> TransformerNet:
        """
        Compile any supported spec, decomposing ranks above min(s, T).

        With no tournament width set and every rank <= T the layers compile
        as they are. ReLU layers become rank-2 maxout units {Wx + b, 0} and
        the affine readout costs one extra block.

        Raises:
            PreconditionError: For ReLU nets without hidden layers or with T < 2,
                and when a rank above T cannot be decomposed
        """
        T = box.seq_len
        if isinstance(spec, CpwlPairSpec):
            return self.compile_cpwl(spec, box)
        if isinstance(spec, ReluNetSpec):
            return self._compile_relu(spec, box)
        layers = [spec] if isinstance(spec, MaxoutLayerSpec) else list(spec.layers)
        shallow = isinstance(spec, MaxoutLayerSpec)
        if self.options.s is None and max(layer.p for layer in layers) <= T:
            theorem = TheoremId.SHALLOW_PLET if shallow else TheoremId.DEEP_PLET
            return assemble(layers, box, self.options, theorem_id=theorem, source_kind=spec.kind)

        s = self._tournament_width(T)
        expanded: list[MaxoutLayerSpec] = []
        for layer in layers:
            expanded.extend(decompose_rank(layer, s, T).layers)
        theorem = TheoremId.SHALLOW_PGTT if shallow else TheoremId.DEEP_PGTT
        logger.debug("decomposed %d layers into %d with s=%d", len(layers), len(expanded), s)
        return assemble(expanded, box, self.options, theorem_id=theorem, source_kind=spec.kind, s_used=s)

    def _compile_relu(self, spec: ReluNetSpec, box: DomainBox) -> TransformerNet:
        T = box.seq_len
        if spec.depth == 0:
            raise PreconditionError("ReLU net needs at least one hidden layer (D >= 1)")
        if T < 2:
            raise PreconditionError("ReLU compiles need T >= 2 for the rank-2 units")
        if spec.m_out % T:
            raise ShapeMismatchError(f"multiple of T={T}", spec.m_out, "ReLU readout output dimension")
        layers, weight, bias = relu_layers(spec, T)
        readout = ReadoutPlan(weight=weight, bias=bias, per_token=spec.m_out // T)
        return assemble(
            layers, box, self.options, readout=readout, theorem_id=TheoremId.RELU, source_kind="relu_net"
        )

    def compile_cpwl(self, pair: CpwlPairSpec, box: DomainBox) -> TransformerNet:
        """
        Compile f = g - h: stack (g; h), decompose with s = T, read out the difference.

        Raises:
            PreconditionError: If the common rank exceeds T while T < 2
        """
        T = box.seq_len
        stacked = stack_cpwl(pair, T)
        if stacked.p > T:
            if T < 2:
                raise PreconditionError(f"rank {stacked.p} exceeds T={T} and T < 2 allows no decomposition")
            layers = list(decompose_rank(stacked, T, T).layers)
        else:
            layers = [stacked]

        def difference(width_out: int, d: int) -> np.ndarray:
            half = width_out // 2
            C = np.zeros((half, d))
            C[np.arange(half), np.arange(half)] = 1.0
            C[np.arange(half), half + np.arange(half)] = -1.0
            return C

        return assemble(
            layers,
            box,
            self.options,
            readout_matrix=difference,
            theorem_id=TheoremId.CPWL,
            source_kind="cpwl_pair",
            s_used=T,
        )
