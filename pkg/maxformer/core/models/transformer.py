"""
Transformer network data model.

Weights are numpy arrays, so these are frozen dataclasses rather than
pydantic models; equality compares shapes and entries exactly.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from maxformer.core.validation import ShapeMismatchError


class AttentionKind(str, Enum):
    HARDMAX = "hardmax"
    SOFTMAX = "softmax"


class AttentionMode(BaseModel):
    """Column activation used by every attention head."""

    model_config = {"frozen": True}

    tag: AttentionKind = AttentionKind.HARDMAX
    lam: Optional[float] = Field(default=None, gt=0.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def lambda_for_softmax(self) -> "AttentionMode":
        if self.tag is AttentionKind.SOFTMAX and self.lam is None:
            raise ValueError("softmax attention needs a positive lambda")
        return self

    @classmethod
    def hardmax(cls) -> "AttentionMode":
        return cls(tag=AttentionKind.HARDMAX)

    @classmethod
    def softmax(cls, lam: float) -> "AttentionMode":
        return cls(tag=AttentionKind.SOFTMAX, lam=lam)


def _same(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and bool(np.array_equal(a, b))


@dataclass(frozen=True, eq=False)
class AttentionHead:
    """One head: W_K, W_Q, W_V are k x d, W_O is d x k."""

    w_k: np.ndarray
    w_q: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray

    def __post_init__(self) -> None:
        k, d = self.w_k.shape
        for name in ("w_q", "w_v"):
            shape = getattr(self, name).shape
            if shape != (k, d):
                raise ShapeMismatchError((k, d), shape, f"AttentionHead.{name}")
        if self.w_o.shape != (d, k):
            raise ShapeMismatchError((d, k), self.w_o.shape, "AttentionHead.w_o")

    @property
    def size(self) -> int:
        return int(self.w_k.shape[0])

    @property
    def dim(self) -> int:
        return int(self.w_k.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttentionHead):
            return NotImplemented
        return all(
            _same(getattr(self, n), getattr(other, n)) for n in ("w_k", "w_q", "w_v", "w_o")
        )


@dataclass(frozen=True, eq=False)
class FeedForward:
    """Token-wise residual MLP z -> z + W2 ReLU(W1 z + b1) + b2, hidden width r."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        r, d = self.w1.shape
        if self.b1.shape != (r,):
            raise ShapeMismatchError((r,), self.b1.shape, "FeedForward.b1")
        if self.w2.shape != (d, r):
            raise ShapeMismatchError((d, r), self.w2.shape, "FeedForward.w2")
        if self.b2.shape != (d,):
            raise ShapeMismatchError((d,), self.b2.shape, "FeedForward.b2")

    @classmethod
    def zero(cls, d: int, width: int = 0) -> "FeedForward":
        return cls(
            w1=np.zeros((width, d)),
            b1=np.zeros(width),
            w2=np.zeros((d, width)),
            b2=np.zeros(d),
        )

    @property
    def width(self) -> int:
        return int(self.w1.shape[0])

    @property
    def dim(self) -> int:
        return int(self.w1.shape[1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeedForward):
            return NotImplemented
        return all(_same(getattr(self, n), getattr(other, n)) for n in ("w1", "b1", "w2", "b2"))


@dataclass(frozen=True, eq=False)
class TransformerBlock:
    heads: tuple[AttentionHead, ...]
    ff: FeedForward

    def __post_init__(self) -> None:
        sizes = {h.size for h in self.heads}
        if len(sizes) > 1:
            raise ShapeMismatchError("one head size", sorted(sizes), "TransformerBlock.heads")
        for idx, head in enumerate(self.heads):
            if head.dim != self.ff.dim:
                raise ShapeMismatchError(self.ff.dim, head.dim, f"TransformerBlock.heads[{idx}]")

    @property
    def head_size(self) -> int:
        return self.heads[0].size if self.heads else 0

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransformerBlock):
            return NotImplemented
        return (
            len(self.heads) == len(other.heads)
            and all(a == b for a, b in zip(self.heads, other.heads))
            and self.ff == other.ff
        )


class StageRecord(BaseModel):
    """How one compiled maxout stage was laid out."""

    model_config = {"frozen": True}

    width_in: int
    width_out: int
    general_units: int
    rank: int
    lo: float
    hi: float
    delta: float
    alpha: float
    m2: float
    bound_out: float
    # Delta of the shift added to the outputs; None when the stage is unshifted
    shift_delta: Optional[float] = None
    readout: bool = False

    def offset(self, t: int) -> float:
        """Input-side token offset (t-1)(hi-lo) + t*delta"""
        return (t - 1) * (self.hi - self.lo) + t * self.delta

    def shift(self, t: int) -> float:
        """Output-side token shift 2M(t-1) + t*delta_out, zero when unshifted"""
        if self.shift_delta is None:
            return 0.0
        return 2.0 * self.bound_out * (t - 1) + t * self.shift_delta


class CompileInfo(BaseModel):
    """Provenance attached to a compiled net."""

    model_config = {"frozen": True}

    theorem_id: Optional[str] = None
    source_kind: Optional[str] = None
    m1: float = 0.0
    m2: float = 0.0
    s: Optional[int] = None
    residual: Literal["readout_drop", "ff_cancel"] = "readout_drop"
    stages: tuple[StageRecord, ...] = ()


@dataclass(frozen=True, eq=False)
class TransformerNet:
    """
    C o f^L o ... o f^1 o E with E(X) = A X + B.

    embed_b has T+1 columns; the last one is the auxiliary token when
    uses_aux_token is set.
    """

    embed_a: np.ndarray
    embed_b: np.ndarray
    blocks: tuple[TransformerBlock, ...]
    readout: np.ndarray
    n: int
    m: int
    seq_len: int
    uses_aux_token: bool = True
    info: CompileInfo = field(default_factory=CompileInfo)

    def __post_init__(self) -> None:
        d = self.embed_a.shape[0]
        cols = self.seq_len + (1 if self.uses_aux_token else 0)
        if self.embed_a.shape != (d, self.n):
            raise ShapeMismatchError((d, self.n), self.embed_a.shape, "TransformerNet.embed_a")
        if self.embed_b.shape != (d, cols):
            raise ShapeMismatchError((d, cols), self.embed_b.shape, "TransformerNet.embed_b")
        if self.readout.shape != (self.m, d):
            raise ShapeMismatchError((self.m, d), self.readout.shape, "TransformerNet.readout")
        for idx, block in enumerate(self.blocks):
            if block.ff.dim != d:
                raise ShapeMismatchError(d, block.ff.dim, f"TransformerNet.blocks[{idx}]")

    @property
    def dim(self) -> int:
        return int(self.embed_a.shape[0])

    @property
    def depth(self) -> int:
        return len(self.blocks)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransformerNet):
            return NotImplemented
        return (
            _same(self.embed_a, other.embed_a)
            and _same(self.embed_b, other.embed_b)
            and _same(self.readout, other.readout)
            and (self.n, self.m, self.seq_len, self.uses_aux_token)
            == (other.n, other.m, other.seq_len, other.uses_aux_token)
            and len(self.blocks) == len(other.blocks)
            and all(a == b for a, b in zip(self.blocks, other.blocks))
        )
