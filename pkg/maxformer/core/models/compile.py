from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, field_validator

from maxformer.core.models.transformer import AttentionMode, CompileInfo


class TheoremId(str, Enum):
    SHALLOW_PLET = "shallow_pleT"
    DEEP_PLET = "deep_pleT"
    RELU = "relu"
    SHALLOW_PGTT = "shallow_pgtT"
    DEEP_PGTT = "deep_pgtT"
    CPWL = "cpwl"


class ResidualPolicy(str, Enum):
    """How scratch rows left by the last stage are disposed of"""
    AUTO = "auto"
    READOUT_DROP = "readout_drop"
    FF_CANCEL = "ff_cancel"


class CompileOptions(BaseModel):
    """Knobs for weight synthesis."""

    model_config = {"frozen": True}

    # Tournament width for rank decomposition; None means s = T
    s: Optional[int] = Field(default=None, ge=2)
    mode: AttentionMode = Field(default_factory=AttentionMode.hardmax)
    # One delta per shifted stage output; None means M_l / (T+1) everywhere
    delta_schedule: Optional[tuple[float, ...]] = None
    alpha_margin: float = Field(default=1.0, ge=0.0, allow_inf_nan=False)
    residual: ResidualPolicy = ResidualPolicy.AUTO

    @field_validator("delta_schedule")
    @classmethod
    def positive_deltas(cls, v: Optional[tuple[float, ...]]) -> Optional[tuple[float, ...]]:
        if v is not None and any(not (d > 0.0) for d in v):
            raise ValueError("every delta in the schedule must be positive")
        return v


class BudgetTuple(BaseModel):
    """Architecture size (L, d, k, H, r)."""

    model_config = {"frozen": True}

    L: int
    d: int
    k: int
    H: int
    r: int

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.L, self.d, self.k, self.H, self.r)

    def fits_within(self, other: "BudgetTuple") -> bool:
        return all(a <= b for a, b in zip(self.as_tuple(), other.as_tuple()))


class BudgetAudit(BaseModel):
    model_config = {"frozen": True}

    theorem_id: TheoremId
    claimed: BudgetTuple
    actual: BudgetTuple
    within_budget: bool
    notes: str = ""


class CompileReport(BaseModel):
    """Written next to a weight file by the compile command."""

    model_config = {"frozen": True}

    audit: BudgetAudit
    info: CompileInfo
    options: CompileOptions
    s_used: Optional[int] = None
