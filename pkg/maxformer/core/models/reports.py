from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from maxformer.core.validation import validate_finite


class Criterion(str, Enum):
    RELATIVE = "relative"
    ABSOLUTE = "absolute"


class VerificationReport(BaseModel):
    """Outcome of a sampled numerical check."""

    model_config = {"frozen": True}

    max_abs_error: float = Field(ge=0.0)
    max_rel_error: float = Field(default=0.0, ge=0.0)
    tolerance: float = 0.0
    criterion: Criterion = Criterion.ABSOLUTE
    samples: int
    seed: int
    per_token_errors: tuple[float, ...] = ()
    passed: bool
    notes: str = ""

    @property
    def measured_error(self) -> float:
        """The error compared against the tolerance"""
        if self.criterion is Criterion.RELATIVE:
            return self.max_rel_error
        return self.max_abs_error


class LambdaSweep(BaseModel):
    """Softmax sup-error estimates along an increasing lambda grid."""

    model_config = {"frozen": True}

    lambdas: tuple[float, ...]
    errors: tuple[float, ...]
    fitted_slope: Optional[float] = None
    regime_onset: Optional[float] = None
    monotone_violations: int = 0
    samples: int = 0
    seed: int = 0
    notes: str = ""

    @model_validator(mode="after")
    def check_grid(self) -> "LambdaSweep":
        if len(self.lambdas) != len(self.errors):
            raise ValueError("lambdas and errors must have equal length")
        if any(b <= a for a, b in zip(self.lambdas, self.lambdas[1:])):
            raise ValueError("lambdas must be strictly increasing")
        if any(e < 0.0 for e in self.errors):
            raise ValueError("errors must be nonnegative")
        return self


class RegionMethod(str, Enum):
    EXACT_1D = "exact_1d"
    GRID_2D = "grid_2d"


class Slice(BaseModel):
    """An affine 1D or 2D slice base + s*dirs[0] (+ u*dirs[1]) of the input space."""

    model_config = {"frozen": True}

    kind: str = "slice"
    base: tuple[tuple[float, ...], ...]
    dirs: tuple[tuple[tuple[float, ...], ...], ...]
    extent: tuple[tuple[float, float], ...]
    resolution: int = Field(default=256, ge=16)

    @field_validator("dirs")
    @classmethod
    def one_or_two(cls, v: tuple) -> tuple:
        if len(v) not in (1, 2):
            raise ValueError(f"a slice needs 1 or 2 directions, got {len(v)}")
        return v

    @model_validator(mode="after")
    def check_slice(self) -> "Slice":
        if not validate_finite(self.extent) or not validate_finite(self.base) or not validate_finite(self.dirs):
            raise ValueError("slice entries must be finite")
        if len(self.extent) != len(self.dirs):
            raise ValueError("need one extent interval per direction")
        for lo, hi in self.extent:
            if not hi > lo:
                raise ValueError(f"extent ({lo}, {hi}) is empty")
        base = np.asarray(self.base, dtype=np.float64)
        dirs = np.asarray(self.dirs, dtype=np.float64)
        if dirs.shape[1:] != base.shape:
            raise ValueError(f"directions have shape {dirs.shape[1:]}, base has {base.shape}")
        if np.linalg.matrix_rank(dirs.reshape(len(self.dirs), -1)) < len(self.dirs):
            raise ValueError("slice directions must be linearly independent")
        return self

    @property
    def dimension(self) -> int:
        return len(self.dirs)


class RegionCount(BaseModel):
    model_config = {"frozen": True}

    count: int = Field(ge=1)
    method: RegionMethod
    resolution: int
    lower_bound_formula: Optional[int] = None
    is_lower_bound: bool = False
    breakpoints: tuple[float, ...] = ()
    notes: str = ""


class BoundReport(BaseModel):
    """Value of one of the region lower-bound formulas."""

    model_config = {"frozen": True}

    kind: str
    value: int
    parameters: dict[str, int | list[int]]


class FitReport(BaseModel):
    """Accuracy of a max-affine fit against its oracle."""

    model_config = {"frozen": True}

    pieces: int
    sup_error: float
    lipschitz_estimate: float
    diameter: float
    bound: float
    within_bound: bool


class CriterionOutcome(BaseModel):
    model_config = {"frozen": True}

    criterion: int
    name: str
    passed: bool
    detail: str = ""


class SelftestReport(BaseModel):
    model_config = {"frozen": True}

    outcomes: tuple[CriterionOutcome, ...]
    passed: bool
    quick: bool
    seed: int
