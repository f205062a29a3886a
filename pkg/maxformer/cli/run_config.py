from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator

from maxformer.config import settings
from maxformer.core.models import AttentionKind, ResidualPolicy

Command = Literal["compile", "verify", "sweep", "regions", "bounds", "selftest"]

_REQUIRED: dict[str, tuple[str, ...]] = {
    "compile": ("spec", "domain", "out"),
    "verify": ("net", "spec"),
    "sweep": ("net", "spec"),
    "regions": ("slice",),
    "bounds": ("bound_kind",),
    "selftest": (),
}

# Flags whose name differs from the field
_FLAGS = {"bound_kind": "kind"}

_BOUND_FIELDS: dict[str, tuple[str, ...]] = {
    "maxout": ("n0", "widths", "k", "n"),
    "transformer": ("n", "m", "T", "D", "q"),
}


class RunConfig(BaseModel):
    """Everything one command invocation needs, built from the parsed flags."""

    model_config = {"frozen": True, "populate_by_name": True}

    command: Command

    # Input and output files
    spec: Optional[Path] = None
    domain: Optional[Path] = None
    net: Optional[Path] = None
    out: Optional[Path] = None
    report: Optional[Path] = None
    slice: Optional[Path] = None
    csv: Optional[Path] = None

    # Compile options
    s: Optional[int] = Field(default=None, ge=2)
    alpha_margin: float = Field(default_factory=lambda: settings.alpha_margin, ge=0.0)
    deltas: Optional[tuple[float, ...]] = None
    residual: ResidualPolicy = ResidualPolicy.AUTO

    # Verification
    mode: AttentionKind = AttentionKind.HARDMAX
    lam: Optional[float] = Field(default=None, gt=0.0)
    lambdas: tuple[float, ...] = ()
    tie_points: bool = True
    samples: int = Field(default_factory=lambda: settings.samples, ge=1)
    tol: float = Field(default_factory=lambda: settings.tolerance)
    seed: int = Field(default_factory=lambda: settings.seed)
    threads: Optional[int] = Field(default=None, ge=1)
    resolution: Optional[int] = Field(default=None, ge=16)
    quick: bool = False

    # Region bound formulas
    bound_kind: Optional[Literal["maxout", "transformer"]] = None
    n0: Optional[int] = None
    widths: Optional[tuple[int, ...]] = None
    k: Optional[int] = None
    n: Optional[int] = None
    m: Optional[int] = None
    T: Optional[int] = None
    D: Optional[int] = None
    q: Optional[int] = None
    adjust: bool = False

    @model_validator(mode="after")
    def required_per_command(self) -> "RunConfig":
        missing = [name for name in _REQUIRED[self.command] if getattr(self, name) is None]
        if self.command == "regions" and self.net is None and self.spec is None:
            missing.append("net or --spec")
        if self.command == "bounds" and self.bound_kind is not None:
            missing += [name for name in _BOUND_FIELDS[self.bound_kind] if getattr(self, name) is None]
        if self.command == "verify" and self.mode is AttentionKind.SOFTMAX and self.lam is None:
            missing.append("lam")
        if missing:
            flags = ", ".join("--" + _FLAGS.get(name, name).replace("_", "-") for name in missing)
            raise ValueError(f"{self.command} needs {flags}")
        return self
