"""
Per-point outcomes of a softmax lambda sweep.

A point whose forward pass overflows is kept as a dropped outcome with its
reason, so the sweep can report it and continue with the remaining lambdas.
"""

from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class SweepPoint:
    """Sup-error measured at one lambda, or the reason it was dropped"""
    lam: float
    error: Optional[float] = None
    reason: Optional[str] = None

    @property
    def kept(self) -> bool:
        return self.error is not None

    @classmethod
    def measured(cls, lam: float, error: float) -> "SweepPoint":
        return cls(lam=lam, error=error)

    @classmethod
    def dropped(cls, lam: float, reason: str) -> "SweepPoint":
        return cls(lam=lam, reason=reason)

    def note(self) -> str:
        """Sweep note for a dropped point; empty when the point was kept"""
        if self.kept:
            return ""
        return f"dropped lambda={self.lam:g}: {self.reason}"
