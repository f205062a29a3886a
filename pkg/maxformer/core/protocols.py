"""
Protocol definitions for the application.

These protocols define the contracts between layers, enabling:
1. Evaluation code that accepts oracles and compiled nets alike
2. Easy mocking in tests
3. Swappable storage (files today, anything else later)
"""

from pathlib import Path
from typing import Any, Protocol, runtime_checkable

import numpy as np

from maxformer.core.models import AnySpec, Slice, TransformerNet


# =============================================================================
# Evaluation Protocol
# =============================================================================

@runtime_checkable
class BatchEvaluable(Protocol):
    """Anything mapping a batch of sequences to a batch of output sequences"""

    def __call__(self, X: np.ndarray) -> np.ndarray:
        """
        Evaluate a batch.

        Args:
            X: Inputs of shape (B, n, T)

        Returns:
            Outputs of shape (B, m, T)
        """
        ...


# =============================================================================
# Repository Protocols
# =============================================================================

@runtime_checkable
class SpecRepositoryProtocol(Protocol):
    """Protocol for spec file storage"""

    def load(self, path: Path) -> AnySpec:
        """Load and validate a spec or domain document"""
        ...

    def load_slice(self, path: Path) -> Slice:
        """Load a slice document"""
        ...

    def save(self, spec: AnySpec, path: Path) -> None:
        """Write a spec canonically"""
        ...


@runtime_checkable
class NetRepositoryProtocol(Protocol):
    """Protocol for compiled weight storage"""

    def load(self, path: Path) -> TransformerNet:
        """Load a weight file"""
        ...

    def save(self, net: TransformerNet, path: Path) -> None:
        """Write a weight file"""
        ...


@runtime_checkable
class ReportRepositoryProtocol(Protocol):
    """Protocol for report sinks"""

    def write(self, kind: str, payload: Any, path: Path) -> None:
        """Write a versioned JSON report"""
        ...
