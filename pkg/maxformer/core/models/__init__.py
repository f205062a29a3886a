from maxformer.core.models.netspec import (
    AffineMap,
    AnySpec,
    CpwlPairSpec,
    DeepMaxoutSpec,
    DomainBox,
    MaxoutLayerSpec,
    NetSpec,
    ReluNetSpec,
    SpecDims,
    SpecKind,
)
from maxformer.core.models.transformer import (
    AttentionHead,
    AttentionKind,
    AttentionMode,
    CompileInfo,
    FeedForward,
    StageRecord,
    TransformerBlock,
    TransformerNet,
)
from maxformer.core.models.compile import (
    BudgetAudit,
    BudgetTuple,
    CompileOptions,
    CompileReport,
    ResidualPolicy,
    TheoremId,
)
from maxformer.core.models.reports import (
    BoundReport,
    Criterion,
    CriterionOutcome,
    FitReport,
    LambdaSweep,
    RegionCount,
    RegionMethod,
    SelftestReport,
    Slice,
    VerificationReport,
)
from maxformer.core.models.result import SweepPoint

__all__ = [
    "AffineMap",
    "AnySpec",
    "CpwlPairSpec",
    "DeepMaxoutSpec",
    "DomainBox",
    "MaxoutLayerSpec",
    "NetSpec",
    "ReluNetSpec",
    "SpecDims",
    "SpecKind",
    "AttentionHead",
    "AttentionKind",
    "AttentionMode",
    "CompileInfo",
    "FeedForward",
    "StageRecord",
    "TransformerBlock",
    "TransformerNet",
    "BudgetAudit",
    "BudgetTuple",
    "CompileOptions",
    "CompileReport",
    "ResidualPolicy",
    "TheoremId",
    "BoundReport",
    "Criterion",
    "CriterionOutcome",
    "FitReport",
    "LambdaSweep",
    "RegionCount",
    "RegionMethod",
    "SelftestReport",
    "Slice",
    "VerificationReport",
    "SweepPoint",
]
