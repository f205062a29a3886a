from maxformer.core.services.compiler import TransformerCompiler, decompose_rank
from maxformer.core.services.verify import Verifier

__all__ = [
    "TransformerCompiler",
    "Verifier",
    "decompose_rank",
]
