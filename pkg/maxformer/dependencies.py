"""
Service factories for the command-line front end.

Commands receive their collaborators from here instead of constructing
them, so tests can swap in fakes and settings are read in one place.
"""

from typing import TYPE_CHECKING, Optional

from maxformer.config import settings

if TYPE_CHECKING:
    from maxformer.core.models import CompileOptions
    from maxformer.core.services import TransformerCompiler, Verifier
    from maxformer.infrastructure.repositories import NetRepository, ReportRepository, SpecRepository


def get_compiler(options: Optional["CompileOptions"] = None) -> "TransformerCompiler":
    """Compiler with the configured alpha margin unless options say otherwise"""
    from maxformer.core.models import CompileOptions
    from maxformer.core.services import TransformerCompiler
    return TransformerCompiler(options or CompileOptions(alpha_margin=settings.alpha_margin))


def get_verifier(threads: Optional[int] = None) -> "Verifier":
    """Verifier capped at --threads, falling back to MAXFORMER_THREADS"""
    from maxformer.core.services import Verifier
    return Verifier(threads or settings.threads)


def get_spec_repository() -> "SpecRepository":
    from maxformer.infrastructure.repositories import SpecRepository
    return SpecRepository()


def get_net_repository() -> "NetRepository":
    from maxformer.infrastructure.repositories import NetRepository
    return NetRepository()


def get_report_repository() -> "ReportRepository":
    """Report sink stamped with the configured schema version"""
    from maxformer.infrastructure.repositories import ReportRepository
    return ReportRepository(settings.report_schema_version)
