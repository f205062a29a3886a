from maxformer.infrastructure.repositories.net_repository import NetRepository
from maxformer.infrastructure.repositories.report_repository import ReportRepository
from maxformer.infrastructure.repositories.spec_repository import SpecRepository

__all__ = [
    "NetRepository",
    "ReportRepository",
    "SpecRepository",
]
