import json
from typing import Any

from maxformer.cli.run_config import RunConfig
from maxformer.config import settings
from maxformer.core.models import AnySpec, DomainBox, NetSpec, TransformerNet
from maxformer.core.validation import PreconditionError, SpecParseError
from maxformer.dependencies import get_report_repository, get_spec_repository
from maxformer.infrastructure.repositories.report_repository import report_document


def load_network_spec(config: RunConfig) -> NetSpec:
    """The --spec document, which must describe a network"""
    assert config.spec is not None
    spec = get_spec_repository().load(config.spec)
    if isinstance(spec, DomainBox):
        raise SpecParseError("kind", f"{config.spec} holds a domain box, expected a network spec")
    return spec


def load_box(config: RunConfig, net: TransformerNet | None = None) -> DomainBox:
    """
    The --domain box, or the input box recorded in a compiled net.

    Raises:
        PreconditionError: If neither is available
    """
    if config.domain is not None:
        box: AnySpec = get_spec_repository().load(config.domain)
        if not isinstance(box, DomainBox):
            raise SpecParseError("kind", f"{config.domain} must be a domain_box document")
        return box
    if net is None or not net.info.stages:
        raise PreconditionError("no input box recorded in the net; pass --domain")
    first = net.info.stages[0]
    return DomainBox(a=first.lo, b=first.hi, n=net.n, T=net.seq_len, delta=first.delta)


def emit(kind: str, payload: Any, config: RunConfig) -> None:
    """Write the report to --report, or print it when no path is given"""
    if config.report is not None:
        get_report_repository().write(kind, payload, config.report)
        return
    print(json.dumps(report_document(kind, payload, settings.report_schema_version), indent=2, allow_nan=False))
