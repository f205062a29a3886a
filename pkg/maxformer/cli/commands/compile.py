import logging

from maxformer.cli.commands.common import emit, load_box, load_network_spec
from maxformer.cli.run_config import RunConfig
from maxformer.core.models import CompileOptions, CompileReport
from maxformer.core.services.budget import audit_compiled
from maxformer.dependencies import get_compiler, get_net_repository

logger = logging.getLogger(__name__)


def run_compile(config: RunConfig) -> int:
    """
    Compile a spec on a box, save the weights and report the budget audit.

    Returns:
        0 when the net fits its construction's budget, 1 otherwise
    """
    spec = load_network_spec(config)
    box = load_box(config)
    options = CompileOptions(
        s=config.s,
        alpha_margin=config.alpha_margin,
        delta_schedule=config.deltas,
        residual=config.residual,
    )
    net = get_compiler(options).compile_general(spec, box)
    audit = audit_compiled(net, spec, box)

    assert config.out is not None
    get_net_repository().save(net, config.out)
    emit("compile", CompileReport(audit=audit, info=net.info, options=options, s_used=net.info.s), config)

    if not audit.within_budget:
        logger.error("compiled net exceeds the %s budget: %s", audit.theorem_id.value, audit.notes)
        return 1
    return 0
