import logging
import math

from maxformer.cli.commands.common import emit, load_box, load_network_spec
from maxformer.cli.run_config import RunConfig
from maxformer.core.models import AttentionKind
from maxformer.dependencies import get_net_repository, get_verifier

logger = logging.getLogger(__name__)

# Required log-log slope of the softmax error
SWEEP_MAX_SLOPE = -0.9

# Share of adjacent lambda pairs allowed to increase the error
SWEEP_VIOLATION_SHARE = 0.05


def run_verify(config: RunConfig) -> int:
    """Exactness (hardmax) or single-lambda error (softmax) of a saved net against its spec"""
    assert config.net is not None
    net = get_net_repository().load(config.net)
    spec = load_network_spec(config)
    box = load_box(config, net)
    verifier = get_verifier(config.threads)
    if config.mode is AttentionKind.SOFTMAX:
        assert config.lam is not None
        report = verifier.check_softmax_error(net, spec, box, config.lam, config.samples, config.tol, config.seed)
    else:
        report = verifier.check_exact_equivalence(net, spec, box, config.samples, config.tol, config.seed)
    emit("verify", report, config)
    return 0 if report.passed else 1


def run_sweep(config: RunConfig) -> int:
    """
    Softmax error along the --lambdas grid.

    Passes when the fitted slope is at most -0.9 and at most 5% of adjacent
    pairs increase.
    """
    assert config.net is not None
    net = get_net_repository().load(config.net)
    spec = load_network_spec(config)
    box = load_box(config, net)
    sweep = get_verifier(config.threads).measure_softmax_error(
        net, spec, box, config.lambdas, config.samples, config.seed, ties=config.tie_points
    )
    emit("sweep", sweep, config)

    allowed = math.floor(SWEEP_VIOLATION_SHARE * max(0, len(sweep.errors) - 1))
    passed = (
        sweep.fitted_slope is not None
        and sweep.fitted_slope <= SWEEP_MAX_SLOPE
        and sweep.monotone_violations <= allowed
    )
    if not passed:
        logger.error("sweep failed: slope %s, %d increases", sweep.fitted_slope, sweep.monotone_violations)
    return 0 if passed else 1
