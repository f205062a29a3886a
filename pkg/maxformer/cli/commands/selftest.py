from maxformer.cli.commands.common import emit
from maxformer.cli.run_config import RunConfig
from maxformer.config import settings
from maxformer.core.models import CompileOptions
from maxformer.core.services.acceptance import run_selftest


def run_selftest_command(config: RunConfig) -> int:
    """Run the acceptance checks and report one pass flag per check"""
    report = run_selftest(
        quick=config.quick,
        seed=config.seed,
        threads=config.threads or settings.threads,
        options=CompileOptions(alpha_margin=config.alpha_margin),
    )
    emit("selftest", report, config)
    return 0 if report.passed else 1
