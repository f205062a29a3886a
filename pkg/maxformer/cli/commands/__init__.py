from maxformer.cli.commands.compile import run_compile
from maxformer.cli.commands.regions import run_bounds, run_regions
from maxformer.cli.commands.selftest import run_selftest_command
from maxformer.cli.commands.verify import run_sweep, run_verify

__all__ = [
    "run_bounds",
    "run_compile",
    "run_regions",
    "run_selftest_command",
    "run_sweep",
    "run_verify",
]
