from typing import Optional

import numpy as np

from maxformer.cli.commands.common import emit, load_network_spec
from maxformer.cli.run_config import RunConfig
from maxformer.core.models import AttentionMode, BoundReport, NetSpec
from maxformer.core.protocols import BatchEvaluable
from maxformer.core.services.maxout_eval import sequence_oracle
from maxformer.core.services.regions import (
    architecture_lower_bound,
    count_regions_1d,
    count_regions_2d,
    maxout_region_lower_bound,
    transformer_region_lower_bound,
)
from maxformer.core.services.transformer_eval import net_evaluator
from maxformer.dependencies import get_net_repository, get_spec_repository


def run_regions(config: RunConfig) -> int:
    """
    Count linear regions of a saved net (or a spec's oracle) on a 1D or 2D slice.

    Counts of a maxout spec also carry the region lower bound for its widths.
    """
    assert config.slice is not None
    slc = get_spec_repository().load_slice(config.slice)
    fn: BatchEvaluable
    spec: Optional[NetSpec] = None
    if config.net is not None:
        fn = net_evaluator(get_net_repository().load(config.net), AttentionMode.hardmax())
    else:
        n, seq_len = np.asarray(slc.base).shape
        spec = load_network_spec(config)
        fn = sequence_oracle(spec, n, seq_len)

    if slc.dimension == 1:
        count = count_regions_1d(fn, slc, config.resolution)
    else:
        count = count_regions_2d(fn, slc, config.resolution, seed=config.seed, csv_path=config.csv)
    if spec is not None:
        count = count.model_copy(update={"lower_bound_formula": architecture_lower_bound(spec)})
    emit("regions", count, config)
    return 0


def _ints(config: RunConfig, *names: str) -> dict[str, int]:
    values = {name: getattr(config, name) for name in names}
    assert all(isinstance(v, int) for v in values.values())
    return values


def run_bounds(config: RunConfig) -> int:
    """Evaluate a region lower-bound formula"""
    parameters: dict[str, int | list[int]]
    if config.bound_kind == "maxout":
        assert config.widths is not None
        dims = _ints(config, "n0", "k", "n")
        value = maxout_region_lower_bound(dims["n0"], config.widths, dims["k"], dims["n"], adjust=config.adjust)
        parameters = {**dims, "widths": list(config.widths)}
    else:
        dims = _ints(config, "n", "m", "T", "D", "q")
        value = transformer_region_lower_bound(dims["n"], dims["m"], dims["T"], dims["D"], dims["q"])
        parameters = dict(dims)
    emit("bounds", BoundReport(kind=config.bound_kind or "", value=value, parameters=parameters), config)
    return 0
