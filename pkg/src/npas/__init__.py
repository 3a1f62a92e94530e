"""
    npas trains a layered network under an arbitrary fixed parameter budget.
    The layers draw their weights from a few shared parameter groups. npas
    learns which layers share a group and how each layer turns its group's
    parameters into weights.

    Usage:

    Static budget and FLOP report

        >>> import npas
        >>>
        >>> cfg = npas.load_experiment("experiment.yaml")
        >>> print(npas.format_report(npas.report(cfg)))

    Training and materializing

        >>> result = npas.train(cfg, mapping="auto", out="runs/lb")
        >>> model, path = npas.materialize(result.paths["checkpoint"])
"""
from .core.archspec import (
    parse_network_config,
    load_experiment,
    parse_experiment_config,
    classify_regime,
    largest_layer_weights
)
from .core.paramstore import allocate_groups, parse_mapping, serialize_mapping
from .core.weightgen import generate, overhead_param_count, weightgen_flops
from .core.groupsearch import build_preliminary, run_preliminary, kmeans, derive_mapping, baseline_mappings
from .core.models import SharedModel, PlainModel, MaterializedModel, forward
from .core.harness import train, materialize, report, format_report, sweep, reduced_baseline, evaluate
from .core.datasets import load_dataset
from .__version__ import __description__, __title__, __version__
from .exceptions import (
    NpasException,
    DimensionError,
    ShapeError,
    ArgumentError,
    ConfigError,
    ParseError,
    MappingError,
    AllocationError,
    ContractViolationError,
    RunError
)


__all__ = [
    "__description__",
    "__title__",
    "__version__",
    "parse_network_config",
    "load_experiment",
    "parse_experiment_config",
    "classify_regime",
    "largest_layer_weights",
    "allocate_groups",
    "parse_mapping",
    "serialize_mapping",
    "generate",
    "overhead_param_count",
    "weightgen_flops",
    "build_preliminary",
    "run_preliminary",
    "kmeans",
    "derive_mapping",
    "baseline_mappings",
    "SharedModel",
    "PlainModel",
    "MaterializedModel",
    "forward",
    "train",
    "materialize",
    "report",
    "format_report",
    "sweep",
    "reduced_baseline",
    "evaluate",
    "load_dataset",
    "NpasException",
    "DimensionError",
    "ShapeError",
    "ArgumentError",
    "ConfigError",
    "ParseError",
    "MappingError",
    "AllocationError",
    "ContractViolationError",
    "RunError"
]

__locals = locals()

for __name in __all__:
    if not __name.startswith("__"):
        try:
            setattr(__locals[__name], "__module__", "npas")
        except AttributeError:
            pass
