from .objects import Dict, List
from .layers import LayerSpec, Layers, NetworkSpec
from .budgets import BudgetSpec, TrainSpec, DataSpec, MappingSpec, ExperimentConfig, PreliminaryConfig
from .groups import ParameterGroup, TemplateView, TemplateViews, GroupMapping, LayerPlan
from .records import (
    GeneratedWeights,
    LayerRepresentation,
    MetricsRecord,
    Metrics,
    Census,
    OverheadReport,
    FlopReport,
    EvalResult,
    Dataset
)


__all__ = [
    "Dict",
    "List",
    "LayerSpec",
    "Layers",
    "NetworkSpec",
    "BudgetSpec",
    "TrainSpec",
    "DataSpec",
    "MappingSpec",
    "ExperimentConfig",
    "PreliminaryConfig",
    "ParameterGroup",
    "TemplateView",
    "TemplateViews",
    "GroupMapping",
    "LayerPlan",
    "GeneratedWeights",
    "LayerRepresentation",
    "MetricsRecord",
    "Metrics",
    "Census",
    "OverheadReport",
    "FlopReport",
    "EvalResult",
    "Dataset"
]

__locals = locals()

for __name in __all__:
    try:
        setattr(__locals[__name], "__module__", "npas.types")
    except AttributeError:
        pass
