from .errors import (
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
    setattr(__locals[__name], "__module__", "npas.exceptions")
