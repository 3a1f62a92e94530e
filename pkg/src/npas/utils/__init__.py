from .numeric import prod, ceil_div, parse_list
from .seeding import (
    rng_for,
    STREAM_THETA,
    STREAM_COMBINER,
    STREAM_DATA,
    STREAM_SHUFFLE,
    STREAM_MAPPING,
    STREAM_KMEANS
)

__all__ = [
    "prod",
    "ceil_div",
    "parse_list",
    "rng_for",
    "STREAM_THETA",
    "STREAM_COMBINER",
    "STREAM_DATA",
    "STREAM_SHUFFLE",
    "STREAM_MAPPING",
    "STREAM_KMEANS"
]
