import numpy


# Independent random streams derived from one experiment seed
STREAM_THETA = 0
STREAM_COMBINER = 1
STREAM_DATA = 2
STREAM_SHUFFLE = 3
STREAM_MAPPING = 4
STREAM_KMEANS = 5


def rng_for(seed: int, stream: int, *keys: int) -> numpy.random.Generator:
    return numpy.random.default_rng([int(seed), stream, *[int(key) for key in keys]])
