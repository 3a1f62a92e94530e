"""
    Binary checkpoint and materialized-weights files.

    Both are little-endian. A checkpoint is the magic, a u32 version, the
    census as three u64 (theta, overhead, biases), a u32-prefixed JSON meta
    block, a u32 array count and then per array a u16-prefixed name, a u8
    dimension count, u32 extents and the float64 data.

    A weights file is the magic, a u32-prefixed JSON header (network, layer
    order and shapes, biases) and the float64 weights of every layer in
    order, so its size is 12 + header + 8·Σ|w_i| bytes.
"""
import json
import logging
import struct
import typing

import numpy

from .. import types
from .. import config
from .. import exceptions
from . import archspec
from . import models

log = logging.getLogger(__name__)

_FLOAT = numpy.dtype("<f8")


class Checkpoint(typing.NamedTuple):
    meta: dict
    census: types.Census
    arrays: typing.Dict[str, numpy.ndarray]


def encode_checkpoint(model: models.Model, meta: dict) -> bytes:

    census = model.census()
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    named = model.named_parameters()

    parts = [
        config.CHECKPOINT_MAGIC,
        struct.pack("<I", config.CHECKPOINT_VERSION),
        struct.pack("<QQQ", census.theta, census.overhead, census.biases),
        struct.pack("<I", len(meta_bytes)),
        meta_bytes,
        struct.pack("<I", len(named))
    ]

    for name, tensor in named:
        name_bytes = name.encode("utf-8")
        parts.append(struct.pack("<H", len(name_bytes)))
        parts.append(name_bytes)
        parts.append(struct.pack("<B", tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(numpy.ascontiguousarray(tensor.data, dtype=_FLOAT).tobytes())

    return b"".join(parts)


class _Reader:

    def __init__(self, content: bytes, path: str):
        self.content = content
        self.path = path
        self.offset = 0


    def take(self, size: int) -> bytes:

        if self.offset + size > len(self.content):
            raise exceptions.ParseError(message="Truncated file", subject=f"{self.path} at byte {self.offset}")

        chunk = self.content[self.offset:self.offset + size]
        self.offset += size

        return chunk


    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(content: bytes, path: typing.Optional[str] = "checkpoint") -> Checkpoint:

    reader = _Reader(content, path)

    if reader.take(len(config.CHECKPOINT_MAGIC)) != config.CHECKPOINT_MAGIC:
        raise exceptions.ParseError(message="Not a checkpoint", subject=f"{path} at byte 0")

    version, = reader.unpack("<I")

    if version != config.CHECKPOINT_VERSION:
        raise exceptions.ParseError(message=f"Unsupported checkpoint version {version}", subject=path)

    theta, overhead, biases = reader.unpack("<QQQ")
    meta_length, = reader.unpack("<I")

    try:
        meta = json.loads(reader.take(meta_length).decode("utf-8"))
    except ValueError as exception:
        raise exceptions.ParseError(message="Malformed checkpoint meta block", subject=path) from exception

    count, = reader.unpack("<I")
    arrays = {}

    for _ in range(count):
        name_length, = reader.unpack("<H")
        name = reader.take(name_length).decode("utf-8")
        ndim, = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        size = int(numpy.prod(shape, dtype=numpy.int64))
        arrays[name] = numpy.frombuffer(reader.take(size * _FLOAT.itemsize), dtype=_FLOAT).reshape(shape).copy()

    if reader.offset != len(content):
        raise exceptions.ParseError(message="Trailing bytes after the last array", subject=f"{path} at byte {reader.offset}")

    return Checkpoint(meta=meta, census=types.Census(theta=theta, overhead=overhead, biases=biases), arrays=arrays)


def save_checkpoint(model: models.Model, meta: dict, path: str) -> None:

    with open(file=path, mode="wb") as file:
        file.write(encode_checkpoint(model, meta))

    log.info("Wrote checkpoint %s", path)


def load_checkpoint(path: str) -> Checkpoint:

    try:
        with open(file=path, mode="rb") as file:
            content = file.read()
    except OSError as exception:
        raise exceptions.ParseError(message="Cannot read checkpoint", subject=path) from exception

    return decode_checkpoint(content, path=path)


def encode_weights(model: models.Model) -> bytes:

    weights = model.generate_weights()
    header = {
        "network": archspec.network_to_dict(model.net),
        "layers": [{"id": layer.id, "shape": list(layer.weight_shape)} for layer in model.net.layers],
        "biases": {
            layer_id: (bias.data.tolist() if bias is not None else None)
            for layer_id, bias in model.biases.items()
        }
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    parts = [config.WEIGHTS_MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    parts.extend(
        numpy.ascontiguousarray(weights[layer.id].data, dtype=_FLOAT).tobytes()
        for layer in model.net.layers
    )

    return b"".join(parts)


def decode_weights(content: bytes, path: typing.Optional[str] = "weights") -> models.MaterializedModel:

    reader = _Reader(content, path)

    if reader.take(len(config.WEIGHTS_MAGIC)) != config.WEIGHTS_MAGIC:
        raise exceptions.ParseError(message="Not a materialized weights file", subject=f"{path} at byte 0")

    header_length, = reader.unpack("<I")

    try:
        header = json.loads(reader.take(header_length).decode("utf-8"))
    except ValueError as exception:
        raise exceptions.ParseError(message="Malformed weights header", subject=path) from exception

    net = archspec.network_from_dict(header["network"])
    weights = {}

    for entry in header["layers"]:
        shape = tuple(entry["shape"])
        size = int(numpy.prod(shape, dtype=numpy.int64))
        weights[entry["id"]] = numpy.frombuffer(reader.take(size * _FLOAT.itemsize), dtype=_FLOAT).reshape(shape).copy()

    if reader.offset != len(content):
        raise exceptions.ParseError(message="Trailing bytes after the last layer", subject=f"{path} at byte {reader.offset}")

    biases = {
        layer_id: (numpy.array(values, dtype=numpy.float64) if values is not None else None)
        for layer_id, values in header["biases"].items()
    }

    return models.MaterializedModel(net, weights, biases)


def write_weights(model: models.Model, path: str) -> int:
    """
    Write the model's generated weights once; returns the file size.
    """

    content = encode_weights(model)

    with open(file=path, mode="wb") as file:
        file.write(content)

    log.info("Wrote %d bytes of materialized weights to %s", len(content), path)

    return len(content)


def read_weights(path: str) -> models.MaterializedModel:

    try:
        with open(file=path, mode="rb") as file:
            content = file.read()
    except OSError as exception:
        raise exceptions.ParseError(message="Cannot read weights file", subject=path) from exception

    return decode_weights(content, path=path)
