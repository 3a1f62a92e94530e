"""
    Seeded synthetic datasets and loaders for CSV and IDX files.
"""
import logging
import math
import typing

import numpy

from .. import types
from .. import config
from .. import exceptions
from .. import utils

log = logging.getLogger(__name__)


def blobs(
    seed: int,
    n: int,
    classes: int,
    features: typing.Optional[int] = 2,
    center_scale: typing.Optional[float] = None,
    spread: typing.Optional[float] = None
) -> types.Dataset:
    """
    Isotropic Gaussian clusters, one per class, with balanced labels in a
    seeded random order.
    """

    center_scale = center_scale if center_scale is not None else config.BLOBS_CENTER_SCALE
    spread = spread if spread is not None else config.BLOBS_SPREAD

    if n < 1 or classes < 1 or features < 1:
        raise exceptions.ArgumentError(message="blobs needs positive n, classes and features", subject="blobs")

    rng = utils.rng_for(seed, utils.STREAM_DATA, 0)
    centers = rng.standard_normal((classes, features)) * center_scale
    labels = rng.permutation(numpy.arange(n) % classes)
    points = centers[labels] + rng.standard_normal((n, features)) * spread

    return types.Dataset(name="blobs", features=points, labels=labels)


def two_spirals(
    seed: int,
    n: int,
    noise: typing.Optional[float] = None
) -> types.Dataset:
    """
    Two interleaved planar spirals; label 1 is label 0 rotated by half a turn.
    """

    noise = noise if noise is not None else config.SPIRALS_NOISE

    if n < 2:
        raise exceptions.ArgumentError(message="two_spirals needs at least 2 samples", subject="two_spirals")

    rng = utils.rng_for(seed, utils.STREAM_DATA, 1)
    labels = rng.permutation(numpy.arange(n) % 2)
    turns = numpy.sqrt(rng.uniform(size=n)) * 3.0 * math.pi
    sign = numpy.where(labels == 0, 1.0, -1.0)

    points = numpy.stack(
        [sign * turns * numpy.cos(turns), sign * turns * numpy.sin(turns)],
        axis=1
    ) / (3.0 * math.pi)
    points += rng.standard_normal((n, 2)) * noise

    return types.Dataset(name="two_spirals", features=points, labels=labels)


def _is_integer(field: str) -> bool:

    try:
        int(field)
    except ValueError:
        return False

    return True


def parse_csv(content: bytes, name: typing.Optional[str] = "csv") -> types.Dataset:
    """
    Rows of label,feature,... An optional first line whose first field is not
    an integer is taken as the header and fixes the column count.
    """

    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError as exception:
        raise exceptions.ParseError(
            message="Not valid UTF-8",
            subject=f"{name} at byte {exception.start}"
        ) from exception

    offset = 0
    columns = None
    labels, rows = [], []

    for index, line in enumerate(text.splitlines(keepends=True)):
        start = offset
        offset += len(line.encode("utf-8"))
        fields = [field.strip() for field in line.strip().split(sep=",")]

        if fields == [""]:
            continue

        if columns is None:
            columns = len(fields)

            if index == 0 and not _is_integer(fields[0]):
                continue

        if len(fields) != columns:
            raise exceptions.ParseError(
                message=f"Row has {len(fields)} columns, expected {columns}",
                subject=f"{name} at byte {start}"
            )

        try:
            labels.append(int(fields[0]))
            rows.append([float(field) for field in fields[1:]])
        except ValueError as exception:
            raise exceptions.ParseError(
                message=f"Non-numeric field: {exception}",
                subject=f"{name} at byte {start}"
            ) from exception

    if not rows or columns < 2:
        raise exceptions.ParseError(message="CSV holds no labelled rows", subject=name)

    return types.Dataset(
        name=name,
        features=numpy.array(rows, dtype=numpy.float64),
        labels=numpy.array(labels, dtype=numpy.int64)
    )


def parse_idx(content: bytes, name: typing.Optional[str] = "idx") -> numpy.ndarray:
    """
    Decode an IDX file of unsigned bytes: two zero bytes, the type code 0x08,
    the dimension count, big-endian u32 extents, then the data.
    """

    if len(content) < 4:
        raise exceptions.ParseError(message="Truncated IDX magic", subject=f"{name} at byte 0")

    if content[0] != 0 or content[1] != 0 or content[2] != 0x08:
        raise exceptions.ParseError(
            message=f"Unsupported IDX magic 0x{int.from_bytes(content[:4], 'big'):08x}",
            subject=f"{name} at byte 0"
        )

    ndim = content[3]
    data_start = 4 + 4 * ndim

    if len(content) < data_start:
        raise exceptions.ParseError(message="Truncated IDX header", subject=f"{name} at byte {len(content)}")

    shape = tuple(int(extent) for extent in numpy.frombuffer(content, dtype=">u4", count=ndim, offset=4))
    expected = data_start + utils.prod(shape)

    if len(content) != expected:
        raise exceptions.ParseError(
            message=f"IDX body holds {len(content) - data_start} bytes, header declares {utils.prod(shape)}",
            subject=f"{name} at byte {min(len(content), expected)}"
        )

    return numpy.frombuffer(content, dtype=numpy.uint8, offset=data_start).reshape(shape)


def _read(path: str) -> bytes:

    try:
        with open(file=path, mode="rb") as file:
            return file.read()
    except OSError as exception:
        raise exceptions.ParseError(message="Cannot read dataset file", subject=path) from exception


def load_idx(images_path: str, labels_path: str) -> types.Dataset:

    images_content = _read(images_path)
    labels_content = _read(labels_path)

    if images_content[:4] != config.IDX_MAGIC_IMAGES.to_bytes(4, "big"):
        raise exceptions.ParseError(message="Image file is not a 3-D IDX tensor", subject=f"{images_path} at byte 0")

    if labels_content[:4] != config.IDX_MAGIC_LABELS.to_bytes(4, "big"):
        raise exceptions.ParseError(message="Label file is not a 1-D IDX tensor", subject=f"{labels_path} at byte 0")

    images = parse_idx(images_content, name=images_path)
    labels = parse_idx(labels_content, name=labels_path)

    if images.shape[0] != labels.shape[0]:
        raise exceptions.ParseError(
            message=f"{images.shape[0]} images but {labels.shape[0]} labels",
            subject=labels_path
        )

    return types.Dataset(
        name="idx",
        features=images.astype(numpy.float64) / 255.0,
        labels=labels.astype(numpy.int64)
    )


def split(dataset: types.Dataset, eval_fraction: float) -> typing.Tuple[types.Dataset, types.Dataset]:
    """
    The last eval_fraction of the rows become the evaluation set.
    """

    if not 0.0 <= eval_fraction < 1.0:
        raise exceptions.ArgumentError(message="eval_fraction must lie in [0, 1)", subject=eval_fraction)

    cut = len(dataset) - int(round(len(dataset) * eval_fraction))

    return (
        types.Dataset(name=dataset.name, features=dataset.features[:cut], labels=dataset.labels[:cut]),
        types.Dataset(name=dataset.name, features=dataset.features[cut:], labels=dataset.labels[cut:])
    )


def _fit_shape(dataset: types.Dataset, input_shape: typing.Sequence[int], num_classes: int) -> types.Dataset:

    width = utils.prod(input_shape)
    flat = dataset.features.reshape(len(dataset), -1)

    if flat.shape[1] != width:
        raise exceptions.ParseError(
            message=f"Samples have {flat.shape[1]} features, the network takes {width}",
            subject=dataset.name
        )

    if len(dataset) and (dataset.labels.min() < 0 or dataset.labels.max() >= num_classes):
        raise exceptions.ParseError(
            message=f"Labels fall outside [0, {num_classes})",
            subject=dataset.name
        )

    return types.Dataset(
        name=dataset.name,
        features=flat.reshape((len(dataset), *input_shape)),
        labels=dataset.labels
    )


def load_dataset(
    spec: types.DataSpec,
    seed: int,
    input_shape: typing.Sequence[int],
    num_classes: int
) -> typing.Tuple[types.Dataset, types.Dataset]:
    """
    Build the (train, eval) pair named by a data section.

    Parameters:

        spec (DataSpec):
            blobs, two_spirals, csv:<path> or idx:<images>,<labels>, with
            generator options such as samples.

        seed (int):
            Seed of the synthetic generators.

        input_shape (list[int]):
            Per-sample shape the network expects.

        num_classes (int):
            Number of output classes of the network.
    """

    options = dict(spec.options)
    samples = options.pop("samples", config.DATA_SAMPLES)

    if spec.name == "blobs":
        dataset = blobs(
            seed,
            samples,
            options.pop("classes", num_classes),
            features=utils.prod(input_shape),
            center_scale=options.pop("center_scale", None),
            spread=options.pop("spread", None)
        )
    elif spec.name == "two_spirals":
        dataset = two_spirals(seed, samples, noise=options.pop("noise", None))
    elif spec.name.startswith("csv:"):
        path = spec.name[len("csv:"):]
        dataset = parse_csv(_read(path), name=path)
    elif spec.name.startswith("idx:"):
        paths = spec.name[len("idx:"):].split(sep=",")

        if len(paths) != 2:
            raise exceptions.ConfigError(message="idx: needs an image and a label path", subject=spec.name)

        dataset = load_idx(*paths)
    else:
        raise exceptions.ConfigError(message="Unknown dataset", subject=spec.name)

    if options:
        raise exceptions.ConfigError(message=f"Unknown data options {sorted(options)}", subject=spec.name)

    train_set, eval_set = split(_fit_shape(dataset, input_shape, num_classes), spec.eval_fraction)

    log.info("Dataset %s: %d train / %d eval samples", spec.name, len(train_set), len(eval_set))

    return train_set, eval_set
