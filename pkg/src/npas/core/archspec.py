import logging
import math
import os.path
import typing

import yaml

from .. import types
from .. import config
from .. import exceptions
from .. import utils

log = logging.getLogger(__name__)

REGIME_LB = "LB"
REGIME_HB = "HB"
REGIME_EXACT = "EXACT"


def _is_count(value: typing.Any, minimum: int = 1) -> bool:
    # bool is an int subclass
    return isinstance(value, int) and not isinstance(value, bool) and value >= minimum


def _layer_from_dict(entry: dict, position: int) -> types.LayerSpec:

    layer_id = entry.get("id")

    if not isinstance(layer_id, str) or not layer_id:
        raise exceptions.ParseError(
            message=f"Layer #{position} has no string id",
            subject=position
        )

    kind = entry.get("kind")

    if kind not in config.LAYER_KINDS:
        raise exceptions.ParseError(
            message=f"Unknown layer kind {kind!r}",
            subject=layer_id
        )

    shape = entry.get("shape", entry.get("weight_shape"))
    expected_rank = 2 if kind == "dense" else 4

    if (
        not isinstance(shape, list) or len(shape) != expected_rank
        or not all(_is_count(extent) for extent in shape)
    ):
        raise exceptions.ParseError(
            message=f"A {kind} layer needs a weight shape of {expected_rank} positive extents, got {shape!r}",
            subject=layer_id
        )

    activation = entry.get("activation", "relu")

    if activation not in config.ACTIVATIONS:
        raise exceptions.ParseError(
            message=f"Unknown activation {activation!r}",
            subject=layer_id
        )

    stride = entry.get("stride", 1)
    padding = entry.get("padding", 0)

    if kind == "dense" and (stride != 1 or padding != 0):
        raise exceptions.ParseError(
            message="Dense layers take neither stride nor padding",
            subject=layer_id
        )

    if not _is_count(stride) or not _is_count(padding, minimum=0):
        raise exceptions.ParseError(
            message=f"Invalid stride {stride!r} or padding {padding!r}",
            subject=layer_id
        )

    return types.LayerSpec(
        id=layer_id,
        kind=kind,
        weight_shape=shape,
        has_bias=bool(entry.get("bias", True)),
        activation=activation,
        stride=stride,
        padding=padding
    )


def layer_output_shapes(
    layers: typing.Sequence[types.LayerSpec],
    input_shape: typing.Sequence[int]
) -> typing.List[typing.List[int]]:
    """
    Per-image output shape of every layer under the sequential forward rule.

    Dense layers flatten whatever reaches them; convolutions need a C×H×W
    input whose channel count matches the kernel.
    """

    shapes = []
    current = list(input_shape)

    for layer in layers:
        if layer.kind == "dense":
            out_features, in_features = layer.weight_shape
            flat = utils.prod(current)

            if flat != in_features:
                raise exceptions.ParseError(
                    message=f"Dense layer expects {in_features} inputs but receives {flat} ({current})",
                    subject=layer.id
                )

            current = [out_features]
        else:
            filters, channels, kh, kw = layer.weight_shape

            if len(current) != 3:
                raise exceptions.ParseError(
                    message=f"conv2d layer needs a C×H×W input, receives {current}",
                    subject=layer.id
                )

            if current[0] != channels:
                raise exceptions.ParseError(
                    message=f"conv2d layer expects {channels} channels but receives {current[0]}",
                    subject=layer.id
                )

            extents = []

            for extent, size in zip(current[1:], (kh, kw)):
                span = extent + 2 * layer.padding - size

                if span < 0 or span % layer.stride:
                    raise exceptions.ParseError(
                        message=f"Kernel {kh}x{kw} with stride {layer.stride} and padding "
                                f"{layer.padding} does not tile a {current[1]}x{current[2]} input",
                        subject=layer.id
                    )

                extents.append(span // layer.stride + 1)

            current = [filters, *extents]

        shapes.append(list(current))

    return shapes


def network_from_dict(section: dict) -> types.NetworkSpec:

    if not isinstance(section, dict):
        raise exceptions.ParseError(message="The network section must be a mapping", subject="network")

    entries = section.get("layers")

    if not isinstance(entries, list) or not entries:
        raise exceptions.ParseError(message="The network section needs a non-empty layer list", subject="network")

    input_shape = section.get("input_shape")

    if (
        not isinstance(input_shape, list) or len(input_shape) not in (1, 3)
        or not all(_is_count(extent) for extent in input_shape)
    ):
        raise exceptions.ParseError(
            message=f"input_shape must be [features] or [channels, height, width], got {input_shape!r}",
            subject="network"
        )

    layers = types.Layers()
    seen = set()

    for position, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise exceptions.ParseError(message=f"Layer #{position} is not a mapping", subject=position)

        layer = _layer_from_dict(entry, position)

        if layer.id in seen:
            raise exceptions.ParseError(message="Duplicate layer id", subject=layer.id)

        seen.add(layer.id)
        layers.append(layer)

    for layer in layers.list()[:-1]:
        if layer.activation == "softmax":
            raise exceptions.ParseError(
                message="Only the last layer may use a softmax activation",
                subject=layer.id
            )

    shapes = layer_output_shapes(layers, input_shape)
    outputs = utils.prod(shapes[-1])
    num_classes = section.get("num_classes", outputs)

    if num_classes != outputs:
        raise exceptions.ParseError(
            message=f"num_classes is {num_classes} but the last layer produces {outputs} outputs",
            subject=layers[-1].id
        )

    net = types.NetworkSpec(layers=layers, input_shape=input_shape, num_classes=num_classes)

    log.debug("Parsed network with weight counts %s", net.weight_counts)

    return net


def network_to_dict(net: types.NetworkSpec) -> dict:

    layers = []

    for layer in net.layers:
        entry = {
            "id": layer.id,
            "kind": layer.kind,
            "shape": list(layer.weight_shape),
            "bias": layer.has_bias,
            "activation": layer.activation
        }

        if layer.kind == "conv2d":
            entry.update({"stride": layer.stride, "padding": layer.padding})

        layers.append(entry)

    return {
        "input_shape": list(net.input_shape),
        "num_classes": net.num_classes,
        "layers": layers
    }


def _load_document(text: str) -> dict:

    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exception:
        raise exceptions.ParseError(message="Malformed config document", subject=str(exception)) from exception

    if not isinstance(document, dict):
        raise exceptions.ParseError(message="A config document must be a mapping at top level")

    return document


def parse_network_config(text: str) -> types.NetworkSpec:
    """
    Parse the network section of a config document.

    Parameters:

        text (str):
            YAML document with a top-level `network` mapping (or the network
            mapping itself).

    Usage examples:

            >>> from npas.core import archspec
            >>>
            >>> net = archspec.parse_network_config('''
            ... network:
            ...   input_shape: [784]
            ...   layers:
            ...     - {id: fc1, kind: dense, shape: [256, 784]}
            ...     - {id: fc2, kind: dense, shape: [10, 256], activation: none}
            ... ''')
            >>> net.weight_counts
            [200704, 2560]
    """

    document = _load_document(text)

    return network_from_dict(document.get("network", document))


def serialize_network(net: types.NetworkSpec) -> str:
    return yaml.safe_dump({"network": network_to_dict(net)}, sort_keys=False)


def classify_regime(net: types.NetworkSpec, budget: types.BudgetSpec) -> str:

    total = net.total_weights

    if budget.total_params < total:
        return REGIME_LB

    if budget.total_params > total:
        return REGIME_HB

    return REGIME_EXACT


def largest_layer_weights(net: types.NetworkSpec) -> int:
    return max(net.weight_counts)


def budget_from_dict(section: dict, net: types.NetworkSpec) -> types.BudgetSpec:

    if not isinstance(section, dict):
        raise exceptions.ParseError(message="The budget section must be a mapping", subject="budget")

    if "total_params" in section:
        total_params = section["total_params"]
    elif "fraction" in section:
        # fraction of the network weights, floored
        total_params = int(math.floor(float(section["fraction"]) * net.total_weights))
    else:
        raise exceptions.ParseError(message="The budget needs total_params or fraction", subject="budget")

    budget = types.BudgetSpec(
        total_params=total_params,
        num_groups=section.get("groups", section.get("num_groups", 1)),
        max_templates=section.get("templates", section.get("max_templates", config.DEFAULT_TEMPLATES)),
        combiner=section.get("combiner", config.DEFAULT_COMBINER),
        upsampler=section.get("upsampler", config.DEFAULT_UPSAMPLER),
        mask_window=section.get("mask_window", config.DEFAULT_MASK_WINDOW),
        emb_dim=section.get("emb_dim", config.DEFAULT_EMB_DIM),
        emb_softmax=bool(section.get("emb_softmax", False))
    )

    validate_budget(budget)

    return budget


def validate_budget(budget: types.BudgetSpec) -> None:

    for field in ("total_params", "num_groups", "max_templates", "mask_window", "emb_dim"):
        value = getattr(budget, field)

        if not _is_count(value):
            raise exceptions.ParseError(message=f"budget {field} must be a positive integer, got {value!r}", subject="budget")

    if budget.combiner not in config.COMBINERS:
        raise exceptions.ParseError(message=f"Unknown combiner {budget.combiner!r}", subject="budget")

    if budget.upsampler not in config.UPSAMPLERS:
        raise exceptions.ParseError(message=f"Unknown upsampler {budget.upsampler!r}", subject="budget")


def _section(document: dict, name: str) -> dict:

    section = document.get(name) or {}

    if not isinstance(section, dict):
        raise exceptions.ParseError(message=f"The {name} section must be a mapping", subject=name)

    return section


def _record(cls, section: dict, name: str):

    try:
        return cls(**section)
    except TypeError as exception:
        raise exceptions.ParseError(message=f"Unexpected field in the {name} section", subject=str(exception)) from exception


def experiment_from_document(
    document: dict,
    base_dir: typing.Optional[str] = None
) -> types.ExperimentConfig:
    """
    Build an ExperimentConfig from an already loaded document.

    Relative file references (data paths, mapping files, output directory)
    are resolved against base_dir.
    """

    base_dir = base_dir if base_dir is not None else os.getcwd()

    net = network_from_dict(document.get("network"))
    budget = budget_from_dict(_section(document, "budget"), net)
    train = _record(types.TrainSpec, _section(document, "train"), "train")

    data_section = dict(_section(document, "data"))
    name = data_section.pop("name", "blobs")

    if not isinstance(name, str) or not name:
        raise exceptions.ParseError(message=f"data name must be a non-empty string, got {name!r}", subject="data")

    for prefix in ("csv:", "idx:"):
        if name.startswith(prefix):
            paths = [
                path if os.path.isabs(path) else os.path.join(base_dir, path)
                for path in name[len(prefix):].split(sep=",")
            ]
            name = prefix + ",".join(paths)

    data = types.DataSpec(
        name=name,
        eval_fraction=data_section.pop("eval_fraction", config.DATA_EVAL_FRACTION),
        options=data_section
    )

    mapping_section = dict(_section(document, "mapping"))
    mapping = _record(types.MappingSpec, mapping_section, "mapping")

    if mapping.file is not None and not os.path.isabs(mapping.file):
        mapping.file = os.path.join(base_dir, mapping.file)

    if mapping.mode not in config.MAPPING_MODES:
        raise exceptions.ParseError(message=f"Unknown mapping mode {mapping.mode!r}", subject="mapping")

    if mapping.mode == "manual" and mapping.file is None:
        raise exceptions.ParseError(message="A manual mapping needs a file", subject="mapping")

    if mapping.combiner not in config.PRELIM_COMBINERS:
        raise exceptions.ParseError(message=f"The preliminary step cannot use {mapping.combiner!r}", subject="mapping")

    seed = document.get("seed", train.seed)
    train.seed = seed

    output = document.get("output", "runs")
    output = output if os.path.isabs(output) else os.path.join(base_dir, output)

    return types.ExperimentConfig(
        network=net,
        budget=budget,
        train=train,
        data=data,
        mapping=mapping,
        output=output,
        seed=seed,
        document=document
    )


def parse_experiment_config(text: str, base_dir: typing.Optional[str] = None) -> types.ExperimentConfig:
    return experiment_from_document(_load_document(text), base_dir=base_dir)


def load_experiment(path: str) -> types.ExperimentConfig:

    try:
        with open(file=path, mode="r", encoding="utf-8") as file:
            content = file.read()
    except OSError as exception:
        raise exceptions.ConfigError(message="Cannot read config", subject=path) from exception

    return parse_experiment_config(content, base_dir=os.path.dirname(os.path.abspath(path)))
