import logging
import typing

import numpy
import yaml

from .. import types
from .. import config
from .. import exceptions
from .. import utils
from . import autodiff

log = logging.getLogger(__name__)


def validate_mapping(net: types.NetworkSpec, mapping: types.GroupMapping) -> None:
    """
    Check that mapping is a total function from the network's layers onto
    group ids in [0, P).
    """

    layer_ids = set(net.layers.ids())

    for layer_id, group_id in mapping.assignment.items():
        if layer_id not in layer_ids:
            raise exceptions.MappingError(message="Mapping names a layer absent from the network", subject=layer_id)

        if not isinstance(group_id, int) or not 0 <= group_id < mapping.groups:
            raise exceptions.MappingError(
                message=f"Group id {group_id!r} outside [0, {mapping.groups})",
                subject=layer_id
            )

    for layer_id in net.layers.ids():
        if layer_id not in mapping.assignment:
            raise exceptions.MappingError(message="Layer is not mapped to any group", subject=layer_id)


def group_sizes(
    net: types.NetworkSpec,
    mapping: types.GroupMapping,
    total_params: int
) -> typing.List[int]:
    """
    Split total_params across groups in proportion to the weights each group
    implements. The integer-division remainder goes to the group with the
    largest weight sum (lowest id on ties), so the sizes add up exactly.
    """

    demands = [0] * mapping.groups

    for layer in net.layers:
        demands[mapping.assignment[layer.id]] += layer.weight_count

    demand_total = sum(demands)
    sizes = [total_params * demand // demand_total for demand in demands]

    largest = max(range(mapping.groups), key=lambda group_id: (demands[group_id], -group_id))
    sizes[largest] += total_params - sum(sizes)

    for group_id, size in enumerate(sizes):
        if size < 1:
            raise exceptions.AllocationError(
                message=f"Parameter group {group_id} receives no parameters "
                        f"(implements {demands[group_id]} of {demand_total} weights)",
                subject=group_id
            )

    return sizes


def init_scale(net: types.NetworkSpec, members: typing.Sequence[str]) -> float:
    """
    He-normal standard deviation averaged over the member layers.
    """

    stds = [(2.0 / net.layers.get(layer_id).fan_in) ** 0.5 for layer_id in members]

    return sum(stds) / len(stds)


def allocate_groups(
    net: types.NetworkSpec,
    mapping: types.GroupMapping,
    total_params: int,
    seed: typing.Optional[int] = 0
) -> typing.List[types.ParameterGroup]:
    """
    Create the P trainable parameter vectors θ_j of a budget.

    Parameters:

        net (NetworkSpec):
            Network whose layers the groups implement.

        mapping (GroupMapping):
            Layer to group assignment covering every layer.

        total_params (int):
            The budget |θ|. Must be at least the number of groups.

        seed (int | optional):
            Seed of the θ initialization. Defaults to 0.
    """

    validate_mapping(net, mapping)

    if total_params < mapping.groups:
        raise exceptions.AllocationError(
            message=f"A budget of {total_params} cannot fill {mapping.groups} groups",
            subject=total_params
        )

    sizes = group_sizes(net, mapping, total_params)
    groups = []

    for group_id, size in enumerate(sizes):
        members = mapping.members(group_id)

        if not members:
            raise exceptions.AllocationError(message="Parameter group has no member layers", subject=group_id)

        rng = utils.rng_for(seed, utils.STREAM_THETA, group_id)
        theta = autodiff.Tensor(
            rng.standard_normal(size) * init_scale(net, members),
            requires_grad=True,
            name=f"theta/{group_id}"
        )

        groups.append(types.ParameterGroup(id=group_id, theta=theta, members=members))

        log.debug("Group %d: %d parameters for layers %s", group_id, size, members)

    return groups


def template_count(group: types.ParameterGroup, layer: types.LayerSpec, K: int) -> int:
    return max(1, min(group.size // layer.weight_count, K))


def take_templates(
    group: types.ParameterGroup,
    layer: types.LayerSpec,
    K: int
) -> types.TemplateViews:
    """
    Hand out the next K̃ round-robin template views of a group to a layer.

    View t starts at (cursor + t·|w_i|) mod |θ_j| and wraps around the end of
    θ_j; the group cursor then moves past the last view.
    """

    count = layer.weight_count

    if group.size < count:
        raise exceptions.ContractViolationError(
            message=f"Layer needs {count} weights but group {group.id} holds {group.size}; "
                    "this is an upsampling case",
            subject=layer.id
        )

    templates = template_count(group, layer, K)
    views = types.TemplateViews()

    for index in range(templates):
        start = (group.cursor + index * count) % group.size
        views.append(
            types.TemplateView(
                layer_id=layer.id,
                template_index=index,
                start=start,
                length=count,
                wraps=start + count > group.size
            )
        )

    group.cursor = (group.cursor + templates * count) % group.size

    return views


def view_tensor(group: types.ParameterGroup, view: types.TemplateView, shape: typing.Sequence[int]) -> autodiff.Tensor:
    return autodiff.reshape(autodiff.gather(group.theta, view.start, view.length), shape)


def template_coverage(size: int, views: typing.Iterable[types.TemplateView]) -> numpy.ndarray:
    """
    Number of template views covering each index of a group's θ.
    """

    coverage = numpy.zeros(size, dtype=numpy.int64)

    for view in views:
        numpy.add.at(coverage, (view.start + numpy.arange(view.length)) % size, 1)

    return coverage


def serialize_mapping(mapping: types.GroupMapping) -> str:

    body = yaml.safe_dump(
        {
            "provenance": mapping.provenance,
            "groups": mapping.groups,
            "assignment": dict(mapping.assignment)
        },
        sort_keys=False
    )

    return f"{config.MAPPING_HEADER}\n{body}"


def parse_mapping(text: str, net: typing.Optional[types.NetworkSpec] = None) -> types.GroupMapping:
    """
    Parse a mapping document; with net given, also check it against the network.
    """

    try:
        document = yaml.safe_load(text)
    except yaml.YAMLError as exception:
        raise exceptions.MappingError(message="Malformed mapping document", subject=str(exception)) from exception

    if not isinstance(document, dict) or not isinstance(document.get("assignment"), dict):
        raise exceptions.MappingError(message="A mapping document needs an assignment table")

    assignment = document["assignment"]
    groups = document.get("groups", max(assignment.values(), default=-1) + 1)

    mapping = types.GroupMapping(
        assignment={str(layer_id): group_id for layer_id, group_id in assignment.items()},
        groups=groups,
        provenance=document.get("provenance", "manual")
    )

    if net is not None:
        validate_mapping(net, mapping)

    return mapping


def load_mapping(path: str, net: typing.Optional[types.NetworkSpec] = None) -> types.GroupMapping:

    try:
        with open(file=path, mode="r", encoding="utf-8") as file:
            content = file.read()
    except OSError as exception:
        raise exceptions.MappingError(message="Cannot read mapping file", subject=path) from exception

    return parse_mapping(content, net=net)


def write_mapping(mapping: types.GroupMapping, path: str) -> None:

    with open(file=path, mode="w", encoding="utf-8") as file:
        file.write(serialize_mapping(mapping))
