import typing

from .objects import Dict, List


class ParameterGroup(Dict):


    def __init__(
        self,
        id: int,
        theta: typing.Any,
        members: typing.List[str],
        cursor: int = 0
    ):
        self.id = id
        self.theta = theta
        self.members = list(members)
        self.cursor = cursor


    @property
    def size(self) -> int:
        return self.theta.size


class TemplateView(Dict):


    def __init__(
        self,
        layer_id: str,
        template_index: int,
        start: int,
        length: int,
        wraps: bool
    ):
        self.layer_id = layer_id
        self.template_index = template_index
        self.start = start
        self.length = length
        self.wraps = wraps


class TemplateViews(List):
    pass


class GroupMapping(Dict):


    def __init__(
        self,
        assignment: typing.Dict[str, int],
        groups: int,
        provenance: str
    ):
        self.assignment = dict(assignment)
        self.groups = groups
        self.provenance = provenance


    def members(self, group_id: int) -> typing.List[str]:
        return [layer_id for layer_id, group in self.assignment.items() if group == group_id]


class LayerPlan(Dict):
    """
    How one layer obtains its weights from its group.

    case is one of identity, downsample or upsample; templates holds the
    round-robin views for downsampling, tiles the tile count n for upsampling,
    and query_index the position of the layer among its group's queries.
    """


    def __init__(
        self,
        layer_id: str,
        group_id: int,
        case: str,
        templates: TemplateViews,
        tiles: int,
        query_index: int
    ):
        self.layer_id = layer_id
        self.group_id = group_id
        self.case = case
        self.templates = templates
        self.tiles = tiles
        self.query_index = query_index


    @property
    def template_count(self) -> int:
        return len(self.templates)


    @property
    def learns_coefficients(self) -> bool:
        return self.case == "downsample" and len(self.templates) >= 2
