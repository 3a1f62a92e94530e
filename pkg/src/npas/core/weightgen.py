"""
    Differentiable weight generation from shared parameter groups.

    A layer whose group holds exactly as many parameters as it needs reshapes
    θ_j directly. A group with more parameters is downsampled: the layer gets up
    to K round-robin templates, combined by WAvg, Emb, RR or Avg. A group with
    fewer parameters is upsampled by Repeat, Inter or Mask.
"""
import logging
import math
import typing

import numpy

from .. import types
from .. import config
from .. import exceptions
from .. import utils
from . import autodiff
from . import archspec
from . import paramstore

log = logging.getLogger(__name__)

CASE_IDENTITY = "identity"
CASE_DOWNSAMPLE = "downsample"
CASE_UPSAMPLE = "upsample"


class LayerCase(typing.NamedTuple):
    case: str
    group_id: int
    group_size: int
    templates: int
    tiles: int


class CombinerState(types.Dict):
    """
    Learned weight-generation parameters of a model.

    alphas and phis are keyed by layer id; projections (W_j, b_j) and mask
    pools by group id. plans holds the per-layer LayerPlan once the model's
    groups have handed out their templates.
    """

    def __init__(
        self,
        combiner: str,
        upsampler: str,
        window: int,
        emb_softmax: bool,
        alphas: typing.Dict[str, autodiff.Tensor],
        phis: typing.Dict[str, autodiff.Tensor],
        projections: typing.Dict[int, typing.Tuple[autodiff.Tensor, autodiff.Tensor]],
        masks: typing.Dict[int, typing.List[autodiff.Tensor]],
        plans: typing.Dict[str, types.LayerPlan]
    ):
        self.combiner = combiner
        self.upsampler = upsampler
        self.window = window
        self.emb_softmax = emb_softmax
        self.alphas = alphas
        self.phis = phis
        self.projections = projections
        self.masks = masks
        self.plans = plans


    def parameters(self) -> typing.List[autodiff.Tensor]:

        params = list(self.alphas.values()) + list(self.phis.values())

        for group_id in sorted(self.projections):
            params.extend(self.projections[group_id])

        for group_id in sorted(self.masks):
            params.extend(self.masks[group_id])

        return params


def layer_cases(
    net: types.NetworkSpec,
    mapping: types.GroupMapping,
    budget: types.BudgetSpec
) -> typing.Dict[str, LayerCase]:
    """
    Which of the three generation cases each layer falls into, with its
    template count K̃ (downsampling) or tile count n (upsampling).
    """

    sizes = paramstore.group_sizes(net, mapping, budget.total_params)
    cases = {}

    for layer in net.layers:
        group_id = mapping.assignment[layer.id]
        size = sizes[group_id]
        count = layer.weight_count

        if size == count:
            case = LayerCase(CASE_IDENTITY, group_id, size, 0, 1)
        elif size > count:
            case = LayerCase(CASE_DOWNSAMPLE, group_id, size, max(1, min(size // count, budget.max_templates)), 1)
        else:
            case = LayerCase(CASE_UPSAMPLE, group_id, size, 0, utils.ceil_div(count, size))

        cases[layer.id] = case

    return cases


def _learners(
    net: types.NetworkSpec,
    cases: typing.Dict[str, LayerCase],
    group_id: int
) -> typing.List[str]:

    return [
        layer.id for layer in net.layers
        if cases[layer.id].group_id == group_id
        and cases[layer.id].case == CASE_DOWNSAMPLE
        and cases[layer.id].templates >= 2
    ]


def orthogonal_rows(rng: numpy.random.Generator, rows: int, dim: int) -> numpy.ndarray:
    """
    rows vectors of length dim; the first min(rows, dim) are orthonormal (QR
    of a Gaussian matrix), any further ones are random unit vectors.
    """

    q, r = numpy.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * numpy.sign(numpy.diag(r))

    vectors = [q[index] for index in range(min(rows, dim))]

    for _ in range(rows - len(vectors)):
        vector = rng.standard_normal(dim)
        vectors.append(vector / numpy.linalg.norm(vector))

    return numpy.array(vectors).reshape(rows, dim)


def init_combiner_state(
    net: types.NetworkSpec,
    mapping: types.GroupMapping,
    budget: types.BudgetSpec,
    rng_seed: typing.Optional[int] = 0
) -> CombinerState:
    """
    Initialize every learned generation parameter of a budget.

    Per group, the α vectors of WAvg layers that share a template count are
    rows of one random orthogonal matrix (mutually orthogonal up to that
    count); Emb draws φ_i and W_j from N(0, 1/E) and zeros b_j; mask pools
    start at all ones, which makes Mask equal to Repeat.
    """

    cases = layer_cases(net, mapping, budget)
    alphas, phis, projections, masks = {}, {}, {}, {}

    for group_id in range(mapping.groups):
        rng = utils.rng_for(rng_seed, utils.STREAM_COMBINER, group_id)
        learners = _learners(net, cases, group_id)

        if learners and budget.combiner == "wavg":
            # one orthogonal draw per template count
            for templates in sorted({cases[layer_id].templates for layer_id in learners}):
                sized = [layer_id for layer_id in learners if cases[layer_id].templates == templates]

                for row, layer_id in zip(orthogonal_rows(rng, len(sized), templates), sized):
                    alphas[layer_id] = autodiff.Tensor(row, requires_grad=True, name=f"alpha/{layer_id}")

        if learners and budget.combiner == "emb":
            widest = max(cases[layer_id].templates for layer_id in learners)
            scale = 1.0 / math.sqrt(budget.emb_dim)

            for layer_id in learners:
                phis[layer_id] = autodiff.Tensor(
                    rng.standard_normal(budget.emb_dim) * scale,
                    requires_grad=True,
                    name=f"phi/{layer_id}"
                )

            projections[group_id] = (
                autodiff.Tensor(
                    rng.standard_normal((widest, budget.emb_dim)) * scale,
                    requires_grad=True,
                    name=f"proj_w/{group_id}"
                ),
                autodiff.Tensor(numpy.zeros(widest), requires_grad=True, name=f"proj_b/{group_id}")
            )

        if budget.upsampler == "mask":
            pool = max(
                (case.tiles - 1 for case in cases.values() if case.group_id == group_id and case.case == CASE_UPSAMPLE),
                default=0
            )

            if pool:
                masks[group_id] = [
                    autodiff.Tensor(numpy.ones(budget.mask_window), requires_grad=True, name=f"mask/{group_id}/{tile}")
                    for tile in range(1, pool + 1)
                ]

    return CombinerState(
        combiner=budget.combiner,
        upsampler=budget.upsampler,
        window=budget.mask_window,
        emb_softmax=budget.emb_softmax,
        alphas=alphas,
        phis=phis,
        projections=projections,
        masks=masks,
        plans={}
    )


def plan_generation(
    net: types.NetworkSpec,
    groups: typing.Sequence[types.ParameterGroup],
    budget: types.BudgetSpec
) -> typing.Dict[str, types.LayerPlan]:
    """
    Resolve every layer's generation case and draw its round-robin templates.

    Layers are visited in declaration order, which fixes the template offsets.
    """

    by_layer = {layer_id: group for group in groups for layer_id in group.members}
    queries = {group.id: 0 for group in groups}
    plans = {}

    for group in groups:
        group.cursor = 0

    for layer in net.layers:
        group = by_layer[layer.id]
        count = layer.weight_count

        if group.size == count:
            case, templates, tiles = CASE_IDENTITY, types.TemplateViews(), 1
        elif group.size > count:
            case, templates, tiles = CASE_DOWNSAMPLE, paramstore.take_templates(group, layer, budget.max_templates), 1
        else:
            case, templates, tiles = CASE_UPSAMPLE, types.TemplateViews(), utils.ceil_div(count, group.size)

        plans[layer.id] = types.LayerPlan(
            layer_id=layer.id,
            group_id=group.id,
            case=case,
            templates=templates,
            tiles=tiles,
            query_index=queries[group.id]
        )

        queries[group.id] += 1

        log.debug("Layer %s: %s from group %d (K̃=%d, n=%d)", layer.id, case, group.id, len(templates), tiles)

    return plans


def combine_wavg(templates: typing.Sequence[autodiff.Tensor], alpha: autodiff.Tensor) -> autodiff.Tensor:

    if len(templates) == 1:
        return templates[0]

    if alpha.ndim != 1 or alpha.shape[0] != len(templates):
        raise exceptions.ArgumentError(
            message=f"{len(templates)} templates but α of shape {alpha.shape}",
            subject="wavg"
        )

    return autodiff.weighted_sum(templates, alpha)


def combine_emb(
    templates: typing.Sequence[autodiff.Tensor],
    phi: autodiff.Tensor,
    weight: autodiff.Tensor,
    bias: autodiff.Tensor,
    softmax: typing.Optional[bool] = False
) -> autodiff.Tensor:
    """
    α = W_j·φ_i + b_j, then the weighted template sum.

    W_j and b_j may have more rows than this layer has templates (groups are
    sized for their widest layer); only the first K̃ entries of α are used.
    """

    if len(templates) == 1:
        return templates[0]

    rows, width = weight.shape if weight.ndim == 2 else (0, 0)

    if (
        phi.ndim != 1 or weight.ndim != 2 or width != phi.shape[0]
        or bias.shape != (rows,) or rows < len(templates)
    ):
        raise exceptions.ArgumentError(
            message=f"Emb projection {weight.shape}/{bias.shape} does not fit φ {phi.shape} "
                    f"and {len(templates)} templates",
            subject="emb"
        )

    alpha = autodiff.add(
        autodiff.reshape(autodiff.matmul(weight, autodiff.reshape(phi, (width, 1))), (rows,)),
        bias
    )

    if rows > len(templates):
        alpha = autodiff.gather(alpha, 0, len(templates))

    if softmax:
        alpha = autodiff.softmax(alpha)

    return autodiff.weighted_sum(templates, alpha)


def combine_rr(templates: typing.Sequence[autodiff.Tensor], call_index: int) -> autodiff.Tensor:
    return templates[call_index % len(templates)]


def combine_avg(templates: typing.Sequence[autodiff.Tensor]) -> autodiff.Tensor:

    weights = autodiff.Tensor(numpy.full(len(templates), 1.0 / len(templates)))

    return autodiff.weighted_sum(templates, weights)


def upsample_repeat(theta: autodiff.Tensor, target_count: int) -> autodiff.Tensor:
    return autodiff.gather(theta, 0, target_count)


def upsample_inter(theta: autodiff.Tensor, target_count: int) -> autodiff.Tensor:
    return autodiff.linear_resize_1d(theta, target_count)


def upsample_mask(
    theta: autodiff.Tensor,
    target_count: int,
    masks: typing.Sequence[autodiff.Tensor],
    window: int
) -> autodiff.Tensor:
    """
    Tile θ_j n = ⌈target/|θ_j|⌉ times; tile t ≥ 1 is multiplied by mask t-1
    repeated over consecutive windows (a partial last window uses a prefix of
    the mask). The concatenation is cut to target_count.
    """

    tiles = utils.ceil_div(target_count, theta.size)

    if len(masks) < tiles - 1:
        raise exceptions.ContractViolationError(
            message=f"Mask upsampling needs {tiles - 1} masks, the pool holds {len(masks)}",
            subject=target_count
        )

    parts = [theta]

    for tile in range(1, tiles):
        mask = masks[tile - 1]

        if mask.shape != (window,):
            raise exceptions.ContractViolationError(
                message=f"Mask of shape {mask.shape} does not match window {window}",
                subject=mask.name
            )

        parts.append(autodiff.mul(theta, autodiff.gather(mask, 0, theta.size)))

    return autodiff.gather(autodiff.concat(parts), 0, target_count)


def generate(
    layer: types.LayerSpec,
    group: types.ParameterGroup,
    state: CombinerState,
    step_index: typing.Optional[int] = 0
) -> types.GeneratedWeights:
    """
    Produce one layer's weights from its group for the current forward pass.

    Parameters:

        layer (LayerSpec):
            A member layer of group.

        group (ParameterGroup):
            The group implementing the layer.

        state (CombinerState):
            Learned combiners, masks and the layer plans.

        step_index (int | optional):
            Optimization step, only used for tracing. RR selects its template
            by the layer's fixed query position within the group.
    """

    plan = state.plans[layer.id]
    shape = layer.weight_shape
    count = layer.weight_count

    if plan.case == CASE_IDENTITY:
        return types.GeneratedWeights(layer.id, autodiff.reshape(group.theta, shape), "identity")

    if plan.case == CASE_DOWNSAMPLE:
        templates = [paramstore.view_tensor(group, view, shape) for view in plan.templates]
        kind = state.combiner

        if state.combiner == "wavg":
            tensor = combine_wavg(templates, state.alphas.get(layer.id))
        elif state.combiner == "emb":
            if len(templates) == 1:
                tensor = templates[0]
            else:
                weight, bias = state.projections[group.id]
                tensor = combine_emb(templates, state.phis[layer.id], weight, bias, softmax=state.emb_softmax)
        elif state.combiner == "rr":
            tensor = combine_rr(templates, plan.query_index)
        else:
            tensor = combine_avg(templates)

        return types.GeneratedWeights(layer.id, tensor, kind)

    if state.upsampler == "repeat":
        flat = upsample_repeat(group.theta, count)
    elif state.upsampler == "inter":
        flat = upsample_inter(group.theta, count)
    else:
        flat = upsample_mask(group.theta, count, state.masks.get(group.id, []), state.window)

    log.debug("Step %s: layer %s upsampled with %s", step_index, layer.id, state.upsampler)

    return types.GeneratedWeights(layer.id, autodiff.reshape(flat, shape), state.upsampler)


def overhead_param_count(
    net: types.NetworkSpec,
    mapping: types.GroupMapping,
    budget: types.BudgetSpec
) -> types.OverheadReport:
    """
    Exact number of trainable parameters outside θ.

    WAvg adds K̃_i per learning layer; Emb adds E per learning layer plus
    E·K̃_j + K̃_j per group, K̃_j being the group's widest template count;
    Mask adds (max n_i - 1)·window per group. Layers with a single template
    learn nothing. Biases are listed separately.
    """

    cases = layer_cases(net, mapping, budget)
    coefficients, projections, masks = 0, 0, 0
    per_layer = {layer.id: 0 for layer in net.layers}

    for group_id in range(mapping.groups):
        learners = _learners(net, cases, group_id)

        if learners and budget.combiner == "wavg":
            for layer_id in learners:
                per_layer[layer_id] = cases[layer_id].templates
                coefficients += cases[layer_id].templates

        if learners and budget.combiner == "emb":
            widest = max(cases[layer_id].templates for layer_id in learners)

            for layer_id in learners:
                per_layer[layer_id] = budget.emb_dim
                coefficients += budget.emb_dim

            projections += budget.emb_dim * widest + widest

        if budget.upsampler == "mask":
            pool = max(
                (case.tiles - 1 for case in cases.values() if case.group_id == group_id and case.case == CASE_UPSAMPLE),
                default=0
            )
            masks += pool * budget.mask_window

    return types.OverheadReport(
        coefficients=coefficients,
        projections=projections,
        masks=masks,
        biases=net.total_biases,
        per_layer=per_layer
    )


def forward_flops(net: types.NetworkSpec) -> typing.Dict[str, int]:
    """
    Multiply-adds per image of each layer's weight operation.
    """

    shapes = archspec.layer_output_shapes(net.layers, net.input_shape)
    flops = {}

    for layer, shape in zip(net.layers, shapes):
        if layer.kind == "dense":
            flops[layer.id] = layer.weight_count
        else:
            flops[layer.id] = layer.weight_count * shape[1] * shape[2]

    return flops


def weightgen_flops(
    net: types.NetworkSpec,
    mapping: types.GroupMapping,
    budget: types.BudgetSpec,
    batch_size: typing.Optional[int] = None
) -> types.FlopReport:
    """
    Multiply-adds spent generating weights, against the forward pass.

    Downsampling costs K̃·|w_i| for WAvg, Avg and Emb (plus 2·K̃·E for the
    Emb projection), nothing for RR or a single template. Upsampling costs
    nothing for Repeat, 2·|w_i| for Inter and |w_i| - |θ_j| for Mask. Weights
    are generated once per forward pass, so the per-batch ratio is the
    per-image ratio divided by the batch size.
    """

    batch_size = batch_size if batch_size is not None else config.REPORT_BATCH_SIZE

    cases = layer_cases(net, mapping, budget)
    forward = sum(forward_flops(net).values())
    per_layer = {}

    for layer in net.layers:
        case = cases[layer.id]
        count = layer.weight_count
        cost = 0

        if case.case == CASE_DOWNSAMPLE and case.templates >= 2:
            if budget.combiner in ("wavg", "avg", "emb"):
                cost = case.templates * count
            if budget.combiner == "emb":
                cost += 2 * case.templates * budget.emb_dim
        elif case.case == CASE_UPSAMPLE:
            if budget.upsampler == "inter":
                cost = 2 * count
            elif budget.upsampler == "mask":
                cost = count - case.group_size

        per_layer[layer.id] = cost

    weightgen = sum(per_layer.values())
    ratio = weightgen / forward

    return types.FlopReport(
        forward=forward,
        weightgen=weightgen,
        per_layer=per_layer,
        ratio_per_image=ratio,
        ratio_per_batch=ratio / batch_size,
        batch_size=batch_size
    )
