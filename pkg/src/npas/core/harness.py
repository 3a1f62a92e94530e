"""
    Experiment runner: mapping resolution, training runs, materialization,
    evaluation, static budget/FLOP reports and sweeps.
"""
import csv
import itertools
import json
import logging
import os
import typing

import numpy

from .. import types
from .. import config
from .. import exceptions
from . import archspec
from . import checkpoints
from . import datasets
from . import groupsearch
from . import models
from . import paramstore
from . import training
from . import weightgen
from .models import forward
from .training import error_at_k, evaluate

log = logging.getLogger(__name__)

MODEL_KINDS = ("shared", "plain", "reduced")

NOTE_BIASES = "Biases are trained outside θ and reported separately from the budget."
NOTE_WRAP = "Templates wrap around the end of θ_j, so every parameter of a downsampled group stays reachable."


class RunResult(typing.NamedTuple):
    model: models.Model
    mapping: typing.Optional[types.GroupMapping]
    metrics: types.Metrics
    eval_set: types.Dataset
    paths: typing.Dict[str, str]


def load_data(cfg: types.ExperimentConfig, net: typing.Optional[types.NetworkSpec] = None):

    net = net if net is not None else cfg.network

    return datasets.load_dataset(cfg.data, cfg.seed, net.input_shape, net.num_classes)


def resolve_mapping(
    cfg: types.ExperimentConfig,
    mapping: typing.Optional[str] = None,
    train_set: typing.Optional[types.Dataset] = None,
    progress: typing.Optional[bool] = False
) -> typing.Tuple[types.GroupMapping, typing.Optional[groupsearch.SearchResult]]:
    """
    Turn a --mapping value (auto, single, random or a file path) into a
    GroupMapping. Without one, the config's mapping section decides.
    """

    choice = mapping if mapping is not None else cfg.mapping.mode
    groups = cfg.budget.num_groups

    if choice == "manual":
        choice = cfg.mapping.file

    if choice in ("single", "random"):
        return groupsearch.baseline_mappings(cfg.network, groups, seed=cfg.seed, kind=choice), None

    if choice == "auto":
        if train_set is None:
            train_set, _ = load_data(cfg)

        result = groupsearch.search_mapping(
            cfg.network,
            groups,
            train_set,
            cfg.train,
            mapping_spec=cfg.mapping,
            emb_dim=cfg.budget.emb_dim,
            progress=progress
        )

        return result.mapping, result

    return paramstore.load_mapping(choice, cfg.network), None


def check_census(model: models.SharedModel) -> types.Census:
    """
    The model's trainable parameters must equal |θ| plus the overhead and
    bias formulas exactly.
    """

    census = model.census()
    overhead = weightgen.overhead_param_count(model.net, model.mapping, model.budget)

    expected = types.Census(
        theta=model.budget.total_params,
        overhead=overhead.total,
        biases=overhead.biases
    )

    if census != expected:
        raise exceptions.ContractViolationError(
            message=f"Census {census.to_dict()} differs from the budget formula {expected.to_dict()}",
            subject="census"
        )

    return census


def build_model(
    cfg: types.ExperimentConfig,
    mapping: types.GroupMapping,
    budget: typing.Optional[types.BudgetSpec] = None
) -> models.SharedModel:

    budget = budget if budget is not None else cfg.budget
    budget = budget.replace(num_groups=mapping.groups)
    model = models.SharedModel(cfg.network, budget, mapping, seed=cfg.seed)

    census = check_census(model)

    log.info(
        "Regime %s, census theta=%d overhead=%d biases=%d total=%d",
        archspec.classify_regime(cfg.network, budget), census.theta, census.overhead, census.biases, census.total
    )

    return model


class ReducedBaseline(typing.NamedTuple):
    network: types.NetworkSpec
    factor: float


def scale_widths(net: types.NetworkSpec, factor: float) -> types.NetworkSpec:
    """
    Copy of net with every layer but the last narrowed to
    max(1, floor(factor·width)) output units or channels.
    """

    shape = list(net.input_shape)
    layers = types.Layers()
    last = len(net.layers) - 1

    for index, layer in enumerate(net.layers):
        width = layer.weight_shape[0] if index == last else max(1, int(layer.weight_shape[0] * factor))

        if layer.kind == "conv2d":
            kh, kw = layer.weight_shape[2:]
            weight_shape = (width, shape[0], kh, kw)
            shape = [
                width,
                (shape[1] + 2 * layer.padding - kh) // layer.stride + 1,
                (shape[2] + 2 * layer.padding - kw) // layer.stride + 1
            ]
        else:
            weight_shape = (width, int(numpy.prod(shape)))
            shape = [width]

        layers.append(
            types.LayerSpec(
                id=layer.id,
                kind=layer.kind,
                weight_shape=weight_shape,
                has_bias=layer.has_bias,
                activation=layer.activation,
                stride=layer.stride,
                padding=layer.padding
            )
        )

    return types.NetworkSpec(layers=layers, input_shape=net.input_shape, num_classes=net.num_classes)


def reduced_baseline(net: types.NetworkSpec, total_params: int) -> ReducedBaseline:
    """
    Narrow the hidden widths by the largest common factor (found by
    bisection) that keeps the weight count within total_params.
    """

    if scale_widths(net, 0.0).total_weights > total_params:
        raise exceptions.AllocationError(
            message=f"Even width 1 needs more than {total_params} weights",
            subject=total_params
        )

    low, high = 0.0, 1.0

    if scale_widths(net, high).total_weights <= total_params:
        low = high

    for _ in range(60):
        if low == high:
            break

        middle = (low + high) / 2

        if scale_widths(net, middle).total_weights <= total_params:
            low = middle
        else:
            high = middle

    reduced = scale_widths(net, low)

    log.info("Reduced baseline: width factor %.4f, %d weights", low, reduced.total_weights)

    return ReducedBaseline(network=reduced, factor=low)


def _checkpoint_meta(cfg: types.ExperimentConfig, model: models.Model, net: types.NetworkSpec) -> dict:

    meta = {
        "kind": model.kind,
        "seed": cfg.seed,
        "network": archspec.network_to_dict(net),
        "data": cfg.data.to_dict(),
        "train": cfg.train.to_dict()
    }

    if isinstance(model, models.SharedModel):
        meta["budget"] = model.budget.to_dict()
        meta["mapping"] = paramstore.serialize_mapping(model.mapping)

    return meta


def train(
    cfg: types.ExperimentConfig,
    mapping: typing.Optional[str] = None,
    out: typing.Optional[str] = None,
    kind: typing.Optional[str] = "shared",
    progress: typing.Optional[bool] = False
) -> RunResult:
    """
    Run one experiment and write its mapping, metrics and checkpoint.

    Parameters:

        cfg (ExperimentConfig):
            Loaded experiment.

        mapping (str | optional):
            auto, single, random or a mapping file. Defaults to the config.

        out (str | optional):
            Output directory. Defaults to the config's output.

        kind (str | optional):
            shared (the budgeted model), plain (every layer owns its weights)
            or reduced (plain, with widths narrowed to fit the budget).
    """

    out = out if out is not None else cfg.output

    if kind not in MODEL_KINDS:
        raise exceptions.ArgumentError(message="Unknown model kind", subject=kind)

    os.makedirs(out, exist_ok=True)

    net = cfg.network

    if kind == "reduced":
        net = reduced_baseline(cfg.network, cfg.budget.total_params).network

    train_set, eval_set = load_data(cfg, net)
    paths = {
        "metrics": os.path.join(out, config.METRICS_NAME),
        "checkpoint": os.path.join(out, config.CHECKPOINT_NAME)
    }
    resolved = None

    if kind == "shared":
        resolved, search = resolve_mapping(cfg, mapping, train_set=train_set, progress=progress)
        paths["mapping"] = os.path.join(out, config.MAPPING_NAME)
        paramstore.write_mapping(resolved, paths["mapping"])

        if search is not None and cfg.mapping.retain_preliminary:
            paths["preliminary"] = os.path.join(out, "preliminary.npck")
            checkpoints.save_checkpoint(search.model, {"kind": search.model.kind, "seed": cfg.seed}, paths["preliminary"])

        model = build_model(cfg, resolved)
    else:
        model = models.PlainModel(net, seed=cfg.seed)

    metrics = training.fit(
        model,
        train_set,
        cfg.train,
        eval_set=eval_set if len(eval_set) else None,
        metrics_path=paths["metrics"],
        progress=progress
    )

    checkpoints.save_checkpoint(model, _checkpoint_meta(cfg, model, net), paths["checkpoint"])

    return RunResult(model=model, mapping=resolved, metrics=metrics, eval_set=eval_set, paths=paths)


def load_model(path: str) -> typing.Tuple[models.Model, dict]:
    """
    Rebuild a trained model from its checkpoint.
    """

    checkpoint = checkpoints.load_checkpoint(path)
    meta = checkpoint.meta
    net = archspec.network_from_dict(meta["network"])

    if meta.get("kind") == "shared":
        mapping = paramstore.parse_mapping(meta["mapping"], net)
        model = models.SharedModel(net, types.BudgetSpec(**meta["budget"]), mapping, seed=meta["seed"])
    elif meta.get("kind") == "plain":
        model = models.PlainModel(net, seed=meta["seed"])
    else:
        raise exceptions.ParseError(message=f"Cannot rebuild a {meta.get('kind')!r} model", subject=path)

    if model.census() != checkpoint.census:
        raise exceptions.ContractViolationError(
            message="Checkpoint census does not match the rebuilt model",
            subject=path
        )

    model.load_state(checkpoint.arrays)

    return model, meta


def materialize(checkpoint_path: str, out_path: typing.Optional[str] = None) -> typing.Tuple[models.MaterializedModel, str]:
    """
    Generate the weights of a trained model once and write them out.
    """

    out_path = out_path if out_path is not None else os.path.join(os.path.dirname(checkpoint_path), config.WEIGHTS_NAME)

    model, _ = load_model(checkpoint_path)
    frozen = models.materialize_model(model)
    checkpoints.write_weights(frozen, out_path)

    return frozen, out_path


def evaluate_run(
    checkpoint_path: typing.Optional[str] = None,
    weights_path: typing.Optional[str] = None,
    cfg: typing.Optional[types.ExperimentConfig] = None
) -> types.EvalResult:
    """
    Evaluate a checkpoint or a materialized weights file on the eval split.

    The data section comes from cfg when given, else from the checkpoint.
    """

    if (checkpoint_path is None) == (weights_path is None):
        raise exceptions.ArgumentError(message="Evaluate either a checkpoint or a weights file")

    if checkpoint_path is not None:
        model, meta = load_model(checkpoint_path)
    else:
        model, meta = checkpoints.read_weights(weights_path), None

    if cfg is not None:
        data, seed, batch_size = cfg.data, cfg.seed, cfg.train.eval_batch_size
    elif meta is not None:
        data = types.DataSpec(**meta["data"])
        seed, batch_size = meta["seed"], meta["train"]["eval_batch_size"]
    else:
        raise exceptions.ArgumentError(message="A weights file carries no data section; pass a config")

    _, eval_set = datasets.load_dataset(data, seed, model.net.input_shape, model.net.num_classes)

    return evaluate(model, eval_set, batch_size=batch_size)


def _static_mapping(cfg: types.ExperimentConfig, mapping: typing.Optional[str]) -> typing.Tuple[types.GroupMapping, typing.List[str]]:

    choice = mapping if mapping is not None else cfg.mapping.mode
    groups = cfg.budget.num_groups

    if choice == "auto":
        kind = "single" if groups == 1 else "random"
        note = [] if groups == 1 else [
            f"No mapping given: group sizes assume a {kind} placeholder; run map for the learned one."
        ]

        return groupsearch.baseline_mappings(cfg.network, groups, seed=cfg.seed, kind=kind), note

    resolved, _ = resolve_mapping(cfg, choice)

    return resolved, []


def report(
    cfg: types.ExperimentConfig,
    mapping: typing.Optional[str] = None,
    batch_size: typing.Optional[int] = None
) -> dict:
    """
    Static budget and FLOP analysis of an experiment, no training involved.
    """

    net = cfg.network
    resolved, notes = _static_mapping(cfg, mapping)
    budget = cfg.budget.replace(num_groups=resolved.groups)

    sizes = paramstore.group_sizes(net, resolved, budget.total_params)
    cases = weightgen.layer_cases(net, resolved, budget)
    overhead = weightgen.overhead_param_count(net, resolved, budget)
    flops = weightgen.weightgen_flops(net, resolved, budget, batch_size=batch_size)
    forward_flops = weightgen.forward_flops(net)

    groups = paramstore.allocate_groups(net, resolved, budget.total_params, seed=cfg.seed)
    plans = weightgen.plan_generation(net, groups, budget)

    for group in groups:
        views = [view for layer_id in group.members for view in plans[layer_id].templates]

        if not views:
            continue

        unused = int((paramstore.template_coverage(group.size, views) == 0).sum())

        if unused:
            notes.append(f"Group {group.id}: {unused} of {group.size} parameters lie outside every template.")

    notes.extend([NOTE_BIASES, NOTE_WRAP])

    return {
        "regime": archspec.classify_regime(net, budget),
        "budget": budget.total_params,
        "network_weights": net.total_weights,
        "mapping": {"provenance": resolved.provenance, "assignment": dict(resolved.assignment)},
        "groups": [
            {"id": group_id, "size": size, "layers": resolved.members(group_id)}
            for group_id, size in enumerate(sizes)
        ],
        "layers": [
            {
                "id": layer.id,
                "weights": layer.weight_count,
                "group": cases[layer.id].group_id,
                "case": cases[layer.id].case,
                "templates": cases[layer.id].templates,
                "tiles": cases[layer.id].tiles,
                "overhead": overhead.per_layer[layer.id],
                "flops_forward": forward_flops[layer.id],
                "flops_weightgen": flops.per_layer[layer.id]
            }
            for layer in net.layers
        ],
        "overhead": {
            "coefficients": overhead.coefficients,
            "projections": overhead.projections,
            "masks": overhead.masks,
            "total": overhead.total,
            "biases": overhead.biases
        },
        "census": {
            "theta": budget.total_params,
            "overhead": overhead.total,
            "biases": overhead.biases,
            "total": budget.total_params + overhead.total + overhead.biases
        },
        "flops": {
            "forward": flops.forward,
            "weightgen": flops.weightgen,
            "ratio_per_image": flops.ratio_per_image,
            "ratio_per_batch": flops.ratio_per_batch,
            "batch_size": flops.batch_size
        },
        "notes": notes
    }


def format_report(document: dict) -> str:

    lines = [
        f"regime: {document['regime']} (budget {document['budget']} of {document['network_weights']} weights)",
        "",
        f"{'group':<6}{'size':>10}  layers"
    ]

    for group in document["groups"]:
        lines.append(f"{group['id']:<6}{group['size']:>10}  {', '.join(group['layers'])}")

    lines.extend(["", f"{'layer':<12}{'weights':>10}{'group':>7}  {'case':<11}{'K':>4}{'n':>4}{'overhead':>10}{'wg flops':>10}"])

    for layer in document["layers"]:
        lines.append(
            f"{layer['id']:<12}{layer['weights']:>10}{layer['group']:>7}  {layer['case']:<11}"
            f"{layer['templates']:>4}{layer['tiles']:>4}{layer['overhead']:>10}{layer['flops_weightgen']:>10}"
        )

    overhead, flops, census = document["overhead"], document["flops"], document["census"]

    lines.extend([
        "",
        f"overhead: coefficients {overhead['coefficients']}, projections {overhead['projections']}, "
        f"masks {overhead['masks']} (total {overhead['total']}), biases {overhead['biases']}",
        f"census: {census['total']} trainable parameters",
        f"flops: forward {flops['forward']}, weight generation {flops['weightgen']}, "
        f"ratio {flops['ratio_per_image']:.6%} per image, {flops['ratio_per_batch']:.6%} per batch of {flops['batch_size']}"
    ])

    lines.extend(f"note: {note}" for note in document["notes"])

    return "\n".join(lines)


def write_json(document: dict, path: str) -> None:

    with open(file=path, mode="w", encoding="utf-8") as file:
        json.dump(document, file, indent=4, ensure_ascii=False)
        file.write("\n")


def run_map(
    cfg: types.ExperimentConfig,
    output: typing.Optional[str] = None,
    progress: typing.Optional[bool] = False
) -> groupsearch.SearchResult:
    """
    Learn a group mapping and write it with the layer representations.
    """

    output = output if output is not None else os.path.join(cfg.output, config.MAPPING_NAME)
    directory = os.path.dirname(os.path.abspath(output))
    os.makedirs(directory, exist_ok=True)

    train_set, _ = load_data(cfg)
    result = groupsearch.search_mapping(
        cfg.network,
        cfg.budget.num_groups,
        train_set,
        cfg.train,
        mapping_spec=cfg.mapping,
        emb_dim=cfg.budget.emb_dim,
        progress=progress
    )

    paramstore.write_mapping(result.mapping, output)
    groupsearch.write_representations(result.representations, os.path.join(directory, config.REPRESENTATIONS_NAME))

    log.info("Wrote mapping %s after %d preliminary epochs", output, result.epochs)

    return result


SWEEP_COLUMNS = (
    "groups", "templates", "combiner", "upsampler", "regime",
    "params_theta", "params_overhead", "train_loss", "eval_error_at_1"
)


def sweep(
    cfg: types.ExperimentConfig,
    groups: typing.Optional[typing.Sequence[int]] = None,
    templates: typing.Optional[typing.Sequence[int]] = None,
    combiners: typing.Optional[typing.Sequence[str]] = None,
    upsamplers: typing.Optional[typing.Sequence[str]] = None,
    mapping: typing.Optional[str] = None,
    out: typing.Optional[str] = None,
    reduced: typing.Optional[bool] = False,
    progress: typing.Optional[bool] = False
) -> typing.List[dict]:
    """
    Train one model per combination of the given axes and collect a CSV row
    for each. Unset axes keep the config's value. With reduced, a final row
    trains the width-reduced plain baseline at the same budget.
    """

    out = out if out is not None else cfg.output
    os.makedirs(out, exist_ok=True)

    axes = itertools.product(
        groups or [cfg.budget.num_groups],
        templates or [cfg.budget.max_templates],
        combiners or [cfg.budget.combiner],
        upsamplers or [cfg.budget.upsampler]
    )

    train_set, eval_set = load_data(cfg)
    rows = []

    for num_groups, max_templates, combiner, upsampler in axes:
        budget = cfg.budget.replace(
            num_groups=num_groups,
            max_templates=max_templates,
            combiner=combiner,
            upsampler=upsampler
        )
        archspec.validate_budget(budget)

        run_cfg = types.ExperimentConfig(
            network=cfg.network,
            budget=budget,
            train=cfg.train,
            data=cfg.data,
            mapping=cfg.mapping,
            output=out,
            seed=cfg.seed,
            document=cfg.document
        )

        resolved, _ = resolve_mapping(run_cfg, mapping, train_set=train_set)
        model = build_model(run_cfg, resolved, budget)
        metrics = training.fit(model, train_set, cfg.train, eval_set=eval_set if len(eval_set) else None, progress=progress)
        last = metrics.last()

        rows.append({
            "groups": resolved.groups,
            "templates": max_templates,
            "combiner": combiner,
            "upsampler": upsampler,
            "regime": archspec.classify_regime(cfg.network, budget),
            "params_theta": last.params_theta,
            "params_overhead": last.params_overhead,
            "train_loss": last.train_loss,
            "eval_error_at_1": last.eval_error_at_1
        })

        log.info("Sweep row %s", rows[-1])

    if reduced:
        baseline = reduced_baseline(cfg.network, cfg.budget.total_params)
        reduced_train, reduced_eval = load_data(cfg, baseline.network)
        model = models.PlainModel(baseline.network, seed=cfg.seed)
        last = training.fit(
            model, reduced_train, cfg.train, eval_set=reduced_eval if len(reduced_eval) else None, progress=progress
        ).last()

        rows.append({
            "groups": len(cfg.network.layers),
            "templates": 1,
            "combiner": "reduced",
            "upsampler": "none",
            "regime": archspec.REGIME_LB if baseline.network.total_weights < cfg.network.total_weights else archspec.REGIME_EXACT,
            "params_theta": last.params_theta,
            "params_overhead": 0,
            "train_loss": last.train_loss,
            "eval_error_at_1": last.eval_error_at_1
        })

    with open(file=os.path.join(out, config.SWEEP_NAME), mode="w", encoding="utf-8", newline="") as file:
        writer = csv.DictWriter(file, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)

    return rows


def dump_weights(model: models.Model, directory: str) -> typing.List[str]:
    """
    One text file per layer: a shape header, then the flat weights.
    """

    os.makedirs(directory, exist_ok=True)

    weights = model.generate_weights()
    paths = []

    for layer in model.net.layers:
        path = os.path.join(directory, f"{layer.id}.txt")
        numpy.savetxt(
            path,
            weights[layer.id].data.reshape(-1),
            fmt=config.FLOAT_FORMAT,
            header="shape: " + " ".join(str(extent) for extent in layer.weight_shape)
        )
        paths.append(path)

    log.info("Dumped %d layer weight files to %s", len(paths), directory)

    return paths


def read_weight_dump(path: str) -> numpy.ndarray:

    with open(file=path, mode="r", encoding="utf-8") as file:
        header = file.readline()

    shape = tuple(int(extent) for extent in header.split(sep=":")[1].split())

    return numpy.atleast_1d(numpy.loadtxt(path)).reshape(shape)


__all__ = [
    "forward",
    "error_at_k",
    "evaluate",
    "resolve_mapping",
    "check_census",
    "build_model",
    "scale_widths",
    "reduced_baseline",
    "train",
    "load_model",
    "materialize",
    "evaluate_run",
    "report",
    "format_report",
    "run_map",
    "sweep",
    "dump_weights",
    "read_weight_dump"
]
