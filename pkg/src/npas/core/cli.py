import argparse
import logging
import os
import sys
import typing

from .. import types
from .. import config
from .. import exceptions
from .. import utils
from ..__version__ import __version__
from . import archspec
from . import harness

log = logging.getLogger(__name__)


def _load(args: argparse.Namespace) -> types.ExperimentConfig:

    cfg = archspec.load_experiment(args.config)

    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed

    return cfg


def _progress(args: argparse.Namespace) -> bool:
    return not args.quiet and sys.stderr.isatty()


def cmd_plan(args: argparse.Namespace) -> int:

    document = harness.report(_load(args), mapping=args.mapping)
    print(harness.format_report(document))

    return 0


def cmd_report(args: argparse.Namespace) -> int:

    cfg = _load(args)
    out = args.out if args.out is not None else cfg.output

    document = harness.report(cfg, mapping=args.mapping)

    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, config.REPORT_NAME)
    harness.write_json(document, path)

    print(harness.format_report(document))
    print(f"wrote {path}")

    return 0


def cmd_map(args: argparse.Namespace) -> int:

    cfg = _load(args)
    result = harness.run_map(cfg, output=args.output, progress=_progress(args))

    for layer_id, group_id in result.mapping.assignment.items():
        print(f"{layer_id}\t{group_id}")

    return 0


def cmd_train(args: argparse.Namespace) -> int:

    cfg = _load(args)
    result = harness.train(cfg, mapping=args.mapping, out=args.out, kind=args.model, progress=_progress(args))
    census = result.model.census()
    last = result.metrics.last() if len(result.metrics) else None

    print(f"census: theta {census.theta}, overhead {census.overhead}, biases {census.biases}, total {census.total}")

    if last is not None:
        print(f"final: train loss {last.train_loss:.6f}, eval error@1 {last.eval_error_at_1}")

    print(f"wrote {result.paths['checkpoint']}")

    return 0


def cmd_eval(args: argparse.Namespace) -> int:

    cfg = _load(args) if args.config else None
    result = harness.evaluate_run(checkpoint_path=args.checkpoint, weights_path=args.weights, cfg=cfg)

    source = args.checkpoint if args.checkpoint is not None else args.weights
    out = args.out if args.out is not None else os.path.dirname(os.path.abspath(source))
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, config.EVAL_NAME)
    harness.write_json(result.to_dict(), path)

    print(f"loss {result.loss:.6f}, error@1 {result.error_at_1:.4f}, error@5 {result.error_at_5}, samples {result.samples}")

    return 0


def cmd_materialize(args: argparse.Namespace) -> int:

    model, path = harness.materialize(args.checkpoint, out_path=args.output)

    print(f"wrote {path} ({model.census().theta} weights)")

    if args.dump is not None:
        directory = args.dump or os.path.join(os.path.dirname(os.path.abspath(path)), config.DUMP_DIRECTORY)
        harness.dump_weights(model, directory)
        print(f"dumped layer weights to {directory}")

    return 0


def cmd_sweep(args: argparse.Namespace) -> int:

    cfg = _load(args)
    rows = harness.sweep(
        cfg,
        groups=utils.parse_list(args.groups) if args.groups else None,
        templates=utils.parse_list(args.templates) if args.templates else None,
        combiners=utils.parse_list(args.combiners, cast=str) if args.combiners else None,
        upsamplers=utils.parse_list(args.upsamplers, cast=str) if args.upsamplers else None,
        mapping=args.mapping,
        out=args.out,
        reduced=args.reduced,
        progress=_progress(args)
    )

    print(",".join(harness.SWEEP_COLUMNS))

    for row in rows:
        print(",".join(str(row[column]) for column in harness.SWEEP_COLUMNS))

    return 0


def build_parser() -> argparse.ArgumentParser:

    parser = argparse.ArgumentParser(
        prog="npas",
        description="Train networks under a fixed parameter budget with learned cross-layer sharing."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="errors only, no progress bars")

    commands = parser.add_subparsers(dest="command", metavar="<command>")
    commands.required = True

    def add(name: str, handler: typing.Callable, summary: str, needs_config: bool = True) -> argparse.ArgumentParser:

        command = commands.add_parser(name, help=summary)
        command.set_defaults(handler=handler)
        command.add_argument("-c", "--config", required=needs_config, help="experiment config (YAML)")
        command.add_argument("--seed", type=int, help="override the experiment seed")

        return command

    def add_mapping(command: argparse.ArgumentParser) -> None:
        command.add_argument("--mapping", help="auto, single, random or a mapping file")

    plan = add("plan", cmd_plan, "print the budget and FLOP report")
    add_mapping(plan)

    report = add("report", cmd_report, "write the budget and FLOP report as JSON")
    add_mapping(report)
    report.add_argument("--out", help="output directory")

    mapping = add("map", cmd_map, "learn a layer to group mapping")
    mapping.add_argument("-o", "--output", help="mapping file to write")

    train = add("train", cmd_train, "train a model and write metrics and a checkpoint")
    add_mapping(train)
    train.add_argument("--out", help="output directory")
    train.add_argument("--model", choices=harness.MODEL_KINDS, default="shared", help="model to train")

    evaluate = add("eval", cmd_eval, "evaluate a checkpoint or materialized weights", needs_config=False)
    source = evaluate.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint", help="checkpoint file")
    source.add_argument("--weights", help="materialized weights file (needs -c)")
    evaluate.add_argument("--out", help="directory for the eval record")

    materialize = add("materialize", cmd_materialize, "generate weights once and write them", needs_config=False)
    materialize.add_argument("--checkpoint", required=True, help="checkpoint file")
    materialize.add_argument("-o", "--output", help="weights file to write")
    materialize.add_argument(
        "--dump",
        nargs="?",
        const="",
        help=f"also write per-layer text dumps (default: {config.DUMP_DIRECTORY}/ next to the weights file)"
    )

    sweep = add("sweep", cmd_sweep, "train over lists of groups, templates, combiners and upsamplers")
    add_mapping(sweep)
    sweep.add_argument("--out", help="output directory")
    sweep.add_argument("--groups", help="comma separated numbers of groups")
    sweep.add_argument("--templates", help="comma separated template counts")
    sweep.add_argument("--combiners", help=f"comma separated subset of {','.join(config.COMBINERS)}")
    sweep.add_argument("--upsamplers", help=f"comma separated subset of {','.join(config.UPSAMPLERS)}")
    sweep.add_argument("--reduced", action="store_true", help="add a width-reduced baseline row")

    return parser


def _configure_logging(args: argparse.Namespace) -> None:

    if args.quiet:
        level = logging.ERROR
    elif args.verbose >= 2:
        level = logging.DEBUG
    elif args.verbose == 1:
        level = logging.INFO
    else:
        level = getattr(logging, config.log_level(), logging.WARNING)

    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:

    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as exception:
        return exception.code if isinstance(exception.code, int) else 2

    _configure_logging(args)

    try:
        return args.handler(args)
    except exceptions.NpasException as exception:
        print(f"npas: error: {exception}", file=sys.stderr)
        return 1
