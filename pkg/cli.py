"""
pidforge command line front end
One executable, one subcommand per pipeline stage
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, get_args, get_origin

from dotenv import load_dotenv
from PIL import Image
from pydantic import ValidationError

from pidforge import LOG_FORMAT, PidForgePipeline
from src.annotation_io import FoldPlanner, GraphMLStore
from src.config import (
    DedupConfig, FoldConfig, GenConfig, MetricConfig, NOISE_PRESETS, NoiseConfig,
    PatchSpec, RunConfig, StitchConfig, config_self_test, load_run_config,
)
from src.errors import PidForgeError, UsageError
from src.generator import TemplateBaselineGenerator
from src.graph_processor import CrossingMode
from src.patcher import WINDOW_INDEX_NAME, read_window_index
from src.toy_plans import ToyPlanFactory

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INTERNAL = 3

NOISE_FIELDS = ("box_sigma", "p_drop", "fp_rate", "p_cls", "p_edrop", "p_eflip")

EPILOG = """
Examples:
  pidforge collapse in.graphml out.graphml
  pidforge generate --seeds seeds/ --out corpus/ --target 50 --attempts-cap 500
  pidforge patch corpus/ --out patches/
  pidforge detsim --gt-patches patches/plan/ --noise-preset low --out preds/plan/
  pidforge stitch --patches preds/plan/ --out stitched/plan.graphml
  pidforge eval --pred stitched/ --gt corpus/ --report report.json
  pidforge stats corpus/ --csv stats.csv
"""


class PidForgeArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so run() owns the exit code"""

    def error(self, message: str) -> None:
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got '{raw}'")


def add_model_flags(parser: argparse.ArgumentParser, section: str, model: type) -> None:
    """
    Add one --flag per field of a config model; dest is <section>__<field>

    Args:
        parser: Subcommand parser
        section: RunConfig section name
        model: Pydantic config class
    """
    group = parser.add_argument_group(f"{section} settings")
    for name, field in model.model_fields.items():
        annotation = field.annotation
        kwargs: Dict[str, Any] = {
            "dest": f"{section}__{name}",
            "default": None,
            "help": f"{field.description or name} (default: {field.get_default(call_default_factory=True)})",
        }
        origin = get_origin(annotation)
        if origin in (tuple, list):
            kwargs["type"] = get_args(annotation)[0]
            kwargs["nargs"] = 2 if origin is tuple else "+"
        elif annotation is bool:
            kwargs["type"] = _parse_bool
        else:
            kwargs["type"] = annotation
        group.add_argument(f"--{name.replace('_', '-')}", **kwargs)


def collect_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Gather <section>__<field> flags into {section: {field: value}} plus top-level settings"""
    overrides: Dict[str, Any] = {}
    for dest, value in vars(args).items():
        if "__" not in dest or value is None:
            continue
        section, field = dest.split("__", 1)
        overrides.setdefault(section, {})[field] = value
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    overrides["verbosity"] = args.verbose - args.quiet
    return overrides


def configure_logging(verbose: int, quiet: int) -> None:
    level = logging.INFO
    if verbose > 0:
        level = logging.DEBUG
    elif quiet > 0:
        level = logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def cmd_collapse(args: argparse.Namespace, config: RunConfig) -> int:
    PidForgePipeline(config).collapse_file(args.input, args.output, CrossingMode(args.crossing))
    return EXIT_OK


def cmd_generate(args: argparse.Namespace, config: RunConfig) -> int:
    seeds = GraphMLStore.read_directory(args.seeds)
    report = PidForgePipeline(config).generate(seeds, args.out, args.target, args.attempts_cap)
    print(report.summary())
    return EXIT_OK


def cmd_patch(args: argparse.Namespace, config: RunConfig) -> int:
    pipeline = PidForgePipeline(config)
    source = Path(args.plan)
    if source.is_dir():
        plan_dirs = pipeline.patch_corpus(str(source), args.out)
    else:
        graph = GraphMLStore.read_graphml(str(source))
        image = None
        image_path = source.with_suffix(".png")
        if image_path.exists():
            image = Image.open(image_path)
        patch_set = pipeline.patcher.patch_plan(graph, args.plan_id or source.stem, image)
        plan_dirs = [pipeline.patcher.write_patch_set(patch_set, args.out)]
    for plan_dir in plan_dirs:
        print(plan_dir)
    return EXIT_OK


def cmd_detsim(args: argparse.Namespace, config: RunConfig) -> int:
    written = PidForgePipeline(config).simulator.corrupt_patches(args.gt_patches, args.out)
    print(f"{written} patches written to {args.out}")
    return EXIT_OK


def cmd_stitch(args: argparse.Namespace, config: RunConfig) -> int:
    pipeline = PidForgePipeline(config)
    index = read_window_index(args.windows or str(Path(args.patches) / WINDOW_INDEX_NAME))
    predictions = pipeline.stitcher.read_predictions(args.patches, index)
    stitched = pipeline.stitcher.stitch(predictions, index)
    GraphMLStore.write_graphml(stitched, args.out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, config: RunConfig) -> int:
    reports = PidForgePipeline(config).evaluate(args.pred, args.gt, args.report)
    for report in reports:
        print(f"{report.plan_id}\tnode_mAP={report.node_map:.4f}\tedge_mAP={report.edge_map:.4f}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace, config: RunConfig) -> int:
    summary = PidForgePipeline(config).corpus_stats(args.corpus, args.csv, args.compare)
    print("\t".join(summary.row()))
    return EXIT_OK


def cmd_folds(args: argparse.Namespace, config: RunConfig) -> int:
    plan_ids = [path.stem for path in sorted(Path(args.corpus).glob("*.graphml"))]
    splits = FoldPlanner.make_folds(plan_ids, config.folds.k, config.folds.seeds)
    for path in FoldPlanner.write_folds(splits, args.out):
        print(path)
    return EXIT_OK


def cmd_toy(args: argparse.Namespace, config: RunConfig) -> int:
    written = ToyPlanFactory.write_toy_data(args.out, args.seed, args.raw_count, args.tiled_count)
    for subdir, paths in written.items():
        print(f"{subdir}: {len(paths)} plans")
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace, config: RunConfig) -> int:
    baseline = TemplateBaselineGenerator(PidForgePipeline(config).generator, args.neighbours)
    plan_ids = baseline.write_corpus(args.out, args.count, args.nodes)
    print(f"{len(plan_ids)} baseline plans written to {args.out}")
    return EXIT_OK


def cmd_e2e(args: argparse.Namespace, config: RunConfig) -> int:
    summary = PidForgePipeline(config).run_end_to_end(args.work, args.target, args.attempts_cap)
    print(
        f"plans={summary.count}\tnode_mAP={summary.node_map_mean:.4f}±{summary.node_map_std:.4f}"
        f"\tedge_mAP={summary.edge_map_mean:.4f}±{summary.edge_map_std:.4f}"
    )
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace, config: RunConfig) -> int:
    failures = config_self_test(config)
    for failure in failures:
        print(f"FAIL: {failure}")
    if failures:
        return EXIT_INTERNAL
    print("ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = PidForgeArgumentParser(add_help=False)
    common.add_argument("--config", default=None, metavar="FILE", help="dotenv config file (or $PIDFORGE_CONFIG)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="debug logging")
    common.add_argument("-q", "--quiet", action="count", default=0, help="warnings only")
    common.add_argument("--jobs", type=int, default=None, metavar="N", help="worker cap")

    parser = PidForgeArgumentParser(
        prog="pidforge",
        description="P&ID graph pipeline: collapse, generate, patch, detsim, stitch, eval",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    subparsers = parser.add_subparsers(dest="command", parser_class=PidForgeArgumentParser)

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, parents=[common], help=help_text, description=help_text)
        sub.set_defaults(handler=handler)
        return sub

    collapse = add("collapse", cmd_collapse, "Contract connector chains and delete crossings")
    collapse.add_argument("input", metavar="IN", help="raw-stage GraphML")
    collapse.add_argument("output", metavar="OUT", help="collapsed GraphML destination")
    collapse.add_argument("--crossing", choices=[m.value for m in CrossingMode], default=CrossingMode.DELETE.value)

    generate = add("generate", cmd_generate, "Generate a deduplicated synthetic corpus from seed plans")
    generate.add_argument("--seeds", required=True, metavar="DIR", help="directory of collapsed seed plans")
    generate.add_argument("--out", required=True, metavar="DIR")
    generate.add_argument("--target", type=int, required=True, metavar="N")
    generate.add_argument("--attempts-cap", type=int, required=True, metavar="M")
    add_model_flags(generate, "gen", GenConfig)
    add_model_flags(generate, "dedup", DedupConfig)

    patch = add("patch", cmd_patch, "Tile a plan (or every plan in a directory) into overlapping windows")
    patch.add_argument("plan", metavar="PLAN", help="collapsed GraphML file or directory")
    patch.add_argument("--out", required=True, metavar="DIR")
    patch.add_argument("--plan-id", default=None, help="plan id for a single file (default: file stem)")
    add_model_flags(patch, "patch", PatchSpec)

    detsim = add("detsim", cmd_detsim, "Simulate detector output on ground-truth patches")
    detsim.add_argument("--gt-patches", required=True, metavar="DIR", help="patch directory with windows.json")
    detsim.add_argument("--out", required=True, metavar="DIR")
    noise_level = detsim.add_mutually_exclusive_group()
    noise_level.add_argument("--noise-preset", choices=sorted(NOISE_PRESETS), default=None)
    noise_level.add_argument("--noise-level", type=float, default=None, metavar="L")
    add_model_flags(detsim, "noise", NoiseConfig)

    stitch = add("stitch", cmd_stitch, "Merge patch predictions into one plan graph")
    stitch.add_argument("--patches", required=True, metavar="DIR", help="directory of <x0>_<y0>.graphml predictions")
    stitch.add_argument("--windows", default=None, metavar="FILE", help="window index (default: DIR/windows.json)")
    stitch.add_argument("--out", required=True, metavar="FILE")
    add_model_flags(stitch, "stitch", StitchConfig)

    evaluate = add("eval", cmd_eval, "Node and edge mAP of predicted plans against ground truth")
    evaluate.add_argument("--pred", required=True, metavar="DIR")
    evaluate.add_argument("--gt", required=True, metavar="DIR")
    evaluate.add_argument("--report", default=None, metavar="FILE", help="JSON report destination")
    add_model_flags(evaluate, "metric", MetricConfig)

    stats = add("stats", cmd_stats, "Per-plan structure CSV and corpus summary")
    stats.add_argument("corpus", metavar="DIR")
    stats.add_argument("--csv", required=True, metavar="FILE")
    stats.add_argument("--compare", default=None, metavar="DIR", help="second corpus for degree comparison")

    folds = add("folds", cmd_folds, "Write cross-validation fold files")
    folds.add_argument("corpus", metavar="DIR")
    folds.add_argument("--out", required=True, metavar="DIR")
    add_model_flags(folds, "folds", FoldConfig)

    toy = add("toy", cmd_toy, "Write raw, seed and tiled toy plans")
    toy.add_argument("--out", required=True, metavar="DIR")
    toy.add_argument("--seed", type=int, default=0)
    toy.add_argument("--raw-count", type=int, default=3)
    toy.add_argument("--tiled-count", type=int, default=3)

    baseline = add("baseline", cmd_baseline, "Random-layout template baseline corpus")
    baseline.add_argument("--out", required=True, metavar="DIR")
    baseline.add_argument("--count", type=int, required=True, metavar="N")
    baseline.add_argument("--nodes", type=int, default=10, metavar="N", help="symbols per plan")
    baseline.add_argument("--neighbours", type=int, default=2, metavar="K")
    add_model_flags(baseline, "gen", GenConfig)

    e2e = add("e2e", cmd_e2e, "generate -> patch -> detsim -> stitch -> eval on the toy seeds")
    e2e.add_argument("--work", required=True, metavar="DIR")
    e2e.add_argument("--target", type=int, default=5)
    e2e.add_argument("--attempts-cap", type=int, default=100)
    add_model_flags(e2e, "noise", NoiseConfig)

    add("selftest", cmd_selftest, "Check defaults against the published constants")
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    overrides = collect_overrides(args)
    level = getattr(args, "noise_level", None)
    if getattr(args, "noise_preset", None):
        level = NOISE_PRESETS[args.noise_preset]
    if level is not None:
        preset = NoiseConfig.from_level(level).model_dump(include=set(NOISE_FIELDS))
        overrides["noise"] = {**preset, **overrides.get("noise", {})}
    return load_run_config(args.config, overrides)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse argv, run one subcommand and map failures to exit codes

    Args:
        argv: Arguments without the program name; sys.argv[1:] when None

    Returns:
        0 success, 1 usage, 2 data error, 3 internal invariant failure
    """
    load_dotenv()
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(f"a subcommand is required\n{parser.format_usage()}")
        configure_logging(args.verbose, args.quiet)
        try:
            config = resolve_config(args)
        except ValidationError as exc:
            raise UsageError(f"invalid configuration: {exc}") from exc
        return args.handler(args, config)
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return exc.exit_code
    except PidForgeError as exc:
        logger.error(f"❌ {type(exc).__name__}: {exc}")
        return exc.exit_code
    except Exception as exc:
        logger.error(f"❌ Unexpected error: {exc}", exc_info=True)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
