#!/usr/bin/env python3
"""
dnr: command-line surface for deep feature retargeting

    dnr retarget --config cfg.json --width-frac 0.75 --out out.ppm in.ppm
    dnr inspect --out-dir artifacts in.ppm
    dnr score --original a.ppm --candidate b.ppm
    dnr export-weights tinyvgg.dnrw

Exit codes: 0 success, 2 unreadable image, 3 invalid configuration or
weight file, 4 optimiser divergence.
"""

import functools
import json
import os
import sys

import click
from colorama import Fore, Style

import retarget_config as rc
import retarget_pipeline as pipeline
from feature_network import WeightFormatError, network_tensors, save_weights
from image_io import ImageDecodeError, read_image
from reconstructor import DivergenceError

EXIT_DECODE = 2
EXIT_CONFIG = 3
EXIT_DIVERGED = 4


def _fail(code: int, message: str) -> None:
    click.echo(f"{Fore.RED}error:{Style.RESET_ALL} {message}", err=True)
    sys.exit(code)


def guarded(command):
    """Map domain errors to their exit codes"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except ImageDecodeError as exc:
            _fail(EXIT_DECODE, str(exc))
        except (rc.ConfigError, WeightFormatError) as exc:
            _fail(EXIT_CONFIG, str(exc))
        except DivergenceError as exc:
            _fail(EXIT_DIVERGED, str(exc))
    return wrapper


def _number_list(value):
    if value is None:
        return None
    try:
        return [float(part) for part in value.split(",")]
    except ValueError:
        return value


def _tap_list(value):
    if value is None or value == "default":
        return value
    try:
        return [int(part) for part in value.split(",")]
    except ValueError:
        raise rc.ConfigError(f"--taps must be 'default' or comma-separated layer indices, got '{value}'") from None


CONFIG_OPTIONS = [
    click.option("--config", "config_path", type=click.Path(), help="JSON config file"),
    click.option("--width-frac", "width_fraction", type=float, help="Target width as a fraction of the source"),
    click.option("--width", "target_width", type=int, help="Absolute target width (wins over --width-frac)"),
    click.option("--axis", type=click.Choice(rc.AXES), help="Shrink width or height"),
    click.option("--taps", help="'default' or comma-separated tap layer indices"),
    click.option("--weights", help="Tap weights: preset name or comma-separated values"),
    click.option("--alpha", type=float, help="Attenuation inside deeper seams' receptive fields"),
    click.option("--percentile", type=float, help="Seam admissibility percentile"),
    click.option("--cell-width", type=int, help="Grid warp column cell width"),
    click.option("--max-ratio", type=float, help="Largest fraction of a tap's width to carve"),
    click.option("--hierarchical/--independent", default=None, help="Attenuate finer taps by deeper seams"),
    click.option("--lr", "learning_rate", type=float, help="Reconstruction learning rate"),
    click.option("--iterations", type=int, help="Reconstruction iterations"),
    click.option("--refine-lr", "refine_learning_rate", type=float, help="Refinement learning rate"),
    click.option("--refine-iterations", type=int, help="Refinement iterations"),
    click.option("--grid-clamp", type=float, help="Largest grid displacement in pixels"),
    click.option("--init", "init_mode", type=click.Choice(rc.INIT_MODES), help="Initial estimate"),
    click.option("--seed", type=int, help="Seed for noise initialisation"),
    click.option("--weight-seed", type=int, help="Seed for the built-in network weights"),
    click.option("--network", help="'tinyvgg' or a DNRW weight file"),
    click.option("--score-tap", type=int, help="Tap used for the semantic score (negative counts from the deepest)"),
    click.option("--timings/--no-timings", "report_timings", default=None, help="Include wall-clock timings"),
    click.option("--print-config", is_flag=True, help="Print the resolved config and exit"),
]


def config_options(command):
    for option in reversed(CONFIG_OPTIONS):
        command = option(command)
    return command


def resolve_config(config_path=None, print_config=False, **flags):
    """Defaults, then the config file, then flags; validated"""
    config = rc.create_retarget_config()
    if config_path:
        config = rc.merge_config(config, rc.load_config_file(config_path))
    flags["weights"] = _number_list(flags.get("weights"))
    flags["taps"] = _tap_list(flags.get("taps"))
    config = rc.validate_config(rc.merge_config(config, flags))
    if print_config:
        click.echo(rc.config_to_json(config))
        sys.exit(0)
    return config


@click.group()
@click.option("-v", "--verbose", count=True, help="More log output (repeatable)")
@click.option("-q", "--quiet", is_flag=True, help="Errors only")
@click.version_option(pipeline.__version__, prog_name="dnr")
def cli(verbose, quiet):
    """Content-aware image retargeting by seam carving in CNN feature space"""
    rc.configure_logging(verbose, quiet)


@cli.command()
@click.argument("inputs", nargs=-1, required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output image, or a directory when several inputs are given")
@click.option("--report", "report_path", type=click.Path(), help="Write the JSON report here instead of stdout")
@click.option("--snapshots", "snapshot_dir", type=click.Path(), help="Write optimiser snapshots as PPM files")
@click.option("--dump-dir", type=click.Path(), help="Write SeamPlan, WarpPlan, intermediate image and loss CSVs")
@click.option("--plan", "plan_path", type=click.Path(), help="Replay a dumped SeamPlan instead of planning")
@config_options
@guarded
def retarget(inputs, out_path, report_path, snapshot_dir, dump_dir, plan_path, **options):
    """Shrink INPUTS to the configured width (or height)"""
    config = resolve_config(**options)
    net = pipeline.load_network(config)

    if len(inputs) == 1 and not os.path.isdir(out_path):
        seam_plan = None
        if plan_path:
            try:
                with open(plan_path) as handle:
                    seam_plan = json.load(handle)
            except (OSError, json.JSONDecodeError) as exc:
                raise rc.ConfigError(f"Cannot read seam plan {plan_path}: {exc}") from exc
        report = pipeline.retarget_file(inputs[0], out_path, config, net, seam_plan, dump_dir, snapshot_dir)
        if report_path:
            pipeline.write_report(report_path, report)
        else:
            click.echo(json.dumps(report, indent=2, sort_keys=True))
        return

    if plan_path:
        raise rc.ConfigError("--plan applies to a single input only")
    os.makedirs(out_path, exist_ok=True)
    jobs = [(path, os.path.join(out_path, os.path.basename(path))) for path in inputs]
    reports = pipeline.retarget_files(jobs, config, net, dump_dir, snapshot_dir)
    for (_, output), report in zip(jobs, reports):
        pipeline.write_report(os.path.splitext(output)[0] + ".json", report)
    click.echo(f"Retargeted {len(reports)} images into {out_path}")


@cli.command()
@click.argument("input_path", type=click.Path())
@click.option("--out-dir", required=True, type=click.Path(), help="Directory for the artifacts")
@config_options
@guarded
def inspect(input_path, out_dir, **options):
    """Export importance maps, seam overlays and plans for INPUT_PATH"""
    config = resolve_config(**options)
    net = pipeline.load_network(config)
    record = pipeline.inspect_image(read_image(input_path), config, net, out_dir)
    record["input"] = os.path.basename(input_path)
    click.echo(json.dumps(record, indent=2, sort_keys=True))


@cli.command()
@click.option("--original", required=True, type=click.Path(), help="Original image")
@click.option("--candidate", required=True, type=click.Path(), help="Retargeted image")
@click.option("--method", default="candidate", help="Label for the report")
@config_options
@guarded
def score(original, candidate, method, **options):
    """Semantic score of CANDIDATE against ORIGINAL"""
    config = resolve_config(**options)
    net = pipeline.load_network(config)
    report = pipeline.score_images(net, read_image(original), read_image(candidate), int(config["score_tap"]),
                                   name=os.path.basename(candidate), method=method)
    click.echo(json.dumps(report, sort_keys=True))


@cli.command("export-weights")
@click.argument("path", type=click.Path())
@click.option("--weight-seed", type=int, default=None, help="Seed for the built-in network weights")
@guarded
def export_weights(path, weight_seed):
    """Write the seeded tinyvgg weights to PATH as a DNRW file"""
    config = rc.create_retarget_config()
    if weight_seed is not None:
        config["weight_seed"] = weight_seed
    net = pipeline.load_network(config)
    save_weights(network_tensors(net), path)
    click.echo(f"Wrote {len(network_tensors(net))} tensors to {path}")


if __name__ == "__main__":
    cli()
