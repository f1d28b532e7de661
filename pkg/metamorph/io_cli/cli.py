"""Command-line interface: run, register, interpolate, validate."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from metamorph import __version__
from metamorph.geodesic import presmooth, run_cascadic, warp_midpoint
from metamorph.grid_fem import ScalarField
from metamorph.io_cli.config import FLAT_KEYS, RunConfig, build_run_config, parse_config_file
from metamorph.io_cli.deformation_file import write_deformation
from metamorph.io_cli.images import ChannelMode, image_suffix, load_image, save_image, to_uint8, write_raster
from metamorph.io_cli.outputs import load_run_config, load_saved_path, render_frames, save_outputs
from metamorph.io_cli.rendering import max_motion, motion_image
from metamorph.io_cli.validate import results_table, run_validation
from metamorph.registration import register
from metamorph.utils.errors import InvalidInputError, MetamorphError
from metamorph.utils.logging import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Invalid flag combination detected after parsing."""
    pass


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("energy")
    group.add_argument("--model", choices=["ogden", "simplified"])
    group.add_argument("--gamma", type=float)
    group.add_argument("--delta", type=float)
    group.add_argument("--lambda", dest="lambda_", type=float)
    group.add_argument("--mu", type=float)
    group.add_argument("--q", type=float)
    group.add_argument("--r", type=float)
    group.add_argument("--s", type=float)
    group.add_argument("--m", type=int)
    group.add_argument("--identity-offset", action="store_const", const=True)
    group.add_argument("--weights", help="comma-separated per-channel matching weights")


def _add_input_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--image-a")
    parser.add_argument("--image-b")
    parser.add_argument("--mode", choices=[m.value for m in ChannelMode])
    parser.add_argument("--out")
    parser.add_argument("--config", help="key=value configuration file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metamorph",
        description="Discrete geodesic paths between images in the metamorphosis model",
    )
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING (default: METAMORPH_LOG_LEVEL or INFO)")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="full cascadic solve")
    _add_input_flags(run)
    run.add_argument("--seg-a")
    run.add_argument("--seg-b")
    run.add_argument("--levels", type=int)
    run.add_argument("--threshold", type=float)
    run.add_argument("--sigma2", type=float)
    run.add_argument("--max-sweeps", type=int)
    run.add_argument("--workers", type=int)
    run.add_argument("--frames", type=int)
    run.add_argument("--dump-raw", action="store_const", const=True)
    _add_model_flags(run)

    reg = sub.add_parser("register", help="register one image pair")
    _add_input_flags(reg)
    _add_model_flags(reg)

    interp = sub.add_parser("interpolate", help="render frames from a saved run")
    interp.add_argument("--run-dir", required=True)
    interp.add_argument("--frames", type=int, required=True)
    interp.add_argument("--out", help="frame directory (default: <run-dir>/frames)")

    sub.add_parser("validate", help="run the self-check suite")
    return parser


def _cli_values(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted RunConfig locations of the flags actually given."""
    values = {}
    for key, dotted in FLAT_KEYS.items():
        attr = "lambda_" if key == "lambda" else key.replace("-", "_")
        value = getattr(args, attr, None)
        if value is not None:
            values[dotted] = value
    return values


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    try:
        file_values = parse_config_file(Path(args.config)) if args.config else {}
    except InvalidInputError as exc:
        raise UsageError(str(exc)) from exc
    cli_values = _cli_values(args)
    merged = {**file_values, **cli_values}
    missing = [flag for flag, key in (("--image-a", "image_a"), ("--image-b", "image_b")) if key not in merged]
    if missing:
        raise UsageError(f"missing required input {', '.join(missing)}")
    return build_run_config(file_values, cli_values)


def _load_inputs(config: RunConfig):
    image_a = load_image(config.image_a, config.mode)
    image_b = load_image(config.image_b, config.mode, image_a.grid)
    if config.has_segmentation:
        seg_a = load_image(config.seg_a, ChannelMode.GRAY, image_a.grid)
        seg_b = load_image(config.seg_b, ChannelMode.GRAY, image_a.grid)
        image_a = ScalarField(image_a.grid, np.concatenate([image_a.values, seg_a.values]))
        image_b = ScalarField(image_b.grid, np.concatenate([image_b.values, seg_b.values]))
    return image_a, image_b


def cmd_run(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    image_a, image_b = _load_inputs(config)
    path = run_cascadic(image_a, image_b, config.solver)
    save_outputs(path, config)
    logger.info(f"Final path energy {path.energy(config.solver.material).scaled_total:.6e}")
    return EXIT_OK


def cmd_register(args: argparse.Namespace) -> int:
    """Register image B onto image A and write the deformation, the warped image and its motion field."""
    config = _resolve_config(args)
    image_a, image_b = _load_inputs(config)
    grid = image_a.grid
    sigma2 = config.solver.smoothing_variance(grid, image_a.channels)
    u_a, u_b = presmooth(image_a, sigma2), presmooth(image_b, sigma2)

    result = register(grid, u_a, u_b, None, config.solver.material, config.solver.registration)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_deformation(out / "phi.mfd", result.deformation)
    half = warp_midpoint(u_b, result.deformation)
    save_image(out / f"midpoint{image_suffix(config.image_channels)}",
               ScalarField(grid, half.values[:config.image_channels]))
    disp = result.deformation.displacement
    write_raster(out / "motion.ppm", to_uint8(motion_image(grid, disp, 1, max_motion(disp[None], 1))))
    logger.info(
        f"Registration: {result.iterations} iterations, energy {result.energy_trace[0]:.6e} -> "
        f"{result.final_energy:.6e}{' (stalled)' if result.stalled else ''}"
    )
    return EXIT_OK


def cmd_interpolate(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    config = load_run_config(run_dir)
    path = load_saved_path(run_dir)
    if args.frames < path.K + 1:
        raise UsageError(f"--frames must be at least K+1 = {path.K + 1}")
    render_frames(path, args.frames, Path(args.out) if args.out else run_dir / "frames", config.image_channels)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_validation()
    print(results_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


COMMANDS = {
    "run": cmd_run,
    "register": cmd_register,
    "interpolate": cmd_interpolate,
    "validate": cmd_validate,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, dispatch the subcommand and map failures to exit codes.

    Returns:
        0 on success, 1 on a run failure, 2 on a usage or configuration error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE

    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        logger.error(f"Usage error: {exc}")
        return EXIT_USAGE
    except ValidationError as exc:
        logger.error(f"Invalid configuration: {exc}")
        return EXIT_USAGE
    except (MetamorphError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        return EXIT_FAILURE
