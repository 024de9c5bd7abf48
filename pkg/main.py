"""Holographic teleportation simulator - Main entry point."""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from cli import commands
from cli.run_config import parse_config
from errors import (
    BadImageFormat,
    ConfigError,
    GridTooCoarse,
    QuadratureNotConverged,
    ValidationFailed,
)

# Command-line flag -> dotted configuration key
FLAG_KEYS = {
    "sigma": "opa.sigma",
    "delta0": "opa.delta0",
    "gvm": "opa.gvm",
    "gvd": "opa.gvd",
    "pump_phase": "opa.pump_phase",
    "pixel_size": "grid.delta",
    "t_window": "grid.t_window",
    "nx": "grid.nx",
    "ny": "grid.ny",
    "nt": "grid.nt",
    "samples": "mc.n_samples",
    "seed": "mc.seed",
    "margin": "mc.margin",
    "tol": "quadrature.tol",
    "degree": "compensation.degree",
    "budget": "compensation.budget",
    "profile": "compensation.profile",
    "output_field": "output_field",
    "out": "out_dir",
    "threads": "threads",
}


def setup_logging(verbose: bool = False) -> None:
    """Configure logging on standard error; standard output carries data only.

    Args:
        verbose: Enable verbose output.
    """
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--out", type=str, help="Output directory")
    common.add_argument("--seed", type=int, help="Random seed for stochastic subcommands")
    common.add_argument("--threads", type=int, help="Worker threads (wall time only)")
    common.add_argument("--sigma", type=float, help="Pump gain")
    common.add_argument("--delta0", type=float, help="Collinear phase mismatch")
    common.add_argument("--gvm", type=float, help="Group-velocity mismatch coefficient")
    common.add_argument("--gvd", type=float, help="Quadratic dispersion coefficient")
    common.add_argument("--pump-phase", type=float, help="Pump phase in radians")
    common.add_argument("--pixel-size", type=float, help="Pixel size in coherence lengths")
    common.add_argument("--t-window", type=float, help="Bin duration in coherence times")
    common.add_argument("--nx", type=int, help="Pixels per row")
    common.add_argument("--ny", type=int, help="Pixel rows")
    common.add_argument("--nt", type=int, help="Time bins")
    common.add_argument("--samples", type=int, help="Monte Carlo realizations")
    common.add_argument("--margin", type=float, help="Lattice margin in coherence lengths")
    common.add_argument("--tol", type=float, help="Relative quadrature tolerance")
    common.add_argument("--degree", type=int, help="Compensation polynomial degree")
    common.add_argument("--budget", type=int, help="Compensation evaluation budget")
    common.add_argument("--profile", type=str, help="Compensation profile JSON to apply")
    common.add_argument(
        "--output-field",
        type=int,
        choices=[1, 2],
        help="Field carrying the teleported image (2: omega1 -> omega2)",
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Enable verbose logging")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        description="Holographic teleportation simulator - multimode CV teleportation with an OPA"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    ellipse = sub.add_parser("ellipse", parents=[common], help="Squeezing-ellipse dispersion")
    ellipse.add_argument("--omega-min", type=float, default=commands.CommandOptions.omega_min)
    ellipse.add_argument("--omega-max", type=float, default=commands.CommandOptions.omega_max)
    ellipse.add_argument("--count", type=int, default=commands.CommandOptions.count)

    for name, text in (
        ("scan", "Diagonal added noise versus pixel size and bin duration"),
        ("covariance", "Added-noise covariance of every cell pair"),
        ("compensate", "Optimize a compensation profile"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument(
            "--flatten",
            action="store_true",
            help="Cancel the group delay and lens term around the band center",
        )
        if name == "scan":
            p.add_argument("--deltas", type=float, nargs="+", help="Pixel sizes")
            p.add_argument("--t-values", type=float, nargs="+", help="Bin durations")

    validate = sub.add_parser(
        "mc-validate", parents=[common], help="Compare Monte Carlo with quadrature"
    )
    validate.add_argument("--phi", type=float, nargs="+", help="Quadrature phases")

    tele = sub.add_parser("teleport", parents=[common], help="Teleport a PGM image")
    tele.add_argument("image", type=Path, nargs="+", help="PGM file, or one file per time bin")
    tele.add_argument(
        "--scale",
        type=float,
        default=commands.CommandOptions.scale,
        help="Photons per pixel at full gray value",
    )
    return parser


def _options(args: argparse.Namespace) -> commands.CommandOptions:
    values: Dict[str, Any] = {"flatten": getattr(args, "flatten", False)}
    for attr, key in (
        ("omega_min", "omega_min"),
        ("omega_max", "omega_max"),
        ("count", "count"),
        ("deltas", "d_values"),
        ("t_values", "t_values"),
        ("phi", "phis"),
        ("image", "images"),
        ("scale", "scale"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            values[key] = value
    return commands.CommandOptions(**values)


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    logger = logging.getLogger(__name__)

    overrides = {key: getattr(args, flag) for flag, key in FLAG_KEYS.items()}
    try:
        cfg = parse_config(args.config, overrides)
        artifacts = commands.run(args.subcommand, cfg, _options(args))
    except (ConfigError, BadImageFormat) as e:
        logger.error(f"Invalid input: {e}")
        return commands.EXIT_CONFIG
    except (GridTooCoarse, QuadratureNotConverged) as e:
        logger.error(f"Numerical failure: {e}")
        return commands.EXIT_NUMERICS
    except ValidationFailed as e:
        logger.error(f"Validation failed: {e}")
        return commands.EXIT_VALIDATION
    except Exception as e:
        logging.error(f"{args.subcommand} failed: {e}", exc_info=True)
        return commands.EXIT_FAILURE

    for path in artifacts:
        print(path)
    return commands.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
