"""Subcommand implementations.

Each command writes its artifacts under ``<out_dir>/<subcommand>/`` and
returns them together with a few headline numbers; ``run`` adds the
manifest and the Markdown summary.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import pandas as pd

import config
from cli.run_config import RunConfig
from errors import ConfigError, TeleportError, ValidationFailed
from kernel.noise import added_noise_covariance, diagonal_scan, parameter_fingerprint
from montecarlo.estimate import compare_tables, estimate_covariance
from physics.compensation import CompensationProfile, flattening_profile, optimize_compensation
from physics.opa import ellipse_dispersion_scan
from report.markdown import generate_summary
from report.tables import write_csv
from storage.json_store import ensure_directories, load_profile, save_manifest, save_profile
from teleport.pipeline import load_image, load_image_stack, teleport

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_NUMERICS = 3

MIN_VALIDATION_SAMPLES = 100


@dataclass(frozen=True)
class CommandOptions:
    """Subcommand-specific options that are not part of RunConfig."""

    omega_min: float = config.ELLIPSE_SCAN_RANGE[0]
    omega_max: float = config.ELLIPSE_SCAN_RANGE[1]
    count: int = config.ELLIPSE_SCAN_COUNT
    d_values: Sequence[float] = tuple(config.SCAN_PIXEL_SIZES)
    t_values: Sequence[float] = tuple(config.SCAN_T_WINDOWS)
    flatten: bool = False
    phis: Sequence[float] = (0.0, math.pi / 3)
    images: Sequence[Path] = ()
    scale: float = config.DEFAULT_PHOTONS_PER_PIXEL


@dataclass
class CommandResult:
    artifacts: List[Path] = field(default_factory=list)
    headline: Dict[str, Any] = field(default_factory=dict)
    comp: Optional[CompensationProfile] = None
    # raised by run() once the manifest and summary are written
    failure: Optional[TeleportError] = None


def _configured_profile(cfg: RunConfig, opts: CommandOptions) -> Optional[CompensationProfile]:
    """Profile from ``compensation.profile``, or the flattening profile with ``--flatten``."""
    if cfg.compensation.profile is not None and opts.flatten:
        raise ConfigError("compensation.profile", "cannot be combined with --flatten")
    if cfg.compensation.profile is not None:
        return load_profile(cfg.compensation.profile)
    if opts.flatten:
        return flattening_profile(cfg.opa, degree=1, output_field=cfg.output_field)
    return None


def cmd_ellipse(cfg: RunConfig, opts: CommandOptions, out: Path) -> CommandResult:
    """Squeezing-ellipse dispersion of field 2 at q = 0."""
    frame = ellipse_dispersion_scan(cfg.opa, opts.omega_min, opts.omega_max, opts.count)
    center = frame.iloc[(frame["omega"].abs()).idxmin()]
    return CommandResult(
        artifacts=[write_csv(out / "ellipse.csv", frame)],
        headline={"rows": len(frame), "r at omega nearest 0": float(center["r"])},
    )


def cmd_scan(cfg: RunConfig, opts: CommandOptions, out: Path) -> CommandResult:
    """Diagonal added noise versus pixel size for each bin duration."""
    comp = _configured_profile(cfg, opts)
    frame = diagonal_scan(
        cfg.opa, opts.d_values, opts.t_values, comp, cfg.quadrature.tol, cfg.output_field
    )
    artifacts = [write_csv(out / "scan.csv", frame)]
    if comp is not None:
        artifacts.append(save_profile(out / "profile.json", comp))
    best = frame.loc[frame["c_diag"].idxmin()]
    return CommandResult(
        artifacts=artifacts,
        headline={
            "rows": len(frame),
            "lowest C_diag": float(best["c_diag"]),
            "at pixel size": float(best["delta"]),
            "at bin duration": float(best["t"]),
        },
        comp=comp,
    )


def cmd_covariance(cfg: RunConfig, opts: CommandOptions, out: Path) -> CommandResult:
    """Quadrature covariance of every cell pair of the configured grid."""
    comp = _configured_profile(cfg, opts)
    table = added_noise_covariance(
        cfg.opa,
        cfg.grid,
        cfg.grid.all_pairs(),
        comp=comp,
        tol=cfg.quadrature.tol,
        output_field=cfg.output_field,
        max_subdivisions=cfg.quadrature.max_subdivisions,
        workers=cfg.threads,
    )
    diagonal = list(table.diagonal().values())
    return CommandResult(
        artifacts=[write_csv(out / "covariance.csv", table.to_frame())],
        headline={"entries": len(table.entries), "C_diag": diagonal[0]},
        comp=comp,
    )


def cmd_mc_validate(cfg: RunConfig, opts: CommandOptions, out: Path) -> CommandResult:
    """Side-by-side quadrature and Monte Carlo covariance for each quadrature phase.

    Entries missing the 3-sigma gate are reported through ``failure``.
    """
    seed = cfg.require_seed()
    if cfg.mc.n_samples < MIN_VALIDATION_SAMPLES:
        raise ConfigError(
            "mc.n_samples", f"must be at least {MIN_VALIDATION_SAMPLES} for mc-validate"
        )
    pairs = cfg.grid.all_pairs()
    quad = added_noise_covariance(
        cfg.opa,
        cfg.grid,
        pairs,
        tol=cfg.quadrature.tol,
        output_field=cfg.output_field,
        max_subdivisions=cfg.quadrature.max_subdivisions,
        workers=cfg.threads,
    )
    frames = []
    for phi in opts.phis:
        mc = estimate_covariance(
            cfg.opa,
            cfg.grid,
            pairs,
            phi,
            cfg.mc.n_samples,
            seed,
            output_field=cfg.output_field,
            margin=cfg.mc.margin,
            threads=cfg.threads,
        )
        frame = compare_tables(quad, mc)
        frame.insert(0, "phi", float(phi))
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True)
    artifacts = [write_csv(out / "validation.csv", table)]
    failures = int((~table["pass"]).sum())
    headline = {
        "entries compared": len(table),
        "failures": failures,
        "largest |z|": float(table["z"].abs().max()),
    }
    failure = None
    if failures:
        failure = ValidationFailed(failures, len(table), f"see {artifacts[0]}")
    return CommandResult(artifacts=artifacts, headline=headline, failure=failure)


def cmd_compensate(cfg: RunConfig, opts: CommandOptions, out: Path) -> CommandResult:
    """Optimize a polynomial compensation profile for the configured pixel and bin."""
    lens = 0.0
    if opts.flatten:
        lens = flattening_profile(cfg.opa, degree=1, output_field=cfg.output_field).lens
    result = optimize_compensation(
        cfg.opa,
        cfg.grid,
        degree=cfg.compensation.degree,
        budget=cfg.compensation.budget,
        tol=cfg.quadrature.tol,
        output_field=cfg.output_field,
        lens=lens,
    )
    before_after = pd.DataFrame(
        {
            "delta": [cfg.grid.delta],
            "t": [cfg.grid.t_window],
            "c_before": [result.baseline],
            "c_after": [result.objective],
            "evaluations": [result.evaluations],
            "budget_exhausted": [result.budget_exhausted],
        }
    )
    history = pd.DataFrame(
        {"evaluation": range(1, len(result.history) + 1), "best_c_diag": result.history}
    )
    return CommandResult(
        artifacts=[
            save_profile(out / "profile.json", result.profile),
            write_csv(out / "compensation.csv", before_after),
            write_csv(out / "history.csv", history),
        ],
        headline={
            "C_diag before": result.baseline,
            "C_diag after": result.objective,
            "evaluations": result.evaluations,
            "budget exhausted": result.budget_exhausted,
        },
        comp=result.profile,
    )


def cmd_teleport(cfg: RunConfig, opts: CommandOptions, out: Path) -> CommandResult:
    """Teleport a PGM image (or a stack, one frame per bin)."""
    seed = cfg.require_seed()
    if not opts.images:
        raise ConfigError("image", "at least one PGM file is required")
    if len(opts.images) == 1:
        image = load_image(opts.images[0], opts.scale, nt=cfg.grid.nt)
    else:
        image = load_image_stack(opts.images, opts.scale)
    grid = image.grid(cfg.grid.delta, cfg.grid.t_window)
    result = teleport(
        image,
        cfg.opa,
        grid,
        seed,
        cfg.mc.n_samples,
        output_field=cfg.output_field,
        margin=cfg.mc.margin,
        threads=cfg.threads,
        out_dir=out,
    )
    fidelity = result.fidelity["fidelity"]
    return CommandResult(
        artifacts=result.artifacts,
        headline={
            "pixels": image.n_pixels,
            "bins": image.nt,
            "mean fidelity": float(fidelity.mean()),
            "lowest fidelity": float(fidelity.min()),
        },
    )


COMMANDS: Dict[str, Callable[[RunConfig, CommandOptions, Path], CommandResult]] = {
    "ellipse": cmd_ellipse,
    "scan": cmd_scan,
    "covariance": cmd_covariance,
    "mc-validate": cmd_mc_validate,
    "compensate": cmd_compensate,
    "teleport": cmd_teleport,
}


def run(subcommand: str, cfg: RunConfig, opts: Optional[CommandOptions] = None) -> List[Path]:
    """Execute ``subcommand`` and write its manifest and summary.

    Args:
        subcommand: One of ``COMMANDS``.
        cfg: Validated configuration.
        opts: Subcommand options.

    Returns:
        Every file written, manifest and summary included.

    Raises:
        ConfigError, BadImageFormat, GridTooCoarse, QuadratureNotConverged,
        ValidationFailed: Mapped to exit codes by the entry point.
    """
    if subcommand not in COMMANDS:
        raise ConfigError("subcommand", f"unknown subcommand {subcommand!r}")
    opts = opts or CommandOptions()
    out = cfg.out_dir / subcommand
    ensure_directories(out)
    logger.info(f"Running {subcommand}, artifacts in {out}")

    result = COMMANDS[subcommand](cfg, opts, out)

    fingerprint = parameter_fingerprint(cfg.opa, cfg.grid, result.comp, cfg.output_field)
    summary = generate_summary(
        subcommand, cfg.opa, cfg.grid, result.headline, result.artifacts, fingerprint
    )
    summary_path = out / "summary.md"
    summary_path.write_text(summary, encoding="utf-8")
    artifacts = [*result.artifacts, summary_path]
    manifest = save_manifest(out, subcommand, cfg.settings(), fingerprint, artifacts)
    logger.info(f"Finished {subcommand}: {len(artifacts) + 1} files")
    if result.failure is not None:
        raise result.failure
    return [*artifacts, manifest]
