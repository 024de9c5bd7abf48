"""Markdown run summary generator."""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence

from kernel.noise import GridSpec
from physics.opa import OpaParams

logger = logging.getLogger(__name__)


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if math.isfinite(value) and value != 0 and not 1e-3 <= abs(value) < 1e6:
            return f"{value:.6e}"
        return f"{value:.6g}"
    return str(value)


def generate_summary(
    subcommand: str,
    params: OpaParams,
    grid: GridSpec,
    headline: Dict[str, Any],
    artifacts: Sequence[Path],
    fingerprint: str,
) -> str:
    """Generate the run summary in Markdown format.

    The text depends only on its arguments (no timestamps), so repeated
    runs with the same settings give identical files.

    Args:
        subcommand: Subcommand that produced the run.
        params: OPA model used.
        grid: Coarse-graining grid used.
        headline: Key results, rendered in insertion order.
        artifacts: Files written by the run.
        fingerprint: Parameter fingerprint of the run.

    Returns:
        Markdown formatted summary.
    """
    lines: List[str] = [
        f"# Run summary: {subcommand}",
        "",
        f"> Fingerprint: `{fingerprint}`",
        "",
        "## Model",
        "",
        "| Parameter | Value |",
        "|-----------|-------|",
        f"| sigma | {_format(params.sigma)} |",
        f"| delta0 | {_format(params.delta0)} |",
        f"| gvm | {_format(params.gvm)} |",
        f"| gvd | {_format(params.gvd)} |",
        f"| diffraction | {_format(params.diffraction)} |",
        f"| pump_phase | {_format(params.pump_phase)} |",
        f"| omega1/omega2 | {_format(params.wavelength_ratio)} |",
        "",
        "## Grid",
        "",
        f"- Pixel size: {_format(grid.delta)}",
        f"- Bin duration: {_format(grid.t_window)}",
        f"- Cells: {grid.nx} x {grid.ny} x {grid.nt}",
        "",
    ]

    if headline:
        lines.extend(["## Results", "", "| Quantity | Value |", "|----------|-------|"])
        for key, value in headline.items():
            lines.append(f"| {key} | {_format(value)} |")
        lines.append("")

    lines.extend(["## Artifacts", ""])
    for path in sorted(p.name for p in artifacts):
        lines.append(f"- `{path}`")
    lines.append("")
    return "\n".join(lines)
