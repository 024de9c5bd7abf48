"""Storage module for JSON data: compensation profiles and run manifests."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Union

from errors import ConfigError
from physics.compensation import CompensationProfile

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

MANIFEST_NAME = "manifest.json"


def ensure_directories(*dirs: Path) -> None:
    """Ensure all given directories exist."""
    for directory in dirs:
        directory.mkdir(parents=True, exist_ok=True)


def save_json(path: PathLike, data: Any) -> Path:
    """Save ``data`` with sorted keys and two-space indentation.

    Args:
        path: Destination file; parent directories are created.
        data: JSON-serializable value.

    Returns:
        The written path.
    """
    out = Path(path)
    ensure_directories(out.parent)
    with open(out, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    return out


def load_json(path: PathLike) -> Any:
    """Load a JSON file.

    Raises:
        ConfigError: If the file is missing or not valid JSON.
    """
    source = Path(path)
    if not source.exists():
        raise ConfigError(str(source), "file not found")
    try:
        with open(source, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(str(source), f"invalid JSON: {e}") from e


def save_profile(path: PathLike, profile: CompensationProfile) -> Path:
    """Save a profile as ``{"coeffs": [...]}`` (plus ``lens`` when non-zero)."""
    out = save_json(path, profile.to_dict())
    logger.info(f"Saved compensation profile to {out}")
    return out


def load_profile(path: PathLike) -> CompensationProfile:
    """Load a profile written by ``save_profile``.

    Raises:
        ConfigError: Naming ``compensation.profile`` when the content is invalid.
    """
    data = load_json(path)
    if not isinstance(data, dict):
        raise ConfigError("compensation.profile", f"{path} does not hold a JSON object")
    try:
        return CompensationProfile.from_dict(data)
    except (TypeError, ValueError) as e:
        raise ConfigError("compensation.profile", str(e)) from e


def save_manifest(
    out_dir: Path,
    subcommand: str,
    settings: Dict[str, Any],
    fingerprint: str,
    artifacts: Iterable[Path],
) -> Path:
    """Record what a run computed and which files it wrote.

    Artifact paths are stored relative to ``out_dir`` and sorted, so two runs
    with the same settings produce the same manifest.
    """
    names = sorted(
        str(p.relative_to(out_dir)) if p.is_relative_to(out_dir) else str(p) for p in artifacts
    )
    manifest = {
        "subcommand": subcommand,
        "config": settings,
        "fingerprint": fingerprint,
        "artifacts": names,
    }
    return save_json(out_dir / MANIFEST_NAME, manifest)
