"""Run configuration: JSON file plus command-line overrides, validated per key."""

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Type, get_type_hints

import config
from errors import ConfigError
from kernel.noise import GridSpec
from physics.opa import OpaParams
from storage.json_store import load_json

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings; ``seed`` has no default and must be given for stochastic runs."""

    n_samples: int = config.DEFAULT_SAMPLES
    seed: Optional[int] = None
    margin: float = config.LATTICE_MARGIN


@dataclass(frozen=True)
class QuadratureConfig:
    tol: float = config.DEFAULT_TOL
    max_subdivisions: int = config.MAX_SUBDIVISIONS


@dataclass(frozen=True)
class CompensationConfig:
    """Optimizer settings and an optional profile file applied by scan/covariance."""

    degree: int = config.DEFAULT_COMP_DEGREE
    budget: int = config.DEFAULT_COMP_BUDGET
    profile: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    """Everything a subcommand needs.

    Attributes:
        opa: OPA model.
        grid: Coarse-graining grid.
        mc: Monte Carlo settings.
        quadrature: Quadrature settings.
        compensation: Compensation settings.
        output_field: Teleported field (2: omega1 -> omega2, 1: the reverse).
        out_dir: Root directory for artifacts.
        threads: Worker threads (wall time only).
    """

    opa: OpaParams = field(default_factory=OpaParams)
    grid: GridSpec = field(default_factory=GridSpec)
    mc: McConfig = field(default_factory=McConfig)
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)
    compensation: CompensationConfig = field(default_factory=CompensationConfig)
    output_field: int = 2
    out_dir: Path = config.RUNS_DIR
    threads: int = config.DEFAULT_THREADS

    def require_seed(self) -> int:
        """Seed of a stochastic run.

        Raises:
            ConfigError: If no seed was configured.
        """
        if self.mc.seed is None:
            raise ConfigError("mc.seed", "a seed is required for stochastic subcommands")
        return self.mc.seed

    def settings(self) -> Dict[str, Any]:
        """Result-determining settings; ``out_dir`` and ``threads`` are left out."""
        return {
            "opa": asdict(self.opa),
            "grid": asdict(self.grid),
            "mc": asdict(self.mc),
            "quadrature": asdict(self.quadrature),
            "compensation": asdict(self.compensation),
            "output_field": self.output_field,
        }


_BLOCKS: Dict[str, Type[Any]] = {
    "opa": OpaParams,
    "grid": GridSpec,
    "mc": McConfig,
    "quadrature": QuadratureConfig,
    "compensation": CompensationConfig,
}

_SCALARS: Dict[str, Type[Any]] = {"output_field": int, "out_dir": str, "threads": int}


def _positive(v: Any) -> bool:
    return bool(v > 0)


def _at_least(n: int) -> Callable[[Any], bool]:
    return lambda v: bool(v >= n)


_RULES: Dict[str, Tuple[Callable[[Any], bool], str]] = {
    "opa.sigma": (_at_least(0), "must be non-negative"),
    "opa.diffraction": (_positive, "must be positive"),
    "grid.delta": (_positive, "must be positive"),
    "grid.t_window": (_positive, "must be positive"),
    "grid.nx": (_at_least(1), "must be at least 1"),
    "grid.ny": (_at_least(1), "must be at least 1"),
    "grid.nt": (_at_least(1), "must be at least 1"),
    "mc.n_samples": (_at_least(2), "must be at least 2"),
    "mc.seed": (lambda v: v is None or v >= 0, "must be a non-negative integer"),
    "mc.margin": (_at_least(0), "must be non-negative"),
    "quadrature.tol": (_positive, "must be positive"),
    "quadrature.max_subdivisions": (_at_least(1), "must be at least 1"),
    "compensation.degree": (
        lambda v: 1 <= v <= config.MAX_COMP_DEGREE,
        f"must lie in [1, {config.MAX_COMP_DEGREE}]",
    ),
    "compensation.budget": (_at_least(1), "must be at least 1"),
    "output_field": (lambda v: v in (1, 2), "must be 1 or 2"),
    "threads": (_at_least(1), "must be at least 1"),
}


def _coerce(key_path: str, value: Any, kind: Any) -> Any:
    """Check ``value`` against the declared type of its key."""
    optional = getattr(kind, "__args__", None)
    if optional is not None and type(None) in optional:
        if value is None:
            return None
        kind = next(t for t in optional if t is not type(None))

    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key_path, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(key_path, "must be finite")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key_path, f"expected an integer, got {value!r}")
        return value
    if kind is str:
        if not isinstance(value, str):
            raise ConfigError(key_path, f"expected a string, got {value!r}")
        return value
    raise ConfigError(key_path, f"unsupported setting type {kind}")


def _check(key_path: str, value: Any) -> None:
    rule = _RULES.get(key_path)
    if rule is not None and not rule[0](value):
        raise ConfigError(key_path, f"{rule[1]}, got {value!r}")


def _build_block(name: str, data: Any) -> Any:
    cls = _BLOCKS[name]
    if not isinstance(data, dict):
        raise ConfigError(name, "expected an object")
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    values: Dict[str, Any] = {}
    for key in sorted(data):
        key_path = f"{name}.{key}"
        if key not in known:
            raise ConfigError(key_path, "unknown key")
        value = _coerce(key_path, data[key], hints[key])
        _check(key_path, value)
        values[key] = value
    try:
        return cls(**values)
    except ValueError as e:
        raise ConfigError(name, str(e)) from e


def _apply_override(data: Dict[str, Any], key_path: str, value: Any) -> None:
    parts = key_path.split(".")
    target = data
    for part in parts[:-1]:
        node = target.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(part, "expected an object")
        target = node
    target[parts[-1]] = value


def build_config(data: Mapping[str, Any]) -> RunConfig:
    """Validate a nested mapping and build a RunConfig.

    Raises:
        ConfigError: With the dotted path of the first offending key.
    """
    kwargs: Dict[str, Any] = {}
    for key in sorted(data):
        if key in _BLOCKS:
            kwargs[key] = _build_block(key, data[key])
        elif key in _SCALARS:
            value = _coerce(key, data[key], _SCALARS[key])
            _check(key, value)
            kwargs[key] = Path(value) if key == "out_dir" else value
        else:
            raise ConfigError(key, "unknown key")
    return RunConfig(**kwargs)


def parse_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Read ``path`` (if any) and apply dotted-key ``overrides`` on top.

    Args:
        path: JSON configuration file.
        overrides: Values keyed by dotted path (e.g. ``"opa.sigma"``); None values are skipped.

    Returns:
        RunConfig; with neither file nor overrides this is the default model
        (sigma=3, delta0=0, gvm=1, gvd=0, diffraction=1, pump_phase=pi).

    Raises:
        ConfigError: On unreadable files, unknown keys or invalid values.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        loaded = load_json(path)
        if not isinstance(loaded, dict):
            raise ConfigError(str(path), "configuration must be a JSON object")
        data = loaded
        logger.debug(f"Loaded configuration from {path}")
    for key_path, value in sorted((overrides or {}).items()):
        if value is not None:
            _apply_override(data, key_path, value)
    return build_config(data)
