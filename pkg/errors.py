"""Exception hierarchy shared by the simulator packages."""

from typing import Any, Optional


class TeleportError(Exception):
    """Base class for all domain errors raised by the simulator."""


class ConfigError(TeleportError):
    """Invalid run configuration.

    Attributes:
        key_path: Dotted path of the offending key (e.g. ``opa.sigma``).
        reason: Human readable explanation.
    """

    def __init__(self, key_path: str, reason: str) -> None:
        self.key_path = key_path
        self.reason = reason
        super().__init__(f"{key_path}: {reason}")


class BadImageFormat(TeleportError):
    """PGM input violates the magic/shape/maxval rules."""


class GridTooCoarse(TeleportError):
    """Real-space lattice does not resolve the pixel or time-bin size."""


class QuadratureNotConverged(TeleportError):
    """Adaptive quadrature could not meet the requested tolerance.

    Attributes:
        achieved_error: Error estimate reached when the subdivision limit hit.
        target: Requested absolute error.
    """

    def __init__(self, achieved_error: float, target: float, detail: str = "") -> None:
        self.achieved_error = achieved_error
        self.target = target
        message = f"error estimate {achieved_error:.3e} exceeds target {target:.3e}"
        if detail:
            message = f"{detail}: {message}"
        super().__init__(message)


class BudgetExhausted(TeleportError):
    """Optimizer hit its evaluation budget; ``result`` holds the best-so-far point."""

    def __init__(self, result: Any) -> None:
        self.result = result
        super().__init__("evaluation budget exhausted")


class ValidationFailed(TeleportError):
    """Monte Carlo and quadrature disagree beyond the statistical gate."""

    def __init__(self, failures: int, total: int, detail: Optional[str] = None) -> None:
        self.failures = failures
        self.total = total
        message = f"{failures} of {total} entries outside 3 standard errors"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
