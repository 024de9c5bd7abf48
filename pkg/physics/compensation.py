"""Linear-medium phase compensation of the squeezing-ellipse orientation.

A dispersive medium on an output arm multiplies field amplitudes by
exp(i*phi_c(W)); the ellipse orientation psi = arg(U*V)/2 therefore shifts by
phi_c(W)/2 while the squeezing degree r is untouched. ``lens`` adds a phase
quadratic in |q| (imaging optics on the output arm).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import minimize

import config
from errors import BudgetExhausted
from physics.opa import ArrayLike, EllipseParams, OpaParams, ellipse_arrays, reduce_angle

if TYPE_CHECKING:
    from kernel.noise import GridSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompensationProfile:
    """Polynomial phase phi_c(W) = sum_m coeffs[m-1] * W^m, plus an optional lens term.

    Attributes:
        coeffs: c_1..c_k in radians (no constant term; that is the pump phase).
        lens: Coefficient of |q|^2 in the added phase.
    """

    coeffs: Tuple[float, ...] = ()
    lens: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if len(self.coeffs) > config.MAX_COMP_DEGREE:
            raise ValueError(
                f"degree {len(self.coeffs)} exceeds maximum {config.MAX_COMP_DEGREE}"
            )
        if not all(math.isfinite(c) for c in (*self.coeffs, self.lens)):
            raise ValueError("compensation coefficients must be finite")

    @property
    def degree(self) -> int:
        return len(self.coeffs)

    def is_zero(self) -> bool:
        return self.lens == 0.0 and all(c == 0.0 for c in self.coeffs)

    def phase(self, omega: ArrayLike, q2: ArrayLike = 0.0) -> ArrayLike:
        """Added phase at frequency ``omega`` and squared transverse wave number ``q2``."""
        if self.coeffs:
            total = P.polyval(omega, (0.0, *self.coeffs))
        else:
            total = np.zeros_like(omega, dtype=float)
        if self.lens != 0.0:
            total = total + self.lens * np.asarray(q2)
        return total

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"coeffs": list(self.coeffs)}
        if self.lens != 0.0:
            data["lens"] = self.lens
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CompensationProfile":
        unknown = set(data) - {"coeffs", "lens"}
        if unknown:
            raise ValueError(f"unknown profile keys: {sorted(unknown)}")
        return cls(coeffs=tuple(data.get("coeffs", [])), lens=float(data.get("lens", 0.0)))


def compensate_orientation(
    psi: ArrayLike, profile: Optional[CompensationProfile], omega: ArrayLike, q2: ArrayLike = 0.0
) -> ArrayLike:
    """Vectorized psi' = reduce(psi + phi_c/2); a missing profile is the identity."""
    if profile is None or profile.is_zero():
        return psi
    return reduce_angle(np.asarray(psi) + 0.5 * profile.phase(omega, q2))


def apply_compensation(
    e: EllipseParams, profile: CompensationProfile, omega: float, q2: float = 0.0
) -> EllipseParams:
    """Rotate an ellipse by half the compensating phase; r is unchanged.

    Args:
        e: Ellipse before the medium.
        profile: Compensating phase profile.
        omega: Frequency offset W.
        q2: Squared transverse wave number (only used by the lens term).

    Returns:
        EllipseParams with the same r.
    """
    psi = compensate_orientation(e.psi, profile, omega, q2)
    return EllipseParams(psi=float(psi), r=e.r)


def flattening_profile(
    params: OpaParams,
    degree: int = 1,
    lens: bool = True,
    output_field: int = 2,
    step: float = 1e-2,
) -> CompensationProfile:
    """Profile cancelling the Taylor expansion of psi around the band center.

    The frequency coefficients come from a finite-difference polynomial fit of
    2*psi(0, W) on a small symmetric stencil; the lens term from the slope of
    2*psi(q, 0) in |q|^2. With ``degree=1`` this removes the group delay
    between the EPR beams.

    Args:
        params: OPA model.
        degree: Highest power of W to cancel.
        lens: Also cancel the leading |q|^2 dependence.
        output_field: Field whose ellipse is flattened.
        step: Stencil spacing.

    Returns:
        CompensationProfile.
    """
    if not 1 <= degree <= config.MAX_COMP_DEGREE:
        raise ValueError(f"degree must lie in [1, {config.MAX_COMP_DEGREE}], got {degree}")

    stencil = step * np.arange(-4, 5)
    psi_w, _ = ellipse_arrays(params, output_field, 0.0, 0.0, stencil)
    fit_w = P.polyfit(stencil, np.unwrap(2.0 * psi_w), degree)
    coeffs = tuple(-float(c) for c in fit_w[1:])

    lens_coeff = 0.0
    if lens:
        q = np.sqrt(step * np.arange(0, 5))
        psi_q, _ = ellipse_arrays(params, output_field, q, 0.0, 0.0)
        fit_q = P.polyfit(q * q, np.unwrap(2.0 * psi_q), 2)
        lens_coeff = -float(fit_q[1])

    profile = CompensationProfile(coeffs=coeffs, lens=lens_coeff)
    logger.debug(f"Flattening profile: coeffs={profile.coeffs}, lens={profile.lens:.6g}")
    return profile


@dataclass
class CompensationResult:
    """Outcome of a compensation search.

    Attributes:
        profile: Best profile found.
        objective: Diagonal added noise with ``profile``.
        baseline: Diagonal added noise without compensation.
        evaluations: Objective evaluations spent.
        budget_exhausted: True when the budget stopped the search.
        history: Best objective after each evaluation (non-increasing).
    """

    profile: CompensationProfile
    objective: float
    baseline: float
    evaluations: int
    budget_exhausted: bool
    history: List[float] = field(default_factory=list)

    @property
    def improvement(self) -> float:
        return self.baseline - self.objective


class _BudgetReached(Exception):
    pass


class _TrackedObjective:
    """Counts fresh evaluations, caches repeats and remembers the best point."""

    def __init__(self, objective: Callable[[np.ndarray], float], budget: int) -> None:
        self.objective = objective
        self.budget = budget
        self.evaluations = 0
        self.cache: Dict[bytes, float] = {}
        self.best_x: Optional[np.ndarray] = None
        self.best_value = math.inf
        self.history: List[float] = []

    def __call__(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key in self.cache:
            return self.cache[key]
        if self.evaluations >= self.budget:
            raise _BudgetReached()

        value = float(self.objective(x))
        self.evaluations += 1
        self.cache[key] = value
        # Strict improvement keeps the earliest point on ties
        if value < self.best_value:
            self.best_value = value
            self.best_x = x.copy()
        self.history.append(self.best_value)
        logger.debug(f"Evaluation {self.evaluations}: x={x.tolist()} f={value:.10g}")
        return value


def minimize_profile(
    objective: Callable[[np.ndarray], float],
    degree: int,
    budget: int,
    lens: float = 0.0,
    strict: bool = False,
    start: Optional[Sequence[float]] = None,
) -> CompensationResult:
    """Deterministic Nelder-Mead search over the frequency coefficients.

    The baseline is always the zero profile. The initial simplex is ``start``
    (zero when omitted) plus ``SIMPLEX_STEP`` along each coefficient; the search
    stops at ``budget`` fresh evaluations or when the simplex diameter drops
    below ``SIMPLEX_DIAMETER_TOL``.

    Args:
        objective: Maps a coefficient vector (c_1..c_k) to the value to minimize.
        degree: Number of coefficients k.
        budget: Maximum number of objective evaluations.
        lens: Fixed lens coefficient carried into the returned profile.
        strict: Raise ``BudgetExhausted`` instead of returning when the budget ends the search.
        start: Starting coefficients, zero-padded to ``degree``.

    Returns:
        CompensationResult; ``objective`` never exceeds ``baseline``.
    """
    if not 1 <= degree <= config.MAX_COMP_DEGREE:
        raise ValueError(f"degree must lie in [1, {config.MAX_COMP_DEGREE}], got {degree}")
    if budget < 1:
        raise ValueError(f"budget must be at least 1, got {budget}")

    x0 = np.zeros(degree)
    if start is not None:
        if len(start) > degree:
            raise ValueError(f"start has {len(start)} coefficients, more than degree {degree}")
        x0[: len(start)] = np.asarray(start, dtype=float)

    tracked = _TrackedObjective(objective, budget)
    baseline = tracked(np.zeros(degree))

    simplex = np.vstack([x0, x0 + config.SIMPLEX_STEP * np.eye(degree)])
    exhausted = False
    try:
        minimize(
            tracked,
            x0,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": config.SIMPLEX_DIAMETER_TOL,
                "fatol": math.inf,
                "maxfev": budget,
            },
        )
    except _BudgetReached:
        exhausted = True
    if tracked.evaluations >= budget:
        exhausted = True

    assert tracked.best_x is not None
    result = CompensationResult(
        profile=CompensationProfile(coeffs=tuple(tracked.best_x.tolist()), lens=lens),
        objective=tracked.best_value,
        baseline=baseline,
        evaluations=tracked.evaluations,
        budget_exhausted=exhausted,
        history=tracked.history,
    )
    if exhausted:
        logger.warning(f"Compensation budget of {budget} evaluations exhausted")
        if strict:
            raise BudgetExhausted(result)
    return result


def optimize_compensation(
    params: OpaParams,
    grid: "GridSpec",
    degree: int = config.DEFAULT_COMP_DEGREE,
    budget: int = config.DEFAULT_COMP_BUDGET,
    tol: float = config.DEFAULT_TOL,
    output_field: int = 2,
    lens: float = 0.0,
    strict: bool = False,
    start: Optional[Sequence[float]] = None,
) -> CompensationResult:
    """Minimize the diagonal added noise of ``grid`` over a degree-``degree`` profile.

    Args:
        params: OPA model.
        grid: GridSpec supplying the pixel size and bin duration.
        degree: Number of polynomial coefficients (1..4).
        budget: Maximum number of quadrature evaluations.
        tol: Relative quadrature tolerance per evaluation.
        output_field: Teleported field (1 or 2).
        lens: Fixed lens coefficient applied during the search.
        strict: Raise ``BudgetExhausted`` when the budget ends the search.
        start: Coefficients to start from, zero-padded to ``degree``; a
            degree-1 optimum passed here bounds the degree-2 result by it.

    Returns:
        CompensationResult with the best profile and its diagonal noise.
    """
    # kernel.noise imports this module
    from kernel.noise import diagonal_covariance

    def objective(x: np.ndarray) -> float:
        profile = CompensationProfile(coeffs=tuple(x.tolist()), lens=lens)
        return diagonal_covariance(
            params,
            grid.delta,
            grid.t_window,
            comp=profile,
            tol=tol,
            output_field=output_field,
        )

    logger.info(
        f"Optimizing degree-{degree} compensation at delta={grid.delta}, "
        f"T={grid.t_window} (budget {budget})"
    )
    result = minimize_profile(objective, degree, budget, lens=lens, strict=strict, start=start)
    logger.info(
        f"Compensation: C_diag {result.baseline:.6g} -> {result.objective:.6g} "
        f"after {result.evaluations} evaluations"
    )
    return result

