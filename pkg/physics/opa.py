"""Non-degenerate traveling-wave OPA: phase mismatch, Bogoliubov pairs, squeezing ellipses.

Units are dimensionless: transverse wave vectors in 1/l_c (diffraction
coefficient 1) and frequencies in 1/T_c (group-velocity mismatch 1).

Pair-label convention: the mismatch evaluated at (q, Omega) governs the
coupled pair {a1(q, Omega), a2(-q, -Omega)}::

    e1(q, W)   = u * a1(q, W)   + v * a2^+(-q, -W)
    e2(-q, -W) = u * a2(-q, -W) + v * a1^+(q, W)

with (u, v) = bogoliubov(params, (q, W)). Everything else in the project
obtains coefficients through this module.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import pandas as pd

import config

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Below this |Gamma| the ratio sinh(Gamma)/Gamma uses its series.
_SERIES_THRESHOLD = 1e-8


@dataclass(frozen=True)
class OpaParams:
    """Dimensionless OPA model.

    Attributes:
        sigma: Pump gain; r(0,0) = sigma when the mismatch vanishes at the origin.
        delta0: Collinear phase mismatch.
        gvm: Group-velocity-mismatch coefficient (defines the Omega scale).
        gvd: Quadratic dispersion coefficient.
        diffraction: Transverse coefficient (defines the q scale).
        pump_phase: Pump phase in radians.
        omega1, omega2, omega_p: Carrier frequencies, arbitrary units.
    """

    sigma: float = config.DEFAULT_SIGMA
    delta0: float = config.DEFAULT_DELTA0
    gvm: float = config.DEFAULT_GVM
    gvd: float = config.DEFAULT_GVD
    diffraction: float = config.DEFAULT_DIFFRACTION
    pump_phase: float = config.DEFAULT_PUMP_PHASE
    omega1: float = config.DEFAULT_OMEGA1
    omega2: float = config.DEFAULT_OMEGA2
    omega_p: float = config.DEFAULT_OMEGA_P

    def __post_init__(self) -> None:
        values = (self.sigma, self.delta0, self.gvm, self.gvd, self.diffraction, self.pump_phase)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("OPA parameters must be finite")
        # sigma == 0 is the classical (no pump) limit
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.diffraction <= 0:
            raise ValueError(f"diffraction must be positive, got {self.diffraction}")
        if not math.isclose(
            self.omega1 + self.omega2,
            self.omega_p,
            rel_tol=config.ENERGY_CONSERVATION_RTOL,
        ):
            raise ValueError(
                f"energy conservation violated: {self.omega1} + {self.omega2} != {self.omega_p}"
            )

    @property
    def wavelength_ratio(self) -> float:
        """Ratio omega1/omega2 between the input and teleported carriers."""
        return self.omega1 / self.omega2

    def band_edge(self) -> float:
        """Mismatch magnitude |D| = 2*sigma where Gamma turns imaginary."""
        return 2.0 * self.sigma


@dataclass(frozen=True)
class SpectralPoint:
    """Transverse spatial frequency (qx, qy) and temporal frequency omega."""

    qx: float = 0.0
    qy: float = 0.0
    omega: float = 0.0

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.qx, self.qy, self.omega)):
            raise ValueError("spectral point must be finite")

    def __neg__(self) -> "SpectralPoint":
        return SpectralPoint(-self.qx, -self.qy, -self.omega)


@dataclass(frozen=True)
class PairCoeffs:
    """Coefficients of e1(q, Omega) (u1, v1) and e2(-q, -Omega) (u2m, v2m)."""

    u1: complex
    v1: complex
    u2m: complex
    v2m: complex

    def unitarity_defect(self) -> float:
        """Largest deviation of |u|^2 - |v|^2 from one over both fields."""
        d1 = abs(self.u1) ** 2 - abs(self.v1) ** 2 - 1.0
        d2 = abs(self.u2m) ** 2 - abs(self.v2m) ** 2 - 1.0
        return max(abs(d1), abs(d2))


@dataclass(frozen=True)
class EllipseParams:
    """Squeezing ellipse: orientation psi in [0, pi) and degree r >= 0."""

    psi: float
    r: float

    def __post_init__(self) -> None:
        if self.r < 0:
            raise ValueError(f"squeezing degree must be non-negative, got {self.r}")
        if not 0.0 <= self.psi < math.pi:
            raise ValueError(f"orientation must lie in [0, pi), got {self.psi}")

    @property
    def major(self) -> float:
        return math.exp(self.r)

    @property
    def minor(self) -> float:
        return math.exp(-self.r)


def reduce_angle(psi: ArrayLike) -> ArrayLike:
    """Reduce an orientation angle to the canonical interval [0, pi)."""
    reduced = np.mod(psi, np.pi)
    # np.mod can round tiny negative inputs up to exactly pi
    reduced = np.where(reduced >= np.pi, reduced - np.pi, reduced)
    if np.ndim(reduced) == 0:
        return float(reduced)
    return reduced


def mismatch(params: OpaParams, qx: ArrayLike, qy: ArrayLike, omega: ArrayLike) -> ArrayLike:
    """Vectorized pair mismatch D = delta0 + tau*W + beta*W^2 - eta*(qx^2 + qy^2)."""
    return (
        params.delta0
        + params.gvm * omega
        + params.gvd * np.square(omega)
        - params.diffraction * (np.square(qx) + np.square(qy))
    )


def pair_mismatch(params: OpaParams, pt: SpectralPoint) -> float:
    """Phase mismatch of the pair {a1(q, W), a2(-q, -W)}.

    Args:
        params: OPA model.
        pt: Spectral point (q, W).

    Returns:
        D(q, W).
    """
    return float(mismatch(params, pt.qx, pt.qy, pt.omega))


def coefficients_from_mismatch(params: OpaParams, d: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Bogoliubov (u, v) of the coupled-mode solution for mismatch array ``d``.

    Gamma = sqrt(sigma^2 - D^2/4) is continued to imaginary values outside the
    gain band (cosh -> cos, sinh(G)/G -> sin(G')/G').
    """
    d = np.asarray(d, dtype=float)
    sigma = params.sigma
    g2 = sigma * sigma - 0.25 * d * d
    gamma = np.sqrt(np.abs(g2))
    inside = g2 >= 0.0
    safe = np.where(gamma > _SERIES_THRESHOLD, gamma, 1.0)

    # the discarded hyperbolic branch overflows far outside the band
    with np.errstate(over="ignore"):
        c = np.where(inside, np.cosh(gamma), np.cos(gamma))
        ratio = np.where(inside, np.sinh(gamma), np.sin(gamma)) / safe
    s = np.where(gamma > _SERIES_THRESHOLD, ratio, 1.0 + g2 / 6.0)

    half = 0.5 * d
    u = np.exp(1j * half) * (c - 1j * half * s)
    v = np.exp(1j * (params.pump_phase + half)) * (sigma * s)
    return u, v


def bogoliubov(params: OpaParams, pt: SpectralPoint) -> PairCoeffs:
    """Bogoliubov coefficients of the pair governed by ``pt``.

    Args:
        params: OPA model.
        pt: Spectral point (q, W).

    Returns:
        PairCoeffs with u1 = u2m and v1 = v2m (symmetric pair gain).
    """
    u, v = coefficients_from_mismatch(params, pair_mismatch(params, pt))
    u_c, v_c = complex(u), complex(v)
    return PairCoeffs(u1=u_c, v1=v_c, u2m=u_c, v2m=v_c)


def _field_mismatch(
    params: OpaParams, n: int, qx: ArrayLike, qy: ArrayLike, omega: ArrayLike
) -> ArrayLike:
    if n == 1:
        return mismatch(params, qx, qy, omega)
    if n == 2:
        # U_2(q, W) and V_1(-q, -W) belong to the pair labelled by (-q, -W)
        return mismatch(params, np.negative(qx), np.negative(qy), np.negative(omega))
    raise ValueError(f"field index must be 1 or 2, got {n}")


def ellipse_arrays(
    params: OpaParams, n: int, qx: ArrayLike, qy: ArrayLike, omega: ArrayLike
) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized ellipse orientation psi_n and degree r_n."""
    u, v = coefficients_from_mismatch(params, _field_mismatch(params, n, qx, qy, omega))
    psi = reduce_angle(0.5 * np.angle(u * v))
    r = np.log(np.abs(u) + np.abs(v))
    return np.asarray(psi), np.maximum(r, 0.0)


def ellipse(params: OpaParams, n: int, pt: SpectralPoint) -> EllipseParams:
    """Squeezing ellipse of field ``n`` at ``pt``.

    psi_n = arg{U_n(q, W) V_n'(-q, -W)} / 2 reduced to [0, pi), and
    exp(+-r_n) = |U_n(q, W)| +- |V_n'(-q, -W)|.

    Args:
        params: OPA model.
        n: Field index, 1 or 2.
        pt: Spectral point.

    Returns:
        EllipseParams.
    """
    psi, r = ellipse_arrays(params, n, pt.qx, pt.qy, pt.omega)
    return EllipseParams(psi=float(psi), r=float(r))


def ellipse_pair(params: OpaParams, pt: SpectralPoint) -> Tuple[EllipseParams, EllipseParams]:
    """Ellipses of field 2 at (q, W) and (-q, -W), the two pairs feeding one output frequency."""
    return ellipse(params, 2, pt), ellipse(params, 2, -pt)


def ellipse_dispersion_scan(
    params: OpaParams,
    omega_min: float,
    omega_max: float,
    count: int,
) -> pd.DataFrame:
    """Frequency dispersion of the field-2 squeezing ellipse at q = 0.

    Args:
        params: OPA model.
        omega_min: First frequency of the scan.
        omega_max: Last frequency of the scan.
        count: Number of uniformly spaced rows (>= 2).

    Returns:
        DataFrame with columns omega, psi, r, major, minor.
    """
    if count < 2:
        raise ValueError(f"count must be at least 2, got {count}")
    if not omega_min < omega_max:
        raise ValueError(f"empty frequency range [{omega_min}, {omega_max}]")

    omega = np.linspace(omega_min, omega_max, count)
    psi, r = ellipse_arrays(params, 2, 0.0, 0.0, omega)
    logger.debug(f"Ellipse scan: {count} rows over [{omega_min}, {omega_max}]")
    return pd.DataFrame(
        {
            "omega": omega,
            "psi": psi,
            "r": r,
            "major": np.exp(r),
            "minor": np.exp(-r),
        }
    )
