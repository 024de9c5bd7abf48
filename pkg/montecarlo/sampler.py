"""Phase-space sampling of the EPR beams on a discrete spectral lattice.

Vacuum inputs are drawn in the symmetric-ordering picture: each discrete
mode is a circular complex Gaussian with <|a|^2> = 1/2, divided by the square
root of the spectral cell volume so that lattice sums approximate the
continuum delta normalization. Every sample has its own counter-based
Philox stream keyed by (seed, index), so a sample never depends on how many
others are drawn or in which order.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

import config
from kernel.noise import GridSpec
from physics.opa import (
    OpaParams,
    SpectralPoint,
    bogoliubov,
    coefficients_from_mismatch,
    ellipse,
    mismatch,
)

logger = logging.getLogger(__name__)

# Counter word 2 separates the streams drawn for one sample index
EPR_STREAM = 0
INPUT_STREAM = 1
PAIR_STREAM = 2


def make_rng(seed: int, index: int, stream: int = EPR_STREAM) -> np.random.Generator:
    """Independent generator for sample ``index`` of ``seed``."""
    if seed < 0 or index < 0:
        raise ValueError(f"seed and index must be non-negative, got {seed}, {index}")
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, index, stream, 0]))


def vacuum_amplitudes(rng: np.random.Generator, shape: Tuple[int, ...]) -> np.ndarray:
    """Circular complex Gaussian amplitudes with <|a|^2> = 1/2."""
    z = rng.standard_normal((2, *shape))
    return 0.5 * (z[0] + 1j * z[1])


def _odd(n: int) -> int:
    return n if n % 2 == 1 else n + 1


@dataclass(frozen=True)
class SpectralGrid:
    """Symmetric (qx, qy, W) lattice dual to a real-space lattice.

    Site n of an axis sits at (n + 1/2) * step; wave numbers are
    2 pi k / (size * step) for k = -(size-1)/2 .. (size-1)/2, so the lattice
    contains the origin and is closed under negation.

    Attributes:
        nx, ny, nt: Odd lattice sizes.
        dx, dy, dt: Real-space steps.
    """

    nx: int
    ny: int
    nt: int
    dx: float
    dy: float
    dt: float

    def __post_init__(self) -> None:
        for size in (self.nx, self.ny, self.nt):
            if size < 1 or size % 2 == 0:
                raise ValueError(f"lattice sizes must be odd and positive, got {size}")
        if min(self.dx, self.dy, self.dt) <= 0:
            raise ValueError("lattice steps must be positive")

    @classmethod
    def for_grid(
        cls,
        params: OpaParams,
        grid: GridSpec,
        margin: float = config.LATTICE_MARGIN,
    ) -> "SpectralGrid":
        """Lattice resolving ``grid`` with pixel and bin edges on lattice boundaries.

        The spectral extent Q = max(4 sigma, 8 pi / min(delta, T)) covers the
        gain band and the window main lobes; each pixel edge and bin gets
        max(8, ceil(delta Q / pi)) sites, and ``margin`` coherence lengths
        (times) are kept on both sides of the pixel block.
        """
        if margin < 0:
            raise ValueError(f"margin must be non-negative, got {margin}")
        extent = max(4.0 * params.sigma, 8.0 * math.pi / min(grid.delta, grid.t_window))
        m_space = max(config.MIN_POINTS_PER_CELL, math.ceil(grid.delta * extent / math.pi))
        m_time = max(config.MIN_POINTS_PER_CELL, math.ceil(grid.t_window * extent / math.pi))
        dx = grid.delta / m_space
        dt = grid.t_window / m_time
        pad_space = 2 * math.ceil(margin / dx)
        pad_time = 2 * math.ceil(margin / dt)
        lattice = cls(
            nx=_odd(grid.nx * m_space + pad_space),
            ny=_odd(grid.ny * m_space + pad_space),
            nt=_odd(grid.nt * m_time + pad_time),
            dx=dx,
            dy=dx,
            dt=dt,
        )
        logger.info(
            f"Spectral lattice {lattice.shape} (Q={extent:.4g}, {m_space} sites per pixel, "
            f"{m_time} per bin)"
        )
        return lattice

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.nx, self.ny, self.nt

    @staticmethod
    def _axis(size: int, step: float) -> np.ndarray:
        return 2.0 * math.pi / (size * step) * (np.arange(size) - (size - 1) // 2)

    @property
    def qx(self) -> np.ndarray:
        return self._axis(self.nx, self.dx)

    @property
    def qy(self) -> np.ndarray:
        return self._axis(self.ny, self.dy)

    @property
    def omega(self) -> np.ndarray:
        return self._axis(self.nt, self.dt)

    @property
    def cell_volume(self) -> float:
        """Spectral cell volume dqx * dqy * dW."""
        two_pi = 2.0 * math.pi
        return (
            two_pi / (self.nx * self.dx)
            * two_pi / (self.ny * self.dy)
            * two_pi / (self.nt * self.dt)
        )

    @property
    def site_volume(self) -> float:
        return self.dx * self.dy * self.dt

    def mesh(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable (qx, qy, W) arrays."""
        return self.qx[:, None, None], self.qy[None, :, None], self.omega[None, None, :]


def negate(a: np.ndarray) -> np.ndarray:
    """Values at (-q, -W) of an array laid out on a SpectralGrid."""
    return a[::-1, ::-1, ::-1]


@dataclass(frozen=True)
class LatticeCoefficients:
    """u, v of both output fields on every lattice cell.

    ``u1, v1`` are evaluated at D(q, W) and ``u2, v2`` at D(-q, -W).
    """

    u1: np.ndarray
    v1: np.ndarray
    u2: np.ndarray
    v2: np.ndarray


@lru_cache(maxsize=8)
def lattice_coefficients(params: OpaParams, grid: SpectralGrid) -> LatticeCoefficients:
    qx, qy, omega = grid.mesh()
    u1, v1 = coefficients_from_mismatch(params, mismatch(params, qx, qy, omega))
    return LatticeCoefficients(u1=u1, v1=v1, u2=negate(u1), v2=negate(v1))


def commutator_coefficient(
    params: OpaParams, grid: SpectralGrid, output_field: int = 2
) -> np.ndarray:
    """Commutator [F, F^+] of the noise amplitude per cell; zero when the added noise is classical.

    The noise amplitude f(k) = e_n(k) + e_m^*(-k) expands as
    alpha a_n(k) + beta a_m^*(-k), so the commutator is |alpha|^2 - |beta|^2.
    """
    coeffs = lattice_coefficients(params, grid)
    if output_field == 2:
        u, v = coeffs.u2, coeffs.v2
    elif output_field == 1:
        u, v = coeffs.u1, coeffs.v1
    else:
        raise ValueError(f"output field must be 1 or 2, got {output_field}")
    alpha = u + np.conj(v)
    beta = v + np.conj(u)
    return np.abs(alpha) ** 2 - np.abs(beta) ** 2


@dataclass(frozen=True)
class SpectralSample:
    """One phase-space realization of the two OPA outputs.

    Attributes:
        e1: Field-1 amplitudes on the lattice.
        e2: Field-2 amplitudes on the lattice.
        grid: Lattice the amplitudes live on.
        seed: Stream key.
        index: Sample index within the stream.
    """

    e1: np.ndarray
    e2: np.ndarray
    grid: SpectralGrid
    seed: int
    index: int

    def __post_init__(self) -> None:
        if self.e1.shape != self.grid.shape or self.e2.shape != self.grid.shape:
            raise ValueError(
                f"sample shapes {self.e1.shape}, {self.e2.shape} "
                f"do not match lattice {self.grid.shape}"
            )


def sample_epr(params: OpaParams, grid: SpectralGrid, seed: int, index: int) -> SpectralSample:
    """Draw vacuum inputs for sample ``index`` and apply the OPA transformation.

    Cell (q, W) of field 1 couples to cell (-q, -W) of field 2::

        e1(k) = u(D(k)) a1(k) + v(D(k)) a2*(-k)
        e2(k) = u(D(-k)) a2(k) + v(D(-k)) a1*(-k)

    Args:
        params: OPA model.
        grid: Spectral lattice.
        seed: Stream key.
        index: Sample index.

    Returns:
        SpectralSample.
    """
    rng = make_rng(seed, index, EPR_STREAM)
    density = 1.0 / math.sqrt(grid.cell_volume)
    a1 = density * vacuum_amplitudes(rng, grid.shape)
    a2 = density * vacuum_amplitudes(rng, grid.shape)

    coeffs = lattice_coefficients(params, grid)
    e1 = coeffs.u1 * a1 + coeffs.v1 * np.conj(negate(a2))
    e2 = coeffs.u2 * a2 + coeffs.v2 * np.conj(negate(a1))
    return SpectralSample(e1=e1, e2=e2, grid=grid, seed=seed, index=index)


@dataclass(frozen=True)
class PairSqueezing:
    """Quadrature variances of one pair amplitude and its vacuum reference.

    Attributes:
        psi: Quadrature angle of the major axis.
        major: Variance along psi.
        minor: Variance along psi + pi/2.
        vacuum: Variance of the same estimator at sigma = 0 (both angles pooled).
        n_samples: Realizations used.
    """

    psi: float
    major: float
    minor: float
    vacuum: float
    n_samples: int

    @property
    def major_ratio(self) -> float:
        return self.major / self.vacuum

    @property
    def minor_ratio(self) -> float:
        return self.minor / self.vacuum

    def ratio_stderr(self, ratio: float) -> float:
        """Standard error of a variance ratio, each variance carrying sqrt(2/(n-1))."""
        return ratio * math.sqrt(2.0) * math.sqrt(2.0 / (self.n_samples - 1))


def _quadrature_variance(s: np.ndarray, angle: float) -> float:
    x = 2.0 * np.real(s * np.exp(-1j * angle))
    return float(np.var(x, ddof=1))


def pair_squeezing_check(
    params: OpaParams, pt: SpectralPoint, n_samples: int, seed: int
) -> PairSqueezing:
    """Sampled squeezing of the pair amplitude s = e1(q, W) + e2(-q, -W).

    The vacuum reference reuses the same random numbers with the gain
    switched off, so the ratios carry little extra noise.

    Args:
        params: OPA model.
        pt: Spectral point (q, W) labelling the pair.
        n_samples: Number of realizations (>= 1000).
        seed: Stream key.

    Returns:
        PairSqueezing with variances along psi and psi + pi/2.
    """
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1000, got {n_samples}")

    rng = make_rng(seed, 0, PAIR_STREAM)
    a1 = vacuum_amplitudes(rng, (n_samples,))
    a2 = vacuum_amplitudes(rng, (n_samples,))
    coeffs = bogoliubov(params, pt)
    e1 = coeffs.u1 * a1 + coeffs.v1 * np.conj(a2)
    e2m = coeffs.u2m * a2 + coeffs.v2m * np.conj(a1)
    s = e1 + e2m
    s_vacuum = a1 + a2

    psi = ellipse(params, 1, pt).psi
    minor_angle = psi + 0.5 * math.pi
    vacuum = 0.5 * (
        _quadrature_variance(s_vacuum, psi) + _quadrature_variance(s_vacuum, minor_angle)
    )
    result = PairSqueezing(
        psi=psi,
        major=_quadrature_variance(s, psi),
        minor=_quadrature_variance(s, minor_angle),
        vacuum=vacuum,
        n_samples=n_samples,
    )
    logger.info(
        f"Pair at {pt}: minor/vac={result.minor_ratio:.4g}, major/vac={result.major_ratio:.4g} "
        f"({n_samples} samples)"
    )
    return result
