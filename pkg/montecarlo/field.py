"""Real-space synthesis, pixel coarse-graining and quadratures of sampled fields.

Fourier convention:

    E(rho, t) = (2 pi)^{-3/2} int e(q, W) exp(i (q.rho - W t)) d^2q dW

realized as a lattice sum with spectral cell weights; the spatial axes use an
inverse DFT and the time axis a forward DFT because of the opposite sign.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

import config
from errors import GridTooCoarse
from kernel.noise import GridSpec
from montecarlo.sampler import SpectralGrid, SpectralSample, negate

logger = logging.getLogger(__name__)

_NORM = (2.0 * math.pi) ** -1.5


@dataclass(frozen=True)
class LatticeField:
    """Complex field on real-space sites ((n + 1/2) dx, (n + 1/2) dy, (n + 1/2) dt)."""

    values: np.ndarray
    dx: float
    dy: float
    dt: float

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise ValueError(f"lattice field must be 3-D, got shape {self.values.shape}")

    def conj(self) -> "LatticeField":
        return LatticeField(np.conj(self.values), self.dx, self.dy, self.dt)


def _synthesize(spectrum: np.ndarray, grid: SpectralGrid) -> LatticeField:
    qx, qy, omega = grid.mesh()
    # shift the sample points to the site centers
    phase = np.exp(1j * (0.5 * grid.dx * qx + 0.5 * grid.dy * qy - 0.5 * grid.dt * omega))
    shifted = np.fft.ifftshift(spectrum * phase)
    spatial = np.fft.ifft2(shifted, axes=(0, 1)) * (grid.nx * grid.ny)
    values = _NORM * grid.cell_volume * np.fft.fft(spatial, axis=2)
    return LatticeField(values, grid.dx, grid.dy, grid.dt)


def synthesize_fields(sample: SpectralSample) -> Tuple[LatticeField, LatticeField]:
    """Real-space E1 and E2 of one sample."""
    return _synthesize(sample.e1, sample.grid), _synthesize(sample.e2, sample.grid)


def synthesize_noise(sample: SpectralSample, output_field: int = 2) -> LatticeField:
    """Added-noise field F = E2 + E1^+ (or E1 + E2^+ for ``output_field=1``).

    Args:
        sample: Spectral realization.
        output_field: Field carrying the teleported image.

    Returns:
        LatticeField of F.
    """
    if output_field == 2:
        spectrum = sample.e2 + np.conj(negate(sample.e1))
    elif output_field == 1:
        spectrum = sample.e1 + np.conj(negate(sample.e2))
    else:
        raise ValueError(f"output field must be 1 or 2, got {output_field}")
    return _synthesize(spectrum, sample.grid)


@dataclass(frozen=True)
class PixelField:
    """Pixel/bin averaged amplitudes A(j, i), shape (n_pixels, nt)."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self) -> None:
        expected = (self.grid.n_pixels, self.grid.nt)
        if self.values.shape != expected:
            raise ValueError(f"pixel field shape {self.values.shape} != {expected}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("pixel field contains non-finite values")


def _sites_per(length: float, step: float, what: str) -> int:
    ratio = length / step
    count = round(ratio)
    if abs(ratio - count) > 1e-9 * max(1.0, ratio):
        raise GridTooCoarse(f"{what} {length} is not a whole number of lattice steps {step}")
    if count < config.MIN_POINTS_PER_CELL:
        raise GridTooCoarse(
            f"{what} {length} spans {count} lattice sites, "
            f"need at least {config.MIN_POINTS_PER_CELL}"
        )
    return count


def coarse_grain(field: LatticeField, grid: GridSpec) -> PixelField:
    """A(j, i) = (S T)^{-1/2} int_{S_j} d^2rho int_{T_i} dt field, with S = delta^2.

    Pixel (jx, jy) and bin i cover lattice sites [jx m, (jx + 1) m) and so on,
    starting at the lattice origin.

    Args:
        field: Real-space lattice field.
        grid: Pixel/bin grid.

    Returns:
        PixelField.

    Raises:
        GridTooCoarse: If a pixel or bin holds fewer than 8 sites per axis,
            is not aligned to the lattice, or the block exceeds the lattice.
    """
    m_x = _sites_per(grid.delta, field.dx, "pixel size")
    m_y = _sites_per(grid.delta, field.dy, "pixel size")
    m_t = _sites_per(grid.t_window, field.dt, "bin duration")
    size_x, size_y, size_t = grid.nx * m_x, grid.ny * m_y, grid.nt * m_t
    if any(need > have for need, have in zip((size_x, size_y, size_t), field.values.shape)):
        raise GridTooCoarse(
            f"pixel block {(size_x, size_y, size_t)} exceeds lattice {field.values.shape}"
        )

    block = field.values[:size_x, :size_y, :size_t]
    sums = block.reshape(grid.nx, m_x, grid.ny, m_y, grid.nt, m_t).sum(axis=(1, 3, 5))
    weight = field.dx * field.dy * field.dt / math.sqrt(grid.pixel_area * grid.t_window)
    # (jx, jy, i) -> (j = jy * nx + jx, i)
    values = (weight * sums).transpose(1, 0, 2).reshape(grid.n_pixels, grid.nt)
    return PixelField(values, grid)


def quadrature(pix: PixelField, phi: float) -> np.ndarray:
    """X_phi = A e^{-i phi} + (A e^{-i phi})^* per (j, i)."""
    return 2.0 * np.real(pix.values * np.exp(-1j * phi))


def quadrature_pair(pix: PixelField, phi: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """(X_phi, Y_phi) with Y_phi = X_{phi + pi/2}."""
    return quadrature(pix, phi), quadrature(pix, phi + 0.5 * math.pi)
