"""Teleportation of a multimode image through the explicit homodyne/modulation chain.

Per realization the sender mixes the input image with E1 on a balanced
beamsplitter, records the X quadrature of one port and the Y quadrature of
the other, and the receiver displaces E2 by the conjugate of the complex
record. With the mirror reflectivity taken to one the output is
A_out = A_in + F with F = E2 + E1^+, which ``protocol_explicit`` checks
against the direct sum on every sample.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd

import config
from kernel.noise import GridSpec
from montecarlo.estimate import draw_samples
from montecarlo.field import PixelField, coarse_grain, quadrature, synthesize_fields
from montecarlo.sampler import INPUT_STREAM, SpectralGrid, make_rng, sample_epr, vacuum_amplitudes
from physics.opa import OpaParams
from report.tables import write_csv
from storage.pgm import GrayImage, PathLike, read_pgm, write_pgm

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ImagePlane:
    """Coherent amplitudes of an image, one per pixel and time bin.

    Attributes:
        alpha: Complex amplitudes, shape (nx * ny, nt), pixel j = jy * nx + jx.
        nx: Pixels per row.
        ny: Rows.
        scale: Photons per pixel at full gray value.
    """

    alpha: np.ndarray
    nx: int
    ny: int
    scale: float = config.DEFAULT_PHOTONS_PER_PIXEL

    def __post_init__(self) -> None:
        if self.alpha.ndim != 2 or self.alpha.shape[0] != self.nx * self.ny:
            raise ValueError(
                f"amplitudes of shape {self.alpha.shape} do not fit a {self.nx}x{self.ny} image"
            )
        if self.alpha.shape[1] < 1:
            raise ValueError("image needs at least one time bin")
        if not np.all(np.isfinite(self.alpha)):
            raise ValueError("image amplitudes must be finite")
        if not (math.isfinite(self.scale) and self.scale >= 0):
            raise ValueError(f"scale must be non-negative, got {self.scale}")

    @property
    def nt(self) -> int:
        return int(self.alpha.shape[1])

    @property
    def n_pixels(self) -> int:
        return self.nx * self.ny

    def grid(self, delta: float, t_window: float) -> GridSpec:
        """Grid with this image's shape and the given pixel size and bin duration."""
        return GridSpec(delta=delta, t_window=t_window, nx=self.nx, ny=self.ny, nt=self.nt)

    def check_grid(self, grid: GridSpec) -> None:
        if (grid.nx, grid.ny, grid.nt) != (self.nx, self.ny, self.nt):
            raise ValueError(
                f"grid shape {(grid.nx, grid.ny, grid.nt)} does not match image "
                f"{(self.nx, self.ny, self.nt)}"
            )

    def with_amplitudes(self, alpha: np.ndarray) -> "ImagePlane":
        return ImagePlane(alpha=alpha, nx=self.nx, ny=self.ny, scale=self.scale)

    def to_gray(self, bin_index: int = 0, maxval: int = config.PGM_OUT_MAXVAL) -> GrayImage:
        """Gray values round(maxval |alpha|^2 / scale) of one bin, clipped to maxval.

        An image with zero scale has no photon reference and maps to black.
        """
        if not 0 <= bin_index < self.nt:
            raise ValueError(f"bin index {bin_index} outside image of {self.nt} bins")
        intensity = np.abs(self.alpha[:, bin_index]) ** 2
        if self.scale == 0:
            gray = np.zeros(self.n_pixels)
        else:
            gray = np.rint(maxval * intensity / self.scale)
        clipped = int(np.count_nonzero(gray > maxval))
        if clipped:
            logger.warning(f"Clipped {clipped} of {self.n_pixels} pixels at gray value {maxval}")
        gray = np.minimum(gray, maxval).astype(np.int64)
        return GrayImage(gray.reshape(self.ny, self.nx), maxval)


def _amplitudes(gray: GrayImage, scale: float) -> np.ndarray:
    return np.sqrt(scale * gray.pixels.astype(float) / gray.maxval).reshape(-1)


def load_image(
    path: PathLike, scale: float = config.DEFAULT_PHOTONS_PER_PIXEL, nt: int = 1
) -> ImagePlane:
    """Still image: alpha = sqrt(scale * g / maxval), repeated over ``nt`` bins.

    Raises:
        BadImageFormat: If the file is not a valid P2/P5 graymap.
    """
    if scale < 0:
        raise ValueError(f"scale must be non-negative, got {scale}")
    if nt < 1:
        raise ValueError(f"nt must be at least 1, got {nt}")
    gray = read_pgm(path)
    alpha = np.repeat(_amplitudes(gray, scale)[:, None], nt, axis=1).astype(complex)
    return ImagePlane(alpha=alpha, nx=gray.width, ny=gray.height, scale=scale)


def load_image_stack(
    paths: Sequence[PathLike], scale: float = config.DEFAULT_PHOTONS_PER_PIXEL
) -> ImagePlane:
    """Time-varying image, one PGM per bin; every frame must have the same size."""
    if not paths:
        raise ValueError("image stack needs at least one frame")
    frames = [read_pgm(p) for p in paths]
    shape = (frames[0].width, frames[0].height)
    for p, frame in zip(paths, frames):
        if (frame.width, frame.height) != shape:
            raise ValueError(f"frame {p} is {frame.width}x{frame.height}, expected {shape}")
    alpha = np.stack([_amplitudes(frame, scale) for frame in frames], axis=1).astype(complex)
    return ImagePlane(alpha=alpha, nx=shape[0], ny=shape[1], scale=scale)


def save_image(path: PathLike, image: ImagePlane, bin_index: int = 0) -> Path:
    """Write one bin of ``image`` as a 16-bit raw PGM."""
    return write_pgm(path, image.to_gray(bin_index))


@dataclass(frozen=True)
class ProtocolSamples:
    """Output amplitudes per realization, shape (n_samples, n_pixels, nt).

    Attributes:
        explicit: Through beamsplitter, homodyne records and modulation.
        shortcut: A_in + F computed directly from the noise field.
        input_noise: Input vacuum fluctuations drawn for each realization.
    """

    explicit: np.ndarray
    shortcut: np.ndarray
    input_noise: np.ndarray
    seed: int

    @property
    def n_samples(self) -> int:
        return int(self.explicit.shape[0])


def protocol_explicit(
    image: ImagePlane,
    params: OpaParams,
    grid: GridSpec,
    seed: int,
    n_samples: int,
    output_field: int = 2,
    margin: float = config.LATTICE_MARGIN,
    threads: int = 1,
) -> ProtocolSamples:
    """Run the teleportation chain on ``n_samples`` realizations.

    For ``output_field=1`` the roles of E1 and E2 are swapped: the input is
    mixed with E2 and the image comes out on field 1.

    Args:
        image: Input amplitudes.
        params: OPA model.
        grid: Pixel/bin grid matching the image shape.
        seed: Stream key; realization k uses the EPR and input streams of (seed, k).
        n_samples: Realizations (>= 2).
        output_field: Field carrying the teleported image.
        margin: Lattice margin around the pixel block, in coherence lengths.
        threads: Worker threads (wall time only).

    Returns:
        ProtocolSamples.

    Raises:
        GridTooCoarse: If the lattice cannot resolve the grid.
    """
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    if output_field not in (1, 2):
        raise ValueError(f"output field must be 1 or 2, got {output_field}")
    image.check_grid(grid)
    lattice = SpectralGrid.for_grid(params, grid, margin)
    shape = (grid.n_pixels, grid.nt)

    def task(index: int) -> np.ndarray:
        e1, e2 = synthesize_fields(sample_epr(params, lattice, seed, index))
        p1 = coarse_grain(e1, grid).values
        p2 = coarse_grain(e2, grid).values
        sender, receiver = (p1, p2) if output_field == 2 else (p2, p1)

        vacuum = vacuum_amplitudes(make_rng(seed, index, INPUT_STREAM), shape)
        a_in = image.alpha + vacuum
        # balanced beamsplitter, x port (+) and y port (-)
        x = quadrature(PixelField((a_in + sender) / _SQRT2, grid), 0.0)
        y = quadrature(PixelField((sender - a_in) / _SQRT2, grid), 0.5 * math.pi)
        record = (x + 1j * y) / _SQRT2
        explicit = receiver + np.conj(record)
        shortcut = a_in + receiver + np.conj(sender)
        return np.stack([explicit, shortcut, vacuum])

    logger.info(
        f"Teleporting {image.nx}x{image.ny}x{image.nt} image: {n_samples} samples, seed={seed}"
    )
    stacked = draw_samples(task, n_samples, threads)
    return ProtocolSamples(
        explicit=stacked[:, 0],
        shortcut=stacked[:, 1],
        input_noise=stacked[:, 2],
        seed=seed,
    )


def fidelity_map(c_diag: Union[float, np.ndarray]) -> np.ndarray:
    """Coherent-state teleportation fidelity 2 / (2 + C) per pixel.

    Raises:
        ValueError: On negative or non-finite added noise.
    """
    c = np.asarray(c_diag, dtype=float)
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise ValueError("added-noise values must be finite and non-negative")
    return 2.0 / (2.0 + c)


def added_noise_estimate(samples: np.ndarray) -> np.ndarray:
    """Per-cell added noise from output samples, shape (n_samples, n_pixels, nt).

    Returns 1/2 (var X_0 + var X_{pi/2}) - 1 with the unit input vacuum
    removed, clipped at zero.
    """
    x = 2.0 * np.real(samples)
    y = 2.0 * np.imag(samples)
    excess = 0.5 * (np.var(x, axis=0, ddof=1) + np.var(y, axis=0, ddof=1)) - 1.0
    return np.maximum(excess, 0.0)


@dataclass
class TeleportResult:
    """Outputs of one teleportation run.

    Attributes:
        mean: Sample mean of the output amplitudes.
        sample: First realization of the output.
        mean_stderr: Per-cell standard error of the complex mean, sqrt((var Re + var Im) / n).
        fidelity: Per-pixel table with columns j_x, j_y, c_diag, fidelity.
        artifacts: Files written, if an output directory was given.
    """

    mean: ImagePlane
    sample: ImagePlane
    mean_stderr: np.ndarray
    fidelity: pd.DataFrame
    artifacts: List[Path] = field(default_factory=list)


def _fidelity_frame(image: ImagePlane, c_cells: np.ndarray) -> pd.DataFrame:
    c_pixel = c_cells.mean(axis=1)
    j = np.arange(image.n_pixels)
    return pd.DataFrame(
        {
            "j_x": j % image.nx,
            "j_y": j // image.nx,
            "c_diag": c_pixel,
            "fidelity": fidelity_map(c_pixel),
        }
    )


def teleport(
    image: ImagePlane,
    params: OpaParams,
    grid: GridSpec,
    seed: int,
    n_samples: int,
    output_field: int = 2,
    margin: float = config.LATTICE_MARGIN,
    threads: int = 1,
    out_dir: Optional[Path] = None,
) -> TeleportResult:
    """Teleport ``image`` and summarize the output.

    Args:
        image: Input amplitudes.
        params: OPA model.
        grid: Pixel/bin grid matching the image shape.
        seed: Stream key.
        n_samples: Realizations (>= 2).
        output_field: Field carrying the teleported image.
        margin: Lattice margin, in coherence lengths.
        threads: Worker threads (wall time only).
        out_dir: If given, write mean and sample PGMs (one per bin when
            nt > 1) and ``fidelity.csv`` there.

    Returns:
        TeleportResult.
    """
    run = protocol_explicit(image, params, grid, seed, n_samples, output_field, margin, threads)
    out = run.explicit
    mean = image.with_amplitudes(out.mean(axis=0))
    sample = image.with_amplitudes(out[0])
    stderr = np.sqrt(np.var(out, axis=0, ddof=1) / run.n_samples)
    frame = _fidelity_frame(image, added_noise_estimate(out))
    logger.info(f"Mean per-pixel fidelity {frame['fidelity'].mean():.4g}")

    result = TeleportResult(mean=mean, sample=sample, mean_stderr=stderr, fidelity=frame)
    if out_dir is not None:
        for i in range(image.nt):
            suffix = "" if image.nt == 1 else f"_{i:03d}"
            result.artifacts.append(save_image(out_dir / f"mean{suffix}.pgm", mean, i))
            result.artifacts.append(save_image(out_dir / f"sample{suffix}.pgm", sample, i))
        result.artifacts.append(write_csv(out_dir / "fidelity.csv", frame))
    return result
