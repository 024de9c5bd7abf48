"""Monte Carlo estimate of the added-noise covariance and its comparison with quadrature."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

import config
from kernel.noise import CellPair, CovarianceTable, GridSpec, parameter_fingerprint
from montecarlo.field import coarse_grain, quadrature, synthesize_noise
from montecarlo.sampler import SpectralGrid, lattice_coefficients, sample_epr
from physics.opa import OpaParams

logger = logging.getLogger(__name__)


def noise_quadratures(
    params: OpaParams,
    grid: GridSpec,
    lattice: SpectralGrid,
    phi: float,
    seed: int,
    index: int,
    output_field: int = 2,
) -> np.ndarray:
    """Quadrature X_phi of the coarse-grained noise of sample ``index``, shape (n_pixels, nt)."""
    sample = sample_epr(params, lattice, seed, index)
    pix = coarse_grain(synthesize_noise(sample, output_field), grid)
    return quadrature(pix, phi)


def draw_samples(
    task: Callable[[int], np.ndarray],
    n_samples: int,
    threads: int = 1,
) -> np.ndarray:
    """Stack ``task(index)`` for index 0..n_samples-1 along a new first axis.

    Results are placed by index, so the stack is identical for any thread count.
    """
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(task, range(n_samples)))
    else:
        rows = []
        for index in range(n_samples):
            rows.append(task(index))
            if (index + 1) % config.BATCH_SIZE == 0:
                logger.debug(f"Drew {index + 1}/{n_samples} samples")
    return np.stack(rows)


def jackknife_blocks(n_samples: int) -> int:
    return min(config.JACKKNIFE_BLOCKS, n_samples // 2)


def covariance_with_errors(
    x: np.ndarray, blocks: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample covariance of the columns of ``x`` and delete-one-block jackknife errors.

    Args:
        x: Samples, shape (n_samples, n_columns).
        blocks: Number of contiguous jackknife blocks (default: up to 20).

    Returns:
        (covariance, stderr), both of shape (n_columns, n_columns).
    """
    n = x.shape[0]
    blocks = jackknife_blocks(n) if blocks is None else blocks
    if blocks < 2:
        raise ValueError(f"need at least 2 jackknife blocks, got {blocks} for {n} samples")

    full = np.cov(x, rowvar=False, ddof=1).reshape(x.shape[1], x.shape[1])
    edges = np.linspace(0, n, blocks + 1).astype(int)
    replicas = []
    for b in range(blocks):
        keep = np.concatenate([x[: edges[b]], x[edges[b + 1] :]])
        replicas.append(np.cov(keep, rowvar=False, ddof=1).reshape(full.shape))
    replicas_arr = np.stack(replicas)
    spread = replicas_arr - replicas_arr.mean(axis=0)
    stderr = np.sqrt((blocks - 1) / blocks * np.sum(spread**2, axis=0))
    return full, stderr


def estimate_covariance(
    params: OpaParams,
    grid: GridSpec,
    pairs: Iterable[CellPair],
    phi: float,
    n_samples: int,
    seed: int,
    output_field: int = 2,
    margin: float = config.LATTICE_MARGIN,
    threads: int = 1,
) -> CovarianceTable:
    """Sample covariance of X_phi over pixel/bin pairs with jackknife standard errors.

    Args:
        params: OPA model.
        grid: Pixel/bin grid.
        pairs: Cell pairs ((j, i), (j', i')).
        phi: Quadrature phase.
        n_samples: Realizations (>= 100).
        seed: Stream key; sample k uses the stream (seed, k).
        output_field: Teleported field.
        margin: Lattice margin around the pixel block, in coherence lengths.
        threads: Worker threads (wall time only).

    Returns:
        CovarianceTable with method "monte-carlo".

    Raises:
        GridTooCoarse: If the lattice cannot resolve the grid.
    """
    if n_samples < 100:
        raise ValueError(f"n_samples must be at least 100, got {n_samples}")
    pairs = list(pairs)
    for a, b in pairs:
        grid.check_cell(a)
        grid.check_cell(b)

    lattice = SpectralGrid.for_grid(params, grid, margin)
    lattice_coefficients(params, lattice)
    logger.info(
        f"Monte Carlo: {n_samples} samples, phi={phi:.4g}, delta={grid.delta}, "
        f"T={grid.t_window}, seed={seed}"
    )

    def task(index: int) -> np.ndarray:
        x = noise_quadratures(params, grid, lattice, phi, seed, index, output_field)
        return x.reshape(-1)

    samples = draw_samples(task, n_samples, threads)
    cov, stderr = covariance_with_errors(samples)

    # column of cell (j, i) in the flattened (n_pixels, nt) layout
    def column(cell: Tuple[int, int]) -> int:
        return cell[0] * grid.nt + cell[1]

    entries = {(a, b): float(cov[column(a), column(b)]) for a, b in pairs}
    errors = {(a, b): float(stderr[column(a), column(b)]) for a, b in pairs}
    return CovarianceTable(
        entries=entries,
        method="monte-carlo",
        fingerprint=parameter_fingerprint(params, grid, None, output_field),
        stderr=errors,
    )


def compare_tables(
    quad: CovarianceTable,
    mc: CovarianceTable,
    gate: float = config.STDERR_GATE,
) -> pd.DataFrame:
    """Side-by-side quadrature and Monte Carlo entries with a pass column.

    An entry passes when |c_mc - c_quad| <= gate * sqrt(stderr^2 + quad_error^2).

    Returns:
        DataFrame with columns j, i, jp, ip, c_quad, c_mc, stderr, z, pass.
    """
    if mc.stderr is None:
        raise ValueError("Monte Carlo table carries no standard errors")
    rows: List[dict] = []
    for pair, c_mc in mc.entries.items():
        a, b = pair
        c_quad = quad.value(a, b)
        quad_error = 0.0
        if quad.errors is not None:
            quad_error = quad.errors.get(pair, quad.errors.get((b, a), 0.0))
        combined = math.hypot(mc.stderr[pair], quad_error)
        diff = c_mc - c_quad
        z = diff / combined if combined > 0 else (0.0 if diff == 0 else math.inf)
        rows.append(
            {
                "j": a[0],
                "i": a[1],
                "jp": b[0],
                "ip": b[1],
                "c_quad": c_quad,
                "c_mc": c_mc,
                "stderr": mc.stderr[pair],
                "z": z,
                "pass": bool(abs(z) <= gate),
            }
        )
    frame = pd.DataFrame(
        rows, columns=["j", "i", "jp", "ip", "c_quad", "c_mc", "stderr", "z", "pass"]
    )
    failures = int((~frame["pass"]).sum())
    if failures:
        logger.warning(f"{failures} of {len(frame)} entries outside {gate} standard errors")
    return frame
