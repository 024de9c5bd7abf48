"""Added-noise covariance of the teleported image by deterministic quadrature.

The covariance of cells (j, i) and (j', i') is split into the classical part
(two vacuum units, closed form) and a correction

    2 * int d^2q dW  B_D(q) B_T(W) cos(q.dr) cos(W dt) (G(q, W) - 1)

which is evaluated in scaled polar variables w = |q| D/2 (radial, batched
Gauss-Kronrod on a mapped half-line), the polar angle and s = W T/2 (both with
``scipy.integrate.quad_vec``). G depends on q only through |q|^2 and the
window product is even in qx and qy, so the angle runs over one quadrant.
"""

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from errors import QuadratureNotConverged
from kernel.quadrature import adaptive_gauss_kronrod, integrate_vector
from physics.compensation import CompensationProfile, compensate_orientation
from physics.opa import ArrayLike, EllipseParams, OpaParams, ellipse_arrays

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]  # (flat pixel index j, time bin i)
CellPair = Tuple[Cell, Cell]

_POLAR_FACTOR = 8.0 / math.pi**2
_REFINE_PASSES = 3


@dataclass(frozen=True)
class GridSpec:
    """Pixel/time-bin grid used for coarse-graining.

    Pixels are indexed row-major, j = jy * nx + jx, with centers
    (x0 + (jx + 1/2) delta, y0 + (jy + 1/2) delta); bin i is centered at
    t0 + (i + 1/2) t_window.
    """

    delta: float = config.DEFAULT_PIXEL_SIZE
    t_window: float = config.DEFAULT_T_WINDOW
    nx: int = 1
    ny: int = 1
    nt: int = 1
    x0: float = 0.0
    y0: float = 0.0
    t0: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise ValueError(f"pixel size must be positive, got {self.delta}")
        if not (math.isfinite(self.t_window) and self.t_window > 0):
            raise ValueError(f"bin duration must be positive, got {self.t_window}")
        if min(self.nx, self.ny, self.nt) < 1:
            raise ValueError(f"grid counts must be >= 1, got {(self.nx, self.ny, self.nt)}")

    @property
    def n_pixels(self) -> int:
        return self.nx * self.ny

    @property
    def pixel_area(self) -> float:
        return self.delta * self.delta

    def pixel_index(self, j: int) -> Tuple[int, int]:
        """(jx, jy) of flat pixel index ``j``."""
        if not 0 <= j < self.n_pixels:
            raise ValueError(f"pixel index {j} outside grid of {self.n_pixels} pixels")
        return j % self.nx, j // self.nx

    def flat_index(self, jx: int, jy: int) -> int:
        return jy * self.nx + jx

    def pixel_center(self, j: int) -> Tuple[float, float]:
        jx, jy = self.pixel_index(j)
        return self.x0 + (jx + 0.5) * self.delta, self.y0 + (jy + 0.5) * self.delta

    def bin_center(self, i: int) -> float:
        self.check_cell((0, i))
        return self.t0 + (i + 0.5) * self.t_window

    def check_cell(self, cell: Cell) -> None:
        j, i = cell
        self.pixel_index(j)
        if not 0 <= i < self.nt:
            raise ValueError(f"bin index {i} outside grid of {self.nt} bins")

    def cells(self) -> List[Cell]:
        return [(j, i) for j in range(self.n_pixels) for i in range(self.nt)]

    def diagonal_pairs(self) -> List[CellPair]:
        return [(c, c) for c in self.cells()]

    def all_pairs(self) -> List[CellPair]:
        """Every unordered pair of cells, diagonal included, in index order."""
        cells = self.cells()
        return [(a, b) for k, a in enumerate(cells) for b in cells[k:]]

    def offset(self, a: Cell, b: Cell) -> Tuple[int, int, int]:
        """Integer (dx, dy, dt) offset from cell ``b`` to cell ``a`` in grid units."""
        ax, ay = self.pixel_index(a[0])
        bx, by = self.pixel_index(b[0])
        return ax - bx, ay - by, a[1] - b[1]

    def with_shape(self, nx: int, ny: int, nt: int) -> "GridSpec":
        return GridSpec(self.delta, self.t_window, nx, ny, nt, self.x0, self.y0, self.t0)


@dataclass
class CovarianceTable:
    """Added-noise covariance entries keyed by cell pairs.

    Attributes:
        entries: C for each requested ((j, i), (j', i')).
        method: "quadrature" or "monte-carlo".
        fingerprint: Hash of the model, grid and compensation that produced it.
        stderr: Standard errors (Monte Carlo only).
        errors: Quadrature error estimates (quadrature only).
    """

    entries: Dict[CellPair, float]
    method: str
    fingerprint: str
    stderr: Optional[Dict[CellPair, float]] = None
    errors: Optional[Dict[CellPair, float]] = None

    def value(self, a: Cell, b: Cell) -> float:
        if (a, b) in self.entries:
            return self.entries[(a, b)]
        return self.entries[(b, a)]

    def diagonal(self) -> Dict[Cell, float]:
        return {a: c for (a, b), c in self.entries.items() if a == b}

    def to_frame(self) -> pd.DataFrame:
        """Rows ``j,i,jp,ip,c`` (plus ``stderr`` for Monte Carlo tables)."""
        rows = []
        for (a, b), c in self.entries.items():
            row = {"j": a[0], "i": a[1], "jp": b[0], "ip": b[1], "c": c}
            if self.stderr is not None:
                row["stderr"] = self.stderr[(a, b)]
            rows.append(row)
        columns = ["j", "i", "jp", "ip", "c"]
        if self.stderr is not None:
            columns.append("stderr")
        return pd.DataFrame(rows, columns=columns)


def parameter_fingerprint(
    params: OpaParams,
    grid: GridSpec,
    comp: Optional[CompensationProfile] = None,
    output_field: int = 2,
) -> str:
    """Stable short hash of everything a covariance table depends on."""
    payload = {
        "opa": asdict(params),
        "grid": asdict(grid),
        "compensation": comp.to_dict() if comp is not None else None,
        "output_field": output_field,
    }
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# Green function and windows


def green(e: EllipseParams) -> float:
    """Added-noise spectral density G = e^{2r} cos^2(psi) + e^{-2r} sin^2(psi)."""
    return float(green_arrays(e.psi, e.r))


def green_arrays(psi: ArrayLike, r: ArrayLike) -> np.ndarray:
    cos2 = np.cos(psi) ** 2
    return np.exp(2.0 * r) * cos2 + np.exp(-2.0 * r) * (1.0 - cos2)


def green_excess(psi: ArrayLike, r: ArrayLike) -> np.ndarray:
    """G - 1 without cancellation for small r."""
    cos2 = np.cos(psi) ** 2
    return np.expm1(2.0 * r) * cos2 + np.expm1(-2.0 * r) * (1.0 - cos2)


def _sinc2(x: ArrayLike) -> np.ndarray:
    # np.sinc is sin(pi x)/(pi x)
    return np.sinc(np.asarray(x) / math.pi) ** 2


def window_spatial(delta: float, qx: ArrayLike, qy: ArrayLike) -> ArrayLike:
    """B_D(q) = (D^2/4pi^2) sinc^2(qx D/2) sinc^2(qy D/2)."""
    scale = delta * delta / (4.0 * math.pi**2)
    return scale * _sinc2(0.5 * delta * np.asarray(qx)) * _sinc2(0.5 * delta * np.asarray(qy))


def window_temporal(t_window: float, omega: ArrayLike) -> ArrayLike:
    """B_T(W) = (T/2pi) sinc^2(W T/2)."""
    return t_window / (2.0 * math.pi) * _sinc2(0.5 * t_window * np.asarray(omega))


def _tri(u: float) -> float:
    return max(0.0, 1.0 - abs(u))


def classical_covariance(grid: GridSpec, dj: Tuple[float, float], di: float) -> float:
    """Vacuum-only covariance 2 tri(dx) tri(dy) tri(dt) for offsets in grid units.

    Args:
        grid: Grid (only its pitch matters through the unit convention).
        dj: Pixel offset (dx, dy) in units of the pixel size; may be fractional.
        di: Bin offset in units of the bin duration.

    Returns:
        2 for coincident cells, 0 for distinct grid cells.
    """
    return 2.0 * _tri(dj[0]) * _tri(dj[1]) * _tri(di)


# Correction integral


def _angular_bound(w: np.ndarray) -> np.ndarray:
    """Upper bound of int_0^{pi/2} sinc^2(w cos) sinc^2(w sin) dtheta."""
    with np.errstate(divide="ignore"):
        return np.minimum(0.5 * math.pi, 4.0 * math.pi / np.maximum(w, 1e-300) ** 3)


class _NoiseIntegral:
    """Correction term for one cell offset, in scaled polar variables."""

    def __init__(
        self,
        params: OpaParams,
        delta: float,
        t_window: float,
        offset: Tuple[float, float, float],
        comp: Optional[CompensationProfile],
        output_field: int,
        limit: int,
    ) -> None:
        self.params = params
        self.delta = delta
        self.t_window = t_window
        sx, sy, st = (abs(v) for v in offset)
        self.kx = 2.0 * sx / delta
        self.ky = 2.0 * sy / delta
        self.kt = 2.0 * st / t_window
        self.comp = comp
        self.output_field = output_field
        self.limit = limit
        self.inner_error = 0.0
        self.s_points = self._band_edges()
        self.w_points = self._radial_breakpoints()

    def _band_edges(self) -> List[float]:
        """Scaled frequencies s where |D(q=0, W)| = 2 sigma."""
        p = self.params
        sign = 1.0 if self.output_field == 1 else -1.0
        edges = set()
        for level in (2.0 * p.sigma, -2.0 * p.sigma):
            for root in np.roots([p.gvd, sign * p.gvm, p.delta0 - level]):
                if abs(root.imag) < 1e-12:
                    edges.add(0.5 * self.t_window * float(root.real))
        edges.discard(0.0)
        return sorted(edges)

    def _radial_breakpoints(self) -> List[float]:
        p = self.params
        kappa_band = math.sqrt((abs(p.delta0) + 2.0 * p.sigma) / p.diffraction)
        w_band = 0.5 * self.delta * kappa_band
        top = max(64.0, 4.0 * w_band)
        points = [0.25 * 2.0**k for k in range(int(math.log2(top / 0.25)) + 1)]
        if w_band > 0:
            points.append(w_band)
        return sorted(set(points))

    def _temporal(
        self, p2: np.ndarray, scale: np.ndarray, epsabs: float
    ) -> Tuple[np.ndarray, float]:
        """scale * (1/pi) int ds sinc^2(s) cos(kt s) (G - 1)."""
        q = np.sqrt(p2)
        omega_per_s = 2.0 / self.t_window

        def integrand(s: float) -> np.ndarray:
            omega = omega_per_s * s
            psi, r = ellipse_arrays(self.params, self.output_field, q, 0.0, omega)
            psi = compensate_orientation(psi, self.comp, omega, p2)
            weight = _sinc2(s) * math.cos(self.kt * s) / math.pi
            return scale * weight * green_excess(psi, r)

        result = integrate_vector(
            integrand, -math.inf, math.inf, epsabs, 0.0, self.limit, self.s_points or None
        )
        if not result.converged:
            raise QuadratureNotConverged(result.error, epsabs, "frequency axis")
        return result.value, result.error

    def _angular(
        self, w: np.ndarray, scale: np.ndarray, epsabs: float
    ) -> Tuple[np.ndarray, float]:
        """scale * int_0^{pi/2} sinc^2(w cos) sinc^2(w sin) cos(kx w cos) cos(ky w sin)."""

        def integrand(theta: float) -> np.ndarray:
            c, s = math.cos(theta), math.sin(theta)
            value = _sinc2(w * c) * _sinc2(w * s)
            if self.kx:
                value = value * np.cos(self.kx * w * c)
            if self.ky:
                value = value * np.cos(self.ky * w * s)
            return scale * value

        result = integrate_vector(integrand, 0.0, 0.5 * math.pi, epsabs, 0.0, self.limit)
        if not result.converged:
            raise QuadratureNotConverged(result.error, epsabs, "angular axis")
        return result.value, result.error

    def _radial_integrand(self, epsabs: float):
        """Integrand in t, w = t/(1-t); each node carries error <= epsabs."""

        def integrand(t: np.ndarray) -> np.ndarray:
            one_minus = 1.0 - t
            w = t / one_minus
            weight = _POLAR_FACTOR * w / (one_minus * one_minus)
            bound = weight * _angular_bound(w)

            # H scaled by the angular bound, so its error is already in outer units
            scaled_h, h_error = self._temporal(
                (2.0 * w / self.delta) ** 2, bound, 0.25 * epsabs
            )
            with np.errstate(invalid="ignore", divide="ignore"):
                h = np.where(bound > 0, scaled_h / bound, 0.0)

            # Nodes whose contribution is provably below the budget are dropped
            active = np.abs(scaled_h) > 0.125 * epsabs
            values = np.zeros_like(w)
            a_error = 0.0
            if np.any(active):
                values[active], a_error = self._angular(
                    w[active], weight[active] * h[active], 0.25 * epsabs
                )
            dropped = float(np.max(np.abs(scaled_h[~active]), initial=0.0))
            self.inner_error = max(self.inner_error, h_error + a_error + dropped)
            return values

        return integrand

    def evaluate(self, epsabs: float) -> Tuple[float, float]:
        """Correction value and total error estimate for absolute target ``epsabs``."""
        if self.params.sigma == 0.0:
            return 0.0, 0.0
        self.inner_error = 0.0
        t_points = [w / (1.0 + w) for w in self.w_points]
        result = adaptive_gauss_kronrod(
            self._radial_integrand(epsabs), 0.0, 1.0, 0.25 * epsabs, 0.0, self.limit, t_points
        )
        error = result.error + self.inner_error
        if not result.converged:
            raise QuadratureNotConverged(error, epsabs, "radial axis")
        return result.value, error


def _offset_entry(
    params: OpaParams,
    grid: GridSpec,
    offset: Tuple[int, int, int],
    comp: Optional[CompensationProfile],
    tol: float,
    output_field: int,
    limit: int,
) -> Tuple[float, float]:
    """Covariance and error estimate for one integer cell offset."""
    dx, dy, dt = offset
    c_cl = classical_covariance(grid, (dx, dy), dt)
    integral = _NoiseIntegral(
        params,
        grid.delta,
        grid.t_window,
        (dx * grid.delta, dy * grid.delta, dt * grid.t_window),
        comp,
        output_field,
        limit,
    )

    target = tol * max(abs(c_cl), config.ABS_FLOOR)
    needed = target
    error = math.inf
    for attempt in range(_REFINE_PASSES):
        correction, error = integral.evaluate(target)
        total = c_cl + correction
        needed = tol * max(abs(total), config.ABS_FLOOR)
        if error <= needed:
            logger.debug(
                f"Offset {offset}: C={total:.10g} (error {error:.2e}, pass {attempt + 1})"
            )
            return total, error
        target = 0.5 * needed
    raise QuadratureNotConverged(error, needed, f"offset {offset}")


def added_noise_covariance(
    params: OpaParams,
    grid: GridSpec,
    pairs: Iterable[CellPair],
    comp: Optional[CompensationProfile] = None,
    tol: float = config.DEFAULT_TOL,
    output_field: int = 2,
    max_subdivisions: int = config.MAX_SUBDIVISIONS,
    workers: int = 1,
) -> CovarianceTable:
    """Added-noise covariance of the requested cell pairs by nested quadrature.

    Entries depend only on |offset| per axis, so each distinct offset is
    integrated once and shared by every pair with that offset.

    Args:
        params: OPA model.
        grid: Coarse-graining grid.
        pairs: Cell pairs ((j, i), (j', i')).
        comp: Optional compensation applied to the ellipse orientation.
        tol: Relative tolerance; the absolute target is tol * max(|C|, 1e-3).
        output_field: Teleported field (2 for omega1 -> omega2, 1 for the reverse).
        max_subdivisions: Subdivision limit per axis.
        workers: Threads evaluating distinct offsets concurrently.

    Returns:
        CovarianceTable with method "quadrature".

    Raises:
        QuadratureNotConverged: If an entry cannot reach its target.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if output_field not in (1, 2):
        raise ValueError(f"output field must be 1 or 2, got {output_field}")

    pairs = list(pairs)
    keys: Dict[CellPair, Tuple[int, int, int]] = {}
    for a, b in pairs:
        grid.check_cell(a)
        grid.check_cell(b)
        dx, dy, dt = grid.offset(a, b)
        keys[(a, b)] = (abs(dx), abs(dy), abs(dt))
    unique = sorted(set(keys.values()))
    logger.info(
        f"Quadrature: {len(pairs)} pairs, {len(unique)} distinct offsets, "
        f"delta={grid.delta}, T={grid.t_window}, tol={tol}"
    )

    def run(offset: Tuple[int, int, int]) -> Tuple[float, float]:
        return _offset_entry(params, grid, offset, comp, tol, output_field, max_subdivisions)

    if workers > 1 and len(unique) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = dict(zip(unique, pool.map(run, unique)))
    else:
        results = {offset: run(offset) for offset in unique}

    return CovarianceTable(
        entries={pair: results[key][0] for pair, key in keys.items()},
        method="quadrature",
        fingerprint=parameter_fingerprint(params, grid, comp, output_field),
        errors={pair: results[key][1] for pair, key in keys.items()},
    )


def diagonal_covariance(
    params: OpaParams,
    delta: float,
    t_window: float,
    comp: Optional[CompensationProfile] = None,
    tol: float = config.DEFAULT_TOL,
    output_field: int = 2,
    max_subdivisions: int = config.MAX_SUBDIVISIONS,
) -> float:
    """Diagonal added noise C((j, i), (j, i)) for pixel size ``delta`` and bin ``t_window``."""
    grid = GridSpec(delta=delta, t_window=t_window)
    value, _ = _offset_entry(params, grid, (0, 0, 0), comp, tol, output_field, max_subdivisions)
    return value


def diagonal_scan(
    params: OpaParams,
    d_values: Sequence[float],
    t_values: Sequence[float],
    comp: Optional[CompensationProfile] = None,
    tol: float = config.DEFAULT_TOL,
    output_field: int = 2,
) -> pd.DataFrame:
    """Diagonal added noise versus pixel size for each bin duration.

    Returns:
        DataFrame with columns delta, t, c_diag; rows grouped by t in the
        given order, then by delta.
    """
    rows = []
    for t_window in t_values:
        for delta in d_values:
            c_diag = diagonal_covariance(params, delta, t_window, comp, tol, output_field)
            logger.info(f"Scan: delta={delta}, T={t_window} -> C_diag={c_diag:.6g}")
            rows.append({"delta": float(delta), "t": float(t_window), "c_diag": c_diag})
    return pd.DataFrame(rows, columns=["delta", "t", "c_diag"])


@dataclass(frozen=True)
class DegreesOfFreedom:
    """Smallest pixel volume meeting a noise threshold and the resulting mode count."""

    count: float
    delta: float
    t_window: float
    c_diag: float
    candidates: List[Tuple[float, float, float]] = field(default_factory=list, compare=False)


def effective_degrees_of_freedom(
    params: OpaParams,
    area: float,
    duration: float,
    threshold: float,
    d_values: Sequence[float],
    t_values: Sequence[float],
    comp: Optional[CompensationProfile] = None,
    tol: float = config.DEFAULT_TOL,
    output_field: int = 2,
) -> Optional[DegreesOfFreedom]:
    """Number of independent image cells that can be teleported below ``threshold``.

    Candidates (delta, T) are tried in order of increasing pixel volume
    delta^2 * T; the first whose diagonal noise is <= threshold fixes the
    count (area / delta^2) * (duration / T).

    Args:
        params: OPA model.
        area: Illuminated transverse area.
        duration: Total observation time.
        threshold: Largest acceptable diagonal added noise.
        d_values: Candidate pixel sizes.
        t_values: Candidate bin durations.
        comp: Optional compensation.
        tol: Quadrature tolerance.
        output_field: Teleported field.

    Returns:
        DegreesOfFreedom, or None when no candidate meets the threshold.
    """
    if area <= 0 or duration <= 0:
        raise ValueError("area and duration must be positive")

    candidates = sorted(
        ((d * d * t, d, t) for d in d_values for t in t_values),
        key=lambda item: (item[0], item[1], item[2]),
    )
    tried: List[Tuple[float, float, float]] = []
    for _, delta, t_window in candidates:
        c_diag = diagonal_covariance(params, delta, t_window, comp, tol, output_field)
        tried.append((delta, t_window, c_diag))
        if c_diag <= threshold:
            count = (area / (delta * delta)) * (duration / t_window)
            logger.info(
                f"Degrees of freedom: {count:.6g} cells at delta={delta}, T={t_window} "
                f"(C_diag={c_diag:.6g})"
            )
            return DegreesOfFreedom(count, delta, t_window, c_diag, tried)
    logger.info(f"No pixel volume meets C_diag <= {threshold}")
    return None
