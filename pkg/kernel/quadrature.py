"""Adaptive quadrature building blocks.

Two layers:

* ``adaptive_gauss_kronrod``: globally adaptive G7/K15 over one axis whose
  integrand accepts a whole batch of nodes at once, so every refinement round
  costs a single vectorized call.
* ``integrate_vector``: thin wrapper around ``scipy.integrate.quad_vec`` for
  inner axes whose integrand returns one value per outer node.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad_vec

import config

logger = logging.getLogger(__name__)

# Kronrod 15-point abscissae (positive half, descending) and weights
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
    ]
)
_WGK_CENTER = 0.209482141084727828012999174891714
# Gauss 7-point weights for xgk[1], xgk[3], xgk[5] and the center
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
    ]
)
_WG_CENTER = 0.417959183673469387755102040816327

NODES = np.concatenate([-_XGK, [0.0], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK, [_WGK_CENTER], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG
GAUSS_WEIGHTS[7] = _WG_CENTER
GAUSS_WEIGHTS[[13, 11, 9]] = _WG

# Refinement rounds split at most this many intervals at once
_MAX_SPLIT_PER_ROUND = 64

BatchIntegrand = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class QuadResult:
    """Outcome of an adaptive integration."""

    value: float
    error: float
    intervals: int
    converged: bool


def _apply_rule(f: BatchIntegrand, lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kronrod estimates and |K - G| errors on each interval, one call to ``f``."""
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes = center[:, None] + half[:, None] * NODES[None, :]
    values = np.asarray(f(nodes.ravel()), dtype=float).reshape(nodes.shape)
    kronrod = half * (values @ KRONROD_WEIGHTS)
    gauss = half * (values @ GAUSS_WEIGHTS)
    return kronrod, np.abs(kronrod - gauss)


def adaptive_gauss_kronrod(
    f: BatchIntegrand,
    a: float,
    b: float,
    epsabs: float,
    epsrel: float = 0.0,
    limit: int = config.MAX_SUBDIVISIONS,
    points: Optional[Sequence[float]] = None,
) -> QuadResult:
    """Globally adaptive G7/K15 quadrature of a batch integrand over [a, b].

    Each round bisects the intervals carrying the largest error estimates
    (enough of them to hold half of the total error) and evaluates all new
    nodes in one call.

    Args:
        f: Integrand mapping a 1-D array of abscissae to values.
        a: Lower limit (finite).
        b: Upper limit (finite, > a).
        epsabs: Absolute error target.
        epsrel: Relative error target.
        limit: Maximum number of subintervals.
        points: Extra breakpoints inside (a, b) used for the initial partition.

    Returns:
        QuadResult; ``converged`` is False when ``limit`` was reached first.
    """
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")

    edges = [a, b]
    if points is not None:
        edges.extend(p for p in points if a < p < b)
    edges = sorted(set(edges))
    lo = np.array(edges[:-1], dtype=float)
    hi = np.array(edges[1:], dtype=float)
    values, errors = _apply_rule(f, lo, hi)

    while True:
        total = float(np.sum(values))
        error = float(np.sum(errors))
        target = max(epsabs, epsrel * abs(total))
        if error <= target:
            return QuadResult(total, error, len(lo), True)
        if len(lo) >= limit:
            logger.debug(f"Subdivision limit {limit} reached (error {error:.3e})")
            return QuadResult(total, error, len(lo), False)

        # Worst intervals first; ties broken by position for determinism
        order = np.lexsort((lo, -errors))
        width = hi[order] - lo[order]
        splittable = width > 1e-14 * np.maximum(1.0, np.abs(lo[order]))
        order = order[splittable]
        if order.size == 0:
            return QuadResult(total, error, len(lo), False)
        cumulative = np.cumsum(errors[order])
        count = int(np.searchsorted(cumulative, 0.5 * error)) + 1
        count = min(count, _MAX_SPLIT_PER_ROUND, limit - len(lo), order.size)
        chosen = order[:count]

        keep = np.ones(len(lo), dtype=bool)
        keep[chosen] = False
        mid = 0.5 * (lo[chosen] + hi[chosen])
        new_lo = np.concatenate([lo[chosen], mid])
        new_hi = np.concatenate([mid, hi[chosen]])
        new_values, new_errors = _apply_rule(f, new_lo, new_hi)

        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        values = np.concatenate([values[keep], new_values])
        errors = np.concatenate([errors[keep], new_errors])

        # Keep intervals ordered by position so sums do not depend on history
        by_position = np.argsort(lo, kind="stable")
        lo, hi = lo[by_position], hi[by_position]
        values, errors = values[by_position], errors[by_position]


@dataclass(frozen=True)
class VectorQuadResult:
    """Outcome of a vector-valued inner integration."""

    value: np.ndarray
    error: float
    converged: bool


def integrate_vector(
    f: Callable[[float], np.ndarray],
    a: float,
    b: float,
    epsabs: float,
    epsrel: float = 0.0,
    limit: int = config.MAX_SUBDIVISIONS,
    points: Optional[Sequence[float]] = None,
) -> VectorQuadResult:
    """Adaptive integral of a vector-valued function with ``scipy.integrate.quad_vec``.

    Infinite limits are accepted (quad_vec maps them onto finite intervals).
    The error is measured in the max norm over components.
    """
    value, error, info = quad_vec(
        f,
        a,
        b,
        epsabs=epsabs,
        epsrel=epsrel,
        norm="max",
        limit=limit,
        points=points,
        full_output=True,
    )
    converged = bool(info.success)
    if not converged:
        logger.debug(f"quad_vec on [{a}, {b}] stopped: {info.message}")
    return VectorQuadResult(np.asarray(value), float(error), converged)
