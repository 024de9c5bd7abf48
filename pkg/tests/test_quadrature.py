"""Tests for the batched Gauss-Kronrod rule and the quad_vec wrapper."""

import math

import numpy as np
import pytest

from kernel.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_WEIGHTS,
    NODES,
    adaptive_gauss_kronrod,
    integrate_vector,
)


def test_rule_weights_integrate_constants():
    assert KRONROD_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-14)
    assert GAUSS_WEIGHTS.sum() == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(NODES, -NODES[::-1])


@pytest.mark.parametrize("power", [2, 6, 12])
def test_both_rules_exact_for_low_degree(power):
    exact = 2.0 / (power + 1)
    assert NODES**power @ KRONROD_WEIGHTS == pytest.approx(exact, rel=1e-13)
    assert NODES**power @ GAUSS_WEIGHTS == pytest.approx(exact, rel=1e-13)


def test_kronrod_exact_beyond_gauss():
    exact = 2.0 / 21
    assert NODES**20 @ KRONROD_WEIGHTS == pytest.approx(exact, rel=1e-12)
    assert NODES**20 @ GAUSS_WEIGHTS != pytest.approx(exact, rel=1e-6)


def test_smooth_integrand():
    result = adaptive_gauss_kronrod(np.sin, 0.0, math.pi, epsabs=1e-9)
    assert result.converged
    assert result.value == pytest.approx(2.0, abs=1e-12)
    assert result.intervals == 1


def test_peaked_integrand_refines():
    eps = 1e-4

    def f(x):
        return 1.0 / (eps + x * x)

    exact = 2.0 / math.sqrt(eps) * math.atan(1.0 / math.sqrt(eps))
    result = adaptive_gauss_kronrod(f, -1.0, 1.0, epsabs=1e-8)
    assert result.converged
    assert result.value == pytest.approx(exact, abs=1e-7)
    assert result.error <= 1e-8
    assert result.intervals > 1


def test_limit_reached_reports_not_converged():
    result = adaptive_gauss_kronrod(
        lambda x: 1.0 / (1e-6 + x * x), -1.0, 1.0, epsabs=1e-12, limit=4
    )
    assert not result.converged
    assert result.intervals <= 4


def test_breakpoints_outside_interval_ignored():
    result = adaptive_gauss_kronrod(np.cos, 0.0, 1.0, epsabs=1e-12, points=[-3.0, 0.5, 2.0])
    assert result.intervals == 2
    assert result.value == pytest.approx(math.sin(1.0), abs=1e-13)


def test_result_independent_of_batch_order():
    def f(x):
        return np.abs(np.sin(7.0 * x)) ** 1.5

    first = adaptive_gauss_kronrod(f, 0.0, 3.0, epsabs=1e-9)
    second = adaptive_gauss_kronrod(f, 0.0, 3.0, epsabs=1e-9)
    assert first == second


def test_empty_interval_rejected():
    with pytest.raises(ValueError):
        adaptive_gauss_kronrod(np.sin, 1.0, 1.0, epsabs=1e-6)


def test_integrate_vector_half_line():
    rates = np.array([1.0, 2.0, 4.0])
    result = integrate_vector(lambda x: np.exp(-rates * x), 0.0, math.inf, epsabs=1e-11)
    assert result.converged
    np.testing.assert_allclose(result.value, 1.0 / rates, atol=1e-10)


def test_integrate_vector_breakpoints():
    result = integrate_vector(
        lambda x: np.array([abs(x - 0.3), abs(x - 0.3) ** 2]),
        0.0,
        1.0,
        epsabs=1e-12,
        points=[0.3],
    )
    np.testing.assert_allclose(result.value, [(0.09 + 0.49) / 2, (0.027 + 0.343) / 3], atol=1e-12)
