"""Tests for the OPA model: mismatch, Bogoliubov coefficients and squeezing ellipses."""

import math
import warnings

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from physics.opa import (
    EllipseParams,
    OpaParams,
    SpectralPoint,
    bogoliubov,
    coefficients_from_mismatch,
    ellipse,
    ellipse_arrays,
    ellipse_dispersion_scan,
    ellipse_pair,
    pair_mismatch,
    reduce_angle,
)

finite = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False, allow_infinity=False)


def test_default_parameter_set(default_params):
    assert default_params.sigma == 3.0
    assert default_params.delta0 == 0.0
    assert default_params.gvm == 1.0
    assert default_params.gvd == 0.0
    assert default_params.diffraction == 1.0
    assert default_params.pump_phase == pytest.approx(math.pi)
    assert default_params.wavelength_ratio == pytest.approx(1.0 / 1.5)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"sigma": -1.0},
        {"diffraction": 0.0},
        {"delta0": math.nan},
        {"omega1": 1.0, "omega2": 1.0, "omega_p": 2.5},
    ],
)
def test_invalid_parameters_rejected(kwargs):
    with pytest.raises(ValueError):
        OpaParams(**kwargs)


@pytest.mark.parametrize(
    "pt, expected",
    [
        (SpectralPoint(0.0, 0.0, 0.0), 0.0),
        (SpectralPoint(1.0, 0.0, 0.0), -1.0),
        (SpectralPoint(0.0, 0.0, 1.0), 1.0),
        (SpectralPoint(1.0, 1.0, -2.0), -4.0),
    ],
)
def test_pair_mismatch(default_params, pt, expected):
    assert pair_mismatch(default_params, pt) == pytest.approx(expected)


def test_pair_mismatch_with_dispersion():
    params = OpaParams(gvd=0.5, delta0=0.25)
    assert pair_mismatch(params, SpectralPoint(0.0, 0.0, 2.0)) == pytest.approx(4.25)


def test_bogoliubov_on_phase_matching(default_params):
    coeffs = bogoliubov(default_params, SpectralPoint())
    assert coeffs.u1 == pytest.approx(math.cosh(3.0), abs=1e-12)
    # pump phase pi flips the sign of v
    assert coeffs.v1 == pytest.approx(-math.sinh(3.0), abs=1e-12)
    assert coeffs.u1 == coeffs.u2m
    assert coeffs.v1 == coeffs.v2m


def test_bogoliubov_outside_band_matches_symbolic_oracle():
    params = OpaParams(sigma=1.0, delta0=4.0, pump_phase=0.0)
    coeffs = bogoliubov(params, SpectralPoint())

    root3 = sp.sqrt(3)
    u_exact = sp.exp(2 * sp.I) * (sp.cos(root3) - 2 * sp.I * sp.sin(root3) / root3)
    v_exact = sp.exp(2 * sp.I) * sp.sin(root3) / root3
    assert coeffs.u1 == pytest.approx(complex(sp.N(u_exact, 30)), abs=1e-12)
    assert coeffs.v1 == pytest.approx(complex(sp.N(v_exact, 30)), abs=1e-12)
    assert abs(coeffs.v1) == pytest.approx(0.5698, abs=1e-4)


def test_bogoliubov_inside_band_matches_symbolic_oracle():
    params = OpaParams(sigma=2.0, delta0=1.0, pump_phase=0.3)
    coeffs = bogoliubov(params, SpectralPoint(0.5, 0.0, 0.0))
    d = sp.Rational(3, 4)
    gamma = sp.sqrt(4 - d**2 / 4)
    u_exact = sp.exp(sp.I * d / 2) * (sp.cosh(gamma) - sp.I * d / 2 * sp.sinh(gamma) / gamma)
    v_exact = sp.exp(sp.I * (sp.Rational(3, 10) + d / 2)) * 2 * sp.sinh(gamma) / gamma
    assert coeffs.u1 == pytest.approx(complex(sp.N(u_exact, 30)), abs=1e-12)
    assert coeffs.v1 == pytest.approx(complex(sp.N(v_exact, 30)), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    sigma=st.floats(min_value=0.0, max_value=3.0),
    delta0=st.floats(min_value=-20.0, max_value=20.0),
    qx=finite,
    qy=finite,
    omega=finite,
)
def test_unitarity(sigma, delta0, qx, qy, omega):
    params = OpaParams(sigma=sigma, delta0=delta0)
    coeffs = bogoliubov(params, SpectralPoint(qx, qy, omega))
    assert coeffs.unitarity_defect() < 1e-12


def test_unitarity_across_series_threshold():
    params = OpaParams(sigma=1.0)
    d = np.array([2.0 - 1e-9, 2.0, 2.0 + 1e-9, -2.0, 2.0 - 1e-17])
    u, v = coefficients_from_mismatch(params, d)
    np.testing.assert_allclose(np.abs(u) ** 2 - np.abs(v) ** 2, 1.0, atol=1e-12)


def test_band_edge_continuity():
    params = OpaParams(sigma=1.5)
    edge = params.band_edge()
    u_in, v_in = coefficients_from_mismatch(params, edge - 1e-7)
    u_out, v_out = coefficients_from_mismatch(params, edge + 1e-7)
    assert abs(u_in - u_out) < 1e-6
    assert abs(v_in - v_out) < 1e-6


def test_ellipse_at_band_center(default_params):
    e = ellipse(default_params, 2, SpectralPoint())
    assert e.psi == pytest.approx(math.pi / 2, abs=1e-12)
    assert e.r == pytest.approx(3.0, abs=1e-12)
    assert e.major * e.minor == pytest.approx(1.0)


def test_ellipse_off_center_is_less_squeezed(default_params):
    center = ellipse(default_params, 2, SpectralPoint())
    detuned = ellipse(default_params, 2, SpectralPoint(omega=1.0))
    assert 0.0 < detuned.r < center.r
    assert detuned.psi != pytest.approx(center.psi)


def test_classical_limit_has_no_squeezing(vacuum_params):
    for pt in (SpectralPoint(), SpectralPoint(1.0, -2.0, 3.0)):
        assert ellipse(vacuum_params, 1, pt).r == pytest.approx(0.0, abs=1e-14)
        assert ellipse(vacuum_params, 2, pt).r == pytest.approx(0.0, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(qx=finite, qy=finite, omega=finite)
def test_reciprocity_between_fields(qx, qy, omega):
    params = OpaParams(sigma=2.0, delta0=0.7, gvd=0.3)
    pt = SpectralPoint(qx, qy, omega)
    e1 = ellipse(params, 1, pt)
    e2 = ellipse(params, 2, -pt)
    assert e1.r == pytest.approx(e2.r, abs=1e-12)
    assert e1.psi == pytest.approx(e2.psi, abs=1e-12)


def test_ellipse_pair_covers_both_frequencies(default_params):
    pt = SpectralPoint(omega=0.8)
    plus, minus = ellipse_pair(default_params, pt)
    assert plus == ellipse(default_params, 2, pt)
    assert minus == ellipse(default_params, 2, -pt)
    # group-velocity mismatch tilts the two ellipses in opposite directions
    assert plus.r == pytest.approx(minus.r)
    assert plus.psi + minus.psi == pytest.approx(math.pi, abs=1e-12)


def test_invalid_field_index(default_params):
    with pytest.raises(ValueError):
        ellipse(default_params, 3, SpectralPoint())


def test_ellipse_arrays_match_scalar_ellipse(default_params):
    omega = np.linspace(-4.0, 4.0, 9)
    psi, r = ellipse_arrays(default_params, 2, 0.3, 0.0, omega)
    for k, w in enumerate(omega):
        e = ellipse(default_params, 2, SpectralPoint(0.3, 0.0, float(w)))
        assert psi[k] == pytest.approx(e.psi, abs=1e-14)
        assert r[k] == pytest.approx(e.r, abs=1e-14)


@given(st.floats(min_value=-1e3, max_value=1e3))
def test_reduce_angle_range(angle):
    reduced = reduce_angle(angle)
    assert 0.0 <= reduced < math.pi
    turns = (angle - reduced) / math.pi
    assert turns == pytest.approx(round(turns), abs=1e-9)


def test_reduce_angle_tiny_negative():
    assert reduce_angle(-1e-18) < math.pi


def test_ellipse_params_validation():
    with pytest.raises(ValueError):
        EllipseParams(psi=0.0, r=-0.1)
    with pytest.raises(ValueError):
        EllipseParams(psi=math.pi, r=0.0)


def test_dispersion_scan(default_params):
    frame = ellipse_dispersion_scan(default_params, -12.0, 12.0, 241)
    assert list(frame.columns) == ["omega", "psi", "r", "major", "minor"]
    assert len(frame) == 241
    np.testing.assert_allclose(frame["major"] * frame["minor"], 1.0)
    center = frame.loc[frame["omega"].abs().idxmin()]
    assert center["r"] == pytest.approx(3.0)
    assert center["psi"] == pytest.approx(math.pi / 2)
    assert (frame["psi"] >= 0).all() and (frame["psi"] < math.pi).all()


@pytest.mark.parametrize("args", [(-1.0, 1.0, 1), (1.0, 1.0, 5), (2.0, -2.0, 5)])
def test_dispersion_scan_rejects_bad_ranges(default_params, args):
    with pytest.raises(ValueError):
        ellipse_dispersion_scan(default_params, *args)


def test_far_outside_band_is_warning_free(default_params):
    d = np.array([0.0, 1e3, 1e4, -1e5])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        u, v = coefficients_from_mismatch(default_params, d)
    assert np.all(np.isfinite(u)) and np.all(np.isfinite(v))
    np.testing.assert_allclose(np.abs(u) ** 2 - np.abs(v) ** 2, 1.0, atol=1e-9)
