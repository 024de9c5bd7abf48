"""Tests for the image teleportation pipeline."""

import logging
import math

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import dblquad

from kernel.noise import diagonal_covariance
from storage.pgm import GrayImage, read_pgm, write_pgm
from teleport.pipeline import (
    ImagePlane,
    added_noise_estimate,
    fidelity_map,
    load_image,
    load_image_stack,
    protocol_explicit,
    teleport,
)

SEED = 20061
GATE = 3.0


def _gaussian(x: float, var: float) -> float:
    return math.exp(-0.5 * x * x / var) / math.sqrt(2.0 * math.pi * var)


def _overlap_fidelity(c: float) -> float:
    """Overlap of a coherent state with the same state plus classical noise C.

    Wigner functions in units where the vacuum quadrature variance is 1/2;
    the teleported state's variance is (1 + C)/2 per quadrature.
    """
    s_in, s_out = 0.5, 0.5 * (1.0 + c)
    bound = 12.0 * math.sqrt(s_out)

    def integrand(p: float, x: float) -> float:
        return (
            2.0 * math.pi
            * _gaussian(x, s_in) * _gaussian(p, s_in)
            * _gaussian(x, s_out) * _gaussian(p, s_out)
        )

    value, _ = dblquad(integrand, -bound, bound, -bound, bound, epsabs=1e-10)
    return value


def _write_gray(path, pixels, maxval=255, binary=False):
    return write_pgm(path, GrayImage(np.array(pixels), maxval), binary=binary)


@pytest.fixture
def pair_image() -> ImagePlane:
    """2x1 image, one dark and one bright pixel, at scale 4."""
    return ImagePlane(alpha=np.array([[0.0], [2.0]], dtype=complex), nx=2, ny=1, scale=4.0)


# Fidelity


def test_fidelity_anchors():
    assert fidelity_map(2.0) == 0.5
    assert fidelity_map(0.0) == 1.0
    assert fidelity_map(2.0 * math.exp(-6.0)) == pytest.approx(0.99752, abs=1e-5)
    np.testing.assert_allclose(fidelity_map(np.array([0.0, 2.0, 6.0])), [1.0, 0.5, 0.25])


@pytest.mark.parametrize("c", [0.5, 2.0, 4.0])
def test_fidelity_matches_gaussian_overlap(c):
    assert fidelity_map(c) == pytest.approx(_overlap_fidelity(c), abs=1e-6)


def test_fidelity_rejects_bad_noise():
    with pytest.raises(ValueError):
        fidelity_map(-0.1)
    with pytest.raises(ValueError):
        fidelity_map(np.array([1.0, math.nan]))


def test_added_noise_estimate():
    # X = 2 Re and Y = 2 Im, sample variances with ddof=1
    samples = np.array([1 + 2j, -1 - 2j, 1 + 2j, -1 - 2j]).reshape(4, 1, 1)
    expected = 0.5 * (4.0 * 4 / 3 + 16.0 * 4 / 3) - 1.0
    assert added_noise_estimate(samples)[0, 0] == pytest.approx(expected)
    assert added_noise_estimate(np.zeros((3, 1, 1), dtype=complex))[0, 0] == 0.0


# Images


def test_black_image_has_zero_amplitude(tmp_path):
    path = _write_gray(tmp_path / "black.pgm", [[0, 0], [0, 0]])
    image = load_image(path, scale=4.0)
    assert (image.nx, image.ny, image.nt) == (2, 2, 1)
    assert np.all(image.alpha == 0)


def test_full_gray_image_at_scale_four(tmp_path):
    path = _write_gray(tmp_path / "white.pgm", [[65535, 65535, 65535]], 65535, binary=True)
    image = load_image(path, scale=4.0, nt=3)
    assert image.alpha.shape == (3, 3)
    np.testing.assert_allclose(image.alpha, 2.0)


def test_pixel_order_is_row_major(tmp_path):
    path = _write_gray(tmp_path / "ramp.pgm", [[0, 1, 2], [3, 4, 5]], maxval=5)
    image = load_image(path, scale=5.0)
    np.testing.assert_allclose(np.abs(image.alpha[:, 0]) ** 2, [0, 1, 2, 3, 4, 5])


def test_gray_values_survive_amplitude_round_trip(tmp_path):
    pixels = [[0, 1, 1000], [40000, 65534, 65535]]
    image = load_image(_write_gray(tmp_path / "g.pgm", pixels, 65535), scale=4.0)
    np.testing.assert_array_equal(image.to_gray().pixels, pixels)


def test_image_stack(tmp_path):
    first = _write_gray(tmp_path / "t0.pgm", [[0, 255]])
    second = _write_gray(tmp_path / "t1.pgm", [[255, 0]])
    image = load_image_stack([first, second], scale=1.0)
    np.testing.assert_allclose(image.alpha, [[0.0, 1.0], [1.0, 0.0]])

    odd = _write_gray(tmp_path / "t2.pgm", [[0], [255]])
    with pytest.raises(ValueError):
        load_image_stack([first, odd])
    with pytest.raises(ValueError):
        load_image_stack([])


def test_bright_samples_are_clipped(caplog):
    image = ImagePlane(alpha=np.array([[3.0]], dtype=complex), nx=1, ny=1, scale=4.0)
    with caplog.at_level(logging.WARNING):
        gray = image.to_gray()
    assert gray.pixels[0, 0] == gray.maxval
    assert "Clipped 1" in caplog.text


def test_image_validation():
    with pytest.raises(ValueError):
        ImagePlane(alpha=np.zeros((3, 1), dtype=complex), nx=2, ny=1)
    with pytest.raises(ValueError):
        ImagePlane(alpha=np.zeros((1, 1), dtype=complex), nx=1, ny=1, scale=-1.0)
    with pytest.raises(ValueError):
        ImagePlane(alpha=np.full((1, 1), math.inf, dtype=complex), nx=1, ny=1)


# Protocol


@pytest.mark.parametrize("output_field", [1, 2])
def test_explicit_chain_equals_shortcut(default_params, pair_image, output_field):
    grid = pair_image.grid(2.0, 2.0)
    run = protocol_explicit(pair_image, default_params, grid, SEED, 3, output_field, margin=1.0)
    assert run.explicit.shape == (3, 2, 1)
    np.testing.assert_allclose(run.explicit, run.shortcut, rtol=0, atol=1e-10)


def test_protocol_is_reproducible_across_threads(weak_params, pair_image):
    grid = pair_image.grid(2.0, 2.0)
    serial = protocol_explicit(pair_image, weak_params, grid, SEED, 6, margin=1.0)
    threaded = protocol_explicit(pair_image, weak_params, grid, SEED, 6, margin=1.0, threads=3)
    np.testing.assert_array_equal(serial.explicit, threaded.explicit)
    np.testing.assert_array_equal(serial.input_noise, threaded.input_noise)


def test_protocol_rejects_mismatched_grid(weak_params, pair_image, small_grid):
    with pytest.raises(ValueError):
        protocol_explicit(pair_image, weak_params, small_grid, SEED, 4)
    with pytest.raises(ValueError):
        protocol_explicit(pair_image, weak_params, pair_image.grid(2.0, 2.0), SEED, 1)


def test_vacuum_teleportation_adds_two_units(vacuum_params):
    n = 2000
    image = ImagePlane(alpha=np.zeros((1, 1), dtype=complex), nx=1, ny=1)
    run = protocol_explicit(image, vacuum_params, image.grid(2.0, 2.0), SEED, n, margin=1.0)
    x = 2.0 * np.real(run.explicit[:, 0, 0])
    assert abs(x.mean()) <= GATE * x.std(ddof=1) / math.sqrt(n)
    assert abs(x.var(ddof=1) - 3.0) <= GATE * 3.0 * math.sqrt(2.0 / (n - 1))
    # the input alone carries one vacuum unit
    x_in = 2.0 * np.real(run.input_noise[:, 0, 0])
    assert abs(x_in.var(ddof=1) - 1.0) <= GATE * math.sqrt(2.0 / (n - 1))


def test_teleportation_has_unit_gain(weak_params, pair_image):
    result = teleport(pair_image, weak_params, pair_image.grid(2.0, 2.0), SEED, 1000, margin=1.0)
    deviation = np.abs(result.mean.alpha - pair_image.alpha)
    assert np.all(deviation <= GATE * result.mean_stderr)
    assert result.sample.alpha.shape == pair_image.alpha.shape


def test_teleport_writes_artifacts(vacuum_params, pair_image, tmp_path):
    result = teleport(
        pair_image,
        vacuum_params,
        pair_image.grid(2.0, 2.0),
        SEED,
        200,
        margin=1.0,
        out_dir=tmp_path,
    )
    names = sorted(p.name for p in result.artifacts)
    assert names == ["fidelity.csv", "mean.pgm", "sample.pgm"]
    assert read_pgm(tmp_path / "mean.pgm").maxval == 65535
    frame = pd.read_csv(tmp_path / "fidelity.csv")
    assert list(frame.columns) == ["j_x", "j_y", "c_diag", "fidelity"]
    assert frame["j_x"].tolist() == [0, 1]
    assert frame["fidelity"].between(0.0, 1.0).all()
    # classical teleportation stays near the 1/2 bound
    np.testing.assert_allclose(frame["fidelity"], 0.5, atol=0.1)


def test_time_varying_image_writes_one_frame_per_bin(vacuum_params, tmp_path):
    image = ImagePlane(alpha=np.zeros((1, 2), dtype=complex), nx=1, ny=1)
    result = teleport(
        image, vacuum_params, image.grid(2.0, 2.0), SEED, 20, margin=1.0, out_dir=tmp_path
    )
    names = sorted(p.name for p in result.artifacts)
    assert names == [
        "fidelity.csv",
        "mean_000.pgm",
        "mean_001.pgm",
        "sample_000.pgm",
        "sample_001.pgm",
    ]


@pytest.mark.slow
def test_added_noise_matches_quadrature(weak_params):
    n = 4000
    image = ImagePlane(alpha=np.zeros((1, 1), dtype=complex), nx=1, ny=1)
    run = protocol_explicit(image, weak_params, image.grid(2.0, 2.0), SEED, n, margin=4.0)
    c_hat = added_noise_estimate(run.explicit)[0, 0]
    c_quad = diagonal_covariance(weak_params, 2.0, 2.0, tol=1e-3)
    stderr = (1.0 + c_quad) * math.sqrt(2.0 / (n - 1))
    assert abs(c_hat - c_quad) <= GATE * stderr
