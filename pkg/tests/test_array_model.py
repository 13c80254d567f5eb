"""Beam patterns, codebooks, steering and delay vectors."""

import numpy as np
import pytest

from fastabs.array_model import (
    ArraySpec,
    Codebook,
    SubcarrierGrid,
    beam_gain,
    beam_gain_derivative,
    beam_gain_second_derivative,
    default_grid,
    delay_matrix,
    delay_vector,
    make_dft_codebook,
    orthogonal_beam_centers,
    rx_beam_vector,
)

ARRAY = ArraySpec(num_elements=4, spacing_over_wavelength=0.5)


def test_array_spec_validation():
    with pytest.raises(ValueError):
        ArraySpec(num_elements=0)
    with pytest.raises(ValueError):
        ArraySpec(num_elements=4, spacing_over_wavelength=-0.5)


def test_boresight_peak_is_sqrt_n():
    cb = make_dft_codebook(ARRAY, np.deg2rad([90.0]))
    assert abs(beam_gain(cb, 0, np.deg2rad(90.0))) == pytest.approx(2.0, abs=1e-12)


def test_nulls_of_center_beam():
    # N=4, d/lam=0.5, beam at 90 deg: pattern nulls at cos(theta) = +-1/2, +-1
    cb = make_dft_codebook(ARRAY, np.deg2rad([90.0]))
    for deg in (60.0, 120.0, 180.0 - 1e-9):
        assert abs(beam_gain(cb, 0, np.deg2rad(deg))) < 1e-7


def test_gain_matches_manual_sum():
    cb = make_dft_codebook(ARRAY, np.deg2rad([70.0]))
    theta = np.deg2rad(101.3)
    n = np.arange(4)
    manual = np.sum(cb.weights[0] * np.exp(-1j * np.pi * n * np.cos(theta)))
    assert beam_gain(cb, 0, theta) == pytest.approx(manual, abs=1e-14)


def test_gain_derivatives_match_finite_differences():
    cb = make_dft_codebook(ARRAY, np.deg2rad([75.0]))
    theta = np.deg2rad(83.0)
    h = 1e-6
    fd1 = (beam_gain(cb, 0, theta + h) - beam_gain(cb, 0, theta - h)) / (2 * h)
    fd2 = (
        beam_gain(cb, 0, theta + h)
        - 2 * beam_gain(cb, 0, theta)
        + beam_gain(cb, 0, theta - h)
    ) / h**2
    assert beam_gain_derivative(cb, 0, theta) == pytest.approx(fd1, rel=1e-6)
    assert beam_gain_second_derivative(cb, 0, theta) == pytest.approx(fd2, rel=1e-4)


def test_rx_beam_vector_stacks_per_beam_gains():
    cb = make_dft_codebook(ARRAY, np.deg2rad([60.0, 90.0, 120.0]))
    theta = np.deg2rad(97.0)
    a = rx_beam_vector(cb, theta)
    for m in range(3):
        assert a[m] == pytest.approx(beam_gain(cb, m, theta), abs=1e-14)


def test_codebook_weights_are_constant_modulus():
    cb = make_dft_codebook(ARRAY, np.deg2rad([45.0, 75.0, 105.0, 135.0]))
    assert np.allclose(np.abs(cb.weights), 1.0 / np.sqrt(4))


def test_codebook_center_validation():
    with pytest.raises(ValueError):
        make_dft_codebook(ARRAY, [0.0])
    with pytest.raises(ValueError):
        make_dft_codebook(ARRAY, [np.pi])
    with pytest.raises(ValueError):
        Codebook(array=ARRAY, weights=np.ones((2, 3)))


def test_subcarrier_grid_validation():
    with pytest.raises(ValueError):
        SubcarrierGrid(np.array([1.0, 1.0]))
    g = default_grid(300)
    assert g.num_subcarriers == 300
    assert g.frequencies[0] == 0.0
    assert g.frequencies[1] == pytest.approx(60e3)


def test_delay_vector_sign_convention():
    g = default_grid(8)
    tau = 3.7e-9
    d = delay_vector(g, tau)
    assert np.allclose(d, np.exp(-2j * np.pi * tau * g.frequencies))
    dm = delay_matrix(g, [0.0, tau])
    assert np.allclose(dm[:, 0], 1.0)
    assert np.allclose(dm[:, 1], d)


def test_orthogonal_centers_sit_on_mutual_nulls():
    centers = orthogonal_beam_centers(ARRAY, 3)
    assert np.allclose(np.rad2deg(centers), [60.0, 90.0, 120.0], atol=1e-9)
    cb = make_dft_codebook(ARRAY, centers)
    for m in range(3):
        for j in range(3):
            g = abs(beam_gain(cb, m, centers[j]))
            if m == j:
                assert g == pytest.approx(2.0, abs=1e-12)
            else:
                assert g < 1e-12


def test_orthogonal_centers_respect_span():
    with pytest.raises(ValueError):
        orthogonal_beam_centers(ARRAY, 5)  # cos-comb falls outside the span
