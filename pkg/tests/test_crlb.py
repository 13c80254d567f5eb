"""Fisher information, closed-form bounds, and cross-module bound invariance."""

import numpy as np
import pytest

from fastabs.array_model import ArraySpec, default_grid, make_dft_codebook
from fastabs.crlb import (
    ParamVector,
    SingularFisherError,
    assemble_fim,
    check_closed_forms,
    closed_form_sigmas,
    codebook_error_metric,
    crlb_diagonal,
    csi_lower_bound,
    numerical_fim,
    theta_crlb_simplified,
    virtual_bound_equality,
)
from fastabs.geometry import fig2d_layout

ARRAY = ArraySpec(num_elements=4)
CODEBOOK = make_dft_codebook(ARRAY, np.deg2rad([45.0, 75.0, 105.0, 135.0]))
GRID = default_grid(64)
NOISE = 0.1


def _psi_single(theta_deg=97.0, mag=1.0, phase=0.7, toa=30e-9):
    return ParamVector(np.array([[mag, phase, np.deg2rad(theta_deg), toa]]))


def test_param_vector_validation():
    with pytest.raises(ValueError):
        ParamVector(np.array([[1.0, 0.0, 1.5]]))
    with pytest.raises(ValueError):
        ParamVector(np.array([[-1.0, 0.0, 1.5, 0.0]]))


def test_fim_matches_numerical_oracle_single_path():
    psi = _psi_single()
    analytic = assemble_fim(psi, CODEBOOK, GRID, NOISE).entries
    numeric = numerical_fim(psi, CODEBOOK, GRID, NOISE)
    rel = np.max(np.abs(analytic - numeric)) / np.max(np.abs(analytic))
    assert rel < 1e-3


def test_fim_matches_numerical_oracle_two_path():
    psi = ParamVector(
        np.array(
            [
                [1.0, 0.3, np.deg2rad(80.0), 20e-9],
                [0.4, 2.1, np.deg2rad(118.0), 55e-9],
            ]
        )
    )
    analytic = assemble_fim(psi, CODEBOOK, GRID, NOISE).entries
    numeric = numerical_fim(psi, CODEBOOK, GRID, NOISE)
    rel = np.max(np.abs(analytic - numeric)) / np.max(np.abs(analytic))
    assert rel < 1e-3


def test_fim_scales_inversely_with_noise():
    psi = _psi_single()
    f1 = assemble_fim(psi, CODEBOOK, GRID, 0.1).entries
    f2 = assemble_fim(psi, CODEBOOK, GRID, 0.2).entries
    assert np.allclose(f1, 2.0 * f2)


def test_closed_forms_match_fisher_inverse():
    check = check_closed_forms((1.3, 0.9, np.deg2rad(102.0), 25e-9), CODEBOOK, GRID, NOISE)
    assert check.ok, "\n".join(check.report_lines())


def test_closed_form_requires_uniform_grid_from_zero():
    from fastabs.array_model import SubcarrierGrid

    bad = SubcarrierGrid(np.array([60e3, 120e3, 240e3]))
    with pytest.raises(ValueError):
        closed_form_sigmas((1.0, 0.0, 1.5, 0.0), CODEBOOK, bad, NOISE)


def test_theta_crlb_equals_closed_form_entry():
    for theta_deg in (60.0, 85.0, 110.0, 140.0):
        psi = (1.0, 0.0, np.deg2rad(theta_deg), 10e-9)
        sigmas = closed_form_sigmas(psi, CODEBOOK, GRID, NOISE)
        simp = theta_crlb_simplified(CODEBOOK, np.deg2rad(theta_deg), GRID.num_subcarriers, 1.0, NOISE)
        assert simp == pytest.approx(sigmas[2], rel=1e-12)


def test_crlb_improves_with_snr_and_beam_count():
    theta = np.deg2rad(95.0)
    cb3 = make_dft_codebook(ARRAY, np.deg2rad([60.0, 90.0, 120.0]))
    lo = theta_crlb_simplified(CODEBOOK, theta, 300, 1.0, 0.1)
    hi = theta_crlb_simplified(CODEBOOK, theta, 300, 1.0, 1.0)
    assert lo < hi
    assert theta_crlb_simplified(CODEBOOK, theta, 300, 1.0, 0.1) < theta_crlb_simplified(
        cb3, theta, 300, 1.0, 0.1
    )


def test_error_metric_prefers_orthogonal_codebook():
    theta = np.deg2rad(90.0)
    orth = make_dft_codebook(ARRAY, np.deg2rad([60.0, 90.0, 120.0]))
    spread = make_dft_codebook(ARRAY, np.deg2rad([50.0, 90.0, 130.0]))
    assert codebook_error_metric(orth, theta) < codebook_error_metric(spread, theta)


def test_csi_lower_bound_positive_and_noise_proportional():
    psi = _psi_single()
    lb1 = csi_lower_bound(psi, CODEBOOK, GRID, 0.1, m=1, f_k=float(GRID.frequencies[10]))
    lb2 = csi_lower_bound(psi, CODEBOOK, GRID, 0.2, m=1, f_k=float(GRID.frequencies[10]))
    assert lb1 > 0
    assert lb2 == pytest.approx(2.0 * lb1, rel=1e-9)


def test_virtual_bound_equality_at_noise_floor():
    lay = fig2d_layout()
    psi = ParamVector(
        np.array(
            [
                [1.0, 0.2, np.deg2rad(125.0), 20e-9],
                [0.3, 1.9, np.deg2rad(140.0), 45e-9],
            ]
        )
    )
    dev = virtual_bound_equality(psi, lay, 0, 1, CODEBOOK, GRID, NOISE)
    assert dev < 1e-10


def test_singular_fim_raises():
    # two identical paths make the Fisher matrix exactly singular
    psi = ParamVector(
        np.array(
            [
                [1.0, 0.0, np.deg2rad(90.0), 10e-9],
                [1.0, 0.0, np.deg2rad(90.0), 10e-9],
            ]
        )
    )
    fim = assemble_fim(psi, CODEBOOK, GRID, NOISE)
    with pytest.raises(SingularFisherError):
        crlb_diagonal(fim)
