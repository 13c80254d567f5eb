"""Uniform linear array beam patterns, analog codebooks and steering vectors.

All angles are radians internally; degrees appear only at CLI boundaries.
Beam patterns follow the phase-shifter model

    A_m(theta) = sum_n w_m(n) * exp(-j * 2*pi * n * (d/lambda) * cos(theta)),

so only the spacing ratio d/lambda enters the math.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ArraySpec:
    """One antenna module: an N-element ULA with spacing d/lambda."""

    num_elements: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError(f"num_elements must be >= 1, got {self.num_elements}")
        if not (self.spacing_over_wavelength > 0):
            raise ValueError("spacing_over_wavelength must be positive")


@dataclass(frozen=True)
class Codebook:
    """A set of M analog beam weight vectors for one array.

    ``beam_centers`` is present only for codebooks built from the DFT-style
    constructor; arbitrary weight matrices leave it as None.
    """

    array: ArraySpec
    weights: np.ndarray  # (M, N) complex
    beam_centers: np.ndarray | None = None  # (M,) radians

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=complex))
        if w.shape[0] < 1 or w.shape[1] != self.array.num_elements:
            raise ValueError(
                f"weights must be (M, {self.array.num_elements}), got {w.shape}"
            )
        object.__setattr__(self, "weights", w)
        if self.beam_centers is not None:
            c = np.asarray(self.beam_centers, dtype=float)
            if c.shape != (w.shape[0],):
                raise ValueError("beam_centers length must match number of beams")
            object.__setattr__(self, "beam_centers", c)

    @property
    def num_beams(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class SubcarrierGrid:
    """Subcarrier frequencies f_1 .. f_{N_s} in Hz, strictly increasing."""

    frequencies: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        if f.size < 1 or not np.all(np.isfinite(f)):
            raise ValueError("frequencies must be non-empty and finite")
        if f.size > 1 and not np.all(np.diff(f) > 0):
            raise ValueError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", f)

    @property
    def num_subcarriers(self) -> int:
        return self.frequencies.size


def default_grid(num_subcarriers: int, spacing_hz: float = 60e3, start_hz: float = 0.0) -> SubcarrierGrid:
    """Uniform baseband grid: N_s subcarriers at 60 kHz spacing from 0 Hz."""
    return SubcarrierGrid(start_hz + spacing_hz * np.arange(num_subcarriers))


def _dft_weights(array: ArraySpec, centers: np.ndarray) -> np.ndarray:
    n = np.arange(array.num_elements)
    phase = 2.0 * np.pi * array.spacing_over_wavelength * np.outer(np.cos(centers), n)
    return np.exp(1j * phase) / np.sqrt(array.num_elements)


def make_dft_codebook(array: ArraySpec, centers) -> Codebook:
    """Constant-modulus codebook with w_m(n) = exp(j*2pi*n*(d/lam)*cos(phi_m))/sqrt(N).

    At half-wavelength spacing this reduces to the usual exp(j*pi*n*cos(phi_m))
    form. Centers must lie in the open interval (0, pi).
    """
    c = np.atleast_1d(np.asarray(centers, dtype=float))
    if c.size == 0:
        raise ValueError("centers must be non-empty")
    if np.any(c <= 0) or np.any(c >= np.pi):
        raise ValueError("beam centers must lie in (0, pi) radians")
    return Codebook(array=array, weights=_dft_weights(array, c), beam_centers=c)


def _element_phases(array: ArraySpec, theta) -> np.ndarray:
    """exp(-j*2pi*n*(d/lam)*cos(theta)), shape (..., N)."""
    n = np.arange(array.num_elements)
    cos_t = np.cos(np.asarray(theta, dtype=float))
    return np.exp(-2j * np.pi * array.spacing_over_wavelength * np.multiply.outer(cos_t, n))


def beam_gain(codebook: Codebook, m: int, theta):
    """Beam pattern A_m(theta); theta may be scalar or array."""
    if not (0 <= m < codebook.num_beams):
        raise IndexError(f"beam index {m} out of range for {codebook.num_beams} beams")
    e = _element_phases(codebook.array, theta)
    return e @ codebook.weights[m]


def beam_gain_derivative(codebook: Codebook, m: int, theta):
    """dA_m/dtheta, analytic."""
    if not (0 <= m < codebook.num_beams):
        raise IndexError(f"beam index {m} out of range for {codebook.num_beams} beams")
    arr = codebook.array
    n = np.arange(arr.num_elements)
    cn = 2.0 * np.pi * arr.spacing_over_wavelength * n
    t = np.asarray(theta, dtype=float)
    e = _element_phases(arr, t) * (1j * np.multiply.outer(np.sin(t), cn))
    return e @ codebook.weights[m]


def beam_gain_second_derivative(codebook: Codebook, m: int, theta):
    """d^2 A_m / dtheta^2, analytic (used by the Newton refinement)."""
    if not (0 <= m < codebook.num_beams):
        raise IndexError(f"beam index {m} out of range for {codebook.num_beams} beams")
    arr = codebook.array
    n = np.arange(arr.num_elements)
    cn = 2.0 * np.pi * arr.spacing_over_wavelength * n
    t = np.asarray(theta, dtype=float)
    sin_t, cos_t = np.sin(t), np.cos(t)
    # phase chain rule: phi' = j*cn*sin(t), phi'' = (j*cn*sin(t))^2 + j*cn*cos(t)
    f1 = 1j * np.multiply.outer(sin_t, cn)
    f2 = f1**2 + 1j * np.multiply.outer(cos_t, cn)
    e = _element_phases(arr, t) * f2
    return e @ codebook.weights[m]


def rx_beam_vector(codebook: Codebook, theta) -> np.ndarray:
    """a(theta) = [A_1(theta) ... A_M(theta)]^T; theta may be an array -> (M, T)."""
    e = _element_phases(codebook.array, theta)
    out = codebook.weights @ np.moveaxis(e, -1, 0)
    return out


def beam_matrix(codebook: Codebook, thetas) -> np.ndarray:
    """Stacked a(theta) columns over a grid of angles, shape (M, T)."""
    return rx_beam_vector(codebook, np.atleast_1d(thetas))


def delay_vector(grid: SubcarrierGrid, tau: float) -> np.ndarray:
    """Per-subcarrier delay phases, entry k = exp(-j*2pi*tau*f_k).

    The sign is fixed so that the rank-one composition
    a(theta) * delay_vector(tau)^T reproduces the frequency-domain channel
    entries g*A_m(theta)*exp(-j*2pi*tau*f_k).
    """
    if not np.isfinite(tau):
        raise ValueError("tau must be finite")
    return np.exp(-2j * np.pi * tau * grid.frequencies)


def delay_matrix(grid: SubcarrierGrid, taus) -> np.ndarray:
    """Stacked delay vectors over a grid of delays, shape (N_s, T)."""
    t = np.atleast_1d(np.asarray(taus, dtype=float))
    return np.exp(-2j * np.pi * np.outer(grid.frequencies, t))


def orthogonal_beam_centers(array: ArraySpec, num_beams: int, span=(np.deg2rad(30), np.deg2rad(150))):
    """Beam centers whose peaks sit exactly on the nulls of the other beams.

    For the DFT codebook the pattern nulls are uniformly spaced in cos(theta)
    with step 1/(N * d/lambda), so mutually orthogonal centers are a
    cos-uniform comb with that spacing, centered on the span midpoint in the
    cos domain. Raises if the comb does not fit inside the span.
    """
    if num_beams < 2:
        raise ValueError("num_beams must be >= 2")
    lo, hi = float(span[0]), float(span[1])
    if not (0 < lo < hi < np.pi):
        raise ValueError("span must lie within (0, pi)")
    step = 1.0 / (array.num_elements * array.spacing_over_wavelength)
    c_lo, c_hi = np.cos(hi), np.cos(lo)
    mid = 0.5 * (c_lo + c_hi)
    offsets = (np.arange(num_beams) - 0.5 * (num_beams - 1)) * step
    cos_centers = mid + offsets
    if cos_centers[0] < c_lo - 1e-12 or cos_centers[-1] > c_hi + 1e-12:
        raise ValueError(
            f"{num_beams} orthogonal beams with cos-step {step:.3f} do not fit in the span"
        )
    centers = np.sort(np.arccos(np.clip(cos_centers, -1.0, 1.0)))
    return centers
