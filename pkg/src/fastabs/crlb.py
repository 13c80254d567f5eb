"""Fisher information and Cramer-Rao machinery for path-tuple estimation.

Parameters per path are (|g|, angle(g), theta, tau); L paths stack into a
4L real vector. The Fisher matrix is assembled from the analytic CSI
derivatives and cross-checked against single-path closed forms. The closed
forms assume a uniform subcarrier grid starting at 0 Hz and are evaluated in
DFT-normalized frequency units f_k = (k-1)/N_s, converting the delay variance
back to seconds afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fastabs.array_model import (
    ArraySpec,
    Codebook,
    SubcarrierGrid,
    beam_gain,
    beam_gain_derivative,
    beam_matrix,
)
from fastabs.geometry import ModuleLayout

CONDITION_LIMIT = 1e12


class SingularFisherError(np.linalg.LinAlgError):
    """Fisher matrix is singular or too ill-conditioned to invert."""

    def __init__(self, condition: float):
        self.condition = condition
        super().__init__(f"Fisher matrix ill-conditioned (cond ~ {condition:.3e})")


@dataclass(frozen=True)
class ParamVector:
    """Per-path (|g|, angle(g), theta, tau) rows stacked as an (L, 4) array."""

    values: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.shape[1] != 4:
            raise ValueError("ParamVector rows must be (|g|, angle, theta, tau)")
        if np.any(v[:, 0] < 0):
            raise ValueError("gain magnitudes must be >= 0")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_paths(cls, paths) -> "ParamVector":
        rows = [
            [abs(p.gain), np.angle(p.gain) % (2 * np.pi), p.aoa, p.toa] for p in paths
        ]
        return cls(np.array(rows))

    @property
    def num_paths(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)


@dataclass(frozen=True)
class FisherMatrix:
    entries: np.ndarray  # (4L, 4L) real symmetric
    noise_variance: float


def _beam_responses(codebook: Codebook, theta: float):
    a = beam_matrix(codebook, theta)[:, 0]
    a1 = np.array([beam_gain_derivative(codebook, m, theta) for m in range(codebook.num_beams)])
    return a, a1


def csi_derivatives(psi_l, codebook: Codebook, m: int, f_k: float) -> np.ndarray:
    """(dH_m[f_k]/d|g|, d/dangle, d/dtheta, d/dtau) for a single path."""
    mag, ang, theta, tau = np.asarray(psi_l, dtype=float)
    am = beam_gain(codebook, m, theta)
    am1 = beam_gain_derivative(codebook, m, theta)
    e = np.exp(1j * (ang - 2.0 * np.pi * tau * f_k))
    return np.array(
        [
            e * am,
            1j * mag * e * am,
            mag * e * am1,
            mag * e * am * (-2j * np.pi * f_k),
        ]
    )


def csi_jacobian(psi: ParamVector, codebook: Codebook, grid: SubcarrierGrid,
                 pattern_offset: float = 0.0) -> np.ndarray:
    """Derivatives of vec(H) w.r.t. all 4L parameters, shape (M*N_s, 4L).

    Row order matches measurement vectorization (beam-major within each
    subcarrier block). ``pattern_offset`` evaluates the beam patterns as
    translated in angle by that amount: the response model of a module whose
    local angular coordinate is rotated relative to the codebook's.
    """
    M = codebook.num_beams
    ns = grid.num_subcarriers
    fk = grid.frequencies
    jac = np.zeros((M * ns, 4 * psi.num_paths), dtype=complex)
    for l in range(psi.num_paths):
        mag, ang, theta, tau = psi.values[l]
        a, a1 = _beam_responses(codebook, theta - pattern_offset)
        e = np.exp(1j * (ang - 2.0 * np.pi * tau * fk))  # (N_s,)
        base = np.outer(e, a)  # (N_s, M), subcarrier-major
        cols = np.empty((ns, M, 4), dtype=complex)
        cols[:, :, 0] = base
        cols[:, :, 1] = 1j * mag * base
        cols[:, :, 2] = mag * np.outer(e, a1)
        cols[:, :, 3] = mag * base * (-2j * np.pi * fk)[:, None]
        jac[:, 4 * l : 4 * l + 4] = cols.reshape(M * ns, 4)
    return jac


def assemble_fim(psi: ParamVector, codebook: Codebook, grid: SubcarrierGrid, noise_variance: float) -> FisherMatrix:
    """F[u, v] = (2/sigma^2) Re{ sum_{m,k} dH*/dpsi_u dH/dpsi_v }."""
    if noise_variance <= 0:
        raise ValueError("noise variance must be positive")
    jac = csi_jacobian(psi, codebook, grid)
    f = (2.0 / noise_variance) * np.real(jac.conj().T @ jac)
    return FisherMatrix(entries=0.5 * (f + f.T), noise_variance=noise_variance)


def _scaled_inverse(f: np.ndarray) -> np.ndarray:
    """Invert after symmetric diagonal scaling.

    Physical units put gain rows near 1 and delay rows near (2 pi f)^2, so the
    raw condition number reflects units, not information loss. Conditioning is
    judged on the unit-equilibrated matrix instead.
    """
    d = np.sqrt(np.diag(f))
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise SingularFisherError(np.inf)
    fs = f / np.outer(d, d)
    cond = np.linalg.cond(fs)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise SingularFisherError(cond)
    return np.linalg.inv(fs) / np.outer(d, d)


def crlb_diagonal(fim: FisherMatrix) -> np.ndarray:
    """diag(F^-1); raises SingularFisherError above the condition limit."""
    return np.diag(_scaled_inverse(fim.entries)).copy()


def abcd(codebook: Codebook, theta: float):
    """Codebook pattern quadratics A, B, C, D summed over measurement beams."""
    a, a1 = _beam_responses(codebook, theta)
    return (
        complex(np.sum(a.conj() * a)),
        complex(np.sum(a.conj() * a1)),
        complex(np.sum(a1.conj() * a)),
        complex(np.sum(a1.conj() * a1)),
    )


def theta_crlb_simplified(codebook: Codebook, theta: float, ns: int, gain_mag: float, noise_variance: float) -> float:
    """sigma_theta^2 = sigma_z^2 A / (2 N_s |g|^2 (A D - Re{B C}))."""
    A, B, C, D = abcd(codebook, theta)
    denom = A.real * D.real - (B * C).real
    if denom <= 0:
        raise ValueError("uninformative codebook at theta")
    return noise_variance * A.real / (2.0 * ns * gain_mag**2 * denom)


def _require_uniform_from_zero(grid: SubcarrierGrid) -> float:
    f = grid.frequencies
    if abs(f[0]) > 1e-9:
        raise ValueError("closed forms assume a grid starting at 0 Hz")
    if f.size < 2:
        raise ValueError("closed forms need at least two subcarriers")
    df = np.diff(f)
    if not np.allclose(df, df[0], rtol=1e-9):
        raise ValueError("closed forms assume uniform subcarrier spacing")
    return float(df[0])


def closed_form_sigmas(psi_l, codebook: Codebook, grid: SubcarrierGrid, noise_variance: float):
    """Single-path CRLBs (sigma^2 of |g|, angle(g), theta, tau) in closed form.

    Evaluated with normalized frequencies f_k = (k-1)/N_s; the delay bound is
    rescaled by (N_s * df)^-2 back to seconds^2.
    """
    mag = float(np.asarray(psi_l, dtype=float).reshape(-1)[0])
    theta = float(np.asarray(psi_l, dtype=float).reshape(-1)[2])
    df = _require_uniform_from_zero(grid)
    ns = grid.num_subcarriers
    s2 = noise_variance
    A, B, C, D = abcd(codebook, theta)
    ReA, ReB, ReC, ReD = A.real, B.real, C.real, D.real
    ImA, ImB, ImC = A.imag, B.imag, C.imag
    J = (
        abs(A) ** 2 * ReD
        - ImA * ImB * ReC
        - ImA * ImC * ReB
        + ImB * ImC * ReA
        - ReA * ReB * ReC
    )
    if abs(J) < 1e-300:
        raise ValueError("degenerate codebook: J = 0")
    Q = ReA**2 * ReD - ReA * ReB * ReC
    sig_mag = s2 * (ImB * ImC + ReA * ReD) / (2.0 * ns * J)
    sig_ang = -s2 * (3.0 * J * (1.0 - ns) - Q * (1.0 + ns)) / (
        2.0 * ns * mag**2 * ReA * (ns + 1.0) * J
    )
    sig_theta = s2 * abs(A) ** 2 / (2.0 * ns * mag**2 * J)
    sig_tau_norm = 3.0 * ns * s2 / (2.0 * np.pi**2 * mag**2 * ReA * (ns**2 - 1.0))
    sig_tau = sig_tau_norm / (ns * df) ** 2
    return sig_mag, sig_ang, sig_theta, sig_tau


@dataclass(frozen=True)
class ClosedFormCheck:
    """Comparison of the closed-form sigmas against diag(F^-1)."""

    closed_form: np.ndarray
    numerical: np.ndarray
    relative_deviation: np.ndarray
    tolerance: float

    @property
    def ok(self) -> bool:
        return bool(np.all(self.relative_deviation < self.tolerance))

    def report_lines(self):
        names = ("sigma2_gain_mag", "sigma2_gain_phase", "sigma2_theta", "sigma2_tau")
        lines = []
        for name, cf, num, dev in zip(names, self.closed_form, self.numerical, self.relative_deviation):
            verdict = "ok" if dev < self.tolerance else "DEVIATION (numerical value wins)"
            lines.append(f"{name}: closed={cf:.9e} numerical={num:.9e} rel_dev={dev:.3e} {verdict}")
        return lines


def check_closed_forms(psi_l, codebook: Codebook, grid: SubcarrierGrid, noise_variance: float,
                       tolerance: float = 1e-6) -> ClosedFormCheck:
    """Arbitration between the closed forms and the assembled Fisher matrix.

    The numerical diag(F^-1) is ground truth; any closed-form entry beyond
    tolerance is flagged in the report rather than silently patched.
    """
    psi = ParamVector(np.asarray(psi_l, dtype=float).reshape(1, 4))
    fim = assemble_fim(psi, codebook, grid, noise_variance)
    num = crlb_diagonal(fim)
    cf = np.array(closed_form_sigmas(psi_l, codebook, grid, noise_variance))
    dev = np.abs(cf - num) / np.abs(num)
    return ClosedFormCheck(closed_form=cf, numerical=num, relative_deviation=dev, tolerance=tolerance)


def codebook_error_metric(codebook: Codebook, theta: float) -> float:
    """Error(theta) = A / (A D - Re{B C}): codebook quality up to SNR scaling."""
    A, B, C, D = abcd(codebook, theta)
    denom = A.real * D.real - (B * C).real
    if denom <= 0:
        raise ValueError(f"uninformative codebook at theta={theta:.4f} rad")
    return A.real / denom


def csi_lower_bound(psi: ParamVector, codebook: Codebook, grid: SubcarrierGrid,
                    noise_variance: float, m: int, f_k: float) -> float:
    """Reconstructed-CSI MSE lower bound at beam m, subcarrier f_k."""
    fim = assemble_fim(psi, codebook, grid, noise_variance)
    finv = _scaled_inverse(fim.entries)
    dvec = np.concatenate([csi_derivatives(psi.values[l], codebook, m, f_k) for l in range(psi.num_paths)])
    return float(np.real(dvec.conj() @ finv @ dvec))


def _lb_table(psi: ParamVector, codebook: Codebook, grid: SubcarrierGrid,
              noise_variance: float, pattern_offset: float = 0.0) -> np.ndarray:
    jac = csi_jacobian(psi, codebook, grid, pattern_offset)  # rows: vec order
    f = (2.0 / noise_variance) * np.real(jac.conj().T @ jac)
    finv = _scaled_inverse(0.5 * (f + f.T))
    return np.real(np.einsum("ru,uv,rv->r", jac.conj(), finv, jac)).reshape(
        grid.num_subcarriers, codebook.num_beams
    ).T  # (M, N_s)


def virtual_bound_equality(psi: ParamVector, layout: ModuleLayout, p: int, q: int,
                           codebook: Codebook, grid: SubcarrierGrid, noise_variance: float) -> float:
    """Max relative deviation between LB at module p and the mapped-module LB.

    Module q's local azimuth coordinate differs from p's only by the constant
    rotation delta_theta[p, q]; its beam m is the same beam described in the
    rotated coordinate (center phi_m + delta_theta, pattern translated along
    with it). The reconstructed-CSI bound is invariant to this relabeling, so
    the deviation measures assembly consistency and should be at noise floor.
    """
    dtheta = layout.delta_theta(p, q)
    mapped = psi.values.copy()
    mapped[:, 2] += dtheta
    lb_p = _lb_table(psi, codebook, grid, noise_variance)
    lb_q = _lb_table(ParamVector(mapped), codebook, grid, noise_variance,
                     pattern_offset=dtheta)
    return float(np.max(np.abs(lb_q - lb_p) / np.abs(lb_p)))


def numerical_fim(psi: ParamVector, codebook: Codebook, grid: SubcarrierGrid,
                  noise_variance: float, step: float = 1e-6) -> np.ndarray:
    """Independent Fisher-matrix oracle via central finite differences of the
    noiseless measurement mean (expected observed information)."""
    from fastabs.channel import PathTuple, TransmitBeamChannel, synthesize_csi

    def mean_vec(flat):
        vals = flat.reshape(-1, 4)
        paths = [
            PathTuple(gain=v[0] * np.exp(1j * v[1]), aoa=v[2], toa=v[3]) for v in vals
        ]
        ch = TransmitBeamChannel(tx_beam_index=0, paths=tuple(paths))
        return synthesize_csi(ch, codebook, grid).entries.flatten(order="F")

    flat = psi.flat()
    n = flat.size
    jac = np.zeros((codebook.num_beams * grid.num_subcarriers, n), dtype=complex)
    # steps proportional to each parameter's natural scale; delays live at
    # 1/(2 pi f_max) seconds, everything else is order one
    f_max = float(np.max(np.abs(grid.frequencies)))
    tau_scale = 1.0 / (2.0 * np.pi * f_max) if f_max > 0 else 1.0
    scales = np.ones(n)
    scales[3::4] = tau_scale
    for u in range(n):
        h = step * scales[u]
        fp = flat.copy()
        fm = flat.copy()
        fp[u] += h
        fm[u] -= h
        jac[:, u] = (mean_vec(fp) - mean_vec(fm)) / (2.0 * h)
    return (2.0 / noise_variance) * np.real(jac.conj().T @ jac)
