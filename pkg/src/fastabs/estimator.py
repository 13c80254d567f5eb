"""Path three-tuple extraction from one beam-specific measurement vector.

Greedy atom pursuit over the dictionary v(theta, tau) = b(tau) kron a(theta):
coarse grid detection, per-path Newton refinement with an analytic 2x2
Hessian, cyclic re-refinement with joint least-squares gain re-fits, and a
CFAR-style residual stopping rule. The OMP baseline runs the same loop with
the refinements removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from fastabs.array_model import (
    Codebook,
    SubcarrierGrid,
    beam_matrix,
    delay_matrix,
    delay_vector,
    rx_beam_vector,
)
from fastabs.channel import OBSERVABLE_SPAN, PathTuple


@dataclass(frozen=True)
class DictionaryGrids:
    """Coarse AoA/ToA grids used for atom detection."""

    aoa_grid: np.ndarray  # radians, sorted, within (0, pi)
    toa_grid: np.ndarray  # seconds, sorted, >= 0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.aoa_grid, dtype=float))
        t = np.atleast_1d(np.asarray(self.toa_grid, dtype=float))
        if a.size == 0 or t.size == 0:
            raise ValueError("grids must be non-empty")
        if np.any(np.diff(a) < 0) or np.any(np.diff(t) < 0):
            raise ValueError("grids must be sorted")
        if np.any(a <= 0) or np.any(a >= np.pi):
            raise ValueError("AoA grid must lie in (0, pi)")
        object.__setattr__(self, "aoa_grid", a)
        object.__setattr__(self, "toa_grid", t)

    @property
    def size(self) -> int:
        return self.aoa_grid.size * self.toa_grid.size


def default_grids(codebook: Codebook, grid: SubcarrierGrid, span=OBSERVABLE_SPAN) -> DictionaryGrids:
    """AoA grid 4x oversampled vs. the beam count; ToA grid at half the delay
    resolution over one delay ambiguity period [0, 1/df)."""
    n_aoa = 4 * codebook.num_beams
    aoa = np.linspace(span[0], span[1], n_aoa)
    f = grid.frequencies
    if f.size > 1:
        df = float(f[1] - f[0])
        step = 1.0 / (2.0 * f.size * df)
        toa = np.arange(0.0, 1.0 / df, step)
    else:
        toa = np.array([0.0])
    return DictionaryGrids(aoa_grid=aoa, toa_grid=toa)


@dataclass(frozen=True)
class EstimatorConfig:
    max_paths: int = 4
    newton_steps_per_detection: int = 60
    cyclic_rounds: int = 50
    stop_threshold_multiplier: float = 1.5  # kappa; <= 0 disables the stop rule
    grids: DictionaryGrids | None = None  # None -> default_grids at call time
    escape_restarts: bool = False  # multi-candidate re-detection escape pass

    def __post_init__(self):
        if self.max_paths < 1:
            raise ValueError("max_paths must be >= 1")


@dataclass(frozen=True)
class EstimateResult:
    paths: tuple  # PathTuple, dominant first
    residual_energy: float
    detections: int


class GridCache:
    """Precomputed atom responses for one (codebook, grid, grids) triple.

    Reusable across measurement vectors; building it once per Monte-Carlo
    sweep dominates the per-trial cost otherwise.
    """

    def __init__(self, codebook: Codebook, grid: SubcarrierGrid, grids: DictionaryGrids):
        self.codebook = codebook
        self.grid = grid
        self.grids = grids
        self.A = beam_matrix(codebook, grids.aoa_grid)          # (M, n_aoa)
        self.D = delay_matrix(grid, grids.toa_grid)             # (N_s, n_toa)
        self.a_norm2 = np.sum(np.abs(self.A) ** 2, axis=0)      # (n_aoa,)
        self.ns = grid.num_subcarriers


def _kron(d, a):
    # np.kron for 1-D inputs, without its shape-juggling overhead
    return np.multiply.outer(d, a).ravel()


def _atom(codebook, grid, theta, tau):
    return _kron(delay_vector(grid, tau), rx_beam_vector(codebook, theta))


def cost_j(y: np.ndarray, paths, codebook: Codebook, grid: SubcarrierGrid) -> float:
    """Residual energy J = ||y - sum_l g_l v(theta_l, tau_l)||^2."""
    y = np.asarray(y)
    if y.size != codebook.num_beams * grid.num_subcarriers:
        raise ValueError("measurement length does not match codebook/grid")
    r = y.astype(complex).copy()
    for p in paths:
        r -= p.gain * _atom(codebook, grid, p.aoa, p.toa)
    return float(np.real(r.conj() @ r))


def _correlation_map(y: np.ndarray, cache: GridCache):
    """|v^H y|^2 / ||v||^2 over the coarse grid, plus raw correlations."""
    ymat = y.reshape(cache.codebook.num_beams, cache.ns, order="F")
    g = cache.A.conj().T @ ymat                 # (n_aoa, N_s)
    corr = g @ cache.D.conj()                   # (n_aoa, n_toa)
    norm2 = cache.a_norm2[:, None] * cache.ns
    return np.abs(corr) ** 2 / norm2, corr, norm2


def coarse_detect(y_residual: np.ndarray, codebook: Codebook, grid: SubcarrierGrid, grids: DictionaryGrids):
    """Matched-filter peak over the coarse grid; ties break toward the
    smallest AoA index then ToA index."""
    cache = GridCache(codebook, grid, grids)
    return _coarse_detect_cached(np.asarray(y_residual, dtype=complex), cache)[0]


def _coarse_detect_cached(y_residual, cache: GridCache):
    metric, corr, norm2 = _correlation_map(y_residual, cache)
    flat = np.argmax(metric)  # first max in row-major order = smallest indices
    i, j = np.unravel_index(flat, metric.shape)
    theta = float(cache.grids.aoa_grid[i])
    tau = float(cache.grids.toa_grid[j])
    gain = complex(corr[i, j] / norm2[i, 0])
    return (theta, tau, gain), float(metric[i, j])


def _derivs(codebook, grid, theta, tau):
    # vectorized over beams: phase chain rule with phi_n = -c_n cos(theta),
    # phi' = j c_n sin(theta), phi'' = (j c_n sin)^2 + j c_n cos
    arr = codebook.array
    cn = 2.0 * np.pi * arr.spacing_over_wavelength * np.arange(arr.num_elements)
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    e = np.exp(-1j * cos_t * cn)
    f1 = 1j * cn * sin_t
    a = codebook.weights @ e
    a1 = codebook.weights @ (e * f1)
    a2 = codebook.weights @ (e * (f1**2 + 1j * cn * cos_t))
    d = delay_vector(grid, tau)
    w = -2j * np.pi * grid.frequencies
    d1 = d * w
    d2 = d * w**2
    return a, a1, a2, d, d1, d2


def newton_refine(y_residual: np.ndarray, est, codebook: Codebook, grid: SubcarrierGrid):
    """One guarded Newton step on J_r over (theta, tau), then an LS gain update.

    The step is applied only when the 2x2 Hessian is positive definite and the
    step does not increase J_r; otherwise (theta, tau) are left unchanged.
    """
    theta, tau, gain = est
    y = np.asarray(y_residual, dtype=complex)
    a, a1, a2, d, d1, d2 = _derivs(codebook, grid, theta, tau)
    v = _kron(d, a)
    r = y - gain * v
    v_t = _kron(d, a1)
    v_tau = _kron(d1, a)
    # gradient and Hessian of J_r = ||y - g v||^2 w.r.t. (theta, tau), g fixed
    grad = -2.0 * np.real(np.conj(gain) * np.array([v_t.conj() @ r, v_tau.conj() @ r]))
    v_tt = _kron(d, a2)
    v_tautau = _kron(d2, a)
    v_ttau = _kron(d1, a1)
    g2 = np.abs(gain) ** 2
    h_tt = -2.0 * np.real(np.conj(gain) * (v_tt.conj() @ r)) + 2.0 * g2 * np.real(v_t.conj() @ v_t)
    h_tautau = -2.0 * np.real(np.conj(gain) * (v_tautau.conj() @ r)) + 2.0 * g2 * np.real(v_tau.conj() @ v_tau)
    h_ttau = -2.0 * np.real(np.conj(gain) * (v_ttau.conj() @ r)) + 2.0 * g2 * np.real(v_t.conj() @ v_tau)
    hess = np.array([[h_tt, h_ttau], [h_ttau, h_tautau]])

    new_theta, new_tau = theta, tau
    # positive-definite guard: both leading minors positive
    if hess[0, 0] > 0 and np.linalg.det(hess) > 0:
        step = np.linalg.solve(hess, grad)
        cand_theta = theta - step[0]
        cand_tau = tau - step[1]
        if 0 < cand_theta < np.pi:
            j_old = float(np.real(r.conj() @ r))
            v_new = _atom(codebook, grid, cand_theta, cand_tau)
            r_new = y - gain * v_new
            if float(np.real(r_new.conj() @ r_new)) <= j_old:
                new_theta, new_tau = float(cand_theta), float(cand_tau)

    v = _atom(codebook, grid, new_theta, new_tau)
    new_gain = complex((v.conj() @ y) / np.real(v.conj() @ v))
    return new_theta, new_tau, new_gain


def _refine_until(y_residual, est, codebook, grid, max_steps: int):
    """Newton iterations until the (theta, tau) update stalls.

    The alternating step/gain-refit scheme converges linearly, so a handful of
    iterations leaves a visible grid bias; iterate to numerical convergence
    within the step budget instead.
    """
    f_max = max(float(np.max(np.abs(grid.frequencies))), 1.0)
    for _ in range(max_steps):
        new = newton_refine(y_residual, est, codebook, grid)
        dtheta = abs(new[0] - est[0])
        dtau = abs(new[1] - est[1]) * 2.0 * np.pi * f_max
        est = new
        if dtheta < 1e-9 and dtau < 1e-9:
            break
    return est


def _joint_gain_refit(y, ests, codebook, grid):
    """Least-squares re-fit of all gains over the detected atoms."""
    V = np.stack([_atom(codebook, grid, t, tau) for (t, tau, _) in ests], axis=1)
    g, *_ = np.linalg.lstsq(V, y, rcond=None)
    return [(t, tau, complex(gv)) for (t, tau, _), gv in zip(ests, g)], V @ g


def _cyclic_refine(y, ests, codebook, grid, config, rounds):
    """Alternating per-path Newton refinement with joint gain re-fits until
    the residual stops improving; returns (ests, residual_energy)."""
    j_now = cost_j(y, [PathTuple(gain=g, aoa=t, toa=tau) for (t, tau, g) in ests], codebook, grid)
    j_prev = np.inf
    for _ in range(rounds):
        for i in range(len(ests)):
            y_i = y.copy()
            for (t, tau, g) in ests[:i] + ests[i + 1 :]:
                y_i -= g * _atom(codebook, grid, t, tau)
            ests[i] = _refine_until(y_i, ests[i], codebook, grid,
                                    config.newton_steps_per_detection)
        ests, model = _joint_gain_refit(y, ests, codebook, grid)
        r = y - model
        j_now = float(np.real(r.conj() @ r))
        if j_prev - j_now < 1e-9 * max(j_now, 1e-30):
            break
        j_prev = j_now
    return ests, j_now


def _peak_candidates(residual, cache, count):
    """Best coarse-grid (theta, tau, gain) triples, at most one per AoA grid
    point, strongest first."""
    metric, corr, norm2 = _correlation_map(residual, cache)
    best_tau = np.argmax(metric, axis=1)
    profile = metric[np.arange(metric.shape[0]), best_tau]
    order = np.argsort(profile)[::-1][:count]
    out = []
    for i in order:
        j = best_tau[i]
        out.append((float(cache.grids.aoa_grid[i]), float(cache.grids.toa_grid[j]),
                    complex(corr[i, j] / norm2[i, 0])))
    return out


def _needs_escape(ests):
    """True when interfering atoms may have trapped the refinement: two atoms
    within half the observable span of each other getting confusably close in
    angle, or a near-vanishing atom suggesting a spurious detection."""
    if len(ests) < 2:
        return False
    thetas = np.array([t for (t, _, _) in ests])
    gains = np.array([abs(g) for (_, _, g) in ests])
    dmin = np.min(np.abs(thetas[:, None] - thetas[None, :])[np.triu_indices(len(ests), 1)])
    return dmin < 0.45 or np.min(gains) < 0.2 * np.max(gains)


def _escape_pass(y, ests, j_current, codebook, grid, config, cache):
    """Re-detection restarts to escape local minima of the residual cost.

    Interfering paths pull the greedy initialization into joint minima a
    Newton step cannot leave (a displaced first atom absorbs part of the
    second path and the residual peak lands on a sidelobe). Restart from
    alternative coarse candidates and keep the lowest-residual fit; a
    restart is adopted only when it strictly reduces the cost.
    """
    probe_rounds = min(config.cyclic_rounds, 15)
    trials = []
    # drop each atom in turn, re-detect from the residual of the rest
    for i in range(len(ests)):
        keep = ests[:i] + ests[i + 1 :]
        r = y.copy()
        for (t, tau, g) in keep:
            r -= g * _atom(codebook, grid, t, tau)
        for det in _peak_candidates(r, cache, 2):
            det = _refine_until(r, det, codebook, grid, config.newton_steps_per_detection)
            trials.append(keep + [det])
    # joint re-initialization from pairs of peaks of the raw measurement
    if len(ests) == 2:
        peaks = _peak_candidates(y, cache, 4)
        for a in range(len(peaks)):
            for b in range(a + 1, len(peaks)):
                trials.append([peaks[a], peaks[b]])
    best_j, best = j_current, None
    for cand in trials:
        cand, j = _cyclic_refine(y, cand, codebook, grid, config, probe_rounds)
        if j < best_j - 1e-9 * max(best_j, 1e-30):
            best_j, best = j, cand
    if best is None:
        return ests, j_current
    return _cyclic_refine(y, best, codebook, grid, config, config.cyclic_rounds)


def _stop_threshold(config: EstimatorConfig, grids: DictionaryGrids, noise_variance: float) -> float:
    if config.stop_threshold_multiplier <= 0 or noise_variance <= 0:
        return 0.0
    return config.stop_threshold_multiplier * noise_variance * np.log(grids.size)


def _greedy_estimate(y, codebook, grid, config, noise_variance, refine: bool, cache=None):
    y = np.asarray(y, dtype=complex)
    grids = config.grids or default_grids(codebook, grid)
    if cache is None or cache.grids is not grids:
        cache = GridCache(codebook, grid, grids)
    threshold = _stop_threshold(config, grids, noise_variance)

    ests = []
    residual = y.copy()
    while len(ests) < config.max_paths:
        det, peak = _coarse_detect_cached(residual, cache)
        if threshold > 0 and peak < threshold:
            break
        if refine:
            det = _refine_until(residual, det, codebook, grid, config.newton_steps_per_detection)
        ests.append(det)
        if refine:
            # alternating per-path refinement converges linearly when paths
            # interfere; run rounds until the residual stops improving
            ests, _ = _cyclic_refine(y, ests, codebook, grid, config, config.cyclic_rounds)
        ests, model = _joint_gain_refit(y, ests, codebook, grid)
        residual = y - model

    if refine and config.escape_restarts and _needs_escape(ests):
        j_now = float(np.real(residual.conj() @ residual))
        ests, _ = _escape_pass(y, ests, j_now, codebook, grid, config, cache)
        ests, model = _joint_gain_refit(y, ests, codebook, grid)
        residual = y - model

    paths = tuple(
        sorted(
            (PathTuple(gain=g, aoa=t, toa=tau) for (t, tau, g) in ests),
            key=lambda p: -abs(p.gain),
        )
    )
    res_energy = float(np.real(residual.conj() @ residual))
    return EstimateResult(paths=paths, residual_energy=res_energy, detections=len(paths))


def nomp_estimate(
    y: np.ndarray,
    codebook: Codebook,
    grid: SubcarrierGrid,
    config: EstimatorConfig,
    noise_variance: float = 0.0,
    cache: GridCache | None = None,
) -> EstimateResult:
    """Newtonized greedy pursuit: detect on the residual, refine off-grid."""
    return _greedy_estimate(y, codebook, grid, config, noise_variance, refine=True, cache=cache)


def omp_estimate(
    y: np.ndarray,
    codebook: Codebook,
    grid: SubcarrierGrid,
    config: EstimatorConfig,
    noise_variance: float = 0.0,
    cache: GridCache | None = None,
) -> EstimateResult:
    """Grid-limited baseline: the same loop with no Newton or cyclic refinement."""
    return _greedy_estimate(y, codebook, grid, config, noise_variance, refine=False, cache=cache)
