"""Multipath frequency-domain CSI synthesis and noisy beam-specific measurements.

A path is a three-tuple (complex gain, AoA, ToA). CSI for one transmit beam
and one module is the M x N_s matrix H[m, k] = sum_l g_l * A_m(theta_l)
* exp(-j*2pi*tau_l*f_k). Measurements vectorize H column-major so that
vec(H) = sum_l g_l * (b(tau_l) kron a(theta_l)).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from fastabs.array_model import Codebook, SubcarrierGrid, delay_matrix, rx_beam_vector

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Observable AoA span of one antenna module (beam-edge limitation).
OBSERVABLE_SPAN = (np.deg2rad(30.0), np.deg2rad(150.0))


@dataclass(frozen=True)
class PathTuple:
    """One propagation path: complex gain, AoA (radians), ToA (seconds)."""

    gain: complex
    aoa: float
    toa: float

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise ValueError("gain must be finite")
        if not np.isfinite(self.aoa):
            raise ValueError("aoa must be finite")
        # toa may go slightly negative after cross-module mapping (the time
        # origin is module-relative), so only finiteness is enforced here.
        if not np.isfinite(self.toa):
            raise ValueError("toa must be finite")

    @property
    def in_half_plane(self) -> bool:
        """Whether the AoA lies in the array's front half plane (0, pi)."""
        return 0.0 < self.aoa < np.pi


@dataclass(frozen=True)
class TransmitBeamChannel:
    """All paths excited by one transmit beam; dominant path first."""

    tx_beam_index: int
    paths: tuple

    def __post_init__(self):
        p = tuple(self.paths)
        if len(p) < 1:
            raise ValueError("channel must have at least one path")
        p = tuple(sorted(p, key=lambda q: -abs(q.gain)))
        object.__setattr__(self, "paths", p)

    @property
    def num_paths(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class CsiMatrix:
    """M x N_s channel-frequency-response matrix for one (tx beam, module)."""

    entries: np.ndarray
    module_index: int = 0
    tx_beam_index: int = 0

    def __post_init__(self):
        e = np.atleast_2d(np.asarray(self.entries, dtype=complex))
        object.__setattr__(self, "entries", e)

    @property
    def num_beams(self) -> int:
        return self.entries.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    """Circularly-symmetric complex Gaussian noise, per-entry variance."""

    variance: float
    rng_seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("noise variance must be >= 0")


def synthesize_csi(
    channel: TransmitBeamChannel,
    codebook: Codebook,
    grid: SubcarrierGrid,
    module_index: int = 0,
) -> CsiMatrix:
    """Noiseless CSI matrix; exactly linear in the path list."""
    aoas = np.array([p.aoa for p in channel.paths])
    if np.any(aoas <= 0) or np.any(aoas >= np.pi):
        raise ValueError("all path AoAs must lie in (0, pi)")
    gains = np.array([p.gain for p in channel.paths])
    taus = np.array([p.toa for p in channel.paths])
    a = rx_beam_vector(codebook, aoas)          # (M, L)
    d = delay_matrix(grid, taus)                # (N_s, L)
    h = (a * gains) @ d.T                       # (M, N_s)
    return CsiMatrix(entries=h, module_index=module_index, tx_beam_index=channel.tx_beam_index)


def measure(csi: CsiMatrix, noise: NoiseSpec) -> np.ndarray:
    """y = vec(H) + z, column-major vectorization (delay-major Kronecker order)."""
    h = csi.entries.flatten(order="F")
    if noise.variance == 0:
        return h
    rng = np.random.default_rng(noise.rng_seed)
    sigma = np.sqrt(noise.variance / 2.0)
    z = rng.normal(0.0, sigma, h.size) + 1j * rng.normal(0.0, sigma, h.size)
    return h + z


def make_two_path_scenario(
    case: str,
    rng_seed: int,
    aoa_span=OBSERVABLE_SPAN,
    tx_beam_index: int = 0,
) -> TransmitBeamChannel:
    """LoS path plus one reflection, 10 dB (case I) or 20 dB (case II) weaker.

    LoS amplitude is normalized to 1; both AoAs are uniform over the span;
    gain phases are uniform on [0, 2pi); ToAs come from distances uniform on
    [0, 60] m with the LoS distance strictly smaller.
    """
    case = case.upper().strip()
    if case in ("I", "1", "CASE I"):
        reflect_db = 10.0
    elif case in ("II", "2", "CASE II"):
        reflect_db = 20.0
    else:
        raise ValueError(f"unknown scenario case {case!r}")
    rng = np.random.default_rng(rng_seed)
    aoas = rng.uniform(aoa_span[0], aoa_span[1], size=2)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=2)
    dists = np.sort(rng.uniform(0.0, 60.0, size=2))
    los = PathTuple(gain=np.exp(1j * phases[0]), aoa=aoas[0], toa=dists[0] / SPEED_OF_LIGHT)
    nlos = PathTuple(
        gain=10 ** (-reflect_db / 20.0) * np.exp(1j * phases[1]),
        aoa=aoas[1],
        toa=dists[1] / SPEED_OF_LIGHT,
    )
    return TransmitBeamChannel(tx_beam_index=tx_beam_index, paths=(los, nlos))


def apply_hand_blockage(channel: TransmitBeamChannel, attenuation_db: float) -> TransmitBeamChannel:
    """Scale every path gain by 10^(-attenuation_db/20); AoAs/ToAs unchanged."""
    if attenuation_db < 0:
        raise ValueError("attenuation_db must be >= 0")
    scale = 10 ** (-attenuation_db / 20.0)
    paths = tuple(replace(p, gain=p.gain * scale) for p in channel.paths)
    return TransmitBeamChannel(tx_beam_index=channel.tx_beam_index, paths=paths)


def write_scenario(channels, path) -> None:
    """Serialize per-transmit-beam path tables as a key/value text document."""
    lines = ["# fastabs scenario v1"]
    for ch in channels:
        lines.append(f"tx_beam {ch.tx_beam_index}")
        for p in ch.paths:
            g = complex(p.gain)
            lines.append(
                "path "
                f"mag={abs(g):.12g} "
                f"phase_deg={np.rad2deg(np.angle(g)):.12g} "
                f"aoa_deg={np.rad2deg(p.aoa):.12g} "
                f"toa_ns={p.toa * 1e9:.12g}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scenario(path):
    """Inverse of :func:`write_scenario`; returns a list of channels."""
    channels = []
    tx_index = None
    paths = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("tx_beam"):
                if tx_index is not None:
                    channels.append(TransmitBeamChannel(tx_index, tuple(paths)))
                tx_index = int(line.split()[1])
                paths = []
            elif line.startswith("path"):
                kv = dict(tok.split("=") for tok in line.split()[1:])
                gain = float(kv["mag"]) * np.exp(1j * np.deg2rad(float(kv["phase_deg"])))
                paths.append(
                    PathTuple(
                        gain=gain,
                        aoa=np.deg2rad(float(kv["aoa_deg"])),
                        toa=float(kv["toa_ns"]) * 1e-9,
                    )
                )
            else:
                raise ValueError(f"unrecognized scenario line: {line!r}")
    if tx_index is not None:
        channels.append(TransmitBeamChannel(tx_index, tuple(paths)))
    return channels
