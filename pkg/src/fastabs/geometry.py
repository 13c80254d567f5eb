"""Fixed handset geometry: module positions, angular rotations, delay offsets.

Each module has a 2-D position (meters) and a rotation offset relative to
module 0. A module-local AoA theta corresponds to the global arrival azimuth
theta - rotation_offset, so mapping p -> q adds
delta_theta[p, q] = offset_q - offset_p to the local AoA.

The per-path delay offset is the signed plane-wave projection
(u(theta) . (r_p - r_q)) / c with u the unit vector toward the source. The
printed path-length-difference formula for the reference handset quadrant is
recovered up to sign; the projection generalizes it to any layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from fastabs.channel import SPEED_OF_LIGHT, PathTuple


@dataclass(frozen=True)
class ModulePlacement:
    position: tuple  # (x, y) meters
    rotation_offset: float = 0.0  # radians, relative to module 0


@dataclass(frozen=True)
class ModuleLayout:
    modules: tuple

    def __post_init__(self):
        m = tuple(self.modules)
        if len(m) < 1:
            raise ValueError("layout needs at least one module")
        object.__setattr__(self, "modules", m)

    @property
    def num_modules(self) -> int:
        return len(self.modules)

    def delta_theta(self, p: int, q: int) -> float:
        """Angular rotation applied to local AoAs when mapping p -> q."""
        self._check(p)
        self._check(q)
        return self.modules[q].rotation_offset - self.modules[p].rotation_offset

    def _check(self, idx: int) -> None:
        if not (0 <= idx < self.num_modules):
            raise IndexError(f"module index {idx} out of range")


@dataclass(frozen=True)
class PowerReport:
    """Per-module detected power (linear units) from the pseudo-omni detector."""

    powers: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.powers, dtype=float))
        if np.any(p < 0):
            raise ValueError("detected powers must be >= 0")
        object.__setattr__(self, "powers", p)


def delay_offset(layout: ModuleLayout, p: int, q: int, theta: float) -> float:
    """ToA shift (seconds) added when mapping a path from module p to q.

    ``theta`` is the path's AoA in module q's local frame, in (0, pi).
    """
    layout._check(p)
    layout._check(q)
    if not (0 < theta < np.pi):
        raise ValueError("theta must lie in (0, pi)")
    global_az = theta - layout.modules[q].rotation_offset
    u = np.array([np.cos(global_az), np.sin(global_az)])
    rp = np.asarray(layout.modules[p].position, dtype=float)
    rq = np.asarray(layout.modules[q].position, dtype=float)
    return float(u @ (rp - rq)) / SPEED_OF_LIGHT


def map_tuples(paths, layout: ModuleLayout, p: int, q: int, rho: float):
    """Map path tuples estimated at module p to module q.

    AoAs rotate by the fixed delta_theta[p, q]; gains scale by the amplitude
    ratio rho; the ToA shift is evaluated per path at the mapped AoA, so it
    varies with the path while the rotation and rho do not. Mapped AoAs
    falling outside (0, pi) are kept (flagged via ``in_half_plane``); they
    contribute no beam gain at module q.
    """
    if rho < 0:
        raise ValueError("rho must be >= 0")
    dtheta = layout.delta_theta(p, q)
    out = []
    for path in paths:
        aoa = path.aoa + dtheta
        if 0 < aoa < np.pi:
            dtau = delay_offset(layout, p, q, aoa)
        else:
            dtau = 0.0  # unobservable at q; ToA shift is moot
        out.append(PathTuple(gain=rho * path.gain, aoa=aoa, toa=path.toa + dtau))
    return out


def power_ratio(report: PowerReport, p: int, q: int) -> float:
    """Amplitude ratio rho[p, q] = sqrt(power_q / power_p)."""
    powers = report.powers
    if not (0 <= p < powers.size and 0 <= q < powers.size):
        raise IndexError("module index out of range")
    if powers[p] <= 0:
        raise ValueError("reference module power must be positive")
    return float(np.sqrt(powers[q] / powers[p]))


def fig2d_layout() -> ModuleLayout:
    """Two-module handset preset: module 0 on the long/left edge, module 1 on
    the top/short edge, rotated -90 degrees relative to module 0."""
    return ModuleLayout(
        modules=(
            ModulePlacement(position=(0.0, 0.035), rotation_offset=0.0),
            ModulePlacement(position=(0.035, 0.075), rotation_offset=np.deg2rad(-90.0)),
        )
    )


def save_layout(layout: ModuleLayout, path) -> None:
    doc = {
        "modules": [
            {
                "x_m": float(m.position[0]),
                "y_m": float(m.position[1]),
                "rotation_offset_deg": float(np.rad2deg(m.rotation_offset)),
            }
            for m in layout.modules
        ]
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)


def load_layout(path) -> ModuleLayout:
    with open(path) as fh:
        doc = json.load(fh)
    mods = tuple(
        ModulePlacement(
            position=(float(m["x_m"]), float(m["y_m"])),
            rotation_offset=np.deg2rad(float(m["rotation_offset_deg"])),
        )
        for m in doc["modules"]
    )
    return ModuleLayout(modules=mods)
