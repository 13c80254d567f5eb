"""Fast-ABS decision core: virtual CSI, beam scoring, RSNR, the event-driven
switching state machine, the exhaustive-search oracle and slot accounting.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from fastabs.array_model import ArraySpec, Codebook, SubcarrierGrid, make_dft_codebook
from fastabs.channel import (
    OBSERVABLE_SPAN,
    CsiMatrix,
    PathTuple,
    TransmitBeamChannel,
    synthesize_csi,
)
from fastabs.geometry import ModuleLayout, map_tuples


@dataclass(frozen=True)
class VirtualCsi:
    entries: np.ndarray
    module_index: int
    tx_beam_index: int
    provenance: str  # "full" | "simplified" | "measured"

    def __post_init__(self):
        object.__setattr__(self, "entries", np.atleast_2d(np.asarray(self.entries, dtype=complex)))


@dataclass(frozen=True)
class SwitchDecision:
    tx_beam: int
    rx_beam: int
    module: int
    score: float


def reconstruct_virtual_csi(paths, layout: ModuleLayout, rho: float, p: int, q: int,
                            codebook: Codebook, grid: SubcarrierGrid,
                            mode: str = "simplified", tx_beam_index: int = 0) -> VirtualCsi:
    """Synthesize module q's CSI from tuples estimated at module p.

    "full" maps AoA, ToA and gain; "simplified" keeps the original ToAs (the
    sub-nanosecond handset delay offsets do not move analog beam choices).
    Mapped paths falling outside the front half plane contribute nothing.
    """
    if not paths:
        raise ValueError("need at least one estimated path")
    if mode not in ("full", "simplified"):
        raise ValueError(f"unknown virtual CSI mode {mode!r}")
    mapped = map_tuples(paths, layout, p, q, rho)
    if mode == "simplified":
        mapped = [replace(mp, toa=orig.toa) for mp, orig in zip(mapped, paths)]
    visible = tuple(mp for mp in mapped if mp.in_half_plane)
    if visible:
        ch = TransmitBeamChannel(tx_beam_index=tx_beam_index, paths=visible)
        entries = synthesize_csi(ch, codebook, grid, module_index=q).entries
    else:
        entries = np.zeros((codebook.num_beams, grid.num_subcarriers), dtype=complex)
    return VirtualCsi(entries=entries, module_index=q, tx_beam_index=tx_beam_index, provenance=mode)


def beam_scores(csi) -> np.ndarray:
    """Per-receive-beam energy B_m = sum_k |H[m, k]|^2."""
    return np.sum(np.abs(np.atleast_2d(csi.entries)) ** 2, axis=1)


def rsnr(score: float, num_subcarriers: int, noise_variance: float) -> float:
    """Post-beamforming per-subcarrier signal power over noise power, in dB."""
    if score <= 0 or num_subcarriers <= 0 or noise_variance <= 0:
        raise ValueError("rsnr needs positive score, subcarrier count and noise variance")
    return 10.0 * np.log10(score / (num_subcarriers * noise_variance))


def select_best(scores: dict) -> SwitchDecision:
    """Argmax of B over (tx beam, rx beam, module); ties break toward the
    lowest module, then rx beam, then tx beam."""
    if not scores:
        raise ValueError("empty score table")
    best_key = None
    best_val = -np.inf
    for (s, m, p), val in scores.items():
        key = (p, m, s)
        if val > best_val or (val == best_val and key < (best_key[2], best_key[1], best_key[0])):
            best_key = (s, m, p)
            best_val = float(val)
    return SwitchDecision(tx_beam=best_key[0], rx_beam=best_key[1], module=best_key[2], score=best_val)


def es_oracle(channel: TransmitBeamChannel, array: ArraySpec, grid: SubcarrierGrid,
              noise_variance: float, fine_grid_size: int = 481,
              span=OBSERVABLE_SPAN):
    """Best single-beam pointing over a fine angular scan of the true channel.

    Default 481 angles over [30, 150] degrees (0.25 degree spacing). Returns
    (best angle in radians, its RSNR in dB); ties go to the lowest angle.
    """
    if fine_grid_size < 2:
        raise ValueError("fine_grid_size must be >= 2")
    angles = np.linspace(span[0], span[1], fine_grid_size)
    codebook = make_dft_codebook(array, angles)
    csi = synthesize_csi(channel, codebook, grid)
    scores = beam_scores(csi)
    idx = int(np.argmax(scores))
    return float(angles[idx]), rsnr(float(scores[idx]), grid.num_subcarriers, noise_variance)


# --- event-driven state machine (Fig. 3 flow) -------------------------------


@dataclass(frozen=True)
class PowerReportReady:
    powers: np.ndarray  # per-module detected power


@dataclass(frozen=True)
class CsiMeasured:
    tx_beam: int
    measurement: np.ndarray  # vectorized noisy CSI from the current module


@dataclass(frozen=True)
class TuplesExtracted:
    tx_beam: int
    paths: tuple  # estimated PathTuple list in the measuring module's frame


@dataclass(frozen=True)
class BsBeamAvailable:
    tx_beam: int


@dataclass(frozen=True)
class BlockageChange:
    powers: np.ndarray


@dataclass
class SlotLedger:
    """Beam-sweep slots charged per stage, for both policies."""

    charges: list = field(default_factory=list)  # (stage, policy, slots)

    def charge(self, stage: str, policy: str, slots: int) -> None:
        if slots < 0:
            raise ValueError("slot charges must be non-negative")
        if slots:
            self.charges.append((stage, policy, slots))

    def stage_total(self, stage: str, policy: str) -> int:
        return sum(s for st, pol, s in self.charges if st == stage and pol == policy)

    def total(self, policy: str) -> int:
        return sum(s for _, pol, s in self.charges if pol == policy)


@dataclass
class SwitchState:
    current: tuple  # (tx_beam, rx_beam, module)
    stage: str = "I"
    module_amp: np.ndarray | None = None  # per-module amplitude from power report
    # per tx beam: (measuring module, estimated paths, measuring module amp then)
    path_tables: dict = field(default_factory=dict)
    pending_measurements: dict = field(default_factory=dict)
    scores: dict = field(default_factory=dict)  # (s, m, q) -> B
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class SwitchingPolicy:
    layout: ModuleLayout
    selection_codebook: Codebook  # deployable receive codebook (the 9-grid set)
    grid: SubcarrierGrid
    noise_variance: float
    sweep_beams: int  # M_ABS charged per receive sweep
    es_sweep_beams: int = 481  # M_ES for the comparison ledger
    num_tx_beams: int = 1  # S
    switch_margin_db: float = 3.0  # hysteresis delta


class InvalidEvent(RuntimeError):
    pass


def _rebuild_scores(state: SwitchState, policy: SwitchingPolicy) -> None:
    state.scores = {}
    if state.module_amp is None:
        return
    for s, (p_meas, paths, amp_then) in state.path_tables.items():
        if not paths:
            continue
        for q in range(policy.layout.num_modules):
            rho = float(state.module_amp[q] / amp_then)
            vcsi = reconstruct_virtual_csi(
                paths, policy.layout, rho, p_meas, q,
                policy.selection_codebook, policy.grid,
                mode="simplified", tx_beam_index=s,
            )
            for m, b in enumerate(beam_scores(vcsi)):
                state.scores[(s, m, q)] = float(b)


def _maybe_switch(state: SwitchState, policy: SwitchingPolicy, actions: list) -> None:
    if not state.scores:
        return
    best = select_best(state.scores)
    cur = state.scores.get(state.current, 0.0)
    if (best.tx_beam, best.rx_beam, best.module) == state.current:
        return
    if cur <= 0:
        gain_db = np.inf
    else:
        gain_db = 10.0 * np.log10(best.score / cur)
    if gain_db > policy.switch_margin_db:
        state.current = (best.tx_beam, best.rx_beam, best.module)
        actions.append(("switch", best))


def _log(state: SwitchState, policy: SwitchingPolicy, event_name: str, slots: int) -> None:
    s, m, p = state.current
    score = state.scores.get(state.current)
    rsnr_db = (
        rsnr(score, policy.grid.num_subcarriers, policy.noise_variance)
        if score
        else float("nan")
    )
    state.trace.append(
        {
            "stage": state.stage,
            "event": event_name,
            "tx_beam": s,
            "rx_beam": m,
            "module": p,
            "rsnr_db": rsnr_db,
            "fast_abs_slots": slots,
        }
    )


def step_state_machine(state: SwitchState, event, policy: SwitchingPolicy,
                       ledger: SlotLedger):
    """Process one event; returns (state, actions). Slot charges go to the
    ledger under the state's current stage label, for both the Fast-ABS
    policy (actual sweeps) and the exhaustive-search comparison policy.
    """
    actions = []
    fast_slots = 0
    if isinstance(event, PowerReportReady):
        state.module_amp = np.sqrt(np.asarray(event.powers, dtype=float))
        _rebuild_scores(state, policy)
    elif isinstance(event, CsiMeasured):
        if state.module_amp is None:
            raise InvalidEvent("measurement before any power report")
        state.pending_measurements[event.tx_beam] = event.measurement
        actions.append(("extract_tuples", event.tx_beam))
        fast_slots = policy.sweep_beams
        ledger.charge(state.stage, "fast_abs", policy.sweep_beams)
        ledger.charge(state.stage, "es", policy.es_sweep_beams)
    elif isinstance(event, TuplesExtracted):
        if event.tx_beam not in state.pending_measurements:
            raise InvalidEvent(f"no pending measurement for tx beam {event.tx_beam}")
        del state.pending_measurements[event.tx_beam]
        p_meas = state.current[2]
        amp_then = float(state.module_amp[p_meas])
        state.path_tables[event.tx_beam] = (p_meas, tuple(event.paths), amp_then)
        _rebuild_scores(state, policy)
        _maybe_switch(state, policy, actions)
    elif isinstance(event, BsBeamAvailable):
        actions.append(("measure", event.tx_beam))
    elif isinstance(event, BlockageChange):
        state.module_amp = np.sqrt(np.asarray(event.powers, dtype=float))
        _rebuild_scores(state, policy)
        _maybe_switch(state, policy, actions)
        ledger.charge(
            state.stage, "es",
            policy.num_tx_beams * policy.es_sweep_beams * policy.layout.num_modules,
        )
    else:
        raise InvalidEvent(f"unknown event {event!r}")
    _log(state, policy, type(event).__name__, fast_slots)
    return state, actions
