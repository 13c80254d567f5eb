"""CSI synthesis, measurement noise, scenario generation and round trips."""

import numpy as np
import pytest

from fastabs.array_model import ArraySpec, default_grid, make_dft_codebook
from fastabs.channel import (
    NoiseSpec,
    PathTuple,
    TransmitBeamChannel,
    apply_hand_blockage,
    make_two_path_scenario,
    measure,
    read_scenario,
    synthesize_csi,
    write_scenario,
)

ARRAY = ArraySpec(num_elements=4)
CODEBOOK = make_dft_codebook(ARRAY, np.deg2rad([60.0, 90.0, 120.0]))
GRID = default_grid(32)


def _path(gain=1.0, aoa_deg=80.0, toa_ns=10.0):
    return PathTuple(gain=gain, aoa=np.deg2rad(aoa_deg), toa=toa_ns * 1e-9)


def test_path_tuple_validation():
    with pytest.raises(ValueError):
        PathTuple(gain=np.nan, aoa=1.0, toa=0.0)
    assert _path(aoa_deg=45.0).in_half_plane
    assert not PathTuple(gain=1.0, aoa=-0.3, toa=0.0).in_half_plane


def test_channel_sorts_paths_by_gain():
    ch = TransmitBeamChannel(
        tx_beam_index=0,
        paths=(_path(gain=0.1), _path(gain=1.0, aoa_deg=100.0)),
    )
    assert abs(ch.paths[0].gain) == pytest.approx(1.0)
    assert ch.num_paths == 2


def test_synthesize_is_linear_in_paths():
    p1, p2 = _path(gain=0.9 + 0.1j), _path(gain=0.4j, aoa_deg=130.0, toa_ns=40.0)
    h12 = synthesize_csi(TransmitBeamChannel(0, (p1, p2)), CODEBOOK, GRID).entries
    h1 = synthesize_csi(TransmitBeamChannel(0, (p1,)), CODEBOOK, GRID).entries
    h2 = synthesize_csi(TransmitBeamChannel(0, (p2,)), CODEBOOK, GRID).entries
    assert np.allclose(h12, h1 + h2, atol=1e-14)


def test_synthesize_matches_manual_formula():
    p = _path(gain=0.7 - 0.2j, aoa_deg=95.0, toa_ns=25.0)
    h = synthesize_csi(TransmitBeamChannel(0, (p,)), CODEBOOK, GRID).entries
    n = np.arange(4)
    for m in range(3):
        a_m = np.sum(CODEBOOK.weights[m] * np.exp(-1j * np.pi * n * np.cos(p.aoa)))
        for k in (0, 13, 31):
            want = p.gain * a_m * np.exp(-2j * np.pi * p.toa * GRID.frequencies[k])
            assert h[m, k] == pytest.approx(want, abs=1e-12)


def test_synthesize_rejects_out_of_half_plane_paths():
    bad = PathTuple(gain=1.0, aoa=-0.5, toa=0.0)
    with pytest.raises(ValueError):
        synthesize_csi(TransmitBeamChannel(0, (bad,)), CODEBOOK, GRID)


def test_measure_vectorizes_column_major():
    csi = synthesize_csi(TransmitBeamChannel(0, (_path(),)), CODEBOOK, GRID)
    y = measure(csi, NoiseSpec(variance=0.0))
    assert np.allclose(y, csi.entries.flatten(order="F"))
    assert y[:3].tolist() == csi.entries[:, 0].tolist()


def test_measure_noise_statistics_and_determinism():
    csi = synthesize_csi(TransmitBeamChannel(0, (_path(),)), CODEBOOK, GRID)
    var = 0.25
    y1 = measure(csi, NoiseSpec(variance=var, rng_seed=7))
    y2 = measure(csi, NoiseSpec(variance=var, rng_seed=7))
    y3 = measure(csi, NoiseSpec(variance=var, rng_seed=8))
    assert np.array_equal(y1, y2)
    assert not np.array_equal(y1, y3)
    # empirical per-entry variance over many draws
    h = csi.entries.flatten(order="F")
    draws = np.array([measure(csi, NoiseSpec(variance=var, rng_seed=s)) - h for s in range(400)])
    assert np.mean(np.abs(draws) ** 2) == pytest.approx(var, rel=0.05)


def test_two_path_scenario_contract():
    for case, ratio_db in (("I", 10.0), ("II", 20.0)):
        ch = make_two_path_scenario(case, rng_seed=3)
        los, nlos = ch.paths
        assert abs(los.gain) == pytest.approx(1.0)
        assert abs(nlos.gain) == pytest.approx(10 ** (-ratio_db / 20.0))
        assert los.toa < nlos.toa
        for p in ch.paths:
            assert np.deg2rad(30) <= p.aoa <= np.deg2rad(150)
            assert 0.0 <= p.toa <= 60.0 / 299_792_458.0
    with pytest.raises(ValueError):
        make_two_path_scenario("III", rng_seed=0)


def test_hand_blockage_scales_gains_only():
    ch = make_two_path_scenario("I", rng_seed=5)
    blocked = apply_hand_blockage(ch, 20.0)
    for before, after in zip(ch.paths, blocked.paths):
        assert after.gain == pytest.approx(before.gain * 0.1)
        assert after.aoa == before.aoa
        assert after.toa == before.toa
    with pytest.raises(ValueError):
        apply_hand_blockage(ch, -1.0)


def test_scenario_file_round_trip(tmp_path):
    chans = [make_two_path_scenario("I", rng_seed=1), make_two_path_scenario("II", rng_seed=2)]
    path = tmp_path / "scenario.txt"
    write_scenario(chans, path)
    back = read_scenario(path)
    assert len(back) == 2
    for orig, rt in zip(chans, back):
        assert rt.tx_beam_index == orig.tx_beam_index
        for p, q in zip(orig.paths, rt.paths):
            assert q.gain == pytest.approx(p.gain, rel=1e-9)
            assert q.aoa == pytest.approx(p.aoa, rel=1e-9)
            assert q.toa == pytest.approx(p.toa, rel=1e-9)
