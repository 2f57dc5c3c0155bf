import math

import numpy as np
import pytest

from kljn.circuit import (
    BitState,
    CableModel,
    ResistorQuad,
    band_limited_ms,
    effective_bandwidth,
    filtered_levels,
    parallel,
    vmg_solve,
    voltage_crossover,
    wire_levels,
)
from kljn.errors import BandwidthExceedsNyquist, GridTooCoarse, InvalidInput, SegmentTooLong
from kljn.noise import (
    SimulationGrid,
    Waveform,
    dump_waveform,
    fit_lorentzian,
    load_waveform,
    lowpass,
    mean_square,
    simulate_bit_period,
    synth_band_limited_gaussian,
    welch_psd,
    write_psd_csv,
)

REFERENCE_CABLE = CableModel(2000.0, 100e-12, 0.7e-6)
CLASSICAL = ResistorQuad(9000, 1000, 1000, 9000)
ROW2 = ResistorQuad(10000, 5000, 1000, 9000)


# ---------------------------------------------------------------- grid


def test_grid_sample_count_and_rule():
    g = SimulationGrid(1000.0, 0.5)
    assert g.n == 500
    g.require(50.0)
    with pytest.raises(GridTooCoarse):
        g.require(51.0)
    with pytest.raises(GridTooCoarse):
        g.require(10.0, [60.0])
    # infinite crossovers do not constrain the grid
    g.require(10.0, [math.inf])
    with pytest.raises(InvalidInput):
        SimulationGrid(0.0, 1.0)


def test_grid_covering():
    g = SimulationGrid.covering(1000.0, [239.0, 2000.0], periods=200)
    assert g.sample_rate_hz == 40000.0
    assert g.duration_s == pytest.approx(0.2)
    g.require(1000.0, [239.0, 2000.0])


def test_waveform_validation():
    with pytest.raises(InvalidInput):
        Waveform(np.array([1.0]), 10.0)
    with pytest.raises(InvalidInput):
        Waveform(np.array([1.0, np.nan]), 10.0)
    w = Waveform(np.arange(4.0), 2.0)
    assert w.duration_s == 2.0
    with pytest.raises(ValueError):
        w.samples[0] = 7.0


# ---------------------------------------------------------------- synthesis


def test_synth_mean_square():
    w = synth_band_limited_gaussian(1.0, 1000.0, SimulationGrid(100e3, 10.0), seed=1)
    assert len(w) == 1_000_000
    assert mean_square(w) == pytest.approx(1.0, rel=0.05)
    assert abs(w.samples.mean()) < 0.01


def test_synth_zero_rms():
    w = synth_band_limited_gaussian(0.0, 1000.0, SimulationGrid(20e3, 0.1), seed=1)
    assert not np.any(w.samples)


def test_synth_independent_seeds():
    grid = SimulationGrid(20e3, 5.0)
    a = synth_band_limited_gaussian(1.0, 1000.0, grid, seed=1).samples
    b = synth_band_limited_gaussian(1.0, 1000.0, grid, seed=2).samples
    r = np.corrcoef(a, b)[0, 1]
    assert abs(r) <= 3 / math.sqrt(a.size)


def test_synth_reproducible():
    grid = SimulationGrid(20e3, 0.2)
    a = synth_band_limited_gaussian(1.0, 1000.0, grid, seed=42).samples
    b = synth_band_limited_gaussian(1.0, 1000.0, grid, seed=42).samples
    assert np.array_equal(a, b)


def test_synth_nyquist():
    with pytest.raises(BandwidthExceedsNyquist):
        synth_band_limited_gaussian(1.0, 600.0, SimulationGrid(1000.0, 1.0), seed=0)


def test_synth_hard_cutoff():
    w = synth_band_limited_gaussian(1.0, 1000.0, SimulationGrid(20e3, 1.0), seed=3)
    power = np.abs(np.fft.rfft(w.samples)) ** 2
    freqs = np.fft.rfftfreq(len(w), 1 / 20e3)
    assert power[freqs > 1000].max() < 1e-20 * power.max()


# ---------------------------------------------------------------- mean square and Welch


def test_mean_square_trivial():
    assert mean_square(Waveform(np.full(10, 3.0), 1.0)) == pytest.approx(9.0)
    assert mean_square(Waveform(np.array([2.0, -2.0] * 5), 1.0)) == pytest.approx(4.0)


def test_welch_plateau_and_parseval():
    w = synth_band_limited_gaussian(1.0, 1000.0, SimulationGrid(20e3, 50.0), seed=4)
    sp = welch_psd(w)
    inband = (sp.frequencies > 50) & (sp.frequencies < 900)
    assert sp.psd[inband].mean() == pytest.approx(1e-3, rel=0.05)
    assert np.all(sp.psd >= 0)
    assert len(w) >= 100 * 4096
    assert sp.integral() == pytest.approx(mean_square(w), rel=0.02)


def test_welch_sinusoid_parseval():
    fs, a = 8192.0, 1.7
    t = np.arange(int(fs * 60)) / fs
    w = Waveform(a * np.sin(2 * np.pi * 123.4 * t), fs)
    assert welch_psd(w).integral() == pytest.approx(a * a / 2, rel=0.02)


def test_welch_errors():
    w = Waveform(np.zeros(100), 1.0)
    with pytest.raises(SegmentTooLong):
        welch_psd(w, segment_len=200)
    with pytest.raises(InvalidInput):
        welch_psd(w, segment_len=64, overlap_fraction=1.0)


# ---------------------------------------------------------------- filters


def _filtered_white(f_cr, seed=5):
    fs, b = 200e3, 10e3
    x = synth_band_limited_gaussian(1.0, b, SimulationGrid(fs, 40.0), seed=seed)
    return Waveform(lowpass(x.samples, f_cr, fs), fs), b


def test_lowpass_half_power_point():
    f_cr = 500.0
    y, _ = _filtered_white(f_cr)
    sp = welch_psd(y, segment_len=8192)
    s0 = sp.psd[(sp.frequencies > 0) & (sp.frequencies < 0.1 * f_cr)].mean()
    near = np.abs(sp.frequencies - f_cr) < 0.05 * f_cr
    assert sp.psd[near].mean() / s0 == pytest.approx(0.5, abs=0.05)


def test_lorentzian_fit_knee():
    f_cr = 800.0
    y, b = _filtered_white(f_cr, seed=6)
    s0_fit, f_fit = fit_lorentzian(welch_psd(y), f_max=0.9 * b)
    assert f_fit == pytest.approx(f_cr, rel=0.10)
    assert s0_fit == pytest.approx(1.0 / b, rel=0.10)


def test_lowpass_infinite_crossover_is_identity():
    x = np.random.default_rng(0).standard_normal(64)
    assert np.array_equal(lowpass(x, math.inf, 1000.0), x)
    with pytest.raises(GridTooCoarse):
        lowpass(x, 600.0, 1000.0)


# ---------------------------------------------------------------- bit periods


def test_no_cable_white_levels():
    gens = vmg_solve(ROW2, 1.0, 1000.0)
    w = wire_levels(ROW2, gens)
    grid = SimulationGrid(20e3, 10.0)
    for state, u2, i2 in [(BitState.HL, w.u_hl ** 2, w.i_hl ** 2), (BitState.LH, w.u_lh ** 2, w.i_lh ** 2)]:
        bp = simulate_bit_period(state, ROW2, gens, CableModel(2000.0), grid, seed=9)
        assert mean_square(bp.wire_voltage) == pytest.approx(u2, rel=0.03)
        assert mean_square(bp.wire_current) == pytest.approx(i2, rel=0.03)


def test_classical_voltage_matches_analytic():
    gens = vmg_solve(CLASSICAL, 1.0, 1000.0)
    grid = SimulationGrid(20e3, 20.0)
    bp = simulate_bit_period(BitState.HL, CLASSICAL, gens, REFERENCE_CABLE, grid, seed=10, channels=("voltage",))
    expected = filtered_levels(CLASSICAL, gens, REFERENCE_CABLE)[BitState.HL].voltage
    assert mean_square(bp.wire_voltage) == pytest.approx(expected, rel=0.03)
    assert bp.wire_current is None


def test_statistical_consistency_over_seeds():
    b, duration = 1000.0, 0.5
    gens = vmg_solve(ROW2, 1.0, b)
    grid = SimulationGrid(20e3, duration)
    r_p = parallel(ROW2.r_ha, ROW2.r_lb)
    f_cr = voltage_crossover(r_p, REFERENCE_CABLE)
    expected = filtered_levels(ROW2, gens, REFERENCE_CABLE)[BitState.HL].voltage
    assert expected == pytest.approx(band_limited_ms(wire_levels(ROW2, gens).u_hl ** 2 / b, f_cr, b), rel=1e-12)
    values = [mean_square(simulate_bit_period(BitState.HL, ROW2, gens, REFERENCE_CABLE, grid, seed=s,
                                              channels=("voltage",)).wire_voltage)
              for s in range(20)]
    se_single = expected / math.sqrt(effective_bandwidth(f_cr, b) * duration)
    assert np.std(values, ddof=1) == pytest.approx(se_single, rel=0.5)
    assert abs(np.mean(values) - expected) <= 3 * se_single / math.sqrt(len(values))


def test_filtering_lowers_levels():
    b = 1000.0
    gens = vmg_solve(ROW2, 1.0, b)
    w = wire_levels(ROW2, gens)
    grid = SimulationGrid(40e3, 1.0)
    # current crossover brought near B so the reduction beats the fluctuation
    slow = CableModel(2000.0, 100e-12, 0.7e-3)
    for seed in range(20):
        for state, u2, i2 in [(BitState.HL, w.u_hl ** 2, w.i_hl ** 2), (BitState.LH, w.u_lh ** 2, w.i_lh ** 2)]:
            v = simulate_bit_period(state, ROW2, gens, REFERENCE_CABLE, grid, seed, channels=("voltage",))
            c = simulate_bit_period(state, ROW2, gens, slow, grid, seed, channels=("current",))
            assert mean_square(v.wire_voltage) < u2
            assert mean_square(c.wire_current) < i2


def test_hh_level_distinct():
    gens = vmg_solve(CLASSICAL, 1.0, 1000.0)
    grid = SimulationGrid(20e3, 5.0)
    levels = {s: mean_square(simulate_bit_period(s, CLASSICAL, gens, CableModel(1.0), grid, seed=3,
                                                 channels=("voltage",)).wire_voltage)
              for s in BitState}
    from kljn.circuit import state_levels
    for s in BitState:
        assert levels[s] == pytest.approx(state_levels(s, CLASSICAL, gens).u_ms, rel=0.03)
    assert levels[BitState.HH] > 2 * levels[BitState.HL]
    assert levels[BitState.LL] < 0.7 * levels[BitState.LH]


def test_simulate_enforces_grid_and_channel():
    gens = vmg_solve(ROW2, 1.0, 1000.0)
    with pytest.raises(GridTooCoarse):
        # current crossover 1.7 MHz in play
        simulate_bit_period(BitState.HL, ROW2, gens, REFERENCE_CABLE, SimulationGrid(20e3, 0.1), seed=0)
    with pytest.raises(InvalidInput):
        simulate_bit_period(BitState.HL, ROW2, gens, REFERENCE_CABLE, SimulationGrid(20e3, 0.1), 0,
                            channels=("magnetic",))


def test_simulate_deterministic():
    gens = vmg_solve(ROW2, 1.0, 1000.0)
    grid = SimulationGrid(20e3, 0.1)
    a = simulate_bit_period(BitState.LH, ROW2, gens, REFERENCE_CABLE, grid, 77, channels=("voltage",))
    b = simulate_bit_period(BitState.LH, ROW2, gens, REFERENCE_CABLE, grid, 77, channels=("voltage",))
    assert np.array_equal(a.wire_voltage.samples, b.wire_voltage.samples)


# ---------------------------------------------------------------- export


def test_dump_round_trip(tmp_path):
    w = synth_band_limited_gaussian(0.3, 100.0, SimulationGrid(4000.0, 0.25), seed=8)
    raw, sidecar = dump_waveform(w, tmp_path / "wave.f64", seed=8)
    assert raw.stat().st_size == 8 * len(w)
    back, meta = load_waveform(raw)
    assert np.array_equal(back.samples, w.samples)
    assert meta["seed"] == 8 and meta["sample_rate_hz"] == 4000.0 and meta["units"] == "V"


def test_psd_csv(tmp_path):
    w = synth_band_limited_gaussian(1.0, 100.0, SimulationGrid(4000.0, 1.0), seed=8)
    sp = welch_psd(w, segment_len=256)
    write_psd_csv(sp, tmp_path / "psd.csv")
    lines = (tmp_path / "psd.csv").read_text().splitlines()
    assert lines[0] == "frequency,psd"
    assert len(lines) == 1 + sp.frequencies.size
