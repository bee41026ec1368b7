"""Acceptance criteria 1-13, one test each, at their stated tolerances."""

import math
import statistics
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from emitterlab import analysis as an
from emitterlab import io, lindblad as L, photon_mc as mc, synthetic, tls
from emitterlab.data import DataSeries, Measured, Spectrum
from emitterlab.fitting import fit
from emitterlab.models import CATALOG, ModelSpec, eval_model, model_jacobian
from emitterlab.plotting import emit_svg_plot

from test_models_fitting import CASES, REP

GRID = [(t1, dp, r) for t1 in (0.5, 1.57, 3.0) for dp in (0.0, 300.0, 1500.0)
        for r in (0.0, 1.0, 4.0)]


def test_criterion_01_transform_limit():
    """Transform limit 97.05 MHz at 1.64 ns, inside 96 +- 25 MHz, under 1 ms"""
    value = tls.transform_limit(1.64).fwhm_linear
    assert value == pytest.approx(97.05, abs=0.005)
    assert abs(value - 96.0) <= 25.0
    timings = []
    for _ in range(200):
        t = time.perf_counter()
        tls.transform_limit(1.64)
        timings.append(time.perf_counter() - t)
    assert statistics.median(timings) < 1e-3


def test_criterion_02_zero_power_closure():
    """Zero-power width 1596.4 MHz (published 1597 +- 279) and ratio 15.75 (published 15.7 +- 2.7)"""
    width = tls.zero_power_linewidth(1.57, 1495.0).fwhm_linear
    assert width == pytest.approx(1596.4, abs=0.05)
    assert abs(width - 1597.0) <= 1.0
    ratio = tls.tl_ratio(width, 1.57).value
    assert ratio == pytest.approx(15.75, abs=0.005)
    assert abs(ratio - 15.7) <= 2.7


@pytest.mark.parametrize("c0, c1, cb, ratio, published", [
    (5.5, 428.1, 1.1, 0.0128, 0.012), (41.5, 197.4, 8.0, 0.2102, 0.210),
    (19.7, 203.3, 0.0, 0.0969, 0.096)])
def test_criterion_03_purity_arithmetic(c0, c1, cb, ratio, published):
    """Fitted amplitude ratios reproduce the purity table to +-0.001"""
    hist = synthetic.g2_train_histogram(c0, c1, cb, 1640.0)
    res = an.purity_from_histogram(hist, 1.5, 12_500, background_mode=False)
    assert res.g2_zero.value == pytest.approx(ratio, abs=1e-3)
    assert res.g2_zero.value == pytest.approx(published, abs=1e-3)


def test_criterion_04_analytic_numeric_equivalence():
    """Master-equation spectra match the closed form on the 27-point grid, under 60 s"""
    start = time.perf_counter()
    worst_fwhm, worst_int = 0.0, 0.0
    for t1, dp, r in GRID:
        params = tls.EmitterParams.from_linewidths(t1, dp, p_sat=1.0, n_exp=1.0)
        cmp = L.compare_with_analytic(params, tls.PumpSetting(r))
        worst_fwhm = max(worst_fwhm, abs(cmp.fwhm_ratio - 1.0))
        worst_int = max(worst_int, abs(cmp.integral_ratio - 1.0))
    elapsed = time.perf_counter() - start
    assert worst_fwhm < 0.01
    assert worst_int < 0.01
    assert elapsed < 60.0


def test_criterion_05_master_equation_hygiene():
    """Trace and positivity within 1e-9; fourth-order step-halving on 3 parameter sets"""
    inits = [tls.DensityMatrixState.ground(), tls.DensityMatrixState.excited(),
             tls.DensityMatrixState(0.5, 0.5, 0.5 + 0j)]
    for t1, dp, r in GRID:
        params = tls.EmitterParams.from_linewidths(t1, dp, p_sat=1.0, n_exp=1.0,
                                                   omega_x=2e10)
        cfg = L.LindbladConfig.from_params(params, tls.PumpSetting(r))
        for init in inits:
            traj = L.integrate_master(cfg, init)
            assert traj.trace_deviation() < 1e-9
            assert traj.positivity_violation() < 1e-9
    for t1, dp, r in [(0.5, 0.0, 0.0), (1.57, 1500.0, 1.0), (3.0, 300.0, 4.0)]:
        p = tls.EmitterParams.from_linewidths(t1, dp)
        p12, p21 = tls.pump_rates(p, tls.PumpSetting(r))
        fastest = max(p12 + p21, 0.5 * (p12 + p21 + p.gamma_dp)) * tls.NS
        errors = []
        runs = []
        for k in (1, 2, 4):
            cfg = L.LindbladConfig(p12, p21, p.gamma_dp, 0.0, 0.08 / fastest / k,
                                   10 / fastest)
            runs.append(L.integrate_master(cfg, tls.DensityMatrixState(0.9, 0.1, 0.2 + 0.1j))
                        .vectors[::k])
        errors = [np.max(np.abs(runs[0] - runs[1])), np.max(np.abs(runs[1] - runs[2]))]
        order = math.log2(errors[0] / errors[1])
        assert 3.6 < order < 4.4


def _g2_setting(p_double, seed):
    cfg = mc.PulseTrainConfig(rep_period=12_500, n_pulses=1_000_000, p_emit=0.3,
                              p_double=p_double, seed=seed)
    start = time.perf_counter()
    hist = mc.correlate(mc.simulate_hbt(cfg), 0, 1, 100, 16 * cfg.rep_period)
    res = an.purity_from_histogram(hist, 1.0, cfg.rep_period, background_mode=False)
    return res.g2_zero, mc.expected_g2_center(cfg), time.perf_counter() - start


@pytest.mark.parametrize("p_double", [0.0, 0.002, 0.01, 0.05])
def test_criterion_06_monte_carlo_g2_calibration(p_double):
    """Fitted g2(0) from 1e6 simulated pulses matches the enumeration oracle"""
    g2, oracle, elapsed = _g2_setting(p_double, seed=600 + int(1000 * p_double))
    if p_double == 0.0:
        assert oracle == 0.0
        assert abs(g2.value) <= 2 * g2.sigma
    else:
        assert abs(g2.value - oracle) <= 3 * g2.sigma
    assert elapsed < 120.0


def test_criterion_07_cascade_and_blinking():
    """Cascade decay within 10% of tau_X with >= 5 sigma asymmetry; blinking bunching >= 5 sigma"""
    cfg = mc.CascadeConfig(n_pulses=1_000_000, p_xx=0.3, p_x_only=0.1, tau_xx=0.54,
                           tau_x=1.59, seed=7)
    hist = mc.correlate(mc.simulate_cascade(cfg), 0, 1, 50, 4 * cfg.rep_period)
    x, y = hist.centers, hist.counts.astype(float)
    pos = (x > 0) & (x < 0.5 * cfg.rep_period)
    neg = (x < 0) & (x > -0.5 * cfg.rep_period)
    n_pos, n_neg = y[pos].sum(), y[neg].sum()
    assert (n_pos - n_neg) / math.sqrt(n_pos + n_neg) >= 5.0
    window = (x > 0) & (x < 10_000)
    res = an.lifetime_fit(DataSeries(x[window] / 1000.0, y[window]))
    assert res.params["tau"] == pytest.approx(cfg.tau_x, rel=0.10)

    base = mc.PulseTrainConfig(n_pulses=1_000_000, p_emit=0.3, seed=8)
    blink = mc.simulate_blinking(mc.BlinkingConfig(30.0, 30.0, base))
    rep = base.rep_period
    h = mc.correlate(blink, 0, 1, 500, 40 * rep)
    order = np.rint(h.centers / rep)
    in_peak = np.abs(h.centers - order * rep) < 0.4 * rep
    areas = {int(n): h.counts[in_peak & (order == n)].sum() for n in np.unique(order)}
    near = np.array([areas[-1], areas[1]], dtype=float)
    far = np.array([v for n, v in areas.items() if 25 <= abs(n) <= 38], dtype=float)
    diff = near.mean() - far.mean()
    sigma = math.sqrt(near.sum() / near.size**2 + far.sum() / far.size**2)
    assert diff / sigma >= 5.0


def test_criterion_08_fit_round_trips():
    """Every model recovers 200 random truths to 1e-6; Jacobians match differences to 1e-5"""
    for kind, (spec, x, draw) in CASES.items():
        rng = np.random.default_rng(800)
        for _ in range(200):
            truth = draw(rng)
            y = eval_model(spec, truth, x)
            init = {k: v * rng.uniform(0.95, 1.05) for k, v in truth.items()}
            res = fit(spec, DataSeries(x, y, np.sqrt(np.maximum(y, 1.0))), init)
            for name, value in truth.items():
                assert res.params[name] == pytest.approx(value, rel=1e-6, abs=1e-8), kind
        free = ModelSpec(spec.kind, free=tuple(CATALOG[kind].structural))
        for _ in range(10):
            p = draw(rng)
            for name, value in CATALOG[kind].structural.items():
                p[name] = REP if value is None else value
            jac = model_jacobian(free, p, x)
            for name in free.param_names:
                h = 1e-6 * max(abs(p[name]), 1e-3)
                up, dn = dict(p), dict(p)
                up[name] += h
                dn[name] -= h
                fd = (eval_model(free, up, x) - eval_model(free, dn, x)) / (2 * h)
                assert np.max(np.abs(jac[name] - fd)) <= 1e-5 * max(np.max(np.abs(fd)), 1e-12)


def test_criterion_09_pipeline_round_trip():
    """Etalon pipeline recovers injected dephasing to 1e-6 over 50 random sets, closure 0.1 MHz"""
    rng = np.random.default_rng(900)
    for _ in range(50):
        t1, dp = rng.uniform(0.3, 5.0), rng.uniform(0.0, 5000.0)
        ratio, n = rng.uniform(0.0, 3.0), rng.uniform(0.5, 2.5)
        irf, c = rng.uniform(0.0, 300.0), int(rng.choice([1, 2]))
        params = tls.EmitterParams.from_linewidths(t1, dp, p_sat=10.0, n_exp=n)
        raw = tls.measured_linewidth(params, tls.PumpSetting(10.0 * ratio), c).fwhm_linear + irf
        rec = an.extrapolate_linewidth((raw, 0.05 * raw), (irf, 25.0), (ratio, 0.1), (n, 0.05),
                                       (t1, 0.04), coefficient=c)
        assert rec.dephasing_mhz.value == pytest.approx(dp, rel=1e-6)
        assert abs(rec.closure_error()) <= 0.1


FSS_CASES = [
    # (generator FSS, wavelength, FWHM in units of the separation, method, published sigma)
    (74.0, 1544.8, None, "double", 3.0),
    (25.0, 1547.0, 4.0, "single", 4.0),
    (13.9, 1316.0, 4.0, "single", 0.5),
]


@pytest.mark.parametrize("fss, lam, width, method, sigma", FSS_CASES,
                         ids=["74ueV-double", "25ueV-single", "13.9ueV-single"])
def test_criterion_10_fss_recovery(fss, lam, width, method, sigma):
    """FSS recovered within 1 sigma in >= 95% of 100 Poisson realizations"""
    sep = an.energy_wavelength_convert(fss, lam, "to_wavelength")
    fwhm = 0.06 if width is None else width * sep
    hits = 0
    for seed in range(100):
        series = synthetic.polarization_series(fss, lam, fwhm, peak_counts=1e4, seed=seed)
        extract = an.extract_fss_double_peak if method == "double" else an.extract_fss_single_peak
        hits += abs(extract(series).fss_ueV.value - fss) <= sigma
    assert hits >= 95, f"{hits}/100 within {sigma} ueV"


@pytest.mark.parametrize("p_sat, n, tol", [(16.4, 1.09, 0.02), (22.9, 1.82, 0.05)])
def test_criterion_11_saturation_recovery(p_sat, n, tol):
    """Saturation power and exponent recovered within 2% (X*) and 5% (XX)"""
    res = an.saturation_analysis(synthetic.power_series(p_sat, n, seed=11))
    assert res.p_sat.value == pytest.approx(p_sat, rel=tol)
    assert res.n.value == pytest.approx(n, rel=tol)


def test_criterion_12_population_statistics():
    """Gamma mean within 2% on 1e4 draws; band counts 5 within 10 and 2 within 3 Gamma_TL"""
    values = synthetic.gamma_population(1175.0, 648.0, 10_000, seed=12)
    assert an.linewidth_population(values).mean == pytest.approx(1175.0, rel=0.02)
    witness = [250.0, 280.0, 500.0, 700.0, 900.0, 1400.0, 1800.0, 2500.0, 3100.0]
    report = an.linewidth_population(witness, gamma_tl_mhz=96.0)
    assert report.band_counts[10] == 5 and report.band_counts[3] == 2
    line = f"{report.band_counts[10]} within 10 Gamma_TL, {report.band_counts[3]} within 3 Gamma_TL"
    assert line == "5 within 10 Gamma_TL, 2 within 3 Gamma_TL"


def test_criterion_13_formats():
    """Lossless text round-trips, bit-identical timetags and deterministic SVG"""
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        spectrum = synthetic.power_series(16.4, 1.09, seed=1)[3][1]
        io.write_spectrum(spectrum, d / "a.txt")
        io.write_spectrum(io.read_spectrum(d / "a.txt"), d / "b.txt")
        assert (d / "a.txt").read_bytes() == (d / "b.txt").read_bytes()

        stream = mc.simulate_hbt(mc.PulseTrainConfig(n_pulses=100_000, p_double=0.01,
                                                     jitter_sigma=40, dark_rate=1e4, seed=13))
        io.write_timetags(stream, d / "a.ttag")
        back = io.read_timetags(d / "a.ttag")
        io.write_timetags(back, d / "b.ttag")
        assert (d / "a.ttag").read_bytes() == (d / "b.ttag").read_bytes()
        io.write_timetags(stream, d / "t.txt", format="text")
        assert io.read_timetags(d / "t.txt").same_events(back)
        empty = mc.ClickStream([np.zeros(0, np.int64)], 0)
        io.write_timetags(empty, d / "e.ttag")
        assert (d / "e.ttag").stat().st_size == 24

        hist = mc.correlate(stream, 0, 1, 100, 200_000)
        io.write_histogram(hist, d / "h.txt")
        io.write_histogram(io.read_histogram(d / "h.txt"), d / "h2.txt")
        assert (d / "h.txt").read_bytes() == (d / "h2.txt").read_bytes()

        series = synthetic.polarization_series(74.0, 1544.8, 0.06, seed=2, angles=[0, 45, 90])
        io.write_manifest(series, d / "m.manifest")
        again = io.read_manifest(d / "m.manifest")
        assert all(np.array_equal(a.counts, b.counts)
                   for a, b in zip(series.spectra, again.spectra))

        doc = io.make_report("fit g2", ["emitterlab", "fit", "g2", "h.txt"], 3, [d / "h.txt"],
                             {"g2_zero": (0.0128, 0.007, "")}, timestamp="t")
        io.write_report(doc, d / "r.json")
        assert io.read_report(d / "r.json") == doc

        (d / "c.cfg").write_text("irf_fwhm_mhz = 175\nseed = 2\n")
        assert io.read_config(d / "c.cfg").set() == {"irf_fwhm_mhz": 175.0, "seed": 2}

        data = [("counts", hist.centers / 1000, hist.counts)]
        for style in ("line", "scatter", "histogram", "log_y"):
            emit_svg_plot(data, style, d / "1.svg", "delay (ns)", "coincidences")
            emit_svg_plot(data, style, d / "2.svg", "delay (ns)", "coincidences")
            assert (d / "1.svg").read_bytes() == (d / "2.svg").read_bytes()
