"""Command-line entry point: ``emitterlab <command> ...``.

Exit codes: 0 success, 2 usage or domain error, 3 malformed input,
4 fit non-convergence, 5 infeasible analysis.
"""

import argparse
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis, io, lindblad, photon_mc, tls
from .data import Measured, Spectrum
from .errors import ConvergenceError, EmitterLabError, FormatError, ResolutionError
from .fitting import fit as run_fit
from .models import ModelSpec, eval_model
from .plotting import emit_svg_plot

DEFAULTS = {
    "seed": 0, "coefficient": 1, "n_draws": 10_000, "resolution_nm": 0.02,
    "angle_convention": None, "bin_ps": 100, "range_ps": None, "rep_ps": 12_500,
    "n_pulses": 100_000, "p_emit": 0.3, "p_double": 0.0, "t1_ns": 1.64,
    "irf_mhz": 0.0, "irf_sigma": 0.0, "t1_sigma": 0.0, "background": True,
    "gamma_tl_mhz": None, "window_lo": None, "window_hi": None,
}

# config-file key -> argparse dest
CONFIG_DEST = {
    "seed": "seed", "irf_fwhm_mhz": "irf_mhz", "irf_sigma_mhz": "irf_sigma",
    "coefficient": "coefficient", "n_draws": "n_draws", "resolution_nm": "resolution_nm",
    "window_lo_nm": "window_lo", "window_hi_nm": "window_hi",
    "angle_convention": "angle_convention", "bin_width_ps": "bin_ps", "range_ps": "range_ps",
    "rep_period_ps": "rep_ps", "n_pulses": "n_pulses", "p_emit": "p_emit",
    "p_double": "p_double", "t1_ns": "t1_ns", "t1_sigma_ns": "t1_sigma",
    "background_mode": "background", "gamma_tl_mhz": "gamma_tl_mhz",
}


@dataclass
class Outcome:
    """What one analysis produced: report fields, an optional plot, a summary line."""
    command: str
    inputs: list
    parameters: dict
    summary: str
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    plot: tuple | None = None       # (datasets, style, xlabel, ylabel, title)
    main: str | None = None         # parameter summarised by batch population reports


# ---------------------------------------------------------------- options


def _resolve(args):
    """Flags beat the config file, which beats EMITTERLAB_SEED and the defaults."""
    config = io.read_config(args.config) if getattr(args, "config", None) else io.Config()
    for key, value in config.set().items():
        dest = CONFIG_DEST[key]
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, value)
    if getattr(args, "seed", None) is None:
        env = os.environ.get("EMITTERLAB_SEED")
        if env is not None:
            try:
                args.seed = int(env)
            except ValueError:
                raise FormatError(f"EMITTERLAB_SEED is not an integer: {env!r}") from None
    for dest, value in DEFAULTS.items():
        if hasattr(args, dest) and getattr(args, dest) is None:
            setattr(args, dest, value)
    return args


def _window(args):
    if args.window_lo is None and args.window_hi is None:
        return None
    lo = -math.inf if args.window_lo is None else args.window_lo
    hi = math.inf if args.window_hi is None else args.window_hi
    return (lo, hi)


def _m(value):
    value = Measured(*value) if not isinstance(value, Measured) else value
    return value.value, value.sigma


def _now():
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def _write_outcome(outcome, args, argv, report_path, svg_path):
    doc = io.make_report(outcome.command, argv, args.seed, outcome.inputs,
                         outcome.parameters, outcome.converged, outcome.diagnostics,
                         outcome.notes, _now())
    if report_path:
        io.write_report(doc, report_path)
    if svg_path and outcome.plot:
        emit_svg_plot(*outcome.plot[:2], svg_path, *outcome.plot[2:])
    print(outcome.summary)
    return doc


def _failure_outcome(command, path, exc):
    diag = {"error": str(exc), "exit_code": exc.exit_code}
    if isinstance(exc, ConvergenceError):
        diag.update(exc.details)
    return Outcome(command, [path] if Path(path).is_file() else [], {},
                   f"{path}: {type(exc).__name__}: {exc}", False, diag)


# ---------------------------------------------------------------- simulate


def cmd_simulate_spectrum(args, argv):
    params = tls.EmitterParams.from_linewidths(args.t1_ns, args.dephasing_mhz,
                                               p_sat=args.psat_uw, n_exp=args.n)
    pump = tls.PumpSetting(args.power_uw)
    g2 = tls.gamma2(params, pump)
    fwhm = g2 / math.pi / tls.MHZ
    half_span = args.span_fwhm * fwhm
    detuning = np.linspace(-half_span, half_span, args.points)
    omega = 2 * math.pi * tls.MHZ * detuning
    analytic = tls.emission_spectrum(params, pump, omega)
    hwhm = 0.5 * fwhm
    shape = hwhm**2 / (detuning**2 + hwhm**2)
    meta = {"t1_ns": repr(args.t1_ns), "dephasing_mhz": repr(args.dephasing_mhz),
            "power_uW": repr(args.power_uw), "psat_uW": repr(args.psat_uw),
            "n": repr(args.n), "fwhm_mhz": repr(fwhm), "rho_ee": analytic.metadata["rho_ee"]}
    spectrum = Spectrum(np.round(detuning, 6), args.peak_counts * shape, axis_unit="MHz",
                        metadata=meta)
    io.write_spectrum(spectrum, args.out)
    if args.svg:
        emit_svg_plot([("lineshape", spectrum.axis, spectrum.counts)], "line", args.svg,
                      "detuning (MHz)", "counts")
    if args.report:
        doc = io.make_report("simulate spectrum", argv, args.seed, [args.out],
                             {"fwhm": (fwhm, 0.0, "MHz"),
                              "rho_ee": (float(analytic.metadata["rho_ee"]), 0.0, "")},
                             True, {}, [], _now())
        io.write_report(doc, args.report)
    print(f"FWHM = {fwhm:.1f} MHz")
    return 0


def _stream_config(args):
    if args.kind in ("hbt", "blinking"):
        base = photon_mc.PulseTrainConfig(
            rep_period=args.rep_ps, n_pulses=args.n_pulses, p_emit=args.p_emit,
            p_double=args.p_double, t1=args.t1_ns, detector_efficiency=args.efficiency,
            dark_rate=args.dark_rate, jitter_sigma=args.jitter_ps, seed=args.seed)
        if args.kind == "hbt":
            return photon_mc.simulate_hbt(base)
        return photon_mc.simulate_blinking(
            photon_mc.BlinkingConfig(args.on_ns, args.off_ns, base))
    return photon_mc.simulate_cascade(photon_mc.CascadeConfig(
        rep_period=args.rep_ps, n_pulses=args.n_pulses, p_xx=args.p_xx,
        p_x_only=args.p_x_only, tau_xx=args.tau_xx_ns, tau_x=args.tau_x_ns,
        efficiencies=args.efficiency, seed=args.seed))


def cmd_simulate_stream(args, argv):
    stream = _stream_config(args)
    io.write_timetags(stream, args.out, args.format)
    digest = io.file_digest(args.out)
    counts = ", ".join(f"ch{i}={len(c)}" for i, c in enumerate(stream.channels))
    print(f"{args.kind} stream: {counts}; sha256 {digest[:16]}")
    return 0


def cmd_correlate(args, argv):
    stream = io.read_timetags(args.input)
    span = args.range_ps if args.range_ps is not None else 16 * args.rep_ps
    hist = photon_mc.correlate(stream, args.chan_a, args.chan_b, args.bin_ps, span)
    io.write_histogram(hist, args.out)
    if args.svg:
        emit_svg_plot([("coincidences", hist.centers / 1000.0, hist.counts)], "histogram",
                      args.svg, "delay (ns)", "coincidences")
    print(f"{int(hist.counts.sum())} coincidences in {len(hist.counts)} bins "
          f"of {hist.bin_width} ps")
    return 0


# ---------------------------------------------------------------- fit analyses


def fit_peak_file(path, args):
    spectrum = io.read_spectrum(path)
    result = analysis.fit_peak(spectrum, _window(args))
    unit = spectrum.axis_unit
    params = {"center": (*_m(result.value("x0")), unit),
              "fwhm": (*_m(result.value("fwhm")), unit),
              "area": (*_m(result.value("area")), f"counts*{unit}"),
              "baseline": (*_m(result.value("baseline")), "counts")}
    model = eval_model("lorentzian", result.params, spectrum.axis)
    plot = ([("data", spectrum.axis, spectrum.counts), ("fit", spectrum.axis, model)],
            "line", unit, "counts", Path(path).name)
    fwhm = result.value("fwhm")
    return Outcome("fit peak", [path], params,
                   f"{Path(path).name}: FWHM = {fwhm.value:.6g} ± {fwhm.sigma:.2g} {unit}",
                   result.converged, {"reduced_chi2": result.reduced_chi2,
                                      "n_iter": result.n_iter}, plot=plot, main="fwhm")


def fit_fss_file(path, args):
    series = io.read_manifest(path)
    if args.angle_convention:
        series.angle_convention = args.angle_convention
    window = _window(args)
    notes = []
    if args.method == "single":
        result = analysis.extract_fss_single_peak(series, window)
    elif args.method == "double":
        result = analysis.extract_fss_double_peak(series, window, args.resolution_nm)
    else:
        try:
            result = analysis.extract_fss_double_peak(series, window, args.resolution_nm)
        except ResolutionError as exc:
            notes.append(f"double-peak method not applicable ({exc}); "
                         "used the single-peak sinusoid")
            result = analysis.extract_fss_single_peak(series, window)
    fss = result.fss_ueV
    params = {"fss": (fss.value, fss.sigma, "ueV"), "phase": (result.phase, None, "deg")}
    plot = None
    if result.method == "single_peak_sinusoid":
        energy = analysis.wavelength_to_ueV(result.centers)
        energy = energy - energy.mean()
        plot = ([("centre energy", result.angles, energy)], "scatter", "angle (deg)",
                "centre energy offset (ueV)", Path(path).name)
    return Outcome("fit fss", [path], params,
                   f"{Path(path).name}: FSS = {fss.value:.3f} ± {fss.sigma:.3f} ueV "
                   f"({result.method})", True,
                   {"method": result.method, "angle_convention": result.angle_convention,
                    "angles_used": list(result.angles)}, notes, plot, "fss")


def _read_saturation_input(path):
    lines = [t for t in io._lines(path) if t.strip() and not t.startswith("#")]
    if lines and "=" in lines[0]:
        pairs = []
        for number, text in enumerate(io._lines(path), start=1):
            if not text.strip() or text.startswith("#"):
                continue
            if "=" not in text:
                raise FormatError("expected power_uW=path", line=number, path=str(path))
            key, value = (part.strip() for part in text.split("=", 1))
            target = Path(path).parent / value
            if not target.is_file():
                raise FormatError(f"spectrum file not found: {value}", line=number,
                                  path=str(path))
            pairs.append((io._parse_float(key, str(path), number), io.read_spectrum(target)))
        return pairs, None
    return None, io.read_series(path)


def fit_saturation_file(path, args):
    pairs, series = _read_saturation_input(path)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if pairs is not None:
            result = analysis.saturation_analysis(pairs, _window(args), args.resolution_nm)
            powers, values, fit = result.powers, result.intensities, result.fit
            outs = (result.p_sat, result.n, result.i_sat, result.background)
            warn = result.extrapolation_warning
        else:
            order = np.argsort(series.x)
            powers, values = series.x[order], series.y[order]
            init = {"i_sat": 1.1 * values.max(), "p_sat": float(np.median(powers)),
                    "n": 1.0, "c": 0.0}
            fit = run_fit("saturation", series, init)
            outs = tuple(fit.value(k) for k in ("p_sat", "n", "i_sat", "c"))
            warn = bool(np.all(powers < 0.3 * fit.params["p_sat"]))
    notes += [str(w.message) for w in caught]
    if warn and not notes:
        notes.append("all powers lie below 0.3 P_sat; P_sat is an extrapolation")
    p_sat, n, i_sat, c = outs
    params = {"p_sat": (*_m(p_sat), "uW"), "n": (*_m(n), ""), "i_sat": (*_m(i_sat), "counts"),
              "background": (*_m(c), "counts")}
    grid = np.geomspace(max(powers.min(), 1e-9), powers.max(), 200)
    curve = eval_model("saturation", fit.params, grid)
    plot = ([("data", powers, values), ("fit", grid, curve)], "scatter", "power (uW)",
            "intensity (counts)", Path(path).name)
    return Outcome("fit saturation", [path], params,
                   f"{Path(path).name}: P_sat = {p_sat.value:.4g} ± {p_sat.sigma:.2g} uW, "
                   f"n = {n.value:.3g} ± {n.sigma:.2g}", fit.converged,
                   {"reduced_chi2": fit.reduced_chi2, "extrapolation_warning": warn},
                   notes, plot, "p_sat")


def fit_lifetime_file(path, args):
    series = io.read_series(path)
    result = analysis.lifetime_fit(series, args.model)
    if args.model == "mono":
        params = {"tau": (*_m(result.value("tau")), "ns"), "amplitude": (*_m(result.value("a")), "counts"),
                  "background": (*_m(result.value("b")), "counts")}
        tau = result.value("tau")
    else:
        params = {"tau1": (*_m(result.value("tau1")), "ns"),
                  "tau2": (*_m(result.value("tau2")), "ns"),
                  "amplitude1": (*_m(result.value("a1")), "counts"),
                  "amplitude2": (*_m(result.value("a2")), "counts"),
                  "background": (*_m(result.value("b")), "counts")}
        tau = result.value("tau1")
    i = int(np.argmax(series.y))
    t = series.x[i:] - series.x[i]
    spec = "mono_exp" if args.model == "mono" else "bi_exp"
    model = eval_model(spec, result.params, t)
    plot = ([("data", t, np.maximum(series.y[i:], 0.5)), ("fit", t, model)], "log_y",
            "time (ns)", "counts", Path(path).name)
    return Outcome("fit lifetime", [path], params,
                   f"{Path(path).name}: tau = {tau.value:.4g} ± {tau.sigma:.2g} ns",
                   result.converged, {"reduced_chi2": result.reduced_chi2,
                                      "model": args.model}, plot=plot,
                   main="tau" if args.model == "mono" else "tau1")


def fit_g2_file(path, args):
    hist = io.read_histogram(path)
    summary = analysis.purity_from_histogram(hist, args.t1_ns, args.rep_ps, args.background)
    fit = summary.fit
    params = {"g2_zero": (*_m(summary.g2_zero), ""),
              "c0": (*_m(fit.value("c0")), "counts"), "c1": (*_m(fit.value("c1")), "counts"),
              "cb": (*_m(fit.value("cb")), "counts"), "t1": (*_m(summary.t1_ns), "ns")}
    if summary.g2_zero_bg_corrected is not None:
        params["g2_zero_bg_corrected"] = (*_m(summary.g2_zero_bg_corrected), "")
        params["c0_bg_corrected"] = (*_m(summary.fit_corrected.value("c0")), "counts")
        params["c1_bg_corrected"] = (*_m(summary.fit_corrected.value("c1")), "counts")
    model = eval_model(ModelSpec("g2_train", fixed={"tau_rep": float(args.rep_ps)}),
                       fit.params, hist.centers)
    plot = ([("data", hist.centers / 1000, hist.counts), ("fit", hist.centers / 1000, model)],
            "histogram", "delay (ns)", "coincidences", Path(path).name)
    g2 = summary.g2_zero
    return Outcome("fit g2", [path], params,
                   f"{Path(path).name}: g2(0) = {g2.value:.4f} ± {g2.sigma:.4f}",
                   fit.converged, {"reduced_chi2": fit.reduced_chi2, "n_iter": fit.n_iter},
                   plot=plot, main="g2_zero")


def fit_gamma_file(path, args):
    values = io.read_values(path)
    report = analysis.linewidth_population(values, args.gamma_tl_mhz)
    g = report.gamma
    params = {"mean": (g.mean, None, "MHz"), "sd": (g.sd, None, "MHz"),
              "shape": (g.shape, None, ""), "scale": (g.scale, None, "MHz"),
              "minimum": (report.minimum, None, "MHz")}
    for band, count in report.band_counts.items():
        params[f"within_{band}_gamma_tl"] = (count, None, "count")
    bands = ", ".join(f"{c} within {b} Gamma_TL" for b, c in
                      sorted(report.band_counts.items(), reverse=True))
    counts, edges = np.histogram(values, bins=min(30, max(5, len(values) // 3)))
    plot = ([("values", 0.5 * (edges[1:] + edges[:-1]), counts)], "histogram",
            "linewidth (MHz)", "count", Path(path).name)
    return Outcome("fit gamma-hist", [path], params,
                   f"{Path(path).name}: mean = {g.mean:.1f} MHz, sd = {g.sd:.1f} MHz"
                   + (f"; {bands}" if bands else ""), True,
                   {"count": report.count, "method": g.method}, plot=plot, main="mean")


FIT_HANDLERS = {"peak": fit_peak_file, "fss": fit_fss_file, "saturation": fit_saturation_file,
                "lifetime": fit_lifetime_file, "g2": fit_g2_file,
                "gamma-hist": fit_gamma_file}
FIT_SUFFIXES = {"fss": (".manifest",), "g2": (".txt", ".hist", ".tsv"),
                "peak": (".txt", ".tsv", ".spe"), "saturation": (".txt", ".tsv", ".sat"),
                "lifetime": (".txt", ".tsv"), "gamma-hist": (".txt", ".tsv")}


def _run_one(handler, path, args):
    try:
        return handler(str(path), args), None
    except EmitterLabError as exc:
        return None, exc


def cmd_fit(args, argv):
    handler = FIT_HANDLERS[args.what]
    target = Path(args.input)
    if not target.is_dir():
        outcome, exc = _run_one(handler, target, args)
        report = args.report or target.parent / f"{target.stem}.report.json"
        if exc is not None:
            if isinstance(exc, ConvergenceError):
                _write_outcome(_failure_outcome(f"fit {args.what}", target, exc), args, argv,
                               report, None)
            raise exc
        if not outcome.converged:
            outcome.diagnostics["error"] = "fit did not converge"
            _write_outcome(outcome, args, argv, report, args.svg)
            return ConvergenceError.exit_code
        _write_outcome(outcome, args, argv, report, args.svg)
        return 0
    return _batch(handler, target, args, argv)


def _batch(handler, directory, args, argv):
    suffixes = FIT_SUFFIXES[args.what]
    files = sorted(p for p in directory.iterdir()
                   if p.is_file() and p.suffix in suffixes and not p.name.endswith(".json"))
    if not files:
        raise FormatError(f"no input files ({', '.join(suffixes)}) in {directory}")
    out_dir = Path(args.out_dir) if args.out_dir else directory
    out_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(lambda p: _run_one(handler, p, args), files))
    exit_code = 0
    population = {}
    failures = []
    for path, (outcome, exc) in zip(files, results):
        if exc is not None:
            outcome = _failure_outcome(f"fit {args.what}", path, exc)
            exit_code = exit_code or exc.exit_code
            failures.append(path.name)
        svg = out_dir / f"{path.stem}.svg" if args.svg else None
        _write_outcome(outcome, args, argv, out_dir / f"{path.stem}.report.json", svg)
        if outcome.main and outcome.main in outcome.parameters:
            value, sigma, unit = outcome.parameters[outcome.main]
            population[f"{path.stem}:{outcome.main}"] = (value, sigma, unit)
    values = [v for v, _, _ in population.values() if v is not None]
    notes, diag = [], {"files": [p.name for p in files], "failed": failures}
    if len(values) >= 3 and min(values) > 0 and np.ptp(values) > 0:
        rep = analysis.linewidth_population(values, None)
        diag.update(population_mean=rep.mean, population_sd=rep.sd,
                    gamma_shape=rep.gamma.shape, gamma_scale=rep.gamma.scale)
    summary = Outcome(f"fit {args.what}", files, population,
                      f"population: {len(files) - len(failures)}/{len(files)} analysed",
                      not failures, diag, notes)
    _write_outcome(summary, args, argv, out_dir / "population.report.json", None)
    return exit_code


# ---------------------------------------------------------------- linewidth


def cmd_linewidth_extrapolate(args, argv):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rec = analysis.extrapolate_linewidth(
            (args.raw_mhz, args.raw_sigma), (args.irf_mhz, args.irf_sigma),
            (args.p_over_psat, args.p_over_psat_sigma), (args.n, args.n_sigma),
            (args.t1_ns, args.t1_sigma), args.coefficient, args.n_draws, args.seed)
    closure = rec.closure_error()
    notes = [str(w.message) for w in caught]
    notes.append(f"closure: zero_power - transform_limit - dephasing = {closure:.3g} MHz "
                 f"({'pass' if abs(closure) <= 0.1 else 'FAIL'})")
    other = 2 if args.coefficient == 1 else 1
    try:
        alt = tls.dephasing_from_measurement(args.raw_mhz, args.irf_mhz, args.t1_ns,
                                             args.p_over_psat, other, n_exp=args.n)
        notes.append(f"power-broadening coefficient {other} would give dephasing "
                     f"{alt.fwhm_linear:.1f} MHz; reported values use coefficient "
                     f"{args.coefficient}")
    except (EmitterLabError, RuntimeWarning):
        pass
    tl = tls.transform_limit(args.t1_ns, args.t1_sigma)
    params = {"raw_fwhm": (*_m(rec.raw_fwhm), "MHz"), "irf_fwhm": (*_m(rec.irf_fwhm), "MHz"),
              "corrected_fwhm": (*_m(rec.corrected_fwhm), "MHz"),
              "transform_limit": (tl.fwhm_linear, tl.sigma, "MHz"),
              "dephasing": (*_m(rec.dephasing_mhz), "MHz"),
              "zero_power_fwhm": (*_m(rec.zero_power_mhz), "MHz"),
              "tl_ratio": (*_m(rec.tl_ratio), "")}
    outcome = Outcome("linewidth extrapolate", [], params,
                      f"corrected {rec.corrected_fwhm.value:.1f} MHz, dephasing "
                      f"{rec.dephasing_mhz.value:.1f} ± {rec.dephasing_mhz.sigma:.0f} MHz, "
                      f"zero-power {rec.zero_power_mhz.value:.1f} ± "
                      f"{rec.zero_power_mhz.sigma:.0f} MHz, ratio "
                      f"{rec.tl_ratio.value:.2f} ± {rec.tl_ratio.sigma:.2f}",
                      True, {"closure_mhz": closure, "closure_pass": abs(closure) <= 0.1,
                             "coefficient": args.coefficient, "n_draws": args.n_draws,
                             "dephasing_clamped": rec.dephasing_clamped}, notes)
    _write_outcome(outcome, args, argv, args.report, None)
    return 0


# ---------------------------------------------------------------- sweep


def cmd_sweep(args, argv):
    """Closed-form against master-equation spectra over a parameter grid."""
    rows = []
    for t1 in args.t1_list:
        for dephasing in args.dephasing_list:
            for ratio in args.ratio_list:
                params = tls.EmitterParams.from_linewidths(t1, dephasing, p_sat=1.0, n_exp=1.0)
                cmp = lindblad.compare_with_analytic(params, tls.PumpSetting(ratio))
                rows.append((t1, dephasing, ratio, cmp.fwhm_analytic, cmp.fwhm_numeric,
                             cmp.fwhm_ratio - 1.0, cmp.integral_ratio))
    lines = ["# t1_ns\tdephasing_mhz\tp_over_psat\tfwhm_analytic_mhz\tfwhm_numeric_mhz"
             "\tfwhm_rel_error\tintegral_ratio"]
    lines += ["\t".join(io._fmt(v) for v in row) for row in rows]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    worst = max(abs(r[5]) for r in rows)
    if args.svg:
        emit_svg_plot([("numeric / analytic - 1", np.arange(len(rows)),
                        [r[5] for r in rows])], "scatter", args.svg, "grid point",
                      "relative FWHM error")
    print(f"{len(rows)} points; worst FWHM deviation {worst:.2e}; integral ratio "
          f"{min(r[6] for r in rows):.4f}..{max(r[6] for r in rows):.4f}")
    return 0


# ---------------------------------------------------------------- parser


def _common():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="random seed (default: EMITTERLAB_SEED or 0)")
    common.add_argument("--config", default=None, help="key = value configuration file")
    return common


def _fit_common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("input", help="input file, or a directory for batch mode")
    p.add_argument("--report", default=None,
                   help="report path (default: <input stem>.report.json beside the input)")
    p.add_argument("--svg", default=None, help="SVG plot path (batch: any value enables)")
    p.add_argument("--out-dir", default=None, help="batch output directory")
    p.add_argument("--jobs", type=int, default=4, help="batch worker threads")
    return p


def _window_flags(p):
    p.add_argument("--window-lo-nm", dest="window_lo", type=float, default=None,
                   help="fit window lower edge (axis units)")
    p.add_argument("--window-hi-nm", dest="window_hi", type=float, default=None,
                   help="fit window upper edge (axis units)")


def build_parser():
    common = _common()
    parser = argparse.ArgumentParser(prog="emitterlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate synthetic data")
    sim_sub = sim.add_subparsers(dest="what", required=True)
    sp = sim_sub.add_parser("spectrum", parents=[common],
                            help="thermal-bath emission lineshape (MHz detuning axis)")
    sp.add_argument("--t1-ns", "--t1", dest="t1_ns", type=float, required=True,
                    help="radiative lifetime (ns)")
    sp.add_argument("--dephasing-mhz", type=float, required=True,
                    help="pure dephasing Gamma_dp/2pi (MHz)")
    sp.add_argument("--power-uw", "--power", dest="power_uw", type=float, required=True,
                    help="excitation power (uW)")
    sp.add_argument("--psat-uw", "--psat", dest="psat_uw", type=float, default=1.0,
                    help="saturation power (uW)")
    sp.add_argument("--n", type=float, default=1.0, help="power-law exponent")
    sp.add_argument("--peak-counts", type=float, default=1e4, help="peak height of the output")
    sp.add_argument("--span-fwhm", type=float, default=10.0, help="half span in FWHM units")
    sp.add_argument("--points", type=int, default=2001, help="number of axis points")
    sp.add_argument("--out", required=True, help="spectrum file to write")
    sp.add_argument("--svg", default=None, help="optional SVG plot")
    sp.add_argument("--report", default=None, help="optional report file")
    sp.set_defaults(func=cmd_simulate_spectrum)

    st = sim_sub.add_parser("stream", parents=[common], help="photon click stream")
    st.add_argument("--kind", choices=("hbt", "cascade", "blinking"), required=True)
    st.add_argument("--out", required=True, help="timetag file to write")
    st.add_argument("--format", choices=("binary", "text"), default="binary")
    st.add_argument("--n-pulses", dest="n_pulses", type=int, default=None)
    st.add_argument("--rep-ps", dest="rep_ps", type=int, default=None, help="pulse period (ps)")
    st.add_argument("--p-emit", dest="p_emit", type=float, default=None)
    st.add_argument("--p-double", dest="p_double", type=float, default=None)
    st.add_argument("--t1-ns", dest="t1_ns", type=float, default=None)
    st.add_argument("--efficiency", type=float, nargs=2, default=(1.0, 1.0),
                    help="detector efficiencies of channels 0 and 1")
    st.add_argument("--dark-rate", type=float, default=0.0, help="dark counts per second")
    st.add_argument("--jitter-ps", type=float, default=0.0)
    st.add_argument("--p-xx", type=float, default=0.2)
    st.add_argument("--p-x-only", type=float, default=0.1)
    st.add_argument("--tau-xx-ns", type=float, default=0.54)
    st.add_argument("--tau-x-ns", type=float, default=1.59)
    st.add_argument("--on-ns", type=float, default=250.0, help="mean ON dwell (blinking)")
    st.add_argument("--off-ns", type=float, default=250.0, help="mean OFF dwell (blinking)")
    st.set_defaults(func=cmd_simulate_stream)

    co = sub.add_parser("correlate", parents=[common], help="coincidence histogram")
    co.add_argument("input", help="timetag file (binary or text)")
    co.add_argument("--bin-ps", dest="bin_ps", type=int, default=None)
    co.add_argument("--range-ps", dest="range_ps", type=int, default=None,
                    help="histogram half range (default 16 pulse periods)")
    co.add_argument("--rep-ps", dest="rep_ps", type=int, default=None)
    co.add_argument("--chan-a", type=int, default=0, help="start channel")
    co.add_argument("--chan-b", type=int, default=1, help="stop channel")
    co.add_argument("--out", required=True, help="histogram file to write")
    co.add_argument("--svg", default=None)
    co.set_defaults(func=cmd_correlate)

    fit = sub.add_parser("fit", help="fit a measurement and write a report")
    fit_sub = fit.add_subparsers(dest="what", required=True)
    parents = [common, _fit_common()]
    fp = fit_sub.add_parser("peak", parents=parents, help="single Lorentzian")
    _window_flags(fp)
    ff = fit_sub.add_parser("fss", parents=parents, help="fine-structure splitting")
    _window_flags(ff)
    ff.add_argument("--method", choices=("auto", "single", "double"), default="auto")
    ff.add_argument("--angle-convention", dest="angle_convention", default=None,
                    choices=("analyzer", "half_wave_plate"),
                    help="override the manifest's convention")
    ff.add_argument("--resolution-nm", dest="resolution_nm", type=float, default=None)
    fs = fit_sub.add_parser("saturation", parents=parents,
                            help="power series (power_uW=spectrum manifest or table)")
    _window_flags(fs)
    fs.add_argument("--resolution-nm", dest="resolution_nm", type=float, default=None)
    fl = fit_sub.add_parser("lifetime", parents=parents, help="exponential decay")
    fl.add_argument("--model", choices=("mono", "bi"), default="mono")
    fg = fit_sub.add_parser("g2", parents=parents, help="pulsed g2 purity")
    fg.add_argument("--t1-ns", dest="t1_ns", type=float, default=None,
                    help="initial lifetime guess (ns)")
    fg.add_argument("--rep-ps", dest="rep_ps", type=int, default=None)
    fg.add_argument("--no-background", dest="background", action="store_const", const=False,
                    default=None, help="skip the background-corrected refit")
    fh = fit_sub.add_parser("gamma-hist", parents=parents, help="Gamma fit of linewidths")
    fh.add_argument("--gamma-tl-mhz", dest="gamma_tl_mhz", type=float, default=None,
                    help="transform limit for band counts (MHz)")
    for p in (fp, ff, fs, fl, fg, fh):
        p.set_defaults(func=cmd_fit)

    lw = sub.add_parser("linewidth", help="linewidth pipelines")
    lw_sub = lw.add_subparsers(dest="what", required=True)
    ex = lw_sub.add_parser("extrapolate", parents=[common],
                           help="IRF correction and zero-power extrapolation")
    ex.add_argument("--raw-mhz", type=float, required=True)
    ex.add_argument("--raw-sigma", type=float, default=0.0)
    ex.add_argument("--irf-mhz", dest="irf_mhz", type=float, default=None)
    ex.add_argument("--irf-sigma", dest="irf_sigma", type=float, default=None)
    ex.add_argument("--p-over-psat", type=float, required=True)
    ex.add_argument("--p-over-psat-sigma", type=float, default=0.0)
    ex.add_argument("--n", type=float, required=True, help="power-law exponent")
    ex.add_argument("--n-sigma", type=float, default=0.0)
    ex.add_argument("--t1-ns", dest="t1_ns", type=float, default=None)
    ex.add_argument("--t1-sigma", dest="t1_sigma", type=float, default=None)
    ex.add_argument("--coefficient", type=int, choices=(1, 2), default=None)
    ex.add_argument("--n-draws", dest="n_draws", type=int, default=None)
    ex.add_argument("--report", default="linewidth.report.json")
    ex.set_defaults(func=cmd_linewidth_extrapolate)

    sw = sub.add_parser("sweep", parents=[common],
                        help="master-equation spectra against the closed form")
    sw.add_argument("--t1-ns", dest="t1_list", type=float, nargs="+", default=[0.5, 1.57, 3.0])
    sw.add_argument("--dephasing-mhz", dest="dephasing_list", type=float, nargs="+",
                    default=[0.0, 300.0, 1500.0])
    sw.add_argument("--p-over-psat", dest="ratio_list", type=float, nargs="+",
                    default=[0.0, 1.0, 4.0])
    sw.add_argument("--out", required=True, help="table to write")
    sw.add_argument("--svg", default=None)
    sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _resolve(args)
        return args.func(args, ["emitterlab", *argv])
    except EmitterLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return FormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
