"""Synthetic measurements with known ground truth.

Noise uses numpy's PCG64 generator seeded explicitly; these data only feed
tests and experiments, never the simulators in :mod:`photon_mc`.
"""

import math

import numpy as np

from .analysis import PolarizationSeries, energy_wavelength_convert
from .data import DataSeries, Spectrum
from .errors import DomainError
from .models import eval_model


def _rng(seed):
    return np.random.default_rng(seed)


def _noisy(expected, rng):
    return expected if rng is None else rng.poisson(expected).astype(float)


def lorentzian_counts(axis, center, fwhm, peak):
    half = 0.5 * fwhm
    return peak * half**2 / ((np.asarray(axis) - center) ** 2 + half**2)


def wavelength_axis(center, half_span, step):
    n = int(round(2 * half_span / step))
    return np.round(center - half_span + step * np.arange(n + 1), 6)


def polarization_series(fss_ueV, center_nm, fwhm_nm, peak_counts=1e4, angles=None,
                        convention="analyzer", step_nm=0.01, half_span_nm=None,
                        background=0.0, phase_deg=0.0, seed=None):
    """Two orthogonally polarized lines split by ``fss_ueV`` around ``center_nm``.

    The high-energy line follows cos^2 of the analyzer angle (cos^2 of twice
    the plate angle for a half-wave plate); ``peak_counts`` is the height of a
    fully transmitted line. ``seed=None`` gives noiseless spectra.
    """
    if angles is None:
        angles = np.arange(0.0, 180.0, 5.0)
    angles = np.asarray(angles, dtype=float)
    sep = energy_wavelength_convert(fss_ueV, center_nm, "to_wavelength")
    if half_span_nm is None:
        half_span_nm = 6 * fwhm_nm + sep
    axis = wavelength_axis(center_nm, half_span_nm, step_nm)
    k = 1.0 if convention == "analyzer" else 2.0
    rng = None if seed is None else _rng(seed)
    spectra = []
    for theta in angles:
        w = math.cos(math.radians(k * theta - phase_deg)) ** 2
        mean = (w * lorentzian_counts(axis, center_nm - sep / 2, fwhm_nm, peak_counts)
                + (1 - w) * lorentzian_counts(axis, center_nm + sep / 2, fwhm_nm, peak_counts)
                + background)
        spectra.append(Spectrum(axis, _noisy(mean, rng)))
    return PolarizationSeries(angles, spectra, convention)


def power_series(p_sat, n, powers=None, peak_counts=2e4, center_nm=1550.0, fwhm_nm=0.06,
                 step_nm=0.01, background=0.0, seed=None):
    """Spectra whose Lorentzian area follows I_sat s / (1 + s), s = (P/P_sat)^n."""
    if powers is None:
        powers = p_sat * np.geomspace(0.05, 20.0, 14)
    axis = wavelength_axis(center_nm, 8 * fwhm_nm, step_nm)
    rng = None if seed is None else _rng(seed)
    out = []
    for p in np.asarray(powers, dtype=float):
        s = (p / p_sat) ** n
        mean = lorentzian_counts(axis, center_nm, fwhm_nm, peak_counts * s / (1 + s))
        spectrum = Spectrum(axis, _noisy(mean + background, rng),
                            metadata={"power_uW": repr(float(p))})
        out.append((float(p), spectrum))
    return out


def decay_trace(tau, peak_counts=1e5, t_max=None, dt=0.01, tau2=None, fraction2=0.0,
                background=0.0, rise=0.0, seed=None):
    """Exponential decay sampled every ``dt`` ns, Poisson noise if seeded.

    A second component ``fraction2 * peak_counts * exp(-t / tau2)`` models a
    slow background. ``rise`` prepends a linear ramp of that length.
    """
    long = tau2 if tau2 else tau
    if t_max is None:
        t_max = 8 * long
    t = np.round(np.arange(0.0, t_max + 0.5 * dt, dt), 9)
    shifted = np.clip(t - rise, 0.0, None)
    mean = peak_counts * (1 - fraction2) * np.exp(-shifted / tau) + background
    if tau2:
        mean = mean + peak_counts * fraction2 * np.exp(-shifted / tau2)
    if rise > 0:
        ramp = t < rise
        mean[ramp] = background + (mean[ramp.argmin()] - background) * t[ramp] / rise
    rng = None if seed is None else _rng(seed)
    y = _noisy(mean, rng)
    return DataSeries(t, y, np.sqrt(np.maximum(y, 1.0)))


def g2_train_histogram(c0, c1, cb, t1_ps, rep_ps=12_500, bin_width=100, n_periods=8,
                       seed=None):
    """Counts of the pulsed g2 model on mirrored bins, optionally Poisson."""
    from .photon_mc import CorrelationHistogram

    span = n_periods * rep_ps
    n_bins = int(span // bin_width)
    centers = bin_width * (np.arange(-n_bins, n_bins) + 0.5)
    mean = eval_model("g2_train", {"c0": c0, "c1": c1, "cb": cb, "t1": t1_ps,
                                   "tau_rep": rep_ps}, centers)
    rng = None if seed is None else _rng(seed)
    counts = _noisy(mean, rng)
    return CorrelationHistogram(bin_width, n_bins * bin_width, counts,
                                int(counts.sum()), int(counts.sum()))


def gamma_population(mean, sd, size, seed=0):
    if not (mean > 0 and sd > 0):
        raise DomainError("mean and sd must be positive")
    shape = (mean / sd) ** 2
    return _rng(seed).gamma(shape, sd**2 / mean, size)
