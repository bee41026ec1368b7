"""Closed-form thermal bath model of an incoherently pumped two-level emitter.

Unit convention: lifetimes and times in ns, every rate stored as an angular
rate in rad/s, every user-facing linewidth a linear-frequency FWHM in MHz.
A Lorentzian with angular HWHM ``g`` has linear FWHM ``g / pi``.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Measured, Spectrum
from .errors import DomainError, InfeasibleError
from .uncertainty import propagate_uncertainty

NS = 1e-9
MHZ = 1e6


@dataclass(frozen=True)
class EmitterParams:
    t1: float                # radiative lifetime, ns
    gamma_dp: float = 0.0    # pure dephasing rate, rad/s
    p_sat: float = 1.0       # saturation power, uW
    n_exp: float = 1.0       # pump power-law exponent
    mu: float = 1.0          # collection efficiency
    omega_x: float = 0.0     # transition angular frequency, rad/s

    def __post_init__(self):
        if not self.t1 > 0:
            raise DomainError(f"t1 must be positive, got {self.t1}")
        if not self.p_sat > 0:
            raise DomainError(f"p_sat must be positive, got {self.p_sat}")
        if not self.n_exp > 0:
            raise DomainError(f"n_exp must be positive, got {self.n_exp}")
        if not self.gamma_dp >= 0:
            raise DomainError(f"gamma_dp must be non-negative, got {self.gamma_dp}")
        if not 0 < self.mu <= 1:
            raise DomainError(f"mu must lie in (0, 1], got {self.mu}")

    @property
    def gamma_rad(self):
        """Radiative decay rate 1/t1 in s^-1."""
        return 1.0 / (self.t1 * NS)

    @classmethod
    def from_linewidths(cls, t1, dephasing_mhz=0.0, **kw):
        """Build from a dephasing given as Gamma_dp / 2pi in MHz."""
        return cls(t1=t1, gamma_dp=2 * math.pi * dephasing_mhz * MHZ, **kw)


@dataclass(frozen=True)
class PumpSetting:
    power: float = 0.0       # excitation power, uW

    def __post_init__(self):
        if not self.power >= 0:
            raise DomainError(f"pump power must be non-negative, got {self.power}")


@dataclass(frozen=True)
class DensityMatrixState:
    rho_ee: float
    rho_gg: float
    rho_eg: complex = 0j

    @property
    def rho_ge(self):
        return self.rho_eg.conjugate()

    @property
    def trace(self):
        return self.rho_ee + self.rho_gg

    def matrix(self):
        """2x2 density matrix in the (e, g) basis."""
        return np.array([[self.rho_ee, self.rho_eg],
                         [self.rho_ge, self.rho_gg]], dtype=complex)

    @classmethod
    def from_matrix(cls, rho):
        return cls(float(rho[0, 0].real), float(rho[1, 1].real), complex(rho[0, 1]))

    @classmethod
    def ground(cls):
        return cls(0.0, 1.0, 0j)

    @classmethod
    def excited(cls):
        return cls(1.0, 0.0, 0j)


@dataclass(frozen=True)
class LinewidthValue:
    fwhm_linear: float       # MHz
    sigma: float = 0.0       # MHz
    clamped: bool = False    # set when a negative extraction was clamped to zero

    @property
    def measured(self):
        return Measured(self.fwhm_linear, self.sigma)


def _power_ratio(params, pump):
    return (pump.power / params.p_sat) ** params.n_exp


def transform_limit(t1, t1_sigma=0.0):
    """Transform-limited FWHM 1/(2 pi t1) in MHz for ``t1`` in ns."""
    if not t1 > 0:
        raise DomainError(f"t1 must be positive, got {t1}")
    gamma = 1.0 / (2 * math.pi * t1 * NS) / MHZ
    return LinewidthValue(gamma, gamma * t1_sigma / t1)


def effective_pump_rate(params, pump):
    """P_x = (Gamma_rad / 2) (P / P_sat)^n in rad/s."""
    return 0.5 * params.gamma_rad * _power_ratio(params, pump)


def pump_rates(params, pump):
    """Upward and downward incoherent rates (P12, P21) in rad/s."""
    px = effective_pump_rate(params, pump)
    return px, params.gamma_rad + px


def steady_state(p12, p21):
    if p12 < 0 or p21 < 0:
        raise DomainError("pump rates must be non-negative")
    total = p12 + p21
    if total == 0:
        raise DomainError("degenerate rates: P12 = P21 = 0")
    return DensityMatrixState(p12 / total, p21 / total, 0j)


def evolve_populations(init, p12, p21, t, gamma_dp=0.0, omega_x=0.0):
    """State at time ``t`` (ns) from ``init``.

    Populations relax to steady state at P12 + P21; the coherence decays at
    Gamma_2 = (P12 + P21 + gamma_dp) / 2 while rotating at omega_x.
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    ss = steady_state(p12, p21)
    decay = math.exp(-(p12 + p21) * t * NS)
    ee = ss.rho_ee + (init.rho_ee - ss.rho_ee) * decay
    gamma2 = 0.5 * (p12 + p21 + gamma_dp)
    eg = _rotate_decay(init.rho_eg, omega_x, gamma2, t)
    return DensityMatrixState(ee, 1.0 - ee, eg)


def gamma2(params, pump):
    """Coherence decay rate (angular HWHM of the line) in rad/s."""
    return 0.5 * (params.gamma_rad + 2 * effective_pump_rate(params, pump) + params.gamma_dp)


def _rotate_decay(value, omega, rate, t):
    x = t * NS
    return complex(value) * complex(math.cos(omega * x), -math.sin(omega * x)) * math.exp(-rate * x)


def evolve_coherence(init, params, pump, t):
    """rho_eg(t) = rho_eg(0) exp(-(i omega_x + Gamma_2) t), t in ns."""
    if t < 0:
        raise DomainError("t must be non-negative")
    return _rotate_decay(init.rho_eg, params.omega_x, gamma2(params, pump), t)


def emission_spectrum(params, pump, omega_grid):
    """Lorentzian emission spectrum F(omega) on an angular-frequency grid.

    F = (mu Gamma_rad / pi) rho_ee^ss Gamma_2 / (Gamma_2^2 + (omega - omega_x)^2),
    which integrates to mu Gamma_rad rho_ee^ss.
    """
    omega = np.asarray(omega_grid, dtype=float)
    if omega.size == 0:
        raise DomainError("empty frequency grid")
    if omega.size > 1 and np.any(np.diff(omega) <= 0):
        raise DomainError("frequency grid must be strictly increasing")
    rho = steady_state(*pump_rates(params, pump)).rho_ee
    g2 = gamma2(params, pump)
    f = params.mu * params.gamma_rad / math.pi * rho * g2 / (g2**2 + (omega - params.omega_x) ** 2)
    return Spectrum(omega, f, axis_unit="rad/s",
                    metadata={"rho_ee": repr(rho), "gamma2_rad_s": repr(g2)})


def saturation_intensity(params):
    """I_sat = mu Gamma_rad / 2 (arbitrary counts-rate units)."""
    return 0.5 * params.mu * params.gamma_rad


def intensity(params, pump):
    """I(P) = I_sat P^n / (P_sat^n + P^n)."""
    r = _power_ratio(params, pump)
    return saturation_intensity(params) * r / (1.0 + r)


def _broadened(t1, power_ratio, coefficient):
    return transform_limit(t1).fwhm_linear * (1.0 + coefficient * power_ratio)


def measured_linewidth(params, pump, coefficient=1):
    """Power-broadened FWHM in MHz.

    coefficient 1 matches Gamma_2 / pi exactly; coefficient 2 reproduces the
    alternative convention used when inverting a single measurement.
    """
    width = _broadened(params.t1, _power_ratio(params, pump), coefficient)
    return LinewidthValue(width + params.gamma_dp / (2 * math.pi) / MHZ)


def dephasing_from_measurement(meas_fwhm, irf_fwhm, t1, power_ratio=0.0, coefficient=1,
                               n_exp=None):
    """Pure dephasing Gamma_dp / 2pi (MHz) from one etalon measurement.

    ``power_ratio`` is P / P_sat; when ``n_exp`` is given it is raised to that
    power, otherwise it is taken as the already-exponentiated (P / P_sat)^n.
    Negative results are clamped to zero and flagged.
    """
    if not meas_fwhm > irf_fwhm:
        raise InfeasibleError(
            f"measured width {meas_fwhm} MHz does not exceed the IRF {irf_fwhm} MHz")
    ratio = power_ratio ** n_exp if n_exp is not None else power_ratio
    value = (meas_fwhm - irf_fwhm) - _broadened(t1, ratio, coefficient)
    if -1e-12 * meas_fwhm < value < 0:
        value = 0.0       # rounding residue of an exactly transform-limited line
    if value < 0:
        warnings.warn(f"extracted dephasing {value:.3g} MHz is negative; clamped to 0",
                      RuntimeWarning, stacklevel=2)
        return LinewidthValue(0.0, 0.0, clamped=True)
    return LinewidthValue(value)


def zero_power_linewidth(t1, dephasing_mhz):
    """Gamma_2(P -> 0) / pi = 1/(2 pi t1) + Gamma_dp / 2pi, in MHz."""
    if not dephasing_mhz >= 0 or not math.isfinite(dephasing_mhz):
        raise DomainError("dephasing must be finite and non-negative")
    return LinewidthValue(transform_limit(t1).fwhm_linear + dephasing_mhz)


def tl_ratio(linewidth, t1, t1_sigma=0.0, n_draws=10_000, seed=0):
    """Linewidth in units of the transform limit, with Monte Carlo sigma."""
    if isinstance(linewidth, LinewidthValue):
        width = linewidth.measured
    elif isinstance(linewidth, (Measured, tuple)):
        width = Measured(*linewidth)
    else:
        width = Measured(float(linewidth))
    if not (width.value > 0 and t1 > 0):
        raise DomainError("linewidth and t1 must be positive")
    ratio = width.value / transform_limit(t1).fwhm_linear
    if width.sigma == 0 and t1_sigma == 0:
        return Measured(ratio, 0.0)

    def f(w, tau):
        return w / transform_limit(tau).fwhm_linear

    spread = propagate_uncertainty(f, {"w": width, "tau": Measured(t1, t1_sigma)},
                                   n_draws=n_draws, seed=seed)
    return Measured(ratio, spread.sigma)
