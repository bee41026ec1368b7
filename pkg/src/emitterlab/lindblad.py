"""Numerical Born-Markov master equation for the pumped two-level system.

The Liouvillian is assembled from the jump operators (incoherent pumping
sigma_eg, decay sigma_ge, pure dephasing sigma_z) rather than from the closed
forms in :mod:`emitterlab.tls`, and is integrated with fixed-step classical
RK4. It serves as an independent oracle for the analytic model.

States are stored as 4-vectors (rho_ee, rho_eg, rho_ge, rho_gg). Integration
runs in the frame rotating at omega_x, where the system Hamiltonian drops out;
the lab-frame phase exp(-i omega_x t) is restored analytically on output.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data import Spectrum
from .errors import DomainError, StabilityError
from .tls import MHZ, NS, DensityMatrixState, emission_spectrum, gamma2, pump_rates, steady_state

SIGMA_EG = np.array([[0, 1], [0, 0]], dtype=complex)   # |e><g|, basis (e, g)
SIGMA_GE = SIGMA_EG.conj().T
SIGMA_Z = SIGMA_EG @ SIGMA_GE - SIGMA_GE @ SIGMA_EG
STABILITY_LIMIT = 0.1


@dataclass(frozen=True)
class LindbladConfig:
    p12: float               # rad/s
    p21: float               # rad/s
    gamma_dp: float = 0.0    # rad/s
    omega_x: float = 0.0     # rad/s
    dt: float = 0.01         # ns
    t_max: float = 10.0      # ns

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.t_max >= self.dt:
            raise DomainError("t_max must be at least dt")
        if min(self.p12, self.p21, self.gamma_dp) < 0:
            raise DomainError("rates must be non-negative")

    @classmethod
    def from_params(cls, params, pump, dt=None, t_max=None):
        p12, p21 = pump_rates(params, pump)
        fastest = max(p12 + p21, 0.5 * (p12 + p21 + params.gamma_dp)) * NS
        if dt is None:
            dt = 0.02 / fastest
        if t_max is None:
            t_max = 30.0 / ((p12 + p21) * NS)
        return cls(p12, p21, params.gamma_dp, params.omega_x, dt, t_max)


def _dissipator(c, rho):
    cd = c.conj().T
    return c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)


def lindblad_rhs(config, rho):
    """Dissipative part of d(rho)/dt per ns, for a 2x2 matrix ``rho``."""
    p12, p21, gdp = config.p12 * NS, config.p21 * NS, config.gamma_dp * NS
    return (p12 * _dissipator(SIGMA_EG, rho)
            + p21 * _dissipator(SIGMA_GE, rho)
            + 0.25 * gdp * (SIGMA_Z @ rho @ SIGMA_Z - rho))


def superoperator(config):
    """4x4 generator acting on (rho_ee, rho_eg, rho_ge, rho_gg), per ns."""
    columns = []
    for k in range(4):
        basis = np.zeros(4, dtype=complex)
        basis[k] = 1.0
        columns.append(lindblad_rhs(config, basis.reshape(2, 2)).reshape(4))
    return np.array(columns).T


def _check_step(generator, dt):
    fastest = np.max(np.abs(np.linalg.eigvals(generator)))
    if fastest * dt > STABILITY_LIMIT:
        raise StabilityError(
            f"step too large: dt * rate = {fastest * dt:.3g} exceeds {STABILITY_LIMIT}")


def _rk4(generator, y, h):
    k1 = generator @ y
    k2 = generator @ (y + 0.5 * h * k1)
    k3 = generator @ (y + 0.5 * h * k2)
    k4 = generator @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _lab_phase(omega_x, t_ns):
    return np.exp(-1j * omega_x * np.asarray(t_ns) * NS)


@dataclass
class Trajectory:
    times: np.ndarray        # ns
    vectors: np.ndarray      # shape (n, 4), lab frame

    @property
    def states(self):
        return [DensityMatrixState(float(v[0].real), float(v[3].real), complex(v[1]))
                for v in self.vectors]

    @property
    def final(self):
        v = self.vectors[-1]
        return DensityMatrixState(float(v[0].real), float(v[3].real), complex(v[1]))

    def trace_deviation(self):
        return np.max(np.abs(self.vectors[:, 0] + self.vectors[:, 3] - 1.0))

    def positivity_violation(self):
        ee, gg = self.vectors[:, 0].real, self.vectors[:, 3].real
        coh = np.abs(self.vectors[:, 1]) ** 2
        return max(np.max(-ee), np.max(ee - 1.0), np.max(coh - ee * gg), 0.0)


def integrate_master(config, init):
    """Fixed-step RK4 trajectory from ``init`` over [0, t_max]."""
    generator = superoperator(config)
    _check_step(generator, config.dt)
    n_steps = int(round(config.t_max / config.dt))
    h = config.t_max / n_steps
    y = np.array([init.rho_ee, init.rho_eg, init.rho_ge, init.rho_gg], dtype=complex)
    out = np.empty((n_steps + 1, 4), dtype=complex)
    out[0] = y
    for i in range(n_steps):
        y = _rk4(generator, y, h)
        out[i + 1] = y
    times = h * np.arange(n_steps + 1)
    phase = _lab_phase(config.omega_x, times)
    out[:, 1] *= phase
    out[:, 2] *= phase.conj()
    return Trajectory(times, out)


def numeric_steady_state(config):
    """Null vector of the Liouvillian, normalised to unit trace."""
    generator = superoperator(config)
    _, _, vh = np.linalg.svd(generator)
    v = vh[-1].conj()
    v = v / (v[0] + v[3])
    return DensityMatrixState(float(v[0].real), float(v[3].real), complex(v[1]))


def two_time_correlation(config, tau_grid, frame="lab", state=None):
    """<sigma_eg(t->inf) sigma_ge(t + tau)> by the quantum regression theorem.

    The two-time operator Lambda(tau) starts at rho_ss sigma_eg and is evolved
    with the same Liouvillian; the correlation is Tr[sigma_ge Lambda(tau)].
    ``state`` replaces rho_ss (e.g. an excited emitter when the pump is off
    and the steady state is dark). ``frame="rotating"`` omits the
    exp(-i omega_x tau) factor.
    """
    taus = np.asarray(tau_grid, dtype=float)
    if np.any(taus < 0):
        raise DomainError("tau must be non-negative")
    if taus.size > 1 and np.any(np.diff(taus) < 0):
        raise DomainError("tau grid must be increasing")
    generator = superoperator(config)
    _check_step(generator, config.dt)
    rho = (state if state is not None else numeric_steady_state(config)).matrix()
    lam = (rho @ SIGMA_EG).reshape(4)
    out = np.empty(taus.size, dtype=complex)
    t = 0.0
    for i, target in enumerate(taus):
        span = target - t
        if span > 0:
            n_sub = max(1, math.ceil(span / config.dt - 1e-9))
            h = span / n_sub
            for _ in range(n_sub):
                lam = _rk4(generator, lam, h)
            t = target
        out[i] = np.trace(SIGMA_GE @ lam.reshape(2, 2))
    if frame == "lab":
        out *= _lab_phase(config.omega_x, taus)
    return out


def coherence_rate(config):
    """Gamma_2 in rad/s, read off the assembled generator."""
    return -superoperator(config)[1, 1].real / NS


def spectrum_numeric(config, omega_grid, gamma_rad=None, tau_horizon=None, n_tau=2**14,
                     state=None):
    """Emission spectrum from a discrete Fourier quadrature of the correlation.

    S(omega) = (Gamma_rad / pi) Re int_0^T exp(i (omega - omega_x) tau) C(tau) dtau
    with C evaluated in the rotating frame on ``n_tau`` points up to
    ``tau_horizon`` ns (default 40 / Gamma_2). ``gamma_rad`` defaults to
    P21 - P12, the radiative rate of the thermal bath model. ``state`` is
    passed to :func:`two_time_correlation`.
    """
    omega = np.asarray(omega_grid, dtype=float)
    if gamma_rad is None:
        gamma_rad = config.p21 - config.p12
    g2_ns = coherence_rate(config) * NS
    if tau_horizon is None:
        tau_horizon = 40.0 / g2_ns
    truncated = tau_horizon * g2_ns < 20.0
    if truncated:
        warnings.warn("tau horizon shorter than 20 / Gamma_2; spectrum is truncated",
                      RuntimeWarning, stacklevel=2)
    taus = np.linspace(0.0, tau_horizon, n_tau)
    h = taus[1] - taus[0]
    step_config = LindbladConfig(config.p12, config.p21, config.gamma_dp, 0.0,
                                 dt=h * (1 + 1e-12), t_max=tau_horizon)
    corr = two_time_correlation(step_config, taus, frame="rotating", state=state)
    detuning = (omega - config.omega_x) * NS
    # sum_k C_k exp(i w tau_k) as a polynomial in z = exp(i w h), by Horner's rule
    z = np.exp(1j * detuning * h)
    total = np.zeros(omega.size, dtype=complex)
    for c in corr[::-1]:
        total *= z
        total += c
    values = _filon(detuning, h, taus[-1], corr[0], corr[-1], total).real
    values *= gamma_rad / math.pi * NS
    return Spectrum(omega, values, axis_unit="rad/s",
                    metadata={"truncated": "true" if truncated else "false",
                              "tau_horizon_ns": repr(float(tau_horizon))})


def _filon(w, h, t_end, f_first, f_last, total):
    """int_0^T L(tau) exp(i w tau) dtau for the piecewise-linear interpolant L.

    ``total`` is sum_k f_k exp(i w tau_k) over all nodes; interior nodes carry
    the hat-function weight h sinc^2(w h / 2), the two end nodes their
    half-hat integrals.
    """
    theta = w * h
    small = np.abs(theta) < 1e-4
    th = np.where(small, 1.0, theta)
    e = np.exp(1j * th)
    sinc2 = np.where(small, 1.0 - theta**2 / 12.0, (2.0 - 2.0 * np.cos(th)) / th**2)
    i0 = np.where(small, 1.0 + 0.5j * theta, (e - 1.0) / (1j * th))
    i1 = np.where(small, 0.5 + 1j * theta / 3.0, e / (1j * th) + (e - 1.0) / th**2)
    end_phase = np.exp(1j * w * t_end)
    interior = total - f_first - f_last * end_phase
    return h * (sinc2 * interior + f_first * (i0 - i1) + f_last * (end_phase / e) * i1)


def half_max_width(x, y):
    """Full width at half maximum from linearly interpolated crossings."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    i = int(np.argmax(y))
    half = 0.5 * y[i]
    left = np.nonzero(y[:i] < half)[0]
    right = np.nonzero(y[i:] < half)[0]
    if left.size == 0 or right.size == 0:
        raise DomainError("half maximum not crossed on both sides of the peak")
    a = left[-1]
    xl = x[a] + (half - y[a]) * (x[a + 1] - x[a]) / (y[a + 1] - y[a])
    b = i + right[0]
    xr = x[b - 1] + (half - y[b - 1]) * (x[b] - x[b - 1]) / (y[b] - y[b - 1])
    return xr - xl


def resonance_grid(center, hwhm, span=200.0, n=2001):
    """Grid dense near ``center``: center + hwhm tan(theta), |tan theta| <= span."""
    theta = np.linspace(-math.atan(span), math.atan(span), n)
    return center + hwhm * np.tan(theta)


@dataclass(frozen=True)
class OracleComparison:
    fwhm_analytic: float      # MHz
    fwhm_numeric: float       # MHz
    integral_ratio: float     # numeric integral / (Gamma_rad rho_ee)
    max_pointwise: float      # max |numeric - analytic| / analytic peak
    dark: bool                # steady state is dark; lineshape taken from |e>

    @property
    def fwhm_ratio(self):
        return self.fwhm_numeric / self.fwhm_analytic


def compare_with_analytic(params, pump, n_points=2001, n_tau=2**14):
    """Numerical spectrum against the closed-form Lorentzian for one parameter set.

    Without pumping the steady state is dark and both spectra vanish; the
    lineshape is then taken from an initially excited emitter, which decays
    under the same Liouvillian.
    """
    config = LindbladConfig.from_params(params, pump)
    g2 = gamma2(params, pump)
    rho_ee = steady_state(*pump_rates(params, pump)).rho_ee
    dark = rho_ee == 0.0
    state = DensityMatrixState.excited() if dark else None
    grid = resonance_grid(params.omega_x, g2, 200.0, n_points)
    numeric = spectrum_numeric(config, grid, gamma_rad=params.gamma_rad, n_tau=n_tau,
                               state=state).counts * params.mu
    reference = 1.0 if dark else rho_ee
    analytic = (params.mu * params.gamma_rad / math.pi * reference * g2
                / (g2**2 + (grid - params.omega_x) ** 2))
    if not dark:
        analytic = emission_spectrum(params, pump, grid).counts
    integral = np.trapezoid(numeric, grid) / (params.mu * params.gamma_rad * reference)
    fwhm = float(half_max_width(grid, numeric)) / (2 * math.pi) / MHZ
    return OracleComparison(g2 / math.pi / MHZ, fwhm, float(integral),
                            float(np.max(np.abs(numeric - analytic)) / np.max(analytic)), dark)
