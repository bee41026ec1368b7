"""Model catalog for the least-squares engine.

Each model maps named parameters to values and provides an analytic
Jacobian. Structural parameters (``harmonic`` of the sinusoid, ``tau_rep`` of
the pulse-train g2) are pinned unless the caller frees them explicitly.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

INF = math.inf


@dataclass(frozen=True)
class Model:
    kind: str
    params: tuple
    evaluate: object
    jacobian: object
    bounds: dict
    structural: dict = field(default_factory=dict)


def _lorentz_parts(x, x0, w, s):
    u = x - x0
    d = 4 * u**2 + w**2
    k = 2 * s / math.pi
    return u, d, k


def lorentzian(x, p):
    _, d, k = _lorentz_parts(x, p["x0"], p["fwhm"], p["area"])
    return k * p["fwhm"] / d + p["baseline"]


def _lorentzian_jac(x, x0, w, s):
    u, d, k = _lorentz_parts(x, x0, w, s)
    return {
        "x0": k * w * 8 * u / d**2,
        "fwhm": k * (4 * u**2 - w**2) / d**2,
        "area": (2 / math.pi) * w / d,
    }


def lorentzian_jac(x, p):
    jac = _lorentzian_jac(x, p["x0"], p["fwhm"], p["area"])
    jac["baseline"] = np.ones_like(x)
    return jac


def double_lorentzian(x, p):
    one = lorentzian(x, {"x0": p["x1"], "fwhm": p["fwhm1"], "area": p["area1"], "baseline": 0.0})
    two = lorentzian(x, {"x0": p["x2"], "fwhm": p["fwhm2"], "area": p["area2"], "baseline": 0.0})
    return one + two + p["baseline"]


def double_lorentzian_jac(x, p):
    jac = {}
    for i in ("1", "2"):
        part = _lorentzian_jac(x, p["x" + i], p["fwhm" + i], p["area" + i])
        jac["x" + i] = part["x0"]
        jac["fwhm" + i] = part["fwhm"]
        jac["area" + i] = part["area"]
    jac["baseline"] = np.ones_like(x)
    return jac


def sinusoid(x, p):
    """c(theta) = offset + (amplitude / 2) sin(harmonic theta + phase), theta in degrees."""
    arg = p["harmonic"] * np.radians(x) + p["phase"]
    return p["offset"] + 0.5 * p["amplitude"] * np.sin(arg)


def sinusoid_jac(x, p):
    theta = np.radians(x)
    arg = p["harmonic"] * theta + p["phase"]
    c = 0.5 * p["amplitude"] * np.cos(arg)
    return {
        "offset": np.ones_like(x),
        "amplitude": 0.5 * np.sin(arg),
        "phase": c,
        "harmonic": c * theta,
    }


def _power_ratio(x, p_sat, n):
    x = np.asarray(x, dtype=float)
    ratio = np.zeros_like(x)
    pos = x > 0
    ratio[pos] = (x[pos] / p_sat) ** n
    log = np.zeros_like(x)
    log[pos] = np.log(x[pos] / p_sat)
    return ratio, log


def saturation(x, p):
    r, _ = _power_ratio(x, p["p_sat"], p["n"])
    return p["i_sat"] * r / (1 + r) + p["c"]


def saturation_jac(x, p):
    r, log = _power_ratio(x, p["p_sat"], p["n"])
    dfdr = p["i_sat"] / (1 + r) ** 2
    return {
        "i_sat": r / (1 + r),
        "p_sat": dfdr * (-p["n"] * r / p["p_sat"]),
        "n": dfdr * r * log,
        "c": np.ones_like(r),
    }


def _side_orders(x, tau_rep):
    reach = np.max(np.abs(x)) if np.size(x) else 0.0
    n_max = int(reach // tau_rep) + 2
    orders = np.arange(-n_max, n_max + 1)
    return orders[orders != 0]


def g2_train(x, p):
    """C0 e^{-|tau|/T1} + C1 sum_{n != 0} e^{-|tau - n tau_rep|/T1} + Cb."""
    x = np.asarray(x, dtype=float)
    t1, rep = p["t1"], p["tau_rep"]
    centre = np.exp(-np.abs(x) / t1)
    side = np.zeros_like(x)
    for n in _side_orders(x, rep):
        side += np.exp(-np.abs(x - n * rep) / t1)
    return p["c0"] * centre + p["c1"] * side + p["cb"]


def g2_train_jac(x, p):
    x = np.asarray(x, dtype=float)
    t1, rep = p["t1"], p["tau_rep"]
    centre = np.exp(-np.abs(x) / t1)
    side = np.zeros_like(x)
    d_t1 = p["c0"] * centre * np.abs(x) / t1**2
    d_rep = np.zeros_like(x)
    for n in _side_orders(x, rep):
        dx = x - n * rep
        e = np.exp(-np.abs(dx) / t1)
        side += e
        d_t1 += p["c1"] * e * np.abs(dx) / t1**2
        d_rep += p["c1"] * e * np.sign(dx) * n / t1
    return {"c0": centre, "c1": side, "cb": np.ones_like(x), "t1": d_t1, "tau_rep": d_rep}


def mono_exp(x, p):
    return p["a"] * np.exp(-x / p["tau"]) + p["b"]


def mono_exp_jac(x, p):
    e = np.exp(-x / p["tau"])
    return {"a": e, "tau": p["a"] * e * x / p["tau"] ** 2, "b": np.ones_like(x)}


def bi_exp(x, p):
    return p["a1"] * np.exp(-x / p["tau1"]) + p["a2"] * np.exp(-x / p["tau2"]) + p["b"]


def bi_exp_jac(x, p):
    e1 = np.exp(-x / p["tau1"])
    e2 = np.exp(-x / p["tau2"])
    return {
        "a1": e1, "tau1": p["a1"] * e1 * x / p["tau1"] ** 2,
        "a2": e2, "tau2": p["a2"] * e2 * x / p["tau2"] ** 2,
        "b": np.ones_like(x),
    }


POS = (0.0, INF)
FREE = (-INF, INF)

CATALOG = {
    "lorentzian": Model(
        "lorentzian", ("x0", "fwhm", "area", "baseline"), lorentzian, lorentzian_jac,
        {"fwhm": POS}),
    "double_lorentzian": Model(
        "double_lorentzian",
        ("x1", "fwhm1", "area1", "x2", "fwhm2", "area2", "baseline"),
        double_lorentzian, double_lorentzian_jac, {"fwhm1": POS, "fwhm2": POS}),
    "sinusoid": Model(
        "sinusoid", ("offset", "amplitude", "phase", "harmonic"), sinusoid, sinusoid_jac,
        {}, {"harmonic": 2.0}),
    "saturation": Model(
        "saturation", ("i_sat", "p_sat", "n", "c"), saturation, saturation_jac,
        {"i_sat": POS, "p_sat": POS, "n": POS}),
    "g2_train": Model(
        "g2_train", ("c0", "c1", "cb", "t1", "tau_rep"), g2_train, g2_train_jac,
        {"c0": POS, "c1": POS, "t1": POS, "tau_rep": POS}, {"tau_rep": None}),
    "mono_exp": Model(
        "mono_exp", ("a", "tau", "b"), mono_exp, mono_exp_jac, {"tau": POS}),
    "bi_exp": Model(
        "bi_exp", ("a1", "tau1", "a2", "tau2", "b"), bi_exp, bi_exp_jac,
        {"tau1": POS, "tau2": POS}),
}


@dataclass
class ModelSpec:
    """A catalog model plus pinned values and per-parameter bounds."""
    kind: str
    fixed: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    free: tuple = ()          # structural parameters to release

    def __post_init__(self):
        if self.kind not in CATALOG:
            raise DomainError(f"unknown model kind {self.kind!r}")
        names = set(self.model.params)
        for key in list(self.fixed) + list(self.bounds) + list(self.free):
            if key not in names:
                raise DomainError(f"{self.kind} has no parameter {key!r}")
        pinned = {k: v for k, v in self.model.structural.items() if k not in self.free}
        pinned.update(self.fixed)
        self.fixed = pinned

    @property
    def model(self):
        return CATALOG[self.kind]

    @property
    def param_names(self):
        return self.model.params

    @property
    def free_names(self):
        return tuple(n for n in self.model.params if n not in self.fixed)

    def bound(self, name):
        return self.bounds.get(name, self.model.bounds.get(name, FREE))

    def full_params(self, values):
        p = {}
        for name in self.model.params:
            if name in self.fixed and self.fixed[name] is not None:
                p[name] = float(self.fixed[name])
            elif name in values:
                p[name] = float(values[name])
            else:
                raise DomainError(f"missing value for parameter {name!r}")
        return p


def eval_model(model, params, x):
    """Evaluate a ``ModelSpec`` (or catalog kind name) at ``x``."""
    if isinstance(model, str):
        model = ModelSpec(model)
    p = model.full_params(params)
    return model.model.evaluate(np.asarray(x, dtype=float), p)


def model_jacobian(model, params, x):
    if isinstance(model, str):
        model = ModelSpec(model)
    p = model.full_params(params)
    jac = model.model.jacobian(np.asarray(x, dtype=float), p)
    return {name: np.broadcast_to(jac[name], np.shape(x)).astype(float)
            for name in model.param_names}
