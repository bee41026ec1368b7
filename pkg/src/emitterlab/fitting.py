"""Damped Gauss-Newton (Levenberg-Marquardt) fitting with bound projection."""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, polygamma

from .data import DataSeries, Measured
from .errors import DegenerateFitError, DomainError
from .models import ModelSpec, model_jacobian

FTOL = 1e-10
GTOL = 1e-8
XTOL = 1e-14
MAX_ITER = 500
LAMBDA_MAX = 1e16


@dataclass
class FitResult:
    params: dict
    covariance: np.ndarray
    free_names: tuple
    reduced_chi2: float
    n_iter: int
    converged: bool
    residuals: np.ndarray
    kind: str = ""
    fixed: dict = field(default_factory=dict)

    def sigma(self, name):
        if name not in self.free_names:
            return 0.0
        i = self.free_names.index(name)
        return float(math.sqrt(max(self.covariance[i, i], 0.0)))

    def value(self, name):
        return Measured(self.params[name], self.sigma(name))

    def cov(self, a, b):
        if a not in self.free_names or b not in self.free_names:
            return 0.0
        return float(self.covariance[self.free_names.index(a), self.free_names.index(b)])

    @property
    def errors(self):
        return {name: self.sigma(name) for name in self.params}

    def summary(self):
        return {name: {"value": self.params[name], "sigma": self.sigma(name)}
                for name in self.params}


def _project(values, lo, hi):
    clipped = np.clip(values, lo, hi)
    return clipped, bool(np.any(clipped != values))


def _order_bi_exp(spec, p):
    if spec.kind == "bi_exp" and p["tau1"] > p["tau2"]:
        p["a1"], p["a2"] = p["a2"], p["a1"]
        p["tau1"], p["tau2"] = p["tau2"], p["tau1"]
    return p


def fit(model, data, init, sigma=None, max_iter=MAX_ITER, scale_covariance=False):
    """Weighted least squares from ``init``.

    Weights come from ``data.sigma`` (or the ``sigma`` argument); without
    either, Poisson counting errors sqrt(max(y, 1)) are used. The covariance
    is the inverse weighted normal matrix, multiplied by the reduced chi^2
    when ``scale_covariance`` is set.
    """
    if isinstance(model, str):
        model = ModelSpec(model)
    if not isinstance(data, DataSeries):
        data = DataSeries(*data)
    x, y = data.x, data.y
    if sigma is None:
        sigma = data.sigma if data.sigma is not None else np.sqrt(np.maximum(y, 1.0))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if np.any(~(sigma > 0)):
        raise DomainError("sigma must be strictly positive")
    names = model.free_names
    if len(y) < len(names):
        raise DomainError(f"{len(y)} points cannot constrain {len(names)} free parameters")

    lo = np.array([model.bound(n)[0] for n in names], dtype=float)
    hi = np.array([model.bound(n)[1] for n in names], dtype=float)
    start = model.full_params(init)
    theta = np.array([start[n] for n in names], dtype=float)
    if np.any(theta < lo) or np.any(theta > hi):
        raise DomainError("initial values lie outside the bounds")

    def unpack(vec):
        p = dict(start)
        p.update(zip(names, vec))
        return _order_bi_exp(model, p)

    def residual(p):
        return (y - model.model.evaluate(x, p)) / sigma

    def jacobian(p):
        jac = model_jacobian(model, p, x)
        return np.column_stack([jac[n] for n in names]) / sigma[:, None]

    p = unpack(theta)
    theta = np.array([p[n] for n in names])
    r = residual(p)
    cost = float(r @ r)
    if not math.isfinite(cost):
        raise DomainError("model is not finite at the initial values")
    lam = 1e-3
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        J = jacobian(p)
        grad = J.T @ r
        free = ~(((theta <= lo) & (grad < 0)) | ((theta >= hi) & (grad > 0)))
        if cost == 0.0 or np.max(np.abs(grad[free]), initial=0.0) < GTOL:
            converged = True
            break
        # parameters pinned at an active bound sit out the step
        Jf = J[:, free]
        scale = np.sqrt(np.maximum(np.einsum("ij,ij->j", Jf, Jf), 1e-300))
        accepted = False
        while lam < LAMBDA_MAX:
            aug = np.vstack([Jf, np.diag(np.sqrt(lam) * scale)])
            rhs = np.concatenate([r, np.zeros(Jf.shape[1])])
            step = np.zeros(len(names))
            step[free] = np.linalg.lstsq(aug, rhs, rcond=None)[0]
            trial, hit = _project(theta + step, lo, hi)
            tp = unpack(trial)
            tr = residual(tp)
            tcost = float(tr @ tr)
            if math.isfinite(tcost) and tcost < cost:
                accepted = True
                break
            lam *= 10.0 if not hit else 100.0
        if not accepted:
            converged = True      # no descent left at machine precision
            break
        small_step = np.all(np.abs(trial - theta) <= XTOL * (np.abs(theta) + XTOL))
        rel_drop = (cost - tcost) / cost
        theta = np.array([tp[n] for n in names])
        p, r, cost = tp, tr, tcost
        lam = max(lam / 10.0, 1e-12)
        if rel_drop < FTOL or small_step:
            converged = True
            break

    J = jacobian(p)
    A = J.T @ J
    d = np.sqrt(np.diag(A))
    if np.any(~(d > 0)):
        raise DegenerateFitError(
            f"singular normal matrix for {model.kind}; a parameter has no effect")
    corr = A / np.outer(d, d)
    if np.linalg.cond(corr) > 1e14:
        raise DegenerateFitError(
            f"singular normal matrix for {model.kind}; parameters are not identifiable")
    cov = np.linalg.inv(corr) / np.outer(d, d)
    cov = 0.5 * (cov + cov.T)
    dof = len(y) - len(names)
    chi2 = cost / dof if dof > 0 else math.nan
    if scale_covariance and dof > 0:
        cov = cov * chi2
    return FitResult(
        params={n: float(p[n]) for n in model.param_names},
        covariance=cov,
        free_names=names,
        reduced_chi2=chi2,
        n_iter=n_iter,
        converged=converged,
        residuals=y - model.model.evaluate(x, p),
        kind=model.kind,
        fixed={k: v for k, v in model.fixed.items()},
    )


@dataclass(frozen=True)
class GammaFit:
    shape: float
    scale: float
    mean: float
    sd: float
    method: str = "mle"


def fit_gamma_distribution(samples, method="mle", max_iter=100):
    """Gamma(shape k, scale theta) by maximum likelihood or method of moments.

    MLE solves log k - digamma(k) = log(mean) - mean(log x) by Newton's method.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 3:
        raise DomainError("need at least three samples")
    if np.any(~(x > 0)):
        raise DomainError("gamma samples must be strictly positive")
    mean = float(x.mean())
    if method == "moments":
        var = float(x.var(ddof=1))
        if var <= 0:
            raise DegenerateFitError("zero sample variance: shape diverges")
        k = mean**2 / var
    elif method == "mle":
        s = math.log(mean) - float(np.mean(np.log(x)))
        if s <= 1e-14:
            raise DegenerateFitError("samples are all equal: shape diverges")
        k = (3.0 - s + math.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
        for _ in range(max_iter):
            f = math.log(k) - float(digamma(k)) - s
            df = 1.0 / k - float(polygamma(1, k))
            step = f / df
            k_new = k - step
            if k_new <= 0:
                k_new = 0.5 * k
            if abs(k_new - k) <= 1e-14 * k:
                k = k_new
                break
            k = k_new
    else:
        raise DomainError(f"unknown method {method!r}")
    theta = mean / k
    return GammaFit(k, theta, k * theta, theta * math.sqrt(k), method)
