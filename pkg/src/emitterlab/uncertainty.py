"""Monte Carlo propagation of independent Gaussian input uncertainties."""

import numpy as np

from .data import Measured
from .errors import DomainError, EmitterLabError, PropagationError
from .rng import Stream

MAX_FAILURE_FRACTION = 0.01


def propagate_uncertainty(func, inputs, n_draws=10_000, seed=0):
    """Push Gaussian draws of ``inputs`` through ``func``.

    ``inputs`` maps argument names to ``Measured`` (or ``(value, sigma)``)
    pairs; ``func`` is called with keyword arguments, once per draw, and may
    return a scalar or a tuple. Draws where ``func`` raises a toolkit or
    arithmetic error count as failures; more than 1% of failures aborts.

    Returns a ``Measured`` (scalar ``func``) or a tuple of them, holding the
    sample mean and sample standard deviation.
    """
    if n_draws < 1000:
        raise DomainError("n_draws must be at least 1000")
    names = list(inputs)
    central = {k: float(Measured(*inputs[k]).value) for k in names}
    sigmas = {k: float(Measured(*inputs[k]).sigma) for k in names}
    for k, s in sigmas.items():
        if not s >= 0:
            raise DomainError(f"negative uncertainty for {k!r}")

    draws = {}
    for k in names:
        if sigmas[k] == 0:
            draws[k] = np.full(n_draws, central[k])
        else:
            draws[k] = central[k] + Stream(seed, f"propagate:{k}").normal(n_draws, sigmas[k])

    outputs, failures = [], 0
    for i in range(n_draws):
        try:
            out = func(**{k: draws[k][i] for k in names})
        except (EmitterLabError, ArithmeticError, ValueError):
            failures += 1
            continue
        outputs.append(np.atleast_1d(np.asarray(out, dtype=float)))
    if failures > MAX_FAILURE_FRACTION * n_draws:
        raise PropagationError(
            f"function failed on {failures} of {n_draws} draws", failures=failures)

    samples = np.vstack(outputs)
    means = samples.mean(axis=0)
    sds = samples.std(axis=0, ddof=1)
    result = tuple(Measured(float(m), float(s)) for m, s in zip(means, sds))
    if np.ndim(func(**central)) == 0:
        return result[0]
    return result
