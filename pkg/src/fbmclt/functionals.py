"""Pathwise functionals of fBm: F_n(t), the first-order functional and L_t(0).

All time integrals are Riemann sums over the path grid.  The left rule
evaluates at t_k; the midpoint rule evaluates on the linear interpolant at
t_k + dt/2.  A horizon that falls inside a step contributes that step with
weight proportional to the covered fraction, which is exact for constant
integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fbm_core import FbmPath, FbmSampler, HurstModel, TimeGrid
from .rng import RngStream

RULES = ("left", "midpoint")
BANDWIDTH_FACTOR = 1e-3
BANDWIDTH_RTOL = 0.03
MAX_HALVINGS = 3


@dataclass(frozen=True)
class FunctionalSample:
    n: float
    t: float
    value: float
    riemann_rule: str = "left"


@dataclass(frozen=True)
class LocalTimeEstimate:
    t: float
    epsilon: float
    value: float


def expected_local_time(model: HurstModel, t: float) -> float:
    """E L_t(0) = (2 pi)^(-d/2) t^(1-Hd) / (1-Hd)."""
    model.require_local_time()
    if t < 0:
        raise DomainError(f"time must be nonnegative, got {t}")
    return (2.0 * math.pi) ** (-model.d / 2.0) * t ** (1.0 - model.hd) / (1.0 - model.hd)


def _squared_radius(path: FbmPath, rule: str) -> np.ndarray:
    if rule not in RULES:
        raise DomainError(f"unknown Riemann rule {rule!r}")
    b = path.values
    if rule == "midpoint":
        b = 0.5 * (b[:, 1:] + b[:, :-1])
    return np.sum(b * b, axis=0)


def _integrate(vals: np.ndarray, path: FbmPath, horizons, rule: str, radial) -> np.ndarray:
    """Riemann sums of per-step values ``vals`` up to each horizon."""
    grid = path.grid
    horizons = np.atleast_1d(np.asarray(horizons, dtype=float))
    if np.any(horizons < 0):
        raise DomainError("integration horizon must be nonnegative")
    if np.any(horizons > grid.horizon * (1 + 1e-12)):
        raise DomainError(
            f"path horizon {grid.horizon:g} is shorter than requested {horizons.max():g}"
        )
    csum = np.concatenate([[0.0], np.cumsum(vals)])
    steps = horizons / grid.dt
    full = np.minimum(np.floor(steps + 1e-9).astype(np.int64), grid.n_steps)
    frac = np.clip(steps - full, 0.0, None)
    frac[frac < 1e-9] = 0.0
    out = csum[full] * grid.dt
    partial = frac > 0
    if np.any(partial):
        idx = full[partial]
        if rule == "left":
            out[partial] += vals[idx] * frac[partial] * grid.dt
        else:
            # midpoint of the covered part of the step, on the interpolant
            b = path.values
            x = b[:, idx] + 0.5 * frac[partial] * (b[:, idx + 1] - b[:, idx])
            out[partial] += radial(np.sum(x * x, axis=0)) * frac[partial] * grid.dt
    return out


def _radial(func):
    if hasattr(func, "radial"):
        return func.radial
    return lambda r2: func(np.sqrt(r2))


def occupation_integrals(path: FbmPath, func, horizons, rule: str = "left") -> np.ndarray:
    """int_0^T func(B(s)) ds for each horizon T, as Riemann sums.

    ``func`` is a radial function object (anything with ``radial(r2)``, such
    as :class:`~fbmclt.testfunc.TestFunction`).
    """
    radial = _radial(func)
    r2 = _squared_radius(path, rule)
    vals = radial(r2)
    if rule == "left":
        vals = vals[:-1]
    return _integrate(vals, path, horizons, rule, radial)


def additive_functional(path: FbmPath, f, n: float, t: float, rule: str = "left") -> FunctionalSample:
    """F_n(t) = n^((Hd-1)/2) int_0^{nt} f(B(s)) ds on a path with dt = 1."""
    if not n > 0:
        raise DomainError(f"scale n must be positive, got {n}")
    model = path.model
    value = occupation_integrals(path, f, n * t, rule)[0] * n ** ((model.hd - 1.0) / 2.0)
    return FunctionalSample(n, t, float(value), rule)


def first_order_functional(path: FbmPath, g, n: float, t: float, rule: str = "left") -> float:
    """n^(Hd-1) int_0^{nt} g(B(s)) ds, whose limit is L_t(0) int g."""
    if not n > 0:
        raise DomainError(f"scale n must be positive, got {n}")
    model = path.model
    return float(occupation_integrals(path, g, n * t, rule)[0] * n ** (model.hd - 1.0))


class _GaussianKernel:
    def __init__(self, epsilon: float, d: int):
        self.norm = (2.0 * math.pi * epsilon) ** (-d / 2.0)
        self.epsilon = epsilon

    def radial(self, r2):
        return self.norm * np.exp(-np.asarray(r2) / (2.0 * self.epsilon))


def local_time_estimates(path: FbmPath, times, epsilon: float) -> np.ndarray:
    if not epsilon > 0:
        raise DomainError(f"bandwidth must be positive, got {epsilon}")
    return occupation_integrals(path, _GaussianKernel(epsilon, path.model.d), times, "left")


def local_time_estimate(path: FbmPath, t: float, epsilon: float) -> LocalTimeEstimate:
    """Gaussian-mollified occupation density of the origin up to time t."""
    value = local_time_estimates(path, t, epsilon)[0]
    return LocalTimeEstimate(t, epsilon, float(max(value, 0.0)))


def default_bandwidth(model: HurstModel, t: float) -> float:
    return BANDWIDTH_FACTOR * t ** (2.0 * model.h)


def bandwidth_schedule(model: HurstModel, t: float, halvings: int = MAX_HALVINGS) -> list:
    eps0 = default_bandwidth(model, t)
    return [eps0 * 0.5**k for k in range(halvings + 1)]


@dataclass(frozen=True)
class BandwidthChoice:
    epsilon: float
    converged: bool
    epsilons: tuple
    means: tuple


def calibrate_bandwidth(paths, t: float) -> BandwidthChoice:
    """Walk the halving schedule until the mean estimate moves by < 3%.

    Returns the first bandwidth whose half gives a mean within 3%; if none
    does within three halvings the smallest bandwidth is returned with
    ``converged=False``.
    """
    paths = list(paths)
    if not paths:
        raise DomainError("bandwidth calibration needs at least one path")
    eps = bandwidth_schedule(paths[0].model, t)
    means = [math.fsum(local_time_estimate(p, t, e).value for p in paths) / len(paths) for e in eps]
    for k in range(len(eps) - 1):
        if abs(means[k] - means[k + 1]) < BANDWIDTH_RTOL * abs(means[k]):
            return BandwidthChoice(eps[k], True, tuple(eps), tuple(means))
    return BandwidthChoice(eps[-1], False, tuple(eps), tuple(means))


def simulate_limit_variable(
    model: HurstModel,
    f_norm: float,
    chd: float,
    t: float,
    stream: RngStream,
    n_steps: int = 4096,
    epsilon: float | None = None,
) -> float:
    """One draw of sqrt(C) ||f|| W(L_t(0)).

    Conditionally on L the variable W(L) is N(0, L), so a draw is
    sqrt(C) ||f|| sqrt(L_hat) Z with L_hat the kernel estimate on an
    independent fBm path and Z an independent standard normal.
    """
    if not model.clt_regime:
        raise DomainError("limit variable is only defined for 1/(d+2) < H < 1/d")
    if f_norm == 0.0:
        return 0.0
    if t == 0:
        return 0.0
    eps = default_bandwidth(model, t) if epsilon is None else epsilon
    path = FbmSampler(model, TimeGrid(t / n_steps, n_steps)).sample(stream.substream("path"))
    lt = local_time_estimate(path, t, eps).value
    z = stream.substream("z").generator().standard_normal()
    return float(math.sqrt(chd) * f_norm * math.sqrt(lt) * z)
