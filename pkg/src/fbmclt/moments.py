"""Exact limit moments of W(L(0)) increments and the CLT moment targets.

For disjoint intervals (a_i, b_i] and a multi-index m with every m_i even,

    E prod_i [W(L_{b_i}(0)) - W(L_{a_i}(0))]^{m_i}
        = prod_i m_i! / (2^{m_i/2} (2 pi)^{m_i d/4} (m_i/2)!)
          * int over prod_i [a_i, b_i]^{m_i/2} of det A(w)^{-1/2} dw,

where A(w) is the covariance of the d-dimensional fBm at the times w.  The
coordinates are i.i.d., so det A = det(K)^d with K the scalar covariance
matrix; the integral is estimated by plain Monte Carlo over the box.  The
moment is 0 as soon as one m_i is odd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import beta_norm_spectral, chd_closed_form
from .errors import DomainError, NumericalError, RegimeError
from .fbm_core import HurstModel, batched_logdet
from .rng import RngStream
from .stats import MomentEstimate
from .testfunc import TestFunction, verify_membership

CHUNK = 1 << 15
MAX_REDRAWS = 20


@dataclass(frozen=True)
class MomentSpec:
    """Ordered disjoint intervals (a_i, b_i] with exponents m_i >= 1."""

    intervals: tuple
    multi_index: tuple

    def __post_init__(self):
        intervals = tuple((float(a), float(b)) for a, b in self.intervals)
        mi = tuple(int(m) for m in self.multi_index)
        if len(intervals) != len(mi) or not intervals:
            raise DomainError("intervals and multi_index must be nonempty and of equal length")
        if any(m < 1 for m in mi) or any(m != m0 for m, m0 in zip(mi, self.multi_index)):
            raise DomainError("multi-index entries must be integers >= 1")
        prev = 0.0
        for a, b in intervals:
            if not (0.0 <= a < b) or a < prev:
                raise DomainError(f"intervals must be ordered, disjoint and nonempty: {intervals}")
            prev = b
        object.__setattr__(self, "intervals", intervals)
        object.__setattr__(self, "multi_index", mi)

    @classmethod
    def single(cls, a: float, b: float, m: int) -> "MomentSpec":
        return cls(((a, b),), (m,))

    @classmethod
    def from_dict(cls, data: dict) -> "MomentSpec":
        try:
            return cls(tuple(tuple(iv) for iv in data["intervals"]), tuple(data["multi_index"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"bad moment spec {data!r}: {exc}") from None

    def to_dict(self) -> dict:
        return {"intervals": [list(iv) for iv in self.intervals], "multi_index": list(self.multi_index)}

    @property
    def order(self) -> int:
        return sum(self.multi_index)

    @property
    def all_even(self) -> bool:
        return all(m % 2 == 0 for m in self.multi_index)

    @property
    def label(self) -> str:
        return ";".join(f"({a:g},{b:g}]^{m}" for (a, b), m in zip(self.intervals, self.multi_index))


def moment_prefactor(spec: MomentSpec, d: int) -> float:
    """prod_i m_i! / (2^{m_i/2} (2 pi)^{m_i d/4} (m_i/2)!) for an all-even spec."""
    out = 1.0
    for m in spec.multi_index:
        half = m // 2
        out *= math.factorial(m) / (2.0**half * (2.0 * math.pi) ** (m * d / 4.0) * math.factorial(half))
    return out


def second_moment_closed_form(model: HurstModel, a: float, b: float) -> float:
    """E[(W(L_b) - W(L_a))^2] = E[L_b - L_a] = (2pi)^{-d/2} (b^{1-Hd} - a^{1-Hd}) / (1-Hd)."""
    model.require_local_time()
    e = 1.0 - model.hd
    return (2.0 * math.pi) ** (-model.d / 2.0) * (b**e - a**e) / e


def _draw_box(gen, lows, highs, size):
    w = gen.uniform(size=(size, lows.size)) * (highs - lows) + lows
    w.sort(axis=1)
    return w


def _integrand_chunk(model: HurstModel, lows, highs, volume, size, stream: RngStream):
    gen = stream.generator()
    w = _draw_box(gen, lows, highs, size)
    logdet, ok = batched_logdet(model, w)
    for _ in range(MAX_REDRAWS):
        if ok.all():
            break
        bad = np.flatnonzero(~ok)
        w_new = _draw_box(gen, lows, highs, bad.size)
        ld, ok_new = batched_logdet(model, w_new)
        logdet[bad] = ld
        ok[bad] = ok_new
    else:
        if not ok.all():
            raise NumericalError("repeated factorization failure while sampling the moment integral")
    return volume * np.exp(-0.5 * model.d * logdet)


def limit_moment(spec: MomentSpec, model: HurstModel, mc_samples: int, stream: RngStream) -> MomentEstimate:
    """E prod_i [W(L_{b_i}(0)) - W(L_{a_i}(0))]^{m_i}.

    Exact 0 if any m_i is odd; otherwise the Monte Carlo estimate described
    in the module docstring, drawn in fixed-size chunks from substreams
    ``stream/chunk/c`` so the value depends only on (spec, model, samples,
    stream).
    """
    model.require_local_time()
    if not spec.all_even:
        return MomentEstimate.exact_value(0.0)
    if mc_samples < 2:
        raise DomainError("need at least two Monte Carlo samples")
    lows, highs = [], []
    for (a, b), m in zip(spec.intervals, spec.multi_index):
        lows += [a] * (m // 2)
        highs += [b] * (m // 2)
    lows = np.array(lows)
    highs = np.array(highs)
    volume = float(np.prod(highs - lows))
    vals = []
    done = 0
    c = 0
    while done < mc_samples:
        size = min(CHUNK, mc_samples - done)
        vals.append(_integrand_chunk(model, lows, highs, volume, size, stream.substream("chunk", c)))
        done += size
        c += 1
    est = MomentEstimate.from_samples(np.concatenate(vals))
    return est.scaled(moment_prefactor(spec, model.d))


def clt_moment_target(
    spec: MomentSpec,
    model: HurstModel,
    f: TestFunction,
    mc_samples: int,
    stream: RngStream,
) -> MomentEstimate:
    """Limit of E prod_i (F_n(b_i) - F_n(a_i))^{m_i}.

    C_{H,d}^{|m|/2} ||f||_{1/H-d}^{|m|} E prod_i [W(L_{b_i}) - W(L_{a_i})]^{m_i}.
    """
    if not model.clt_regime:
        raise RegimeError(f"H={model.h:g}, d={model.d} is outside the CLT regime")
    if f.d != model.d:
        raise DomainError("test function and model dimensions differ")
    verify_membership(f, model.beta)
    if not spec.all_even:
        return MomentEstimate.exact_value(0.0)
    half = spec.order / 2.0
    chd = chd_closed_form(model).value
    norm2 = beta_norm_spectral(f, model.beta).value_squared
    base = limit_moment(spec, model, mc_samples, stream)
    return base.scaled(chd**half * norm2**half)


@dataclass(frozen=True)
class LndReport:
    min_ratio: float
    configs_tested: int
    worst_config: tuple  # (times, vectors)


def increment_covariance(model: HurstModel, times: np.ndarray) -> np.ndarray:
    """Cov(B(s_i) - B(s_{i-1}), B(s_j) - B(s_{j-1})) per coordinate, s_0 = 0.

    ``times`` has shape (..., n); the result has shape (..., n, n).
    """
    s = np.concatenate([np.zeros(times.shape[:-1] + (1,)), times], axis=-1)
    hi = s[..., 1:]
    lo = s[..., :-1]
    p = 2.0 * model.h
    g = lambda x, y: np.abs(x[..., :, None] - y[..., None, :]) ** p
    return 0.5 * (g(hi, lo) + g(lo, hi) - g(hi, hi) - g(lo, lo))


def lnd_scan(
    model: HurstModel,
    n_points: int,
    n_configs: int,
    stream: RngStream,
    horizon: float = 1.0,
) -> LndReport:
    """Randomized search for the local nondeterminism constant.

    For random times 0 < s_1 < ... < s_n <= horizon and unit vectors u_i in
    R^d, computes Var(sum_i u_i . (B(s_i) - B(s_{i-1}))) divided by
    sum_i |u_i|^2 (s_i - s_{i-1})^{2H} and reports the smallest ratio seen.
    Configurations with coincident times are redrawn.
    """
    if n_points < 1:
        raise DomainError("n_points must be >= 1")
    if n_configs < 1:
        raise DomainError("n_configs must be >= 1")
    d = model.d
    best = (math.inf, None, None)
    done = 0
    c = 0
    while done < n_configs:
        size = min(CHUNK, n_configs - done)
        gen = stream.substream("chunk", c).generator()
        s = np.sort(gen.uniform(size=(size, n_points)), axis=1) * horizon
        for _ in range(MAX_REDRAWS):
            bad = np.any(np.diff(s, axis=1, prepend=0.0) <= 1e-12 * horizon, axis=1)
            if not bad.any():
                break
            s[bad] = np.sort(gen.uniform(size=(int(bad.sum()), n_points)), axis=1) * horizon
        u = gen.standard_normal((size, n_points, d))
        u /= np.linalg.norm(u, axis=-1, keepdims=True)
        cov = increment_covariance(model, s)
        gram = np.einsum("cik,cjk->cij", u, u)
        var = np.einsum("cij,cij->c", gram, cov)
        ds = np.diff(s, axis=1, prepend=0.0)
        denom = np.sum(np.sum(u * u, axis=-1) * ds ** (2.0 * model.h), axis=1)
        ratio = var / denom
        i = int(np.argmin(ratio))
        if ratio[i] < best[0]:
            best = (float(ratio[i]), s[i].copy(), u[i].copy())
        done += size
        c += 1
    return LndReport(best[0], n_configs, (best[1], best[2]))
