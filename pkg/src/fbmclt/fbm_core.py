"""Fractional Brownian motion: covariance algebra and exact path sampling.

Paths are produced by circulant embedding of the fractional Gaussian noise
covariance (Davies-Harte), with a dense Cholesky factorization as the
fallback when the embedding is not numerically nonnegative definite.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import DomainError, FactorizationError, SamplingError
from .rng import RngStream

# Circulant eigenvalues in [-CLIP_TOL * max, 0) are treated as roundoff.
CLIP_TOL = 1e-9
CHOLESKY_MAX_STEPS = 8192
# Cholesky pivots below PIVOT_TOL * diagonal count as singular.
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class HurstModel:
    """Hurst index ``h`` of a ``d``-dimensional fBm."""

    h: float
    d: int = 1

    def __post_init__(self):
        h = float(self.h)
        if not 0.0 < h < 1.0 or not math.isfinite(h):
            raise DomainError(f"Hurst index must lie in (0, 1), got {self.h}")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "d", int(self.d))

    @property
    def hd(self) -> float:
        return self.h * self.d

    @property
    def clt_regime(self) -> bool:
        """True iff 1/(d+2) < H < 1/d."""
        return 1.0 / (self.d + 2) < self.h < 1.0 / self.d

    @property
    def beta(self) -> float:
        """Norm index 1/H - d used by the limit theorem."""
        return 1.0 / self.h - self.d

    def require_local_time(self) -> None:
        if self.hd >= 1.0:
            raise DomainError(
                f"local time at 0 requires H*d < 1, got H*d = {self.hd:g}"
            )


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * dt, k = 0..n_steps."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise DomainError(f"grid step must be positive, got {self.dt}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class FbmPath:
    """One sample path; ``values`` has shape (d, n_steps + 1) and starts at 0."""

    model: HurstModel
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = (self.model.d, self.grid.n_steps + 1)
        if values.shape != expected:
            raise DomainError(f"path values must have shape {expected}, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant_zero(cls, model: HurstModel, grid: TimeGrid) -> "FbmPath":
        """Degenerate path sitting at the origin, used for arithmetic checks."""
        return cls(model, grid, np.zeros((model.d, grid.n_steps + 1)))


def fbm_covariance(model: HurstModel, s, t):
    """Per-coordinate covariance E[B(s) B(t)] = (s^2H + t^2H - |t-s|^2H) / 2."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("fBm covariance is defined for nonnegative times only")
    two_h = 2.0 * model.h
    out = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(model: HurstModel, lag, dt: float = 1.0):
    """Autocovariance of fBm increments over steps of length ``dt`` at integer ``lag``."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    k = np.abs(np.asarray(lag, dtype=float))
    two_h = 2.0 * model.h
    out = dt**two_h * 0.5 * ((k + 1) ** two_h + np.abs(k - 1) ** two_h - 2.0 * k**two_h)
    return float(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=32)
def _circulant_factor(h: float, n: int):
    """sqrt(eigenvalues / M) of the 2(n-1) circulant embedding, or None."""
    c = fgn_autocovariance(HurstModel(h), np.arange(n))
    row = np.concatenate([c, c[-2:0:-1]])
    lam = np.fft.fft(row).real
    lam_max = lam.max()
    if lam.min() < -CLIP_TOL * lam_max:
        return None
    lam = np.clip(lam, 0.0, None)
    factor = np.sqrt(lam / row.size)
    factor.setflags(write=False)
    return factor


@functools.lru_cache(maxsize=8)
def _toeplitz_cholesky(h: float, n: int) -> np.ndarray:
    c = fgn_autocovariance(HurstModel(h), np.arange(n))
    idx = np.arange(n)
    cov = c[np.abs(idx[:, None] - idx[None, :])]
    chol = np.linalg.cholesky(cov)
    chol.setflags(write=False)
    return chol


class FbmSampler:
    """Exact sampler for fBm on a fixed grid.

    Parameters
    ----------
    model : HurstModel
    grid : TimeGrid
    method : {"auto", "circulant", "cholesky"}
        ``auto`` uses circulant embedding and drops to Cholesky only when the
        embedding has a significantly negative eigenvalue.

    The instance holds only read-only factor arrays, so one sampler can be
    shared between threads as long as each call gets its own stream.
    """

    def __init__(self, model: HurstModel, grid: TimeGrid, method: str = "auto"):
        if method not in ("auto", "circulant", "cholesky"):
            raise ValueError(f"unknown sampling method {method!r}")
        self.model = model
        self.grid = grid
        n = grid.n_steps
        self._factor = None
        self._chol = None
        if method != "cholesky" and n >= 2:
            self._factor = _circulant_factor(model.h, n)
            if self._factor is None and method == "circulant":
                raise SamplingError("circulant embedding is not nonnegative definite")
        if self._factor is None and n >= 2:
            if n > CHOLESKY_MAX_STEPS:
                raise SamplingError(
                    f"circulant embedding failed and n_steps={n} exceeds the "
                    f"Cholesky fallback limit {CHOLESKY_MAX_STEPS}"
                )
            self._chol = _toeplitz_cholesky(model.h, n)
        self.method = "cholesky" if self._chol is not None else "circulant"

    def increments(self, stream: RngStream) -> np.ndarray:
        """Increments on the grid, shape (d, n_steps)."""
        d, n = self.model.d, self.grid.n_steps
        gen = stream.generator()
        if n == 1:
            out = gen.standard_normal((d, 1))
        elif self._factor is not None:
            m = self._factor.size
            n_fft = (d + 1) // 2
            z = gen.standard_normal((n_fft, 2, m))
            w = np.fft.fft(self._factor * (z[:, 0] + 1j * z[:, 1]), axis=-1)[:, :n]
            # real and imaginary parts are independent copies
            out = np.stack([w.real, w.imag], axis=1).reshape(2 * n_fft, n)[:d]
        else:
            z = gen.standard_normal((d, n))
            out = z @ self._chol.T
        return out * self.grid.dt**self.model.h

    def sample(self, stream: RngStream) -> FbmPath:
        inc = self.increments(stream)
        values = np.zeros((self.model.d, self.grid.n_steps + 1))
        np.cumsum(inc, axis=1, out=values[:, 1:])
        return FbmPath(self.model, self.grid, values)


def sample_fbm(model: HurstModel, grid: TimeGrid, stream: RngStream, method: str = "auto") -> FbmPath:
    """Draw one fBm path; a pure function of (model, grid, stream, method)."""
    return FbmSampler(model, grid, method).sample(stream)


@dataclass(frozen=True)
class CovarianceFactor:
    """Scalar covariance matrix of (B^1(t_1), ..., B^1(t_k)) and its Cholesky factor."""

    times: np.ndarray
    matrix: np.ndarray
    cholesky: np.ndarray

    @property
    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.cholesky))))

    @property
    def det(self) -> float:
        return math.exp(self.logdet)


def scalar_covariance_matrix(model: HurstModel, times) -> CovarianceFactor:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if times.ndim != 1 or times.size == 0:
        raise DomainError("times must be a nonempty 1-d sequence")
    if np.any(times <= 0):
        raise DomainError("times must be strictly positive")
    if np.any(np.diff(times) <= 0):
        raise DomainError("times must be strictly increasing")
    k = fbm_covariance(model, times[:, None], times[None, :])
    k = np.atleast_2d(k)
    chol, info = lapack.dpotrf(k, lower=1, clean=1)
    if info > 0:
        raise FactorizationError(
            f"covariance not positive definite at index {info - 1}", index=info - 1
        )
    piv = np.diag(chol) ** 2
    bad = np.flatnonzero(piv <= PIVOT_TOL * np.diag(k))
    if bad.size:
        raise FactorizationError(
            f"covariance numerically singular at index {bad[0]} "
            f"(near-coincident times)", index=int(bad[0])
        )
    return CovarianceFactor(times, k, chol)


def batched_logdet(model: HurstModel, times: np.ndarray):
    """Log-determinants of many small scalar covariance matrices.

    ``times`` has shape (S, k), each row sorted ascending.  Returns
    ``(logdet, ok)`` where ``ok`` flags rows whose Cholesky factorization
    succeeded; failed rows carry a meaningless logdet.
    """
    times = np.asarray(times, dtype=float)
    s, k = times.shape
    cov = fbm_covariance(model, np.abs(times[:, :, None]), np.abs(times[:, None, :]))
    chol = np.zeros_like(cov)
    logdet = np.zeros(s)
    ok = np.all(times > 0, axis=1)
    for j in range(k):
        piv = cov[:, j, j] - np.sum(chol[:, j, :j] ** 2, axis=1)
        bad = ~(piv > PIVOT_TOL * cov[:, j, j])
        ok &= ~bad
        ljj = np.sqrt(np.where(bad, 1.0, piv))
        chol[:, j, j] = ljj
        logdet += 2.0 * np.log(ljj)
        if j + 1 < k:
            dot = np.einsum("sik,sk->si", chol[:, j + 1:, :j], chol[:, j, :j])
            chol[:, j + 1:, j] = (cov[:, j + 1:, j] - dot) / ljj[:, None]
    return logdet, ok


def write_path_csv(path: FbmPath, target) -> None:
    """Write ``t,coord_1,...,coord_d`` rows with 17 significant digits."""
    own = isinstance(target, (str, bytes)) or hasattr(target, "__fspath__")
    fh = open(target, "w", newline="") if own else target
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"coord_{i + 1}" for i in range(path.model.d)])
        for t, col in zip(path.grid.times, path.values.T):
            writer.writerow([format(t, ".17g")] + [format(v, ".17g") for v in col])
    finally:
        if own:
            fh.close()
