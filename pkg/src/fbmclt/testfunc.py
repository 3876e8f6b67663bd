"""Radial Gaussian test functions with closed-form Fourier transforms.

The Fourier convention is f_hat(xi) = int f(x) exp(-i <xi, x>) dx, so a
unit-mass Gaussian of scale s transforms to exp(-s^2 |xi|^2 / 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import DomainError, MembershipError

KINDS = ("gaussian_diff", "gaussian")


def sphere_area(d: int) -> float:
    """Surface area of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@dataclass(frozen=True)
class TestFunction:
    """``amplitude * (g_sigma1 - g_sigma2)`` or a single Gaussian ``amplitude * g_sigma1``.

    ``g_s`` is the centered Gaussian density with covariance s^2 I_d.  The
    ``gaussian`` kind has nonzero integral and exists for the first-order
    (law of large numbers) functional only.
    """

    __test__ = False  # not a pytest class

    kind: str = "gaussian_diff"
    sigma1: float = 1.0
    sigma2: float = 2.0
    amplitude: float = 1.0
    d: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown test function kind {self.kind!r}")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise DomainError("Gaussian scales must be positive")
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d}")
        for name in ("sigma1", "sigma2", "amplitude"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "d", int(self.d))

    # ---- construction / serialization -------------------------------------
    @classmethod
    def gaussian(cls, sigma: float = 1.0, amplitude: float = 1.0, d: int = 1) -> "TestFunction":
        return cls("gaussian", sigma, sigma, amplitude, d)

    @classmethod
    def from_dict(cls, data: dict) -> "TestFunction":
        try:
            kind = data.get("kind", "gaussian_diff")
            sigma1 = data["sigma1"]
            sigma2 = data.get("sigma2", sigma1)
            return cls(kind, sigma1, sigma2, data.get("amplitude", 1.0), data.get("dim", 1))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"bad test function descriptor {data!r}: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
            "amplitude": self.amplitude,
            "dim": self.d,
        }

    def scaled(self, factor: float) -> "TestFunction":
        return TestFunction(self.kind, self.sigma1, self.sigma2, self.amplitude * factor, self.d)

    # ---- evaluation --------------------------------------------------------
    def _terms(self):
        if self.kind == "gaussian":
            return ((self.sigma1, self.amplitude),)
        return ((self.sigma1, self.amplitude), (self.sigma2, -self.amplitude))

    @property
    def integral(self) -> float:
        return self.amplitude if self.kind == "gaussian" else 0.0

    def radial(self, r2):
        """f as a function of the squared radius |x|^2."""
        r2 = np.asarray(r2, dtype=float)
        out = np.zeros_like(r2)
        for s, a in self._terms():
            out = out + a * (2.0 * math.pi * s * s) ** (-self.d / 2) * np.exp(-r2 / (2.0 * s * s))
        return out

    def __call__(self, x):
        """Evaluate at points ``x`` of shape (..., d); for d = 1 a bare array works too."""
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            return self.radial(x * x)
        if x.shape[-1] != self.d:
            raise DomainError(f"points must have trailing dimension {self.d}")
        return self.radial(np.sum(x * x, axis=-1))

    eval = __call__

    def fourier_radial(self, rho2):
        """f_hat as a function of |xi|^2; real because f is even."""
        rho2 = np.asarray(rho2, dtype=float)
        out = np.zeros_like(rho2)
        for s, a in self._terms():
            out = out + a * np.exp(-s * s * rho2 / 2.0)
        return out

    def fourier_eval(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.d == 1 and (xi.ndim == 0 or xi.shape[-1] != 1):
            return self.fourier_radial(xi * xi)
        if xi.shape[-1] != self.d:
            raise DomainError(f"frequencies must have trailing dimension {self.d}")
        return self.fourier_radial(np.sum(xi * xi, axis=-1))

    @property
    def scale(self) -> tuple:
        """(smallest, largest) Gaussian scale present."""
        return min(self.sigma1, self.sigma2), max(self.sigma1, self.sigma2)


@dataclass(frozen=True)
class MembershipCertificate:
    beta: float
    abs_moment: float
    integral: float


def _sign_change(f: TestFunction):
    """Radius where a Gaussian difference changes sign, if any."""
    lo, hi = f.scale
    if f.kind != "gaussian_diff" or lo == hi:
        return None
    g = lambda r: float(f.radial(r * r))
    return optimize.brentq(g, 1e-12, 10 * hi)


def radial_integral(func, d: int, breaks=(), upper=np.inf) -> float:
    """int_{R^d} func(|x|) dx via the radial reduction, split at ``breaks``."""
    area = sphere_area(d)
    pts = [0.0] + sorted(b for b in breaks if b is not None) + [upper]
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(lambda r: func(r) * r ** (d - 1), a, b, limit=200,
                                epsabs=1e-15, epsrel=1e-12)
        total += val
    return area * total


def verify_membership(f: TestFunction, beta: float) -> MembershipCertificate:
    """Check f in H_0^beta: finite absolute beta-moment and zero integral.

    Raises :class:`MembershipError` naming the violated condition.
    """
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    r0 = _sign_change(f)
    moment = radial_integral(lambda r: abs(float(f.radial(r * r))) * r**beta, f.d, (r0,))
    mass = radial_integral(lambda r: float(f.radial(r * r)), f.d, (r0,))
    if not math.isfinite(moment):
        raise MembershipError(f"absolute {beta}-moment is not finite")
    if abs(mass) > 1e-12:
        raise MembershipError(f"integral of f is {mass:.3e}, not zero")
    return MembershipCertificate(beta, moment, mass)
