"""Closed-form and quadrature evaluation of the limit-theorem constants.

Three objects live here:

* ``C_{H,d}``, the variance constant of the limit, both from its Gamma
  function expression and from the defining integral;
* the singular seminorm ``||f||_beta^2 = -int int f(x) f(y) |x-y|^beta``
  evaluated directly and through the spectral representation
  ``c_{beta,d} int |f_hat|^2 |xi|^(-beta-d)``;
* ``c_{beta,d}`` itself, obtained by calibrating the two representations
  against each other on reference Gaussian differences.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import CalibrationError, ConsistencyError, DomainError, NumericalError, RegimeError
from .fbm_core import HurstModel
from .testfunc import TestFunction, sphere_area

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8
CALIBRATION_RTOL = 1e-4
NEGATIVE_TOL = 1e-8

REFERENCE_PRIMARY = (1.0, 2.0)
REFERENCE_SECONDARY = (0.5, 1.5)


@dataclass(frozen=True)
class ChdValue:
    value: float
    method: str
    abs_error_estimate: float


@dataclass(frozen=True)
class BetaNorm:
    beta: float
    value_squared: float
    method: str

    @property
    def value(self) -> float:
        return math.sqrt(max(self.value_squared, 0.0))


def _require_regime(model: HurstModel) -> None:
    if not model.clt_regime:
        raise RegimeError(
            f"C_(H,d) is infinite or undefined outside 1/(d+2) < H < 1/d "
            f"(H={model.h:g}, d={model.d})"
        )


def _quad(func, a, b, **kw):
    """scipy quad that raises instead of warning on non-convergence."""
    opts = dict(epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
    opts.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            return integrate.quad(func, a, b, **opts)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature did not converge: {exc}") from None


def chd_closed_form(model: HurstModel) -> ChdValue:
    """2^(1-1/(2H)) Gamma((Hd+2H-1)/(2H)) / ((1-Hd) pi^(d/2))."""
    _require_regime(model)
    h, d = model.h, model.d
    value = (
        2.0 ** (1.0 - 1.0 / (2.0 * h))
        * math.gamma((h * d + 2.0 * h - 1.0) / (2.0 * h))
        / ((1.0 - h * d) * math.pi ** (d / 2.0))
    )
    return ChdValue(value, "closed_form", 8 * np.finfo(float).eps * value)


def chd_quadrature(model: HurstModel) -> ChdValue:
    """2 (2 pi)^(-d/2) int_0^inf w^(-Hd) (1 - exp(-1/(2 w^2H))) dw.

    Split at w = 1.  On (0, 1] the substitution w = x^p, p = 1/(1-Hd),
    absorbs the w^(-Hd) singularity.  On [1, inf) the map w = 1/v followed by
    v = y^q, q = 1/(Hd+2H-1), absorbs the v^(Hd+2H-2) endpoint behaviour.
    Both transformed integrands are bounded and smooth.
    """
    _require_regime(model)
    h, d = model.h, model.d
    p = 1.0 / (1.0 - h * d)
    q = 1.0 / (h * d + 2.0 * h - 1.0)

    def head(x):
        expo = -2.0 * h * p * math.log(x) if x > 0.0 else math.inf
        if expo > 700.0:
            return p
        return p * -math.expm1(-0.5 * math.exp(expo))

    def tail(y):
        u = y ** (2.0 * h * q)
        phi = 0.5 if u < 1e-12 else -math.expm1(-0.5 * u) / u
        return q * phi

    a, err_a = _quad(head, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    b, err_b = _quad(tail, 0.0, 1.0, epsabs=1e-13, epsrel=1e-12)
    pref = 2.0 * (2.0 * math.pi) ** (-d / 2.0)
    err = pref * (err_a + err_b)
    if err > 1e-8:
        raise NumericalError(f"C_(H,d) quadrature error estimate {err:.2e} exceeds 1e-8")
    return ChdValue(pref * (a + b), "quadrature", err)


def gamma_bound(model: HurstModel) -> float:
    """Supremum of admissible error-rate exponents gamma for the moment bounds.

    gamma < (1-Hd)/2 when 1-Hd <= H, and gamma < (Hd+2H-1)/2 when
    H < 1-Hd < 2H.
    """
    _require_regime(model)
    h, hd = model.h, model.hd
    if 1.0 - hd <= h:
        return (1.0 - hd) / 2.0
    return (hd + 2.0 * h - 1.0) / 2.0


# ---- singular seminorm ------------------------------------------------------

def _check_beta(beta: float) -> None:
    if not 0.0 < beta < 2.0:
        raise DomainError(f"beta must lie in (0, 2), got {beta}")


def _panel_nodes(upper: float, width: float, order: int, graded: int = 0):
    """Composite Gauss-Legendre nodes/weights on [0, upper].

    With ``graded > 0`` the first panel is split geometrically ``graded``
    times toward 0, which restores fast convergence for r^beta endpoint
    behaviour.
    """
    n_panels = max(1, int(math.ceil(upper / width)))
    edges = np.linspace(0.0, upper, n_panels + 1)
    if graded:
        first = edges[1] * 0.5 ** np.arange(graded, 0, -1)
        edges = np.concatenate([[0.0], first, edges[1:]])
    x, w = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def spectral_integral(f: TestFunction, beta: float) -> float:
    """int_{R^d} |f_hat(xi)|^2 |xi|^(-beta-d) d xi, reduced to a radial integral.

    f_hat(0) = 0 makes |f_hat(r)|^2 = O(r^4), so the integrand r^(-beta-1)
    |f_hat(r)|^2 vanishes at the origin.
    """
    _check_beta(beta)
    lo, hi = f.scale
    g = lambda r: float(f.fourier_radial(r * r)) ** 2 * r ** (-beta - 1.0) if r > 0 else 0.0
    pts = [0.0, 0.5 / hi, 2.0 / hi, 2.0 / lo, 12.0 / lo]
    pts = sorted(set(pts))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, _ = _quad(g, a, b, epsabs=1e-14, epsrel=1e-12)
        total += val
    return sphere_area(f.d) * total


def beta_norm_direct(f: TestFunction, beta: float, order: int = 12) -> BetaNorm:
    """-int int f(x) f(y) |x-y|^beta dx dy by tensor Gauss-Legendre quadrature.

    With u = x - y and v = x + y the integrand becomes
    2^-d f((v+u)/2) f((v-u)/2) |u|^beta.  Radial symmetry of f lets u run
    along one axis (weighted by the sphere area), and v is taken in polar
    form (rho, phi) about that axis, giving a tensor rule in (r, rho) for
    d = 1 and (r, rho, phi) for d >= 2.  The box is cut where the Gaussian
    envelope exp(-(r^2 + rho^2) / (4 sigma_max^2)) drops below 1e-16.
    """
    _check_beta(beta)
    d = f.d
    lo, hi = f.scale
    cutoff = 2.0 * hi * math.sqrt(16.0 * math.log(10.0))
    r, wr = _panel_nodes(cutoff, 1.5 * lo, order, graded=24)
    rho, wrho = _panel_nodes(cutoff, 1.5 * lo, order)

    if d == 1:
        # v ranges over R; the integrand is even in v
        rr = r[:, None]
        vv = rho[None, :]
        inner = 2.0 * (f.radial(((vv + rr) / 2.0) ** 2) * f.radial(((vv - rr) / 2.0) ** 2)) @ wrho
    else:
        x, w = np.polynomial.legendre.leggauss(48)
        phi = 0.5 * math.pi * (x + 1.0)
        wphi = 0.5 * math.pi * w * np.sin(phi) ** (d - 2)
        cos_phi = np.cos(phi)
        shell = sphere_area(d - 1) * wrho * rho ** (d - 1)
        inner = np.empty_like(r)
        base = rho[:, None] ** 2
        cross = rho[:, None] * cos_phi[None, :]
        for i, ri in enumerate(r):
            plus = (base + ri * ri + 2.0 * ri * cross) / 4.0
            minus = (base + ri * ri - 2.0 * ri * cross) / 4.0
            vals = f.radial(plus) * f.radial(minus)
            inner[i] = shell @ (vals @ wphi)

    radial = sphere_area(d) * np.sum(wr * r ** (beta + d - 1.0) * inner)
    value = -(2.0 ** -d) * radial
    if value < -NEGATIVE_TOL:
        raise ConsistencyError(f"||f||_beta^2 evaluated to {value:.3e} < 0")
    return BetaNorm(beta, float(value), "direct")


_CALIBRATION_CACHE: dict = {}
_CALIBRATION_LOCK = threading.Lock()


def riesz_constant(beta: float, d: int, order: int = 12) -> float:
    """c_{beta,d} making the direct and spectral forms of ||f||_beta^2 coincide.

    Calibrated on the Gaussian difference (1, 2), then checked on (0.5, 1.5);
    a relative mismatch above 1e-4 raises :class:`CalibrationError`.  Results
    are cached per (beta, d, order).
    """
    _check_beta(beta)
    key = (float(beta), int(d), int(order))
    cached = _CALIBRATION_CACHE.get(key)
    if cached is not None:
        return cached
    with _CALIBRATION_LOCK:
        cached = _CALIBRATION_CACHE.get(key)
        if cached is not None:
            return cached
        ref1 = TestFunction("gaussian_diff", *REFERENCE_PRIMARY, 1.0, d)
        ref2 = TestFunction("gaussian_diff", *REFERENCE_SECONDARY, 1.0, d)
        c = beta_norm_direct(ref1, beta, order).value_squared / spectral_integral(ref1, beta)
        direct2 = beta_norm_direct(ref2, beta, order).value_squared
        spectral2 = c * spectral_integral(ref2, beta)
        resid = abs(direct2 - spectral2) / abs(direct2)
        if not c > 0 or resid > CALIBRATION_RTOL:
            raise CalibrationError(
                f"c_(beta,d) calibration inconsistent for beta={beta}, d={d}: "
                f"c={c:.6g}, residual {resid:.2e}"
            )
        _CALIBRATION_CACHE[key] = c
        return c


def beta_norm_spectral(f: TestFunction, beta: float) -> BetaNorm:
    _check_beta(beta)
    c = riesz_constant(beta, f.d)
    return BetaNorm(beta, c * spectral_integral(f, beta), "spectral")
