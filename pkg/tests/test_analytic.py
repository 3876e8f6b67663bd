import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbmclt.analytic import (
    beta_norm_direct,
    beta_norm_spectral,
    chd_closed_form,
    chd_quadrature,
    gamma_bound,
    riesz_constant,
    spectral_integral,
)
from fbmclt.errors import DomainError, RegimeError
from fbmclt.fbm_core import HurstModel
from fbmclt.testfunc import TestFunction


def riesz_closed_form(beta, d):
    """Fourier constant of -|x|^beta as a tempered distribution, for 0 < beta < 2."""
    return (
        (2 * math.pi) ** (-d) * math.pi ** (d / 2) * 2 ** (d + beta)
        * math.gamma((d + beta) / 2) / abs(math.gamma(-beta / 2))
    )


def gaussian_diff_norm2(f, beta):
    """Closed form of -int int f f |x-y|^beta for a Gaussian difference.

    x - y for independent Gaussians of scales s_i, s_j is Gaussian with
    variance s_i^2 + s_j^2, and E|N(0, s^2 I_d)|^beta is elementary.
    """
    terms = [(f.sigma1, f.amplitude), (f.sigma2, -f.amplitude)]
    k = 2 ** (beta / 2) * math.gamma((f.d + beta) / 2) / math.gamma(f.d / 2)
    return -sum(ai * aj * k * (si**2 + sj**2) ** (beta / 2) for si, ai in terms for sj, aj in terms)


@dataclass(frozen=True)
class FunctionSum:
    """Pointwise sum of two radial test functions, for seminorm inequalities."""

    f: TestFunction
    g: TestFunction

    @property
    def d(self):
        return self.f.d

    @property
    def scale(self):
        return (min(self.f.scale[0], self.g.scale[0]), max(self.f.scale[1], self.g.scale[1]))

    def radial(self, r2):
        return self.f.radial(r2) + self.g.radial(r2)

    def fourier_radial(self, rho2):
        return self.f.fourier_radial(rho2) + self.g.fourier_radial(rho2)


NORM_FUNCTIONS = [(1.0, 2.0, 1.0), (0.5, 1.5, 1.0), (0.7, 3.0, 2.5)]


class TestChd:
    def test_brownian_value(self):
        assert chd_closed_form(HurstModel(0.5, 1)).value == pytest.approx(2.0, abs=1e-10)

    def test_frozen_value(self):
        assert chd_closed_form(HurstModel(0.4, 1)).value == pytest.approx(2.8668, abs=5e-5)

    @pytest.mark.parametrize("h,d", [(0.35, 1), (0.4, 1), (0.45, 1), (0.5, 1), (0.3, 2), (0.26, 2), (0.45, 2), (0.21, 3)])
    def test_quadrature_matches(self, h, d):
        model = HurstModel(h, d)
        closed = chd_closed_form(model).value
        quad = chd_quadrature(model)
        print(f"H={h} d={d}: closed {closed:.12g} quad {quad.value:.12g} err {quad.abs_error_estimate:.1e}")
        assert abs(quad.value - closed) <= 1e-6 * closed

    @settings(max_examples=25, deadline=None)
    @given(u=st.floats(0.02, 0.98), d=st.sampled_from([1, 2]))
    def test_quadrature_sweep(self, u, d):
        lo, hi = 1 / (d + 2), 1 / d
        model = HurstModel(lo + u * (hi - lo), d)
        closed = chd_closed_form(model).value
        assert chd_quadrature(model).value == pytest.approx(closed, rel=1e-6)

    @pytest.mark.parametrize("h,d", [(0.3, 1), (1 / 3, 1), (0.55, 2), (0.25, 2), (0.2, 3)])
    def test_outside_regime(self, h, d):
        with pytest.raises(RegimeError):
            chd_closed_form(HurstModel(h, d))
        with pytest.raises(RegimeError):
            chd_quadrature(HurstModel(h, d))

    def test_diverges_toward_lower_edge(self):
        hs = [0.45, 0.4, 0.37, 0.35, 0.34, 0.335]
        vals = [chd_closed_form(HurstModel(h)).value for h in hs]
        print(dict(zip(hs, np.round(vals, 3))))
        assert np.all(np.diff(vals) > 0)
        assert vals[-1] > 10 * vals[0]

    def test_gamma_bound(self):
        assert gamma_bound(HurstModel(0.4, 1)) == pytest.approx(0.1)
        assert gamma_bound(HurstModel(0.45, 1)) == pytest.approx(0.175)
        assert gamma_bound(HurstModel(0.5, 1)) == pytest.approx(0.25)
        for h in np.linspace(0.34, 0.99, 30):
            assert gamma_bound(HurstModel(h)) > 0


class TestRieszConstant:
    @pytest.mark.parametrize("beta", [0.5, 1.0, 1.5])
    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_matches_closed_form(self, beta, d):
        c = riesz_constant(beta, d)
        print(f"beta={beta} d={d}: {c:.10g} vs {riesz_closed_form(beta, d):.10g}")
        assert c == pytest.approx(riesz_closed_form(beta, d), rel=1e-8)

    def test_product_identity(self):
        # C_{H,d} c_{beta,d} = 2 kappa (2 pi)^-d, kappa = 2^{1/(2H)} Gamma(1 + 1/(2H))
        for h, d in [(0.4, 1), (0.45, 1), (0.3, 2)]:
            model = HurstModel(h, d)
            kappa = 2 ** (1 / (2 * h)) * math.gamma(1 + 1 / (2 * h))
            prod = chd_closed_form(model).value * riesz_constant(model.beta, d)
            assert prod == pytest.approx(2 * kappa * (2 * math.pi) ** (-d), rel=1e-8)

    @pytest.mark.parametrize("beta", [0.0, 2.0, -1.0])
    def test_beta_range(self, beta):
        with pytest.raises(DomainError):
            riesz_constant(beta, 1)


class TestSeminorm:
    @pytest.mark.parametrize("d", [1, 2, 3])
    @pytest.mark.parametrize("beta", [0.6, 1.0, 1.5])
    @pytest.mark.parametrize("s1,s2,a", NORM_FUNCTIONS)
    def test_direct_against_closed_form(self, d, beta, s1, s2, a):
        f = TestFunction(sigma1=s1, sigma2=s2, amplitude=a, d=d)
        exact = gaussian_diff_norm2(f, beta)
        assert beta_norm_direct(f, beta).value_squared == pytest.approx(exact, rel=1e-8)

    @pytest.mark.parametrize("d,beta", [(1, 1.5), (1, 0.6), (2, 1.0 / 0.3 - 2)])
    @pytest.mark.parametrize("s1,s2,a", NORM_FUNCTIONS)
    def test_duality(self, d, beta, s1, s2, a):
        f = TestFunction(sigma1=s1, sigma2=s2, amplitude=a, d=d)
        direct = beta_norm_direct(f, beta).value_squared
        spectral = beta_norm_spectral(f, beta).value_squared
        assert direct >= -1e-8 and spectral >= -1e-8
        assert spectral == pytest.approx(direct, rel=5e-3)

    def test_frozen_reference_norm(self, ref_function):
        assert beta_norm_spectral(ref_function, 1.5).value_squared == pytest.approx(0.213962, abs=5e-6)

    def test_homogeneity(self, ref_function):
        base = beta_norm_spectral(ref_function, 1.5).value_squared
        double = beta_norm_spectral(ref_function.scaled(2.0), 1.5).value_squared
        assert double == pytest.approx(4 * base, rel=1e-12)
        assert beta_norm_direct(ref_function.scaled(2.0), 1.5).value_squared == pytest.approx(4 * base, rel=1e-8)

    def test_equal_scales_give_zero(self):
        f = TestFunction(sigma1=1.2, sigma2=1.2)
        assert beta_norm_direct(f, 1.5).value_squared == 0.0
        assert beta_norm_spectral(f, 1.5).value_squared == 0.0

    def test_norm_property(self, ref_function):
        assert beta_norm_spectral(ref_function, 1.5).value == pytest.approx(math.sqrt(0.213962), abs=1e-5)

    def test_spectral_integral_positive(self, ref_function):
        assert spectral_integral(ref_function, 1.5) > 0

    @pytest.mark.parametrize("pair", [
        ((1.0, 2.0, 1.0), (0.5, 1.5, -2.0)),
        ((0.3, 0.9, 1.5), (1.0, 4.0, 0.5)),
        ((0.6, 1.2, -1.0), (0.6, 2.4, 1.0)),
    ])
    @pytest.mark.parametrize("d,beta", [(1, 1.5), (2, 1.0 / 0.3 - 2)])
    def test_triangle_inequality(self, pair, d, beta):
        f = TestFunction(*("gaussian_diff",), *pair[0], d=d)
        g = TestFunction(*("gaussian_diff",), *pair[1], d=d)
        fg = FunctionSum(f, g)
        nf = beta_norm_direct(f, beta).value
        ng = beta_norm_direct(g, beta).value
        nfg_direct = math.sqrt(max(beta_norm_direct(fg, beta).value_squared, 0.0))
        nfg_spec = math.sqrt(riesz_constant(beta, d) * spectral_integral(fg, beta))
        assert nfg_direct == pytest.approx(nfg_spec, rel=1e-6)
        assert nfg_direct <= nf + ng + 1e-12
