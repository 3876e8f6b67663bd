"""Numerical toolkit for the central limit theorem of additive functionals of fBm."""

__version__ = "0.1.0"

from .analytic import (  # noqa: E402
    BetaNorm,
    ChdValue,
    beta_norm_direct,
    beta_norm_spectral,
    chd_closed_form,
    chd_quadrature,
    gamma_bound,
    riesz_constant,
)
from .fbm_core import (  # noqa: E402
    FbmPath,
    FbmSampler,
    HurstModel,
    TimeGrid,
    fbm_covariance,
    fgn_autocovariance,
    sample_fbm,
    scalar_covariance_matrix,
)
from .functionals import (  # noqa: E402
    additive_functional,
    expected_local_time,
    first_order_functional,
    local_time_estimate,
    simulate_limit_variable,
)
from .moments import MomentSpec, clt_moment_target, limit_moment, lnd_scan  # noqa: E402
from .rng import RngStream  # noqa: E402
from .stats import MomentEstimate  # noqa: E402
from .testfunc import TestFunction, verify_membership  # noqa: E402
