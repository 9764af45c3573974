"""Derivative prices as discounted expectations under explicit beliefs."""

from .distributions import (
    LogNormalDist,
    MarketTerms,
    MaxEntDist,
    MomentSpec,
    from_expected_return,
    implied_growth_rate,
    lognormal_pdf,
    maxent_fit,
    maxent_moments,
    maxent_pdf,
    partial_first,
    partial_zeroth,
    std_normal_cdf,
)
from .errors import (
    ConvergenceError,
    DomainError,
    InfeasibleError,
    InfeasibleMomentsError,
    InvalidParameterError,
    OutOfBandError,
    PricingError,
    QuadratureError,
)
from .hedging import HedgeReport, belief_greeks, bs_delta, hedge_report, marginal_delta
from .implied_vol import SkewPoint, implied_vol, skew_curve
from .portfolio import (
    Allocation,
    Instrument,
    RiskLimits,
    expected_shortfall,
    loss_probability,
    make_instrument,
    optimize,
    pnl_profile,
    portfolio_values,
)
from .pricing import (
    D1D2,
    PayoffKind,
    PayoffSpec,
    binary_call,
    binary_put,
    bs_call,
    bs_price,
    bs_put,
    d1_d2,
    expected_payoff_price,
)
from .uncertain_vol import VolBelief, marginal_price, price_curve, vol_quadrature

__version__ = "0.1.0"
