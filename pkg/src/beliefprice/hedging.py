"""Spot and belief sensitivities, and the hedge holdings they imply.

Sign convention: ``dVdS`` is the derivative of the value with respect to spot;
the hedge holding that makes value plus hedge momentarily spot-invariant is
its negation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .distributions import MarketTerms, std_normal_cdf, std_normal_pdf
from .errors import InvalidParameterError
from .pricing import PayoffKind, PayoffSpec, bs_price, d1_d2
from .uncertain_vol import VolBelief, marginal_price, mixture, vol_quadrature

FD_REL_BUMP = 1e-5


@dataclass(frozen=True)
class HedgeReport:
    value: float
    dVdS: float
    hedge_units: float
    belief_sensitivities: Optional[tuple[float, float]] = None


def _degenerate_delta(terms: MarketTerms, payoff: PayoffSpec) -> float:
    # point mass on the forward: vanilla deltas become steps, binary deltas vanish
    growth = 1.0 if terms.t == 0 else terms.growth
    level = terms.x0 * growth
    k = payoff.strike
    if payoff.kind is PayoffKind.CALL:
        return 1.0 if level > k else (0.5 if level == k else 0.0)
    if payoff.kind is PayoffKind.PUT:
        return -1.0 if level < k else (-0.5 if level == k else 0.0)
    return 0.0


def bs_delta(terms: MarketTerms, sigma: float, payoff: PayoffSpec) -> float:
    """Analytic dV/dS of the closed-form price."""
    if sigma < 0:
        raise InvalidParameterError("sigma must be >= 0")
    if sigma == 0 or terms.t == 0:
        return _degenerate_delta(terms, payoff)
    d = d1_d2(terms, sigma, payoff.strike)
    if payoff.kind is PayoffKind.CALL:
        return std_normal_cdf(d.d1)
    if payoff.kind is PayoffKind.PUT:
        return std_normal_cdf(d.d1) - 1.0
    sigma_hat = sigma * math.sqrt(terms.t)
    slope = terms.discount * float(std_normal_pdf(d.d2)) / (terms.x0 * sigma_hat)
    return slope if payoff.kind is PayoffKind.BINARY_CALL else -slope


def marginal_delta(terms: MarketTerms, payoff: PayoffSpec, belief: VolBelief) -> float:
    """Belief-weighted mixture of analytic deltas on the pricing nodes."""
    sigmas, weights = vol_quadrature(belief)
    return mixture(weights, [bs_delta(terms, float(s), payoff) for s in sigmas])


def central_difference(
    func: Callable[[float], float], x: float, rel_bump: float = FD_REL_BUMP
) -> float:
    h = rel_bump * max(abs(x), 1.0)
    return (func(x + h) - func(x - h)) / (2.0 * h)


def fd_delta(
    terms: MarketTerms,
    price: Callable[[MarketTerms], float],
    rel_bump: float = FD_REL_BUMP,
) -> float:
    """Central finite difference of ``price`` in spot."""
    h = rel_bump * terms.x0
    up = price(replace(terms, x0=terms.x0 + h))
    down = price(replace(terms, x0=terms.x0 - h))
    return (up - down) / (2.0 * h)


def belief_greeks(
    terms: MarketTerms,
    payoff: PayoffSpec,
    belief: VolBelief,
    rel_bump: float = FD_REL_BUMP,
) -> tuple[float, float]:
    """(dV/d mu_ln, dV/d s_ln) by central differences of the marginal price."""
    if not belief.s_ln > 0:
        raise InvalidParameterError("belief greeks need s_ln > 0")
    if rel_bump * max(belief.s_ln, 1.0) >= belief.s_ln:
        raise InvalidParameterError("s_ln too small for a central difference")

    def by_mu(mu):
        return marginal_price(terms, payoff, replace(belief, mu_ln=mu))

    def by_s(s):
        return marginal_price(terms, payoff, replace(belief, s_ln=s))

    return (
        central_difference(by_mu, belief.mu_ln, rel_bump),
        central_difference(by_s, belief.s_ln, rel_bump),
    )


def hedge_report(
    terms: MarketTerms,
    payoff: PayoffSpec,
    sigma: Optional[float] = None,
    belief: Optional[VolBelief] = None,
) -> HedgeReport:
    """Value, spot sensitivity and hedge holding under a certain or uncertain vol."""
    if (sigma is None) == (belief is None):
        raise InvalidParameterError("pass exactly one of sigma or belief")
    if belief is None:
        value = bs_price(terms, sigma, payoff)
        dvds = bs_delta(terms, sigma, payoff)
        extra = None
    else:
        value = marginal_price(terms, payoff, belief)
        dvds = marginal_delta(terms, payoff, belief)
        extra = belief_greeks(terms, payoff, belief) if belief.s_ln > 0 else None
    return HedgeReport(value=value, dVdS=dvds, hedge_units=-dvds, belief_sensitivities=extra)
