"""Implied volatility inversion and the skew generated by volatility uncertainty."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .distributions import MarketTerms, std_normal_pdf
from .errors import ConvergenceError, InvalidParameterError, OutOfBandError
from .pricing import PayoffKind, PayoffSpec, bs_price, d1_d2, price_bounds
from .uncertain_vol import VolBelief, marginal_price

SIGMA_MIN = 1e-8
SIGMA_MAX = 10.0


@dataclass(frozen=True)
class SkewPoint:
    strike: float
    implied_sigma: float
    price: float
    kind: PayoffKind = PayoffKind.PUT


def bs_vega(terms: MarketTerms, sigma: float, strike: float) -> float:
    """dV/dsigma for calls and puts (identical by parity)."""
    d = d1_d2(terms, sigma, strike)
    return terms.x0 * float(std_normal_pdf(d.d1)) * math.sqrt(terms.t)


def implied_vol(
    terms: MarketTerms,
    payoff: PayoffSpec,
    target_price: float,
    sigma_max: float = SIGMA_MAX,
    max_iter: int = 200,
) -> float:
    """Volatility at which the closed-form price equals ``target_price``.

    Safeguarded Newton: a Newton step on the analytic vega is taken when it
    stays inside the current bracket, otherwise the bracket is bisected.
    """
    if payoff.kind.is_binary:
        raise InvalidParameterError("implied volatility is defined for calls and puts only")
    if not terms.t > 0:
        raise InvalidParameterError("implied volatility needs t > 0")
    lower, upper = price_bounds(terms, payoff)
    if not lower < target_price < upper:
        raise OutOfBandError(
            f"target {target_price!r} outside the no-arbitrage band ({lower!r}, {upper!r})"
        )

    def excess(s):
        return bs_price(terms, s, payoff) - target_price

    lo, hi = SIGMA_MIN, sigma_max
    f_lo, f_hi = excess(lo), excess(hi)
    if f_hi < 0:
        raise OutOfBandError(
            f"target {target_price!r} needs a volatility above sigma_max={sigma_max}"
        )
    if f_lo > 0:
        raise OutOfBandError(f"target {target_price!r} needs a volatility below {lo}")
    stop = 4.0 * 2.2e-16 * max(upper, 1.0)

    sigma = min(max(0.3, lo), hi)
    f = excess(sigma)
    for _ in range(max_iter):
        if abs(f) <= stop:
            return sigma
        if f > 0:
            hi = sigma
        else:
            lo = sigma
        vega = bs_vega(terms, sigma, payoff.strike)
        candidate = sigma - f / vega if vega > 0 else math.nan
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        if candidate == sigma or hi - lo <= 1e-15 * hi:
            break
        sigma = candidate
        f = excess(sigma)
    if abs(f) <= 1e-10:
        return sigma
    raise ConvergenceError(
        f"implied volatility did not converge (price residual {abs(f):.3e})", abs(f)
    )


def skew_curve(
    terms: MarketTerms,
    belief: VolBelief,
    strikes: Iterable[float],
    kind: PayoffKind | str | None = None,
) -> list[SkewPoint]:
    """Implied volatilities of the marginal prices across ``strikes``.

    With ``kind=None`` puts are used at or below the forward and calls above
    it; parity makes both give the same implied volatility.
    """
    forward = terms.forward
    points = []
    for k in strikes:
        k = float(k)
        if kind is None:
            use = PayoffKind.PUT if k <= forward else PayoffKind.CALL
        else:
            use = PayoffKind(kind)
        payoff = PayoffSpec(use, k)
        price = marginal_price(terms, payoff, belief)
        points.append(SkewPoint(k, implied_vol(terms, payoff, price), price, use))
    return points
