"""European payoffs valued as discounted expectations.

Closed forms cover the lognormal belief whose mean grows at the risk-free
rate; :func:`expected_payoff_price` integrates any payoff against any density
and is the independent route the closed forms are checked against.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .distributions import Density, MarketTerms, std_normal_cdf
from .errors import InvalidParameterError
from .quadrature import adaptive_gauss_legendre


class PayoffKind(str, enum.Enum):
    CALL = "call"
    PUT = "put"
    BINARY_CALL = "binary_call"
    BINARY_PUT = "binary_put"

    @property
    def is_binary(self) -> bool:
        return self in (PayoffKind.BINARY_CALL, PayoffKind.BINARY_PUT)

    @property
    def is_call_like(self) -> bool:
        return self in (PayoffKind.CALL, PayoffKind.BINARY_CALL)


@dataclass(frozen=True)
class PayoffSpec:
    kind: PayoffKind
    strike: float

    def __post_init__(self):
        object.__setattr__(self, "kind", PayoffKind(self.kind))
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise InvalidParameterError(f"strike must be finite and > 0, got {self.strike}")

    def __call__(self, x):
        """Payoff at terminal price ``x``. Binaries pay one half exactly at the strike."""
        x = np.asarray(x, dtype=float)
        k = self.strike
        if self.kind is PayoffKind.CALL:
            out = np.maximum(x - k, 0.0)
        elif self.kind is PayoffKind.PUT:
            out = np.maximum(k - x, 0.0)
        elif self.kind is PayoffKind.BINARY_CALL:
            out = np.where(x > k, 1.0, np.where(x == k, 0.5, 0.0))
        else:
            out = np.where(x < k, 1.0, np.where(x == k, 0.5, 0.0))
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class D1D2:
    d1: float
    d2: float


def _check_inputs(terms: MarketTerms, sigma: float, strike: float) -> None:
    if not (math.isfinite(sigma) and sigma >= 0):
        raise InvalidParameterError(f"sigma must be finite and >= 0, got {sigma}")
    if not (math.isfinite(strike) and strike > 0):
        raise InvalidParameterError(f"strike must be finite and > 0, got {strike}")


def d1_d2(terms: MarketTerms, sigma: float, strike: float) -> D1D2:
    if not sigma > 0 or not terms.t > 0 or not strike > 0:
        raise InvalidParameterError("d1_d2 needs sigma > 0, t > 0 and strike > 0")
    sigma_hat = sigma * math.sqrt(terms.t)
    d2 = -(math.log(strike / terms.x0) - terms.r * terms.t + 0.5 * sigma_hat**2) / sigma_hat
    return D1D2(d1=d2 + sigma_hat, d2=d2)


def _degenerate_price(terms: MarketTerms, kind: PayoffKind, strike: float) -> float:
    # all mass sits on the forward; t == 0 collapses to the payoff at spot
    if terms.t == 0:
        return PayoffSpec(kind, strike)(terms.x0)
    return terms.discount * PayoffSpec(kind, strike)(terms.forward)


def bs_put(terms: MarketTerms, sigma: float, strike: float) -> float:
    _check_inputs(terms, sigma, strike)
    if sigma == 0 or terms.t == 0:
        return _degenerate_price(terms, PayoffKind.PUT, strike)
    d = d1_d2(terms, sigma, strike)
    value = terms.discount * strike * std_normal_cdf(-d.d2) - terms.x0 * std_normal_cdf(-d.d1)
    return max(value, 0.0)


def bs_call(terms: MarketTerms, sigma: float, strike: float) -> float:
    _check_inputs(terms, sigma, strike)
    if sigma == 0 or terms.t == 0:
        return _degenerate_price(terms, PayoffKind.CALL, strike)
    d = d1_d2(terms, sigma, strike)
    value = terms.x0 * std_normal_cdf(d.d1) - terms.discount * strike * std_normal_cdf(d.d2)
    return max(value, 0.0)


def binary_call(terms: MarketTerms, sigma: float, strike: float) -> float:
    _check_inputs(terms, sigma, strike)
    if sigma == 0 or terms.t == 0:
        return _degenerate_price(terms, PayoffKind.BINARY_CALL, strike)
    return terms.discount * std_normal_cdf(d1_d2(terms, sigma, strike).d2)


def binary_put(terms: MarketTerms, sigma: float, strike: float) -> float:
    _check_inputs(terms, sigma, strike)
    if sigma == 0 or terms.t == 0:
        return _degenerate_price(terms, PayoffKind.BINARY_PUT, strike)
    return terms.discount * std_normal_cdf(-d1_d2(terms, sigma, strike).d2)


_CLOSED_FORMS = {
    PayoffKind.CALL: bs_call,
    PayoffKind.PUT: bs_put,
    PayoffKind.BINARY_CALL: binary_call,
    PayoffKind.BINARY_PUT: binary_put,
}


def bs_price(terms: MarketTerms, sigma: float, payoff: PayoffSpec) -> float:
    """Closed-form value of ``payoff`` under the risk-free-mean lognormal."""
    return _CLOSED_FORMS[payoff.kind](terms, sigma, payoff.strike)


def price_bounds(terms: MarketTerms, payoff: PayoffSpec) -> tuple[float, float]:
    """No-arbitrage band (lower, upper) for a payoff given spot and rate."""
    df = terms.discount
    k = payoff.strike
    if payoff.kind is PayoffKind.CALL:
        return max(terms.x0 - k * df, 0.0), terms.x0
    if payoff.kind is PayoffKind.PUT:
        return max(k * df - terms.x0, 0.0), k * df
    return 0.0, df


def expected_payoff_price(
    density: Density, payoff: PayoffSpec, terms: MarketTerms, tol: float = 1e-10
) -> float:
    """exp(-r t) * E[f(x)] by adaptive Gauss-Legendre in log-price.

    The log-price axis is split at ln(strike) so that each panel sees a smooth
    integrand.
    """
    if terms.t == 0:
        return payoff(terms.x0)
    lo, hi = density.log_bounds()
    log_k = math.log(payoff.strike)

    def integrand(u):
        return payoff(np.exp(u)) * density.log_price_density(u)

    # a tolerance on the expectation, not the discounted value
    value = adaptive_gauss_legendre(integrand, lo, hi, tol=tol, breakpoints=(log_k,))
    return terms.discount * value
