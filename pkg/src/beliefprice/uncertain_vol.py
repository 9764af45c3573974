"""Prices under an uncertain second moment.

The belief on the annualised volatility is lognormal: ``ln(sigma)`` is
Normal(mu_ln, s_ln**2). Prices are the belief-weighted mixture of
certain-volatility prices, discretised by Gauss-Hermite quadrature in
``ln(sigma)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .distributions import MarketTerms
from .errors import InvalidParameterError
from .pricing import PayoffKind, PayoffSpec, bs_price


@dataclass(frozen=True)
class VolBelief:
    mu_ln: float
    s_ln: float
    n_nodes: int = 32

    def __post_init__(self):
        if not (math.isfinite(self.mu_ln) and math.isfinite(self.s_ln)):
            raise InvalidParameterError("mu_ln and s_ln must be finite")
        if self.s_ln < 0:
            raise InvalidParameterError(f"s_ln must be >= 0, got {self.s_ln}")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 1:
            raise InvalidParameterError(f"n_nodes must be a positive integer, got {self.n_nodes}")

    @classmethod
    def from_median(cls, sigma_median: float, s_ln: float, n_nodes: int = 32) -> "VolBelief":
        if not sigma_median > 0:
            raise InvalidParameterError("median volatility must be > 0")
        return cls(math.log(sigma_median), s_ln, n_nodes)

    @property
    def mean_sigma(self) -> float:
        return math.exp(self.mu_ln + 0.5 * self.s_ln**2)

    @property
    def median_sigma(self) -> float:
        return math.exp(self.mu_ln)


def vol_quadrature(belief: VolBelief) -> tuple[np.ndarray, np.ndarray]:
    """Volatility nodes and probability weights for the belief.

    A point-mass belief (``s_ln == 0``) yields the single node ``exp(mu_ln)``.
    """
    if belief.n_nodes < 1:
        raise InvalidParameterError("n_nodes must be >= 1")
    if belief.s_ln == 0:
        return np.array([math.exp(belief.mu_ln)]), np.array([1.0])
    x, w = np.polynomial.hermite.hermgauss(int(belief.n_nodes))
    sigmas = np.exp(belief.mu_ln + math.sqrt(2.0) * belief.s_ln * x)
    return sigmas, w / math.sqrt(math.pi)


def mixture(weights: Sequence[float], values: Sequence[float]) -> float:
    """Weighted sum, clamped to the hull of ``values``.

    The clamp only absorbs rounding (the weights sum to one up to ~1e-16), so
    the result is always a convex combination of the inputs.
    """
    total = math.fsum(float(w) * float(v) for w, v in zip(weights, values))
    return min(max(total, min(values)), max(values))


def node_prices(terms: MarketTerms, payoff: PayoffSpec, belief: VolBelief) -> list[float]:
    sigmas, _ = vol_quadrature(belief)
    return [bs_price(terms, float(s), payoff) for s in sigmas]


def marginal_price(terms: MarketTerms, payoff: PayoffSpec, belief: VolBelief) -> float:
    """Value of ``payoff`` with the volatility integrated out over ``belief``."""
    _, weights = vol_quadrature(belief)
    return mixture(weights, node_prices(terms, payoff, belief))


@dataclass(frozen=True)
class CurveRow:
    strike: float
    certain_price: float
    marginal_price: float


def price_curve(
    terms: MarketTerms,
    belief: VolBelief,
    strikes: Iterable[float],
    kind: PayoffKind | str = PayoffKind.PUT,
) -> list[CurveRow]:
    """Certain-volatility and marginal prices across strikes.

    The certain column uses the belief's mean volatility.
    """
    kind = PayoffKind(kind)
    strikes = [float(k) for k in strikes]
    if any(b < a for a, b in zip(strikes, strikes[1:])):
        raise InvalidParameterError("strikes must be sorted ascending")
    certain = belief.mean_sigma
    rows = []
    for k in strikes:
        payoff = PayoffSpec(kind, float(k))
        rows.append(
            CurveRow(
                strike=float(k),
                certain_price=bs_price(terms, certain, payoff),
                marginal_price=marginal_price(terms, payoff, belief),
            )
        )
    return rows
