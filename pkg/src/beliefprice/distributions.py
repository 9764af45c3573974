"""Densities over the terminal price of a single underlying.

Two families are provided:

* :class:`LogNormalDist`, the Gaussian-in-log-price belief that follows from
  knowing only the first two moments of the log-price.
* :class:`MaxEntDist`, the maximum-entropy density on log-returns whose
  first four moments are pinned, i.e. an exponential family with a quartic
  polynomial exponent, truncated to a finite window for quadrature.

Both expose the same small duck-typed surface used by the pricing and
portfolio modules: ``mean()``, ``log_bounds()``, ``log_price_density(u)`` and
``interval_moments(a, b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import ndtr

from .errors import (
    ConvergenceError,
    DomainError,
    InfeasibleMomentsError,
    InvalidParameterError,
)
from .quadrature import gauss_legendre

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# log-price window (in standard deviations) treated as the lognormal support
_LOGNORMAL_TAIL_SDS = 12.0

# maxent window half-width in standard deviations of the log-return
MAXENT_HALF_WIDTH = 10.0
MAXENT_NODES = 256


def std_normal_cdf(x):
    """Standard normal cumulative distribution N(x).

    Backed by ``scipy.special.ndtr`` (complementary error function), which
    keeps full relative accuracy in both tails. Accepts scalars or arrays.
    """
    out = ndtr(x)
    return float(out) if np.ndim(out) == 0 else out


def std_normal_pdf(x):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


def _check_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class MarketTerms:
    """Spot ``x0``, continuously compounded rate ``r`` and horizon ``t`` in years."""

    x0: float
    r: float
    t: float

    def __post_init__(self):
        for name in ("x0", "r", "t"):
            _check_finite(name, getattr(self, name))
        if self.x0 <= 0:
            raise InvalidParameterError(f"x0 must be > 0, got {self.x0}")
        if self.t < 0:
            raise InvalidParameterError(f"t must be >= 0, got {self.t}")

    @property
    def discount(self) -> float:
        return math.exp(-self.r * self.t)

    @property
    def growth(self) -> float:
        return math.exp(self.r * self.t)

    @property
    def forward(self) -> float:
        """Expected terminal price when the mean grows at ``r``."""
        return self.x0 * math.exp(self.r * self.t)


@dataclass(frozen=True)
class LogNormalDist:
    """Log-price ~ Normal(nu, sigma_hat**2) over the whole horizon."""

    nu: float
    sigma_hat: float

    def __post_init__(self):
        _check_finite("nu", self.nu)
        _check_finite("sigma_hat", self.sigma_hat)
        if self.sigma_hat <= 0:
            raise InvalidParameterError(f"sigma_hat must be > 0, got {self.sigma_hat}")

    def mean(self) -> float:
        return math.exp(self.nu + 0.5 * self.sigma_hat**2)

    def median(self) -> float:
        return math.exp(self.nu)

    def mode(self) -> float:
        return math.exp(self.nu - self.sigma_hat**2)

    def pdf(self, x):
        return lognormal_pdf(self, x)

    def cdf(self, k: float) -> float:
        return partial_zeroth(self, k)

    def log_bounds(self) -> tuple[float, float]:
        # the upper end also covers x * pdf, which peaks at nu + sigma_hat**2
        s = self.sigma_hat
        return self.nu - _LOGNORMAL_TAIL_SDS * s, self.nu + s * s + _LOGNORMAL_TAIL_SDS * s

    def log_price_density(self, u):
        z = (np.asarray(u, dtype=float) - self.nu) / self.sigma_hat
        return std_normal_pdf(z) / self.sigma_hat

    def interval_moments(self, a: float, b: float) -> tuple[float, float]:
        """Probability mass and first moment of the price on ``[a, b]``."""
        mass_b, first_b = _partials(self, b)
        mass_a, first_a = _partials(self, a)
        return mass_b - mass_a, first_b - first_a


def _partials(d: LogNormalDist, k: float) -> tuple[float, float]:
    if k <= 0:
        return 0.0, 0.0
    return partial_zeroth(d, k), partial_first(d, k)


def lognormal_pdf(d: LogNormalDist, x):
    """Density of the price at ``x`` (scalar or array, all entries > 0)."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("lognormal_pdf requires x > 0")
    z = (np.log(arr) - d.nu) / d.sigma_hat
    out = std_normal_pdf(z) / (arr * d.sigma_hat)
    return float(out) if out.ndim == 0 else out


def partial_zeroth(d: LogNormalDist, k: float) -> float:
    """P(x <= k) under the lognormal belief."""
    if not k > 0:
        raise DomainError(f"strike must be > 0, got {k}")
    if math.isinf(k):
        return 1.0
    return std_normal_cdf((math.log(k) - d.nu) / d.sigma_hat)


def partial_first(d: LogNormalDist, k: float) -> float:
    """E[x; x <= k], the first moment restricted to prices below ``k``."""
    if not k > 0:
        raise DomainError(f"strike must be > 0, got {k}")
    if math.isinf(k):
        return d.mean()
    return d.mean() * std_normal_cdf((math.log(k) - d.nu) / d.sigma_hat - d.sigma_hat)


def from_expected_return(
    terms: MarketTerms, sigma: float, rate: float | None = None
) -> LogNormalDist:
    """Lognormal belief with annualised vol ``sigma`` and mean ``x0*exp(rate*t)``.

    ``rate`` defaults to the risk-free rate of ``terms``; pass a different
    growth rate (e.g. one implied by a futures price) to shift the mean.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be > 0, got {sigma}")
    if not terms.t > 0:
        raise InvalidParameterError(f"t must be > 0 for a non-degenerate density, got {terms.t}")
    growth = terms.r if rate is None else rate
    sigma_hat = sigma * math.sqrt(terms.t)
    nu = math.log(terms.x0) + growth * terms.t - 0.5 * sigma_hat**2
    return LogNormalDist(nu=nu, sigma_hat=sigma_hat)


def implied_growth_rate(x0: float, futures_price: float, t: float) -> float:
    """Continuously compounded expected return that a futures price pins."""
    if x0 <= 0 or futures_price <= 0 or t <= 0:
        raise InvalidParameterError("x0, futures_price and t must all be > 0")
    return math.log(futures_price / x0) / t


# ---------------------------------------------------------------------------
# Four-moment maximum entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentSpec:
    """Target mean price plus central moments of the log-return y = ln(x/x0)."""

    m1_target: float
    variance: float
    third: float
    fourth: float

    def __post_init__(self):
        for name in ("m1_target", "variance", "third", "fourth"):
            _check_finite(name, getattr(self, name))
        if self.m1_target <= 0:
            raise InvalidParameterError(f"m1_target must be > 0, got {self.m1_target}")
        if not self.variance > 0:
            raise InvalidParameterError(f"variance must be > 0, got {self.variance}")
        if self.fourth < self.variance**2:
            raise InvalidParameterError("fourth central moment must be >= variance**2")

    @property
    def skewness(self) -> float:
        return self.third / self.variance**1.5

    @property
    def kurtosis(self) -> float:
        return self.fourth / self.variance**2

    @classmethod
    def from_shape(
        cls, m1_target: float, stdev: float, skewness: float, kurtosis: float
    ) -> "MomentSpec":
        return cls(m1_target, stdev**2, skewness * stdev**3, kurtosis * stdev**4)


@dataclass(frozen=True)
class MaxEntDist:
    """p(y) = exp(l1*y + l2*y**2 + l3*y**3 + l4*y**4 - log_norm) on ``domain``.

    ``y = ln(x / x0)``; the density is zero outside ``domain``.
    """

    x0: float
    lambdas: tuple[float, float, float, float]
    log_norm: float
    domain: tuple[float, float]

    def __post_init__(self):
        if self.x0 <= 0:
            raise InvalidParameterError("x0 must be > 0")
        if len(self.lambdas) != 4:
            raise InvalidParameterError("exactly four multipliers are required")
        if self.lambdas[3] > 0:
            raise InvalidParameterError("quartic multiplier must be <= 0")
        lo, hi = self.domain
        if not lo < hi:
            raise InvalidParameterError("domain must satisfy y_lo < y_hi")

    def exponent(self, y):
        l1, l2, l3, l4 = self.lambdas
        y = np.asarray(y, dtype=float)
        return y * (l1 + y * (l2 + y * (l3 + y * l4)))

    def log_return_density(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = self.domain
        inside = (y >= lo) & (y <= hi)
        return np.where(inside, np.exp(self.exponent(y) - self.log_norm), 0.0)

    def log_price_density(self, u):
        return self.log_return_density(np.asarray(u, dtype=float) - math.log(self.x0))

    def log_bounds(self) -> tuple[float, float]:
        shift = math.log(self.x0)
        return self.domain[0] + shift, self.domain[1] + shift

    def pdf(self, x):
        return maxent_pdf(self, x)

    def mean(self) -> float:
        y, w = gauss_legendre(*self.domain, MAXENT_NODES)
        return float(self.x0 * np.dot(w, np.exp(y) * self.log_return_density(y)))

    def interval_moments(self, a: float, b: float) -> tuple[float, float]:
        lo, hi = self.domain
        ya = lo if a <= 0 else max(lo, math.log(a / self.x0))
        yb = hi if math.isinf(b) else min(hi, math.log(b / self.x0))
        if yb <= ya:
            return 0.0, 0.0
        y, w = gauss_legendre(ya, yb, 128)
        p = self.log_return_density(y)
        return float(np.dot(w, p)), float(self.x0 * np.dot(w, np.exp(y) * p))


def maxent_pdf(d: MaxEntDist, x):
    """Price density of a fitted maxent belief; x must map inside the domain."""
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("maxent_pdf requires x > 0")
    y = np.log(arr / d.x0)
    lo, hi = d.domain
    if np.any((y < lo) | (y > hi)):
        raise DomainError(f"log-return outside the truncation window [{lo}, {hi}]")
    out = np.exp(d.exponent(y) - d.log_norm) / arr
    return float(out) if out.ndim == 0 else out


def maxent_moments(d: MaxEntDist, n_nodes: int = 400) -> MomentSpec:
    """Recompute mean price and central log-moments by quadrature."""
    y, w = gauss_legendre(*d.domain, n_nodes)
    p = w * d.log_return_density(y)
    mass = p.sum()
    p = p / mass
    m = float(np.dot(p, y))
    c = y - m
    return MomentSpec(
        m1_target=float(d.x0 * np.dot(p, np.exp(y))),
        variance=float(np.dot(p, c**2)),
        third=float(np.dot(p, c**3)),
        fourth=float(np.dot(p, c**4)),
    )


def _log_sum_exp(e: np.ndarray, w: np.ndarray) -> float:
    top = float(e.max())
    return top + math.log(float(np.dot(w, np.exp(e - top))))


def _grad_norm(a, stats, w, target) -> float:
    e = a @ stats
    q = w * np.exp(e - e.max())
    return float(np.max(np.abs(stats @ (q / q.sum()) - target)))


def _standard_multipliers(
    skewness: float, kurtosis: float, n_nodes: int, max_iter: int, tol: float
) -> np.ndarray:
    """Dual Newton for the maxent density of a zero-mean, unit-variance variable.

    Minimises ln Z(a) - a . mu over a in R^4 where the sufficient statistics
    are s, s^2, s^3, s^4 on [-10, 10]. The Hessian of this convex objective
    is the covariance of the statistics.
    """
    s, w = gauss_legendre(-MAXENT_HALF_WIDTH, MAXENT_HALF_WIDTH, n_nodes)
    stats = np.vstack([s, s**2, s**3, s**4])
    target = np.array([0.0, 1.0, skewness, kurtosis])

    def dual(a):
        return _log_sum_exp(a @ stats, w) - float(a @ target)

    a = np.array([0.0, -0.5, 0.0, 0.0])
    residual = np.inf
    for _ in range(max_iter):
        e = a @ stats
        q = w * np.exp(e - e.max())
        p = q / q.sum()
        moments = stats @ p
        grad = moments - target
        residual = float(np.max(np.abs(grad)))
        if residual <= tol:
            return a
        cov = (stats * p) @ stats.T - np.outer(moments, moments)
        try:
            step = np.linalg.solve(cov, grad)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular moment covariance", residual) from exc
        full = a - step
        if _grad_norm(full, stats, w, target) < residual:
            # near the optimum the dual's decrease drowns in rounding; the
            # gradient norm is the reliable progress measure there
            a = full
            continue
        current = dual(a)
        slope = float(grad @ step)
        damping = 0.5
        while damping > 1e-12:
            trial = a - damping * step
            if dual(trial) <= current - 1e-4 * damping * slope:
                break
            damping *= 0.5
        a = trial
    raise ConvergenceError(
        f"maxent Newton did not converge in {max_iter} iterations "
        f"(max moment residual {residual:.3e})",
        residual,
    )


def maxent_fit(
    spec: MomentSpec,
    x0: float,
    n_nodes: int = MAXENT_NODES,
    max_iter: int = 200,
    tol: float = 1e-12,
) -> MaxEntDist:
    """Fit the maximum-entropy density on log-returns matching ``spec``.

    Central moments are shift invariant and a quartic in ``y - m`` is a quartic
    in ``y``, so the fit is done once for the standardised variable; the
    location ``m`` then follows in closed form from the mean-price target.
    """
    if x0 <= 0:
        raise InvalidParameterError("x0 must be > 0")
    skew, kurt = spec.skewness, spec.kurtosis
    if kurt <= skew**2 + 1.0:
        raise InfeasibleMomentsError(
            f"kurtosis {kurt:.6g} must exceed skewness**2 + 1 = {skew**2 + 1:.6g}"
        )
    a = _standard_multipliers(skew, kurt, n_nodes, max_iter, tol)
    if a[3] > 0:
        raise InfeasibleMomentsError(
            "moments need a positive quartic multiplier; no normalisable maxent density"
        )
    sd = math.sqrt(spec.variance)

    # location from E[x] = x0 * exp(m) * E_q[exp(sd * s)]
    s, w = gauss_legendre(-MAXENT_HALF_WIDTH, MAXENT_HALF_WIDTH, n_nodes)
    e = a @ np.vstack([s, s**2, s**3, s**4])
    log_mgf = _log_sum_exp(e + sd * s, w) - _log_sum_exp(e, w)
    m = math.log(spec.m1_target / x0) - log_mgf

    # expand sum_k a_k ((y - m)/sd)^k into powers of y
    coeffs = np.zeros(5)
    for k in range(1, 5):
        for j in range(k + 1):
            coeffs[j] += a[k - 1] * sd**-k * math.comb(k, j) * (-m) ** (k - j)
    lambdas = tuple(float(c) for c in coeffs[1:])
    domain = (m - MAXENT_HALF_WIDTH * sd, m + MAXENT_HALF_WIDTH * sd)

    y, wy = gauss_legendre(*domain, n_nodes)
    ey = y * (lambdas[0] + y * (lambdas[1] + y * (lambdas[2] + y * lambdas[3])))
    log_norm = _log_sum_exp(ey, wy)
    return MaxEntDist(x0=x0, lambdas=lambdas, log_norm=log_norm, domain=domain)


Density = Union[LogNormalDist, MaxEntDist]
