"""Exposure selection across derivatives on one underlying.

Contract counts are chosen to maximise the edge ``xi = sum n_i (V_i - V_i^m)``
of subjective over market value, subject to a cap on the probability of a
terminal loss and a cap on the expected loss given that one occurs. The
premium paid is financed at the risk-free rate, so a loss means finishing
below the cash benchmark.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .distributions import Density, MarketTerms
from .errors import InfeasibleError, InvalidParameterError
from .pricing import PayoffKind, PayoffSpec, expected_payoff_price


@dataclass(frozen=True)
class Instrument:
    payoff: PayoffSpec
    market_value: float
    subjective_value: float

    def __post_init__(self):
        if not math.isfinite(self.market_value) or self.market_value < 0:
            raise InvalidParameterError("market_value must be finite and >= 0")
        if not math.isfinite(self.subjective_value):
            raise InvalidParameterError("subjective_value must be finite")

    @property
    def edge(self) -> float:
        return self.subjective_value - self.market_value


def make_instrument(
    payoff: PayoffSpec, market_value: float, subjective: Density, terms: MarketTerms
) -> Instrument:
    """Instrument whose subjective value is priced against ``subjective``."""
    return Instrument(payoff, market_value, expected_payoff_price(subjective, payoff, terms))


@dataclass(frozen=True)
class RiskLimits:
    y: float
    z: float

    def __post_init__(self):
        if not 0 < self.y <= 1:
            raise InvalidParameterError(f"loss-probability cap y must be in (0, 1], got {self.y}")
        if not self.z > 0:
            raise InvalidParameterError(f"shortfall cap z must be > 0, got {self.z}")


@dataclass(frozen=True)
class Allocation:
    n: tuple[float, ...]
    objective: float
    loss_prob: float
    exp_shortfall: float


def _counts(n, instruments) -> np.ndarray:
    arr = np.asarray(n, dtype=float).reshape(-1)
    if arr.size != len(instruments):
        raise InvalidParameterError(
            f"got {arr.size} contract counts for {len(instruments)} instruments"
        )
    return arr


def portfolio_values(n, instruments: Sequence[Instrument]) -> tuple[float, float, float]:
    """(Pi, Pi_m, xi): subjective value, market value and their difference."""
    arr = _counts(n, instruments)
    pi = math.fsum(c * inst.subjective_value for c, inst in zip(arr, instruments))
    pi_m = math.fsum(c * inst.market_value for c, inst in zip(arr, instruments))
    xi = math.fsum(c * inst.edge for c, inst in zip(arr, instruments))
    return pi, pi_m, xi


class PnLProfile:
    """Terminal P&L as a function of the terminal price.

    ``PnL(x) = sum n_i f_i(x) - cost`` where ``cost`` is the premium,
    compounded at ``r`` to expiry when ``finance_cost`` is set. Between
    consecutive strikes the profile is affine, so it is stored as one
    (intercept, slope) pair per segment.
    """

    def __init__(
        self,
        n,
        instruments: Sequence[Instrument],
        terms: MarketTerms,
        finance_cost: bool = True,
    ):
        self.n = [float(c) for c in _counts(n, instruments)]
        self.instruments = tuple(instruments)
        premium = math.fsum(c * inst.market_value for c, inst in zip(self.n, instruments))
        self.cost = premium * (terms.growth if finance_cost else 1.0)
        held = [(c, inst.payoff) for c, inst in zip(self.n, instruments) if c != 0]
        self.kinks = sorted({p.strike for _, p in held})
        edges = [0.0, *self.kinks, math.inf]
        self.segments = []
        for lo, hi in zip(edges, edges[1:]):
            probe = 0.5 * (lo + hi) if math.isfinite(hi) else lo + 1.0
            a, b = -self.cost, 0.0
            for c, p in held:
                above = probe > p.strike
                if p.kind is PayoffKind.CALL and above:
                    a, b = a - c * p.strike, b + c
                elif p.kind is PayoffKind.PUT and not above:
                    a, b = a + c * p.strike, b - c
                elif p.kind is PayoffKind.BINARY_CALL and above:
                    a += c
                elif p.kind is PayoffKind.BINARY_PUT and not above:
                    a += c
            self.segments.append((lo, hi, a, b))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for c, inst in zip(self.n, self.instruments):
            if c != 0:
                total = total + c * inst.payoff(x)
        out = total - self.cost
        return float(out) if out.ndim == 0 else out

    def loss_intervals(self) -> list[tuple[float, float, float, float]]:
        """Price intervals where the P&L is negative, with their affine pieces."""
        found = []
        for lo, hi, a, b in self.segments:
            if b == 0:
                if a < 0:
                    found.append((lo, hi, a, b))
                continue
            root = -a / b
            if b > 0:
                left, right = lo, min(hi, root)
            else:
                left, right = max(lo, root), hi
            if left < right:
                found.append((left, right, a, b))
        return found


def pnl_profile(n, instruments, terms, finance_cost: bool = True) -> PnLProfile:
    return PnLProfile(n, instruments, terms, finance_cost)


def _loss_moments(profile: PnLProfile, subjective: Density) -> tuple[float, float]:
    prob = 0.0
    loss = 0.0
    for lo, hi, a, b in profile.loss_intervals():
        mass, first = subjective.interval_moments(lo, hi)
        prob += mass
        loss += -a * mass - b * first
    return float(min(max(prob, 0.0), 1.0)), float(max(loss, 0.0))


def loss_probability(n, instruments, subjective: Density, terms, finance_cost=True) -> float:
    """P(PnL < 0) under the subjective density."""
    return _loss_moments(pnl_profile(n, instruments, terms, finance_cost), subjective)[0]


def expected_shortfall(n, instruments, subjective: Density, terms, finance_cost=True) -> float:
    """E[-PnL | PnL < 0], zero when no loss is possible."""
    prob, loss = _loss_moments(pnl_profile(n, instruments, terms, finance_cost), subjective)
    return loss / prob if prob > 0 else 0.0


def risk_measures(n, instruments, subjective, terms, finance_cost=True) -> tuple[float, float]:
    """(loss probability, expected shortfall) from one pass over the profile."""
    prob, loss = _loss_moments(pnl_profile(n, instruments, terms, finance_cost), subjective)
    return prob, (loss / prob if prob > 0 else 0.0)


def grid_axes(bounds, resolution) -> list[np.ndarray]:
    """Evenly spaced candidate counts per instrument.

    Zero is inserted into any axis whose box straddles it, so the empty
    portfolio is always a candidate.
    """
    if isinstance(resolution, (int, np.integer)):
        resolution = [int(resolution)] * len(bounds)
    if len(resolution) != len(bounds):
        raise InvalidParameterError("one resolution per instrument is required")
    axes = []
    for (lo, hi), num in zip(bounds, resolution):
        if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
            raise InvalidParameterError(f"bounds must be finite with lo <= hi, got ({lo}, {hi})")
        if num < 2:
            raise InvalidParameterError("resolution must be >= 2 per axis")
        axis = np.linspace(lo, hi, int(num))
        if lo < 0 < hi and not np.any(axis == 0.0):
            axis = np.sort(np.append(axis, 0.0))
        axes.append(axis)
    return axes


def _better(cand: tuple, best: Optional[tuple]) -> bool:
    # (objective, norm, counts): larger objective, then smaller norm, then lexicographic
    if best is None:
        return True
    if cand[0] != best[0]:
        return cand[0] > best[0]
    if cand[1] != best[1]:
        return cand[1] < best[1]
    return cand[2] < best[2]


def optimize(
    instruments: Sequence[Instrument],
    subjective: Density,
    terms: MarketTerms,
    limits: RiskLimits,
    bounds: Sequence[tuple[float, float]],
    resolution: Union[int, Sequence[int]] = 101,
    refine: int = 0,
    finance_cost: bool = True,
) -> Allocation:
    """Best feasible allocation on an exhaustive grid over the ``bounds`` box.

    Candidates are visited in order of decreasing objective (ties: smaller
    Euclidean norm, then lexicographic counts), so the first one meeting both
    limits is the grid optimum. ``refine`` rounds of coordinate-wise search on
    a finer local grid may then move the point off the grid.
    """
    n_inst = len(instruments)
    if len(bounds) != n_inst:
        raise InvalidParameterError("one (lo, hi) bound per instrument is required")
    if not 1 <= n_inst <= 4:
        raise InvalidParameterError("exhaustive search supports 1 to 4 instruments")
    axes = grid_axes(bounds, resolution)
    edges = np.array([inst.edge for inst in instruments])

    def objective(n) -> float:
        return math.fsum(float(c) * e for c, e in zip(n, edges))

    def feasible(n):
        prob, es = risk_measures(n, instruments, subjective, terms, finance_cost)
        return (prob <= limits.y and es <= limits.z), prob, es

    candidates = []
    for point in itertools.product(*axes):
        n = tuple(float(c) for c in point)
        candidates.append((objective(n), math.hypot(*n), n))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

    best = None
    for cand in candidates:
        ok, prob, es = feasible(cand[2])
        if ok:
            best = (cand, prob, es)
            break
    if best is None:
        raise InfeasibleError(
            "no grid point satisfies the risk limits"
            + ("" if all(lo <= 0 <= hi for lo, hi in bounds) else " (bounds exclude n = 0)")
        )

    (obj, norm, n), prob, es = best
    steps = [
        (axis[-1] - axis[0]) / (len(axis) - 1) if len(axis) > 1 else 0.0 for axis in axes
    ]
    for _ in range(refine):
        improved = False
        for i, (lo, hi) in enumerate(bounds):
            local = np.linspace(max(lo, n[i] - steps[i]), min(hi, n[i] + steps[i]), len(axes[i]))
            for value in local:
                trial = n[:i] + (float(value),) + n[i + 1 :]
                cand = (objective(trial), math.hypot(*trial), trial)
                if not _better(cand, (obj, norm, n)):
                    continue
                ok, p_trial, es_trial = feasible(trial)
                if ok:
                    obj, norm, n = cand
                    prob, es = p_trial, es_trial
                    improved = True
            steps[i] = 2.0 * steps[i] / (len(axes[i]) - 1)
        if not improved:
            break
    return Allocation(n=n, objective=objective(n), loss_prob=prob, exp_shortfall=es)
