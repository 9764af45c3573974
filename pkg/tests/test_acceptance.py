"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdicts are repeated in
an "acceptance criteria" section of the terminal summary.
"""

import math
import time
from pathlib import Path

import numpy as np
from scipy import integrate

from beliefprice.cli import run
from beliefprice.distributions import (
    MarketTerms,
    MomentSpec,
    from_expected_return,
    lognormal_pdf,
    maxent_fit,
    maxent_pdf,
)
from beliefprice.hedging import bs_delta, fd_delta, marginal_delta
from beliefprice.implied_vol import skew_curve
from beliefprice.portfolio import (
    RiskLimits,
    grid_axes,
    loss_probability,
    make_instrument,
    optimize,
    pnl_profile,
    risk_measures,
)
from beliefprice.pricing import PayoffSpec, bs_price
from beliefprice.uncertain_vol import VolBelief, marginal_price, vol_quadrature

from oracles import (
    brute_force_optimum,
    brute_risk,
    certain_vol_price,
    double_quadrature_price,
    sampled_loss_probability,
)

ROOT = Path(__file__).resolve().parent.parent
KINDS = ("call", "put", "binary_call", "binary_put")
REFERENCE = MarketTerms(1.0, 0.1, 1.0)


def _random_terms(rng):
    return MarketTerms(rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.15), rng.uniform(0.1, 3.0))


def test_criterion_1_closed_forms_equal_expectations(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(100):
        terms = _random_terms(rng)
        sigma = rng.uniform(0.05, 0.8)
        k = terms.x0 * rng.uniform(0.5, 2.0)
        for kind in KINDS:
            oracle = certain_vol_price(terms.x0, terms.r, terms.t, sigma, kind, k)
            worst = max(worst, abs(bs_price(terms, sigma, PayoffSpec(kind, k)) - oracle))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 10
    verdict(1, "closed form = discounted expectation", ok, f"max err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_mean_constraint(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(50):
        terms = _random_terms(rng)
        d = from_expected_return(terms, rng.uniform(0.05, 0.8))
        s = d.sigma_hat
        mean = integrate.quad(
            lambda u: math.exp(u) * float(d.log_price_density(u)),
            d.nu - 14 * s, d.nu + s * s + 14 * s, epsabs=0, epsrel=1e-13, limit=200,
        )[0]
        worst = max(worst, abs(mean / terms.forward - 1.0))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5
    verdict(2, "lognormal mean at risk-free growth", ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_parity(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(100):
        terms = _random_terms(rng)
        k = terms.x0 * rng.uniform(0.5, 2.0)
        beliefs = [
            VolBelief(math.log(rng.uniform(0.05, 0.8)), 0.0),
            VolBelief(math.log(rng.uniform(0.05, 0.8)), rng.uniform(0.01, 0.8), int(rng.choice([8, 16, 32]))),
        ]
        for belief in beliefs:
            c, p, bc, bp = (marginal_price(terms, PayoffSpec(kind, k), belief) for kind in KINDS)
            worst = max(
                worst,
                abs(c - p - terms.x0 + k * terms.discount),
                abs(bc + bp - terms.discount),
            )
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and elapsed < 5
    verdict(3, "parity, certain and marginalised", ok, f"max err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def _spread(belief):
    strikes = np.linspace(0.5, 1.5, 21) * REFERENCE.forward
    points = skew_curve(REFERENCE, belief, strikes)
    vols = [p.implied_sigma for p in points]
    return max(vols) - min(vols), vols


def test_criterion_4_skew_emergence(verdict):
    start = time.perf_counter()
    belief = VolBelief.from_median(0.2, 0.5)
    spread, vols = _spread(belief)
    nodes, _ = vol_quadrature(belief)
    in_hull = all(nodes.min() <= v <= nodes.max() for v in vols)
    shrinking = [_spread(VolBelief.from_median(0.2, s))[0] for s in (0.2, 0.05, 0.0125)]
    monotone = shrinking[0] > shrinking[1] > shrinking[2]
    elapsed = time.perf_counter() - start
    ok = spread > 0.01 and in_hull and monotone and elapsed < 30
    detail = (
        f"spread {spread:.4f}; spreads at s_ln 0.2/0.05/0.0125: "
        + "/".join(f"{s:.2e}" for s in shrinking)
        + f"; in hull {in_hull}, {elapsed:.1f}s"
    )
    verdict(4, "uncertain volatility produces a skew", ok, detail)
    assert ok


MARGINAL_SCENARIOS = [
    # (x0, r, t, kind, strike, median sigma, s_ln)
    (1.0, 0.1, 1.0, "put", 1.1, 0.2, 0.5),
    (1.0, 0.1, 1.0, "call", 0.8, 0.2, 0.5),
    (1.0, 0.05, 2.0, "call", 1.3, 0.4, 0.8),
    (1.0, 0.05, 2.0, "put", 0.7, 0.1, 0.3),
    (100.0, 0.03, 0.5, "put", 95.0, 0.25, 0.2),
    (100.0, 0.03, 0.5, "call", 110.0, 0.25, 0.4),
    (50.0, 0.0, 0.25, "binary_call", 52.0, 0.3, 0.35),
    (50.0, 0.0, 0.25, "binary_put", 45.0, 0.3, 0.6),
    (2.0, 0.08, 3.0, "put", 2.5, 0.15, 0.1),
    (2.0, 0.08, 3.0, "call", 1.5, 0.5, 0.25),
]


def test_criterion_5_marginalisation_oracle(verdict):
    start = time.perf_counter()
    worst = 0.0
    for x0, r, t, kind, k, median, s_ln in MARGINAL_SCENARIOS:
        oracle = double_quadrature_price(x0, r, t, kind, k, math.log(median), s_ln)
        value = marginal_price(MarketTerms(x0, r, t), PayoffSpec(kind, k), VolBelief.from_median(median, s_ln))
        worst = max(worst, abs(value - oracle))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and elapsed < 60
    verdict(5, "marginal price = double integral", ok, f"max err {worst:.2e} over 10, {elapsed:.1f}s")
    assert ok


def test_criterion_6_deltas(verdict):
    start = time.perf_counter()
    rng = np.random.default_rng(606)
    worst_rel = 0.0
    worst_mix = 0.0
    for _ in range(100):
        terms = MarketTerms(rng.uniform(0.5, 2.0), rng.uniform(0.0, 0.1), rng.uniform(0.25, 2.0))
        payoff = PayoffSpec(rng.choice(["call", "put"]), terms.x0 * rng.uniform(0.7, 1.4))
        sigma = rng.uniform(0.1, 0.6)
        belief = VolBelief(math.log(sigma), rng.uniform(0.05, 0.5), 16)
        fd = fd_delta(terms, lambda m: bs_price(m, sigma, payoff))
        worst_rel = max(worst_rel, abs(bs_delta(terms, sigma, payoff) / fd - 1.0))
        mixed = marginal_delta(terms, payoff, belief)
        fd = fd_delta(terms, lambda m: marginal_price(m, payoff, belief))
        worst_rel = max(worst_rel, abs(mixed / fd - 1.0))
        nodes, weights = vol_quadrature(belief)
        by_hand = math.fsum(w * bs_delta(terms, float(s), payoff) for s, w in zip(nodes, weights))
        worst_mix = max(worst_mix, abs(mixed - by_hand))
    elapsed = time.perf_counter() - start
    ok = worst_rel <= 1e-6 and worst_mix <= 1e-14 and elapsed < 10
    detail = f"max rel FD err {worst_rel:.2e}, mixture identity {worst_mix:.1e}, {elapsed:.1f}s"
    verdict(6, "analytic deltas", ok, detail)
    assert ok


def _quad_moments(d):
    lo, hi = d.domain
    p = lambda y: float(d.log_return_density(y))
    opts = dict(epsabs=0, epsrel=1e-13, limit=200)
    mass = integrate.quad(p, lo, hi, **opts)[0]
    mean_y = integrate.quad(lambda y: y * p(y), lo, hi, **opts)[0] / mass
    central = [
        integrate.quad(lambda y: (y - mean_y) ** k * p(y), lo, hi, **opts)[0] / mass
        for k in (2, 3, 4)
    ]
    mean_x = d.x0 * integrate.quad(lambda y: math.exp(y) * p(y), lo, hi, **opts)[0] / mass
    return [mean_x, *central]


def test_criterion_7_maxent_fit(verdict):
    start = time.perf_counter()
    spec = MomentSpec.from_shape(REFERENCE.forward, 0.2, -1.0, 5.0)
    got = _quad_moments(maxent_fit(spec, REFERENCE.x0))
    want = [spec.m1_target, spec.variance, spec.third, spec.fourth]
    worst = max(abs(g / w - 1.0) for g, w in zip(got, want))

    gaussian = maxent_fit(MomentSpec.from_shape(REFERENCE.forward, 0.2, 0.0, 3.0), REFERENCE.x0)
    ref = from_expected_return(REFERENCE, 0.2)
    xs = np.exp(np.linspace(*gaussian.domain, 2001))
    gap = float(np.max(np.abs(maxent_pdf(gaussian, xs) - lognormal_pdf(ref, xs))))
    higher = max(abs(gaussian.lambdas[2]), abs(gaussian.lambdas[3]))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and gap < 1e-7 and higher < 1e-8 and elapsed < 60
    detail = f"max rel moment err {worst:.2e}; gaussian pdf gap {gap:.1e}, {elapsed:.1f}s"
    verdict(7, "maximum-entropy fitter", ok, detail)
    assert ok


PORTFOLIO_SCENARIOS = [
    # (subjective sigma, [(kind, strike, market sigma)], y, z, bounds, resolution)
    (0.25, [("call", 1.1, 0.2), ("put", 0.9, 0.3)], 0.7, 0.05, [(0, 5), (-5, 0)], 51),
    (0.25, [("call", 1.0, 0.3), ("put", 1.0, 0.2)], 0.6, 0.1, [(-3, 3), (-3, 3)], 41),
    (0.3, [("binary_call", 1.2, 0.2), ("call", 1.2, 0.2)], 0.8, 0.1, [(-4, 4), (-4, 4)], 41),
]


def _book(sub_sigma, legs):
    subjective = from_expected_return(REFERENCE, sub_sigma)
    instruments = []
    for kind, k, market_sigma in legs:
        payoff = PayoffSpec(kind, k)
        instruments.append(
            make_instrument(payoff, bs_price(REFERENCE, market_sigma, payoff), subjective, REFERENCE)
        )
    return subjective, instruments


def test_criterion_8_portfolio_optimizer(verdict):
    start = time.perf_counter()
    matches = []
    for sub_sigma, legs, y, z, bounds, res in PORTFOLIO_SCENARIOS:
        subjective, instruments = _book(sub_sigma, legs)
        alloc = optimize(instruments, subjective, REFERENCE, RiskLimits(y, z), bounds, res)
        premiums = [inst.market_value for inst in instruments]

        def risk(n):
            return brute_risk(
                n, [leg[0] for leg in legs], [leg[1] for leg in legs], premiums,
                subjective.nu, subjective.sigma_hat, REFERENCE.growth,
            )

        want = brute_force_optimum(
            grid_axes(bounds, res), [inst.edge for inst in instruments], risk, y, z
        )
        prob, es = risk(alloc.n)
        matches.append(alloc.n == want and prob <= y and es <= z)

    subjective, instruments = _book(*PORTFOLIO_SCENARIOS[0][:2])
    rng = np.random.default_rng(808)
    homogeneous = True
    for _ in range(50):
        n = rng.uniform(-5, 5, size=2)
        c = rng.uniform(0.05, 20.0)
        p1, es1 = risk_measures(n, instruments, subjective, REFERENCE)
        p2, es2 = risk_measures(c * n, instruments, subjective, REFERENCE)
        homogeneous &= abs(p2 - p1) <= 1e-12 and abs(es2 - c * es1) <= 1e-12 * max(1.0, c * es1)

    call = instruments[0]
    profile = pnl_profile([1.0], [call], REFERENCE)
    sampled, se = sampled_loss_probability(profile, subjective.nu, subjective.sigma_hat, 1_000_000, 8)
    exact = loss_probability([1.0], [call], subjective, REFERENCE)
    sampling_ok = abs(exact - sampled) < 3 * se
    elapsed = time.perf_counter() - start

    ok = all(matches) and homogeneous and sampling_ok and elapsed < 120
    detail = (
        f"grid matches {sum(matches)}/3, homogeneity {homogeneous}, "
        f"sampling gap {abs(exact - sampled) / se:.2f} se, {elapsed:.1f}s"
    )
    verdict(8, "portfolio optimizer", ok, detail)
    assert ok


def test_criterion_9_golden_figures(verdict):
    results = {}
    for name in ("put_curve", "vol_skew"):
        rendered, _ = run((ROOT / "scenarios" / f"{name}.yaml").read_text(encoding="utf-8"), "csv")
        golden = (ROOT / "tests" / "golden" / f"{name}.csv").read_bytes()
        results[name] = rendered.encode("utf-8") == golden
    ok = all(results.values())
    verdict(9, "figure fixtures byte-identical", ok, ", ".join(f"{k} {v}" for k, v in results.items()))
    assert ok
