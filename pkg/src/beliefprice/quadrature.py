"""Gauss-Legendre rules and a panel-adaptive integrator.

Integrands are vectorised callables: they receive a 1-D numpy array of
abscissae and return an array of the same shape.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import QuadratureError

Integrand = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=32)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``n``-point Gauss-Legendre rule on ``[a, b]``."""
    x, w = _legendre(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def fixed_gauss_legendre(func: Integrand, a: float, b: float, n: int = 256) -> float:
    x, w = gauss_legendre(a, b, n)
    return float(np.dot(w, func(x)))


def adaptive_gauss_legendre(
    func: Integrand,
    a: float,
    b: float,
    tol: float = 1e-10,
    breakpoints: Sequence[float] = (),
    order: int = 20,
    max_panels: int = 4000,
) -> float:
    """Integrate ``func`` over ``[a, b]`` to absolute tolerance ``tol``.

    The interval is first cut at every breakpoint strictly inside it (kinks
    and jumps of the integrand), then each panel is bisected until an
    ``order``-point and a ``2*order``-point rule agree to within the panel's
    share of ``tol``. The finer estimate is kept.
    """
    if b < a:
        return -adaptive_gauss_legendre(func, b, a, tol, breakpoints, order, max_panels)
    if a == b:
        return 0.0
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a, *cuts, b]
    width = b - a
    stack = [(edges[i], edges[i + 1]) for i in range(len(edges) - 1)][::-1]
    total = 0.0
    panels = 0
    while stack:
        lo, hi = stack.pop()
        x1, w1 = gauss_legendre(lo, hi, order)
        x2, w2 = gauss_legendre(lo, hi, 2 * order)
        coarse = float(np.dot(w1, func(x1)))
        fine = float(np.dot(w2, func(x2)))
        err = abs(fine - coarse)
        budget = tol * (hi - lo) / width
        panels += 1
        if err <= budget or (hi - lo) <= 1e-12 * width:
            total += fine
            continue
        if panels >= max_panels:
            raise QuadratureError(
                f"adaptive quadrature exceeded {max_panels} panels on [{a}, {b}]",
                residual=err,
            )
        mid = 0.5 * (lo + hi)
        stack.append((mid, hi))
        stack.append((lo, mid))
    return total
