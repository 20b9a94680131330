"""Gauss-Legendre quadrature in extended precision."""
from __future__ import annotations

import math
from functools import lru_cache

from gmpy2 import mpfr

from ..extfloat import current_precision

__all__ = ["gauss_legendre", "gauss_legendre_unit"]


def _legendre(n: int, x: mpfr) -> tuple[mpfr, mpfr]:
    """Return ``(P_n(x), P_n'(x))`` by the three-term recurrence."""
    p0, p1 = mpfr(1), x
    if n == 0:
        return p0, mpfr(0)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1)
    return p1, dp


@lru_cache(maxsize=None)
def _rule(nq: int, prec: int) -> tuple[tuple, tuple]:
    tol = mpfr(2) ** (-(prec - 8))
    nodes, weights = [], []
    for i in range(nq):
        # Chebyshev-like initial guess, then Newton in full precision
        x = mpfr(math.cos(math.pi * (i + 0.75) / (nq + 0.5)))
        for _ in range(200):
            p, dp = _legendre(nq, x)
            dx = p / dp
            x -= dx
            if abs(dx) <= tol:
                break
        _, dp = _legendre(nq, x)
        nodes.append(x)
        weights.append(2 / ((1 - x * x) * dp * dp))
    order = sorted(range(nq), key=lambda k: nodes[k])
    return tuple(nodes[k] for k in order), tuple(weights[k] for k in order)


def gauss_legendre(nq: int) -> tuple[list[mpfr], list[mpfr]]:
    """Nodes and weights of the ``nq``-point rule on ``[-1, 1]``, ascending.

    Computed by Newton iteration on the Legendre polynomial at the current
    MPFR precision, so the rule is accurate to that precision.
    """
    if nq < 1:
        raise ValueError("nq must be positive")
    if nq == 1:
        return [mpfr(0)], [mpfr(2)]
    x, w = _rule(nq, current_precision())
    return list(x), list(w)


def gauss_legendre_unit(nq: int) -> tuple[list[mpfr], list[mpfr]]:
    """The same rule mapped to ``[0, 1]``."""
    x, w = gauss_legendre(nq)
    return [(xi + 1) / 2 for xi in x], [wi / 2 for wi in w]

