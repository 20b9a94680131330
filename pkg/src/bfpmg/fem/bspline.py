"""Uniform open B-spline spaces on ``[0, 1]``.

Level ``j`` has ``2**j`` elements of size ``h = 2**-j``; a degree-``p``
space has ``2**j + p`` basis functions.  Element ``e`` covers
``[e h, (e+1) h]`` and carries basis functions ``e, ..., e + p``.

Per-element basis values are evaluated on the reference element ``[0, 1]``
from the *local knot pattern* (the ``2p + 2`` surrounding knots shifted and
scaled to the element).  Interior elements of a uniform mesh all share one
pattern, so tabulations are cached per pattern.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

from gmpy2 import mpfr

from ..extfloat import current_precision, ext
from .quadrature import gauss_legendre_unit

__all__ = [
    "knot_vector",
    "n_basis",
    "find_span",
    "ders_basis_funs",
    "local_pattern",
    "element_table",
    "evaluate",
]


def knot_vector(p: int, j: int) -> list[Fraction]:
    """Open uniform knot vector with ``2**j`` elements."""
    ne = 1 << j
    return [Fraction(0)] * (p + 1) + [Fraction(i, ne) for i in range(1, ne)] + [Fraction(1)] * (p + 1)


def n_basis(p: int, j: int) -> int:
    return (1 << j) + p


def find_span(knots, p: int, x) -> int:
    """Index ``s`` with ``knots[s] <= x < knots[s+1]`` (last span for ``x = 1``)."""
    n = len(knots) - p - 1
    if x >= knots[n]:
        return n - 1
    lo, hi = p, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if x < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


def ders_basis_funs(span: int, x, p: int, nd: int, knots) -> list[list]:
    """Nonzero basis functions and derivatives at ``x``.

    Returns ``ders[k][r]``: the ``k``-th derivative of basis function
    ``span - p + r``.  Arithmetic type follows the inputs (works with
    ``Fraction`` and ``mpfr``).
    """
    left = [0] * (p + 1)
    right = [0] * (p + 1)
    ndu = [[0] * (p + 1) for _ in range(p + 1)]
    ndu[0][0] = x * 0 + 1
    for jj in range(1, p + 1):
        left[jj] = x - knots[span + 1 - jj]
        right[jj] = knots[span + jj] - x
        saved = 0
        for r in range(jj):
            ndu[jj][r] = right[r + 1] + left[jj - r]
            temp = ndu[r][jj - 1] / ndu[jj][r]
            ndu[r][jj] = saved + right[r + 1] * temp
            saved = left[jj - r] * temp
        ndu[jj][jj] = saved
    ders = [[0] * (p + 1) for _ in range(nd + 1)]
    for r in range(p + 1):
        ders[0][r] = ndu[r][p]
    a = [[0] * (p + 1) for _ in range(2)]
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0][0] = 1
        for k in range(1, nd + 1):
            d = 0
            rk, pk = r - k, p - k
            if r >= k:
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk]
                d = a[s2][0] * ndu[rk][pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for jj in range(j1, j2 + 1):
                a[s2][jj] = (a[s1][jj] - a[s1][jj - 1]) / ndu[pk + 1][rk + jj]
                d += a[s2][jj] * ndu[rk + jj][pk]
            if r <= pk:
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r]
                d += a[s2][k] * ndu[r][pk]
            ders[k][r] = d
            s1, s2 = s2, s1
    rr = p
    for k in range(1, nd + 1):
        for r in range(p + 1):
            ders[k][r] *= rr
        rr *= p - k
    return ders


def local_pattern(p: int, j: int, e: int) -> tuple[Fraction, ...]:
    """Knots ``t[e .. e+2p+1]`` of element ``e`` mapped to the reference element."""
    t = knot_vector(p, j)
    h = Fraction(1, 1 << j)
    x0 = Fraction(e, 1 << j)
    return tuple((t[e + i] - x0) / h for i in range(2 * p + 2))


@lru_cache(maxsize=None)
def _table(pattern: tuple, p: int, nd: int, nq: int, prec: int):
    xs, ws = gauss_legendre_unit(nq)
    knots = [ext(k) for k in pattern]
    vals = []
    for x in xs:
        vals.append(ders_basis_funs(p, x, p, nd, knots))
    # vals[q][k][a] -> table[k][a][q]
    table = tuple(tuple(tuple(vals[q][k][a] for q in range(nq)) for a in range(p + 1))
                  for k in range(nd + 1))
    return tuple(xs), tuple(ws), table


def element_table(p: int, j: int, e: int, nd: int, nq: int):
    """Reference quadrature and basis derivatives for element ``e``.

    Returns ``(xs, ws, table)`` with ``xs``/``ws`` on ``[0, 1]`` and
    ``table[k][a][q]`` the ``k``-th reference derivative of local basis
    function ``a`` at node ``q``.  Physical derivatives carry ``h**-k``.
    """
    return _table(local_pattern_cached(p, j, e), p, nd, nq, current_precision())


@lru_cache(maxsize=None)
def _patterns(p: int, j: int) -> tuple:
    ne = 1 << j
    out = []
    for e in range(ne):
        if p <= e < ne - p:
            out.append(None)  # interior, filled below
        else:
            out.append(local_pattern(p, j, e))
    interior = tuple(Fraction(i - p) for i in range(2 * p + 2))
    return tuple(interior if v is None else v for v in out)


def local_pattern_cached(p: int, j: int, e: int) -> tuple:
    return _patterns(p, j)[e]


def evaluate(coeffs, p: int, j: int, x, nd: int = 0):
    """Value (or ``nd``-th derivative) of the full-space spline at ``x``."""
    knots = knot_vector(p, j)
    s = find_span(knots, p, x)
    if isinstance(x, mpfr):
        knots = [ext(k) for k in knots]
    d = ders_basis_funs(s, x, p, nd, knots)[nd]
    return sum(coeffs[s - p + r] * d[r] for r in range(p + 1))
