"""Galerkin assembly, transfer operators, errors and reference solutions.

All quantities are computed with MPFR at the current precision (400 bits
by default).  Strong Dirichlet conditions are imposed by dropping the first
and last ``m`` basis functions of the open knot vector.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import gmpy2
import numpy as np
from gmpy2 import mpfr

from ..extfloat import ExtCSR, current_precision, dot, ext_zeros, solve_spd
from .bspline import element_table, knot_vector, n_basis
from .problem import ProblemSpec, manufactured

__all__ = [
    "stiffness_1d",
    "mass_1d",
    "load_1d",
    "assemble",
    "prolongation",
    "prolongation_1d",
    "energy_functional",
    "energy_error",
    "energy_error_direct",
    "reference_solve",
    "Discretization",
    "discretization",
]


def _trim(n_full: int, m: int) -> slice:
    return slice(m, n_full - m)


@lru_cache(maxsize=None)
def _matrix_1d(p: int, j: int, deriv: int, trim: int, prec: int) -> ExtCSR:
    """``int N_i^(deriv) N_k^(deriv)`` over ``[0, 1]``, boundary functions removed."""
    ne = 1 << j
    nq = p + 1
    two = mpfr(2)
    scale = two ** (j * (2 * deriv - 1))  # h**(1 - 2 deriv)
    nf = n_basis(p, j)
    band = [dict() for _ in range(nf)]
    local_cache: dict = {}
    for e in range(ne):
        xs, ws, tab = element_table(p, j, e, deriv, nq)
        key = id(tab)
        loc = local_cache.get(key)
        if loc is None:
            d = tab[deriv]
            loc = [[None] * (p + 1) for _ in range(p + 1)]
            for a in range(p + 1):
                for b in range(a, p + 1):
                    s = mpfr(0)
                    for q in range(nq):
                        s += ws[q] * d[a][q] * d[b][q]
                    loc[a][b] = loc[b][a] = s * scale
            local_cache[key] = loc
        for a in range(p + 1):
            row = band[e + a]
            for b in range(p + 1):
                c = e + b
                row[c] = row.get(c, 0) + loc[a][b]
    lo, hi = trim, nf - trim
    entries = {}
    for i in range(lo, hi):
        for c, v in band[i].items():
            if lo <= c < hi and v != 0:
                entries[(i - lo, c - lo)] = v
    n = hi - lo
    return ExtCSR.from_dict(entries, (n, n))


def stiffness_1d(p: int, j: int, m: int, trim: int | None = None) -> ExtCSR:
    """``int N_i^(m) N_k^(m)`` with ``trim`` (default ``m``) boundary functions removed."""
    return _matrix_1d(p, j, m, m if trim is None else trim, current_precision())


def mass_1d(p: int, j: int, trim: int = 1) -> ExtCSR:
    return _matrix_1d(p, j, 0, trim, current_precision())


def load_1d(p: int, j: int, func, deriv: int = 0, trim: int = 1, nq: int | None = None) -> np.ndarray:
    """``int func(x) N_i^(deriv)(x) dx`` for the interior basis functions."""
    ne = 1 << j
    nq = p + 1 if nq is None else nq
    h = mpfr(2) ** (-j)
    dscale = mpfr(2) ** (j * deriv)
    out = ext_zeros(n_basis(p, j))
    for e in range(ne):
        xs, ws, tab = element_table(p, j, e, deriv, nq)
        x0 = e * h
        fw = [ws[q] * func(x0 + h * xs[q]) for q in range(nq)]
        d = tab[deriv]
        for a in range(p + 1):
            s = mpfr(0)
            for q in range(nq):
                s += fw[q] * d[a][q]
            out[e + a] += s * h * dscale
    return out[_trim(len(out), trim)].copy()


def assemble(spec: ProblemSpec) -> tuple[ExtCSR, np.ndarray]:
    """Stiffness matrix and load vector of ``spec`` (unscaled)."""
    return _assemble(spec, current_precision())


@lru_cache(maxsize=None)
def _assemble(spec: ProblemSpec, prec: int):
    sol = manufactured(spec)
    p, j, m = spec.p, spec.j, spec.m
    if spec.d == 1:
        A = stiffness_1d(p, j, m)
        b = load_1d(p, j, sol.rhs_factors[0], 0, m) * sol.rhs_scale()
        return A, b
    K = stiffness_1d(p, j, 1)
    M = mass_1d(p, j, 1)
    A = K.kron(M).add(M.kron(K))
    bx = load_1d(p, j, sol.rhs_factors[0], 0, 1)
    by = load_1d(p, j, sol.rhs_factors[1], 0, 1)
    b = np.outer(bx, by).ravel() * sol.rhs_scale()
    return A, b


# ---------------------------------------------------------------------------
# prolongation by knot insertion
# ---------------------------------------------------------------------------

def _refinement_rows(p: int, j: int) -> list[dict]:
    """Rows of the full-space refinement matrix from level ``j-1`` to ``j``.

    Inserts the new midpoints one at a time (Boehm's algorithm) while
    tracking each fine coefficient as an exact combination of coarse ones.
    """
    t = knot_vector(p, j - 1)
    rows = [{i: Fraction(1)} for i in range(n_basis(p, j - 1))]
    nc = 1 << (j - 1)
    # insert from right to left so earlier span indices stay valid
    for c in reversed(range(nc)):
        u = Fraction(2 * c + 1, 2 * nc)
        k = p + c  # t[k] <= u < t[k+1]
        new = []
        for i in range(k - p + 1, k + 1):
            alpha = (u - t[i]) / (t[i + p] - t[i])
            r = {}
            for col, v in rows[i].items():
                r[col] = r.get(col, 0) + alpha * v
            for col, v in rows[i - 1].items():
                r[col] = r.get(col, 0) + (1 - alpha) * v
            new.append({c2: v for c2, v in r.items() if v != 0})
        rows = rows[:k - p + 1] + new + rows[k:]
        t = t[:k + 1] + [u] + t[k + 1:]
    return rows


@lru_cache(maxsize=None)
def _prolongation_1d(p: int, j: int, trim: int) -> tuple:
    rows = _refinement_rows(p, j)
    nf, nc = n_basis(p, j), n_basis(p, j - 1)
    out = {}
    for i in range(trim, nf - trim):
        for c, v in rows[i].items():
            if trim <= c < nc - trim:
                out[(i - trim, c - trim)] = v
    return tuple(sorted(out.items())), (nf - 2 * trim, nc - 2 * trim)


def prolongation_1d(p: int, j: int, trim: int = 1, exact: bool = False):
    """Interior-to-interior refinement matrix from level ``j-1`` to ``j``.

    With ``exact=True`` returns ``({(i, k): Fraction}, shape)``; otherwise an
    :class:`ExtCSR` (all entries are dyadic, so the conversion is exact).
    """
    if j < 2:
        raise ValueError("prolongation needs j >= 2")
    items, shape = _prolongation_1d(p, j, trim)
    if exact:
        return dict(items), shape
    return ExtCSR.from_dict(dict(items), shape)


def prolongation(spec: ProblemSpec, j: int | None = None) -> ExtCSR:
    """Prolongation from level ``j-1`` to ``j`` for the interior space of ``spec``."""
    j = spec.j if j is None else j
    return _prolongation(spec.d, spec.p, j, spec.m, current_precision())


@lru_cache(maxsize=None)
def _prolongation(d: int, p: int, j: int, m: int, prec: int) -> ExtCSR:
    P1 = prolongation_1d(p, j, m)
    return P1 if d == 1 else P1.kron(P1)


# ---------------------------------------------------------------------------
# energy error
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _energy_data(spec: ProblemSpec, prec: int):
    """``(a(u, phi_i))_i`` by ``p + 3``-point quadrature, and ``a(u, u)``."""
    sol = manufactured(spec)
    p, j, m = spec.p, spec.j, spec.m
    nq = p + 3
    if spec.d == 1:
        g = load_1d(p, j, sol.factors[0][m], m, m, nq)
    else:
        fx, fy = sol.factors
        gx1 = load_1d(p, j, fx[1], 1, 1, nq)
        gx0 = load_1d(p, j, fx[0], 0, 1, nq)
        gy1 = load_1d(p, j, fy[1], 1, 1, nq)
        gy0 = load_1d(p, j, fy[0], 0, 1, nq)
        g = np.outer(gx1, gy0).ravel() + np.outer(gx0, gy1).ravel()
    return g, sol.energy_sq()


def energy_functional(spec: ProblemSpec):
    """Return ``(g, a(u,u))`` with ``g_i = a(u, phi_i)``."""
    return _energy_data(spec, current_precision())


def energy_error(coeffs, spec: ProblemSpec, A: ExtCSR | None = None) -> mpfr:
    """Energy-norm error ``a(u - u_h, u - u_h)**0.5`` of interior coefficients.

    Uses ``a(u,u) - 2 sum_i c_i a(u, phi_i) + c^T A c`` where ``A`` is the
    exactly integrated stiffness matrix and ``a(u, phi_i)`` is integrated
    elementwise with ``p + 3`` Gauss points.
    """
    c = np.asarray(coeffs, dtype=object)
    if A is None:
        A, _ = assemble(spec)
    if len(c) != A.shape[0]:
        raise ValueError("coefficient vector has the wrong length")
    g, uu = energy_functional(spec)
    val = uu - 2 * dot(c, g) + dot(c, A.matvec(c))
    if val < 0:
        # only possible when the error is below the quadrature accuracy
        val = mpfr(0)
    return gmpy2.sqrt(val)


def energy_error_direct(coeffs, spec: ProblemSpec) -> mpfr:
    """1D energy error by direct elementwise quadrature of ``(u - u_h)^(m)``."""
    if spec.d != 1:
        raise ValueError("direct evaluation is implemented for 1D only")
    sol = manufactured(spec)
    p, j, m = spec.p, spec.j, spec.m
    nq = p + 3
    full = [mpfr(0)] * m + [mpfr(v) for v in coeffs] + [mpfr(0)] * m
    h = mpfr(2) ** (-j)
    dscale = mpfr(2) ** (j * m)
    total = mpfr(0)
    for e in range(1 << j):
        xs, ws, tab = element_table(p, j, e, m, nq)
        d = tab[m]
        for q in range(nq):
            uh = sum(full[e + a] * d[a][q] for a in range(p + 1)) * dscale
            diff = sol.factors[0][m](e * h + h * xs[q]) - uh
            total += ws[q] * diff * diff
    return gmpy2.sqrt(total * h)


# ---------------------------------------------------------------------------
# reference solution
# ---------------------------------------------------------------------------

def reference_solve(spec: ProblemSpec) -> np.ndarray:
    """Galerkin solution of ``A u = b`` in extended precision."""
    return _reference(spec, current_precision())


@lru_cache(maxsize=None)
def _reference(spec: ProblemSpec, prec: int) -> np.ndarray:
    A, b = assemble(spec)
    return solve_spd(A, b, tol_bits=min(200, prec - 40))


class Discretization:
    """Convenience bundle of the per-level FEM data of one problem."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.A, self.b = assemble(spec)
        self.P = prolongation(spec) if spec.j >= 2 else None

    @property
    def u_h(self) -> np.ndarray:
        return reference_solve(self.spec)

    def error(self, coeffs) -> mpfr:
        return energy_error(coeffs, self.spec, self.A)

    @property
    def reference_error(self) -> mpfr:
        return self.error(self.u_h)


def discretization(spec: ProblemSpec) -> Discretization:
    return _disc(spec, current_precision())


@lru_cache(maxsize=None)
def _disc(spec: ProblemSpec, prec: int) -> Discretization:
    return Discretization(spec)

