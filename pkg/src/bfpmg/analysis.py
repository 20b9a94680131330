"""Quantization-error study: eigenpairs, relative energy errors, conditioning and
the minimum-energy ("discrete harmonic") bound.

The relative BFP quantization error of a vector ``u`` with unit infinity norm
is ``E(v, z) = eps ||z||_A / ||v||_A`` where ``v`` is the BFP quantization of
``u`` and ``u = v + eps z``.  Because ``E`` is a ratio, the scaling of ``A``
does not matter; :func:`quant_error` therefore works with the matrices as
assembled.

Extreme eigenvalues start from LAPACK (double precision) and are refined in
extended precision; every extended-precision result carries a residual that
can be checked by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import gmpy2
import mpmath
import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla
from gmpy2 import mpfr

from .bfp import epsilon, from_values
from .extfloat import BandCholesky, ExtCSR, current_precision, dot, ext, ext_array, inf_norm

__all__ = [
    "SpectralReport",
    "smallest_eigpairs",
    "quant_error",
    "energy_norm",
    "DiscreteHarmonic",
    "discrete_harmonic_min",
    "harmonic_bound_fd2d",
    "growth_exponent",
    "condition_numbers",
    "ConditionReport",
    "poisson_fd_2d",
    "fd2d_lambda_min",
    "checkerboard",
    "fitted_slope",
]


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------

def _to_mp(x) -> mpmath.mpf:
    m, e = mpfr(x).as_mantissa_exp()
    return mpmath.mpf((int(m), int(e)))


def _from_mp(x) -> mpfr:
    sign, man, exp, _ = mpmath.mpf(x)._mpf_
    v = gmpy2.mul_2exp(mpfr(int(man)), int(exp))
    return -v if sign else v


def _norm2(v: np.ndarray) -> mpfr:
    return gmpy2.sqrt(dot(v, v))


def energy_norm(v: np.ndarray, A: ExtCSR) -> mpfr:
    """``<A v, v>**0.5`` in extended precision."""
    val = dot(v, A.matvec(v))
    return gmpy2.sqrt(val if val > 0 else mpfr(0))


def fitted_slope(x, y) -> float:
    """Least-squares slope of ``y`` against ``x``."""
    return float(np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)[0])


def _dense_float(A: ExtCSR) -> np.ndarray:
    return A.to_scipy().toarray()


def _factor(A: ExtCSR):
    return BandCholesky(A)


# ---------------------------------------------------------------------------
# eigenpairs
# ---------------------------------------------------------------------------

@dataclass
class SpectralReport:
    """Smallest eigenpairs plus conditioning summary."""

    eigenvalues: list
    eigenvectors: list
    residuals: list
    kappa: mpfr | None = None
    kappa_lower: mpfr | None = None
    h: mpfr | None = None
    iterations: int = 0

    @property
    def count(self) -> int:
        return len(self.eigenvalues)


def _orthonormalize(V: list) -> list:
    out = []
    for v in V:
        w = v.copy()
        for _ in range(2):  # twice is enough
            for q in out:
                w = w - q * dot(q, w)
        out.append(w / _norm2(w))
    return out


def _rayleigh_ritz(A: ExtCSR, V: list):
    AV = [A.matvec(v) for v in V]
    b = len(V)
    with mpmath.workprec(current_precision()):
        H = mpmath.matrix(b, b)
        for i in range(b):
            for k in range(i, b):
                H[i, k] = H[k, i] = _to_mp(dot(V[i], AV[k]))
        E, Q = mpmath.eigsy(H)
        lam = [_from_mp(E[i]) for i in range(b)]
        Q = [[_from_mp(Q[k, i]) for k in range(b)] for i in range(b)]
    order = sorted(range(b), key=lambda i: lam[i])
    newV, newAV = [], []
    for i in order:
        coef = Q[i]
        v = sum((V[k] * coef[k] for k in range(b)), np.zeros(len(V[0]), dtype=object) + mpfr(0))
        av = sum((AV[k] * coef[k] for k in range(b)), np.zeros(len(V[0]), dtype=object) + mpfr(0))
        newV.append(v)
        newAV.append(av)
    return [lam[i] for i in order], newV, newAV


def smallest_eigpairs(A: ExtCSR, count: int = 8, guard: int | None = None, tol_bits: int = 100,
                      max_iter: int = 200) -> SpectralReport:
    """Smallest ``count`` eigenpairs of the SPD matrix ``A``.

    Starts from LAPACK eigenvectors and runs block inverse iteration with
    Rayleigh-Ritz extraction in extended precision (``guard`` extra vectors
    speed up convergence) until ``||A v - lambda v|| <= 2**-tol_bits ||v||``
    for every returned pair.  Eigenvectors have unit Euclidean norm.
    """
    n = A.shape[0]
    count = min(count, n)
    guard = min(count if guard is None else guard, n - count)
    b = count + guard
    lam0, X = scipy.linalg.eigh(_dense_float(A), subset_by_index=[0, b - 1])
    V = _orthonormalize([ext_array(X[:, i].tolist()) for i in range(b)])
    chol = _factor(A)
    tol = gmpy2.exp2(-tol_bits)
    for it in range(max_iter + 1):
        lam, V, AV = _rayleigh_ritz(A, V)
        res = [_norm2(AV[i] - V[i] * lam[i]) for i in range(count)]
        if all(r <= tol for r in res):
            return SpectralReport(lam[:count], V[:count], res, iterations=it)
        V = _orthonormalize([chol.solve(v) for v in V])
    raise RuntimeError("inverse iteration did not converge")


# ---------------------------------------------------------------------------
# relative quantization error
# ---------------------------------------------------------------------------

def quant_error(v, w: int, A: ExtCSR) -> mpfr:
    """Relative energy error ``eps ||z||_A / ||q||_A`` of quantizing ``v``.

    ``v`` is scaled to unit infinity norm (``u``), floor-quantized to a
    normalized width-``w`` block (``q``) and ``eps z = u - q`` with
    ``eps = 2**-(w-1)``.  Returns an extended-precision number (the
    ratio involves square roots).
    """
    v = np.asarray(v, dtype=object)
    nv = inf_norm(v)
    if nv == 0:
        raise ValueError("v must be nonzero")
    u = np.array([mpfr(x) / nv for x in v], dtype=object)
    qb = from_values(u, w)
    q = qb.to_mpfr()
    err = u - q  # eps * z
    den = energy_norm(q, A)
    if den == 0:
        return mpfr("inf")
    return energy_norm(err, A) / den


def quant_bound(kappa, w: int) -> mpfr:
    """``kappa**0.5 * eps`` for width ``w``."""
    return gmpy2.sqrt(ext(kappa)) * ext(epsilon(w))


__all__.append("quant_bound")


def checkerboard(n: int) -> np.ndarray:
    """0/1 checkerboard on an ``n x n`` grid (row-major), 1 at even ``i + j``."""
    i, j = np.indices((n, n))
    return ((i + j) % 2 == 0).astype(float).ravel()


# ---------------------------------------------------------------------------
# discrete harmonic
# ---------------------------------------------------------------------------

@dataclass
class DiscreteHarmonic:
    """Minimum of ``||v||_A`` over ``||v||_inf = 1`` and its minimizer."""

    bound: mpfr
    index: int
    v: np.ndarray
    inv_diag: np.ndarray = field(repr=False)

    def certificate(self, A: ExtCSR) -> dict:
        """Residual checks: ``|v_p - 1|``, ``max_q!=p |(A v)_q|`` and ``| ||v||_A - bound |``."""
        Av = A.matvec(self.v)
        off = max((abs(Av[q]) for q in range(len(Av)) if q != self.index), default=mpfr(0))
        return {
            "v_p": abs(self.v[self.index] - 1),
            "harmonic": off,
            "energy": abs(energy_norm(self.v, A) - self.bound),
        }


def discrete_harmonic_min(A: ExtCSR) -> DiscreteHarmonic:
    """``(max_p (A^-1)_pp)**-0.5``, the maximizing ``p`` and ``v = A^-1 e_p / (A^-1)_pp``.

    ``diag(A^-1)`` comes from ``n`` column solves with one band Cholesky
    factorization; ties in the maximum go to the smallest index.
    """
    n = A.shape[0]
    chol = _factor(A)
    diag = np.empty(n, dtype=object)
    best, best_col = None, None
    for p in range(n):
        e = np.array([mpfr(0)] * n, dtype=object)
        e[p] = mpfr(1)
        col = chol.solve(e)
        diag[p] = col[p]
        if best is None or col[p] > diag[best]:
            best, best_col = p, col
    d = diag[best]
    v = best_col / d
    return DiscreteHarmonic(1 / gmpy2.sqrt(d), best, v, diag)


def poisson_fd_2d(n: int, scaled: bool = False) -> ExtCSR:
    """Five-point Laplacian ``4, -1`` on an ``n x n`` interior grid.

    With ``scaled=True`` the matrix is divided by its smallest eigenvalue
    :func:`fd2d_lambda_min`, so the minimal eigenvalue is exactly 1.
    """
    entries = {}
    s = 1 / fd2d_lambda_min(n) if scaled else mpfr(1)
    for i in range(n):
        for j in range(n):
            r = i * n + j
            entries[(r, r)] = 4 * s
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                a, c = i + di, j + dj
                if 0 <= a < n and 0 <= c < n:
                    entries[(r, a * n + c)] = -s
    return ExtCSR.from_dict(entries, (n * n, n * n))


def fd2d_lambda_min(n: int) -> mpfr:
    """Smallest eigenvalue ``8 sin^2(pi / (2 (n + 1)))`` of the five-point Laplacian."""
    return 8 * gmpy2.sin(gmpy2.const_pi() / (2 * (n + 1))) ** 2


def harmonic_bound_fd2d(n: int) -> float:
    """Double-precision discrete-harmonic bound for the scaled five-point Laplacian.

    Uses the sine eigenbasis of the 1D stencil: with ``T = Q diag(l) Q^T``,
    ``diag(A^-1)`` on the grid is ``(Q*Q) M (Q*Q)^T`` where
    ``M_ik = 1/(l_i + l_k)``.  The result times ``lambda_min`` is the
    inverse diagonal of the scaled matrix.
    """
    i = np.arange(1, n + 1)
    lam = 2 - 2 * np.cos(i * np.pi / (n + 1))
    Q = np.sqrt(2 / (n + 1)) * np.sin(np.outer(i, i) * np.pi / (n + 1))
    Q2 = Q * Q
    D = Q2 @ (1 / (lam[:, None] + lam[None, :])) @ Q2.T
    return float((D.max() * 2 * lam[0]) ** -0.5)


def growth_exponent(ns) -> float:
    """Least-squares exponent of :func:`harmonic_bound_fd2d` against ``n``."""
    ns = list(ns)
    return fitted_slope(np.log(ns), np.log([harmonic_bound_fd2d(n) for n in ns]))


# ---------------------------------------------------------------------------
# condition numbers
# ---------------------------------------------------------------------------

@dataclass
class ConditionReport:
    kappa: mpfr
    kappa_lower: mpfr
    h: mpfr
    lambda_min: mpfr
    lambda_max: mpfr
    abs_norm: mpfr


def _extreme_vector(M, which: str) -> np.ndarray:
    n = M.shape[0]
    if n <= 600:
        dense = M.toarray()
        idx = [0, 0] if which == "SA" else [n - 1, n - 1]
        return scipy.linalg.eigh(dense, subset_by_index=idx)[1][:, 0]
    if which == "SA":
        return spla.eigsh(M.tocsc(), k=1, sigma=0, which="LM")[1][:, 0]
    return spla.eigsh(M, k=1, which="LA")[1][:, 0]


def _rayleigh(A: ExtCSR, x: np.ndarray) -> mpfr:
    v = ext_array(x.tolist())
    return dot(v, A.matvec(v)) / dot(v, v)


def condition_numbers(A: ExtCSR, m: int) -> ConditionReport:
    """``kappa = lambda_max / lambda_min``, ``kappa_lower = || |A| ||_2 ||A^-1||_2``
    and the pseudo mesh size ``h = kappa_lower**(-1/(2m))``.

    Extreme eigenvectors come from LAPACK/ARPACK; their Rayleigh quotients
    are evaluated in extended precision (eigenvalue error is quadratic in
    the vector error, about ``1e-30`` relative).
    """
    S = A.to_scipy()
    lmin = _rayleigh(A, _extreme_vector(S, "SA"))
    lmax = _rayleigh(A, _extreme_vector(S, "LA"))
    absA = ExtCSR(A.indptr, A.indices, np.array([abs(v) for v in A.data], dtype=object), A.shape)
    anorm = _rayleigh(absA, _extreme_vector(absA.to_scipy(), "LA"))
    kl = anorm / lmin
    return ConditionReport(lmax / lmin, kl, kl ** (mpfr(-1) / (2 * m)), lmin, lmax, anorm)
