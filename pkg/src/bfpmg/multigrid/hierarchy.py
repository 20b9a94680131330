"""Level hierarchy, Chebyshev coefficients and the ``D = I`` setup.

A :class:`Hierarchy` holds one :class:`LevelData` per refinement level
``1..ell``.  Extended-precision masters are rescaled once so that every
level matrix has unit diagonal; BFP quantizations at the widths requested
by the solver are produced lazily and cached.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg
from gmpy2 import mpfr

from ..bfp import BfpBlock, BfpMatrix, DEFAULT_Q_GAMMA, from_values, scalar_from_value
from ..extfloat import ExtCSR, current_precision, dot, ext
from ..fem import ProblemSpec, assemble, energy_error, prolongation, reference_solve

__all__ = [
    "ChebCoeffs",
    "chebyshev_coeffs",
    "max_gen_eig_upper",
    "LevelData",
    "Hierarchy",
    "solver_setup",
    "level_data",
    "ELL_EST",
    "EIG_SAFETY",
]

ELL_EST = 5
EIG_SAFETY = Fraction(101, 100)


@dataclass(frozen=True)
class ChebCoeffs:
    """Coefficients of the fused two-step Chebyshev smoother ``y = (c1 I + c2 A) r``."""

    c1: object
    c2: object
    rho: object
    eta: object
    alpha: object
    beta: object
    c: object


def chebyshev_coeffs(rho, eta) -> ChebCoeffs:
    """Two-step Chebyshev coefficients targeting ``[eta rho, rho]``.

    Works with any field type (``Fraction`` gives exact results, ``mpfr``
    extended precision).  ``eta`` may be 0 or 1: both ends of the search grid
    used by :func:`~bfpmg.multigrid.estimate.estimate_eta` give finite
    coefficients.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    alpha = (1 + eta) * rho / 2
    c = (1 - eta) * rho / 2
    beta = alpha - c * c / (2 * alpha)
    c1 = 2 / beta
    c2 = -1 / (alpha * beta)
    return ChebCoeffs(c1, c2, rho, eta, alpha, beta, c)


def max_gen_eig_upper(A: ExtCSR, D=None, safety=EIG_SAFETY) -> mpfr:
    """Upper bound for the largest ``lambda`` of ``A x = lambda D x``.

    ``D`` defaults to ``diag(A)``.  The eigenvalue is computed with LAPACK
    on the (small) estimation level and multiplied by ``safety``; the
    factor dominates the float64 error by many orders of magnitude.
    """
    Ad = np.array([[float(v) for v in row] for row in A.to_dense()])
    d = np.diag(Ad).copy() if D is None else np.array([float(v) for v in D])
    if np.any(d <= 0):
        raise ValueError("D must be positive")
    _, vec = scipy.linalg.eigh(Ad, np.diag(d), subset_by_index=[len(d) - 1, len(d) - 1])
    # Rayleigh quotient of the LAPACK vector in extended precision: its error is
    # quadratic in the vector error, far below the safety margin
    x = np.array([mpfr(float(v)) for v in vec[:, 0]], dtype=object)
    dx = A.diagonal() if D is None else np.asarray(D, dtype=object)
    lam = dot(x, A.matvec(x)) / dot(x, x * dx)
    return lam * mpfr(safety.numerator) / safety.denominator


class LevelData:
    """Per-level masters (unscaled and ``D = I`` scaled) plus cached quantizations."""

    def __init__(self, spec: ProblemSpec):
        self.spec = spec
        self.j = spec.j
        self.A_raw, self.b_raw = assemble(spec)
        self.D = self.A_raw.diagonal()
        if any(v <= 0 for v in self.D):
            raise ValueError("stiffness matrix has a non-positive diagonal entry")
        dinv = np.array([1 / v for v in self.D], dtype=object)
        self.A = self.A_raw.scale_rows(dinv)
        self.b = self.b_raw * dinv
        if self.j >= 2:
            self.P = prolongation(spec)
            coarse = level_data(spec.at(self.j - 1))
            dcinv = np.array([1 / v for v in coarse.D], dtype=object)
            self.R = self.P.transpose().scale_cols(self.D).scale_rows(dcinv)
            self.R_norm = self.R.abs_inf_norm()
        else:
            self.P = self.R = None
            self.R_norm = mpfr(0)
        self.n = self.A.shape[0]
        self.m_A = self.A.max_row_nnz
        self.m_P = self.P.max_row_nnz if self.P is not None else 0
        self.m_R = self.R.max_row_nnz if self.R is not None else 0
        self._exact: dict = {}
        self._cache: dict = {}

    # reference data -------------------------------------------------------
    @property
    def u_h(self) -> np.ndarray:
        return reference_solve(self.spec)

    def error(self, coeffs) -> mpfr:
        if isinstance(coeffs, BfpBlock):
            coeffs = coeffs.to_mpfr()
        return energy_error(coeffs, self.spec, self.A_raw)

    @property
    def reference_error(self) -> mpfr:
        if "ref_err" not in self._exact:
            self._exact["ref_err"] = self.error(self.u_h)
        return self._exact["ref_err"]

    def ratio(self, coeffs) -> float:
        return float(self.error(coeffs) / self.reference_error)

    # quantizations ----------------------------------------------------------
    def _exact_matrix(self, name: str) -> BfpMatrix:
        if name not in self._exact:
            M = getattr(self, name)
            self._exact[name] = BfpMatrix.from_csr(M.indptr, M.indices, M.data, None, M.shape)
        return self._exact[name]

    def _quant(self, name: str, w: int):
        key = (name, w)
        out = self._cache.get(key)
        if out is None:
            if name == "b":
                out = from_values(self.b, w)
            else:
                out = self._exact_matrix(name).quantize(w)
            self._cache[key] = out
        return out

    def A_q(self, w: int) -> BfpMatrix:
        return self._quant("A", w)

    def b_q(self, w: int) -> BfpBlock:
        return self._quant("b", w)

    def P_q(self, w: int) -> BfpMatrix:
        return self._quant("P", w)

    def R_q(self, w: int) -> BfpMatrix:
        return self._quant("R", w)


@lru_cache(maxsize=None)
def _level(spec: ProblemSpec, prec: int) -> LevelData:
    return LevelData(spec)


def level_data(spec: ProblemSpec) -> LevelData:
    """Cached :class:`LevelData` (scaled masters depend only on the level)."""
    return _level(spec, current_precision())


@dataclass
class Hierarchy:
    """Levels ``1..ell`` of one problem together with the smoother coefficients."""

    spec: ProblemSpec
    levels: list
    cheb: ChebCoeffs
    ell_est: int
    q_gamma: int = DEFAULT_Q_GAMMA
    _cq: dict = field(default_factory=dict)

    @property
    def ell(self) -> int:
        return len(self.levels)

    def level(self, j: int) -> LevelData:
        return self.levels[j - 1]

    def cheb_q(self, w: int) -> tuple[BfpBlock, BfpBlock]:
        """``(c1, c2)`` floor-quantized to ``w``-bit BFP scalars."""
        key = ("c", w)
        if key not in self._cq:
            self._cq[key] = (scalar_from_value(self.cheb.c1, w), scalar_from_value(self.cheb.c2, w))
        return self._cq[key]

    def gamma_const(self, name: str) -> BfpBlock:
        """Rounded-up constants for the gamma rules: ``c1``, ``(2 c1 + 1)/4``, ``||R_j||``."""
        if name not in self._cq:
            if name == "c1":
                v = self.cheb.c1
            elif name == "vres":
                v = (2 * self.cheb.c1 + 1) / 4
            elif name.startswith("R"):
                v = self.level(int(name[1:])).R_norm
            else:
                raise KeyError(name)
            self._cq[name] = scalar_from_value(v, self.q_gamma, round_up=True)
        return self._cq[name]

    def with_eta(self, eta) -> "Hierarchy":
        return solver_setup(self.spec, self.ell, eta=eta, ell_est=self.ell_est)


def solver_setup(spec: ProblemSpec, ell: int | None = None, eta=None,
                 ell_est: int = ELL_EST, rho=None) -> Hierarchy:
    """Build levels ``1..ell`` with unit diagonals and compute ``(c1, c2)``.

    ``rho`` is the generalized eigenvalue bound on level ``ell_est`` (the
    finest level if the hierarchy is shallower).  ``eta`` defaults to the
    value minimizing the exact-arithmetic V-cycle rate on that level.
    """
    ell = spec.j if ell is None else ell
    levels = [level_data(spec.at(j)) for j in range(1, ell + 1)]
    est = min(ell_est, ell)
    if rho is None:
        rho = _rho(spec.at(est))
    if eta is None:
        from .estimate import estimate_eta

        eta = estimate_eta(spec, est, rho=rho)
    cheb = chebyshev_coeffs(rho, ext(eta))
    return Hierarchy(spec.at(ell), levels, cheb, est)


@lru_cache(maxsize=None)
def _rho_cached(spec: ProblemSpec, prec: int) -> mpfr:
    A, _ = assemble(spec)
    return max_gen_eig_upper(A)


def _rho(spec: ProblemSpec) -> mpfr:
    return _rho_cached(spec, current_precision())
