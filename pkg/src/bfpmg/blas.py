"""Windowed BFP vector kernels.

Every kernel is split into a *setup* step, which fixes the width and
exponent of the exact per-row result, and a *row* step, which computes one
exact row as an integer mantissa at that exponent.  :func:`qcomp` wraps a
kernel so that the result is exact up to ``w_out`` bits and normalized;
:func:`nnqcomp` does a single saturating pass without normalization.

The ``*_row`` functions follow the per-row formulation literally and are
used as test oracles; :class:`Kernel` also provides a vectorised ``rows``
evaluation over all rows at once, which is what the drivers call.  Rows are
independent, so evaluating them in one sweep is a valid schedule.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .bfp import BfpBlock, BfpMatrix, scalar
from .wideint import (WideInt, ashr_array, clamp_array, max_msb, msb_int, wrap)

__all__ = [
    "ExactSpec",
    "Kernel",
    "AxpbyKernel",
    "SpmvKernel",
    "GemvKernel",
    "QcompResult",
    "InvalidWindow",
    "InvalidGamma",
    "eaxpby_setup",
    "eaxpby_row",
    "espmv_setup",
    "espmv_row",
    "egemv_setup",
    "egemv_row",
    "qcomp",
    "nnqcomp",
    "qaxpby",
    "qsub",
    "qspmv",
    "qgemv",
    "nnqaxpby",
    "nnqsub",
    "nnqspmv",
    "nnqgemv",
    "ONE",
    "MINUS_ONE",
]

ONE = scalar(1)          # q = 2
MINUS_ONE = scalar(-1)   # q = 1


class InvalidWindow(ValueError):
    pass


class InvalidGamma(ValueError):
    pass


class ExactSpec(NamedTuple):
    """Width and exponent of an exact row result."""

    q: int
    e: int


def _ceil_log2(m: int) -> int:
    return (m - 1).bit_length()


# ---------------------------------------------------------------------------
# axpby: z = alpha * x + beta * y
# ---------------------------------------------------------------------------

def eaxpby_setup(x: BfpBlock | ExactSpec, y: BfpBlock, alpha: BfpBlock, beta: BfpBlock):
    """Return ``(z_spec, (a_spec, b_spec, d))`` for the exact ``alpha x + beta y``."""
    if isinstance(x, BfpBlock) and x.n != y.n:
        raise ValueError("x and y have different lengths")
    a = ExactSpec(alpha.q + x.q, alpha.e + x.e)
    b = ExactSpec(beta.q + y.q, beta.e + y.e)
    d = a.e - b.e
    if d < 0:
        qz = max(a.q, b.q + abs(d)) + 1
    else:
        qz = max(b.q, a.q + abs(d)) + 1
    return ExactSpec(qz, min(a.e, b.e)), (a, b, d)


def eaxpby_row(z: ExactSpec, inp, state, i: int) -> int:
    """Exact row ``i`` of ``alpha x + beta y`` as a mantissa at exponent ``z.e``."""
    x, y, alpha, beta = inp
    a_spec, b_spec, d = state
    xi = x if isinstance(x, WideInt) else WideInt(int(x.mant[i]), x.q)
    a = WideInt(int(alpha.mant[0]), alpha.q) * xi
    b = WideInt(int(beta.mant[0]), beta.q) * WideInt(int(y.mant[i]), y.q)
    if d < 0:
        b = b.incr(-d).shl(-d)
    else:
        a = a.incr(d).shl(d)
    out = a + b
    if not out.msb() <= z.q:
        raise AssertionError("axpby row exceeded its setup width")
    return out.value


# ---------------------------------------------------------------------------
# spmv: z = A x
# ---------------------------------------------------------------------------

def espmv_setup(A: BfpMatrix, x: BfpBlock, m_A: int | None = None):
    if m_A is None:
        m_A = max(A.max_row_nnz, 1)
    if m_A < 1:
        raise ValueError("m_A must be positive")
    if m_A < A.max_row_nnz:
        raise ValueError(f"m_A={m_A} is smaller than the densest row ({A.max_row_nnz})")
    if A.shape[1] != x.n:
        raise ValueError("A and x have incompatible shapes")
    return ExactSpec(A.q + x.q + _ceil_log2(m_A), A.e + x.e), ()


def espmv_row(z: ExactSpec, inp, state, i: int) -> int:
    A, x, _ = inp
    cols, vals = A.row(i)
    acc = 0
    for j, a in zip(cols, vals):
        acc += int(a) * int(x.mant[j])
    if not msb_int(acc) <= z.q:
        raise AssertionError("spmv accumulator exceeded its setup width")
    return acc


def _spmv_rows(A: BfpMatrix, x: BfpBlock) -> np.ndarray:
    n = A.shape[0]
    out = np.zeros(n, dtype=object)
    if A.nnz == 0:
        return out
    prod = A.data * x.mant[A.indices]
    counts = np.diff(A.indptr)
    nonempty = counts > 0
    out[nonempty] = np.add.reduceat(prod, A.indptr[:-1][nonempty])
    return out


# ---------------------------------------------------------------------------
# gemv: z = alpha A x + beta y
# ---------------------------------------------------------------------------

def egemv_setup(A: BfpMatrix, x: BfpBlock, y: BfpBlock, alpha: BfpBlock, beta: BfpBlock,
                m_A: int | None = None):
    g, _ = espmv_setup(A, x, m_A)
    if A.shape[0] != y.n:
        raise ValueError("A and y have incompatible shapes")
    z, (a, b, d) = eaxpby_setup(g, y, alpha, beta)
    return z, (g, a, b, d)


def egemv_row(z: ExactSpec, inp, state, i: int) -> int:
    A, x, y, alpha, beta, m_A = inp
    g, a, b, d = state
    gi = espmv_row(g, (A, x, m_A), (), i)
    yi = BfpBlock(np.array([y.mant[i]], dtype=object), y.q, y.e, (1,))
    return eaxpby_row(z, (WideInt(gi, g.q), yi, alpha, beta), (a, b, d), 0)


def _axpby_rows(a_mant: np.ndarray, b_mant: np.ndarray, d: int) -> np.ndarray:
    if d < 0:
        return a_mant + (b_mant << (-d))
    return (a_mant << d) + b_mant


# ---------------------------------------------------------------------------
# kernel objects
# ---------------------------------------------------------------------------

class Kernel:
    """An exact row kernel: ``spec`` fixes ``(q_z, e_z)``; ``rows()`` evaluates all rows."""

    name = "kernel"
    spec: ExactSpec
    n: int

    def rows(self) -> np.ndarray:
        raise NotImplementedError

    def row(self, i: int) -> int:
        raise NotImplementedError


class AxpbyKernel(Kernel):
    name = "axpby"

    def __init__(self, x: BfpBlock, y: BfpBlock, alpha: BfpBlock, beta: BfpBlock):
        self.inp = (x, y, alpha, beta)
        self.spec, self.state = eaxpby_setup(x, y, alpha, beta)
        self.n = x.n

    def rows(self) -> np.ndarray:
        x, y, alpha, beta = self.inp
        d = self.state[2]
        return _axpby_rows(x.mant * int(alpha.mant[0]), y.mant * int(beta.mant[0]), d)

    def row(self, i: int) -> int:
        return eaxpby_row(self.spec, self.inp, self.state, i)


class SpmvKernel(Kernel):
    name = "spmv"

    def __init__(self, A: BfpMatrix, x: BfpBlock, m_A: int | None = None):
        self.inp = (A, x, m_A)
        self.spec, self.state = espmv_setup(A, x, m_A)
        self.n = A.shape[0]

    def rows(self) -> np.ndarray:
        A, x, _ = self.inp
        return _spmv_rows(A, x)

    def row(self, i: int) -> int:
        return espmv_row(self.spec, self.inp, self.state, i)


class GemvKernel(Kernel):
    name = "gemv"

    def __init__(self, A: BfpMatrix, x: BfpBlock, y: BfpBlock, alpha: BfpBlock,
                 beta: BfpBlock, m_A: int | None = None):
        self.inp = (A, x, y, alpha, beta, m_A)
        self.spec, self.state = egemv_setup(A, x, y, alpha, beta, m_A)
        self.n = A.shape[0]

    def rows(self) -> np.ndarray:
        A, x, y, alpha, beta, _ = self.inp
        d = self.state[3]
        g = _spmv_rows(A, x)
        return _axpby_rows(g * int(alpha.mant[0]), y.mant * int(beta.mant[0]), d)

    def row(self, i: int) -> int:
        return egemv_row(self.spec, self.inp, self.state, i)


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

@dataclass
class QcompResult:
    """Output block plus the window bookkeeping of one driver call."""

    z: BfpBlock
    recomputed: bool = False
    overflow: bool = False
    underflow: bool = False
    mu_tmp: int = 0
    mu_star: int = 0
    saturated: int = 0


def _check_gamma(gamma: BfpBlock):
    if gamma.n != 1 or int(gamma.mant[0]) <= 0:
        raise InvalidGamma("gamma must be a positive scalar")
    if not gamma.is_normalized():
        raise InvalidGamma("gamma must be normalized")


def _window_top(gamma: BfpBlock, e_z: int) -> int:
    return msb_int(int(gamma.mant[0])) + gamma.e - e_z


def qcomp(kernel: Kernel, w_out: int, w_tmp: int, gamma: BfpBlock,
          force_recompute: bool = False) -> QcompResult:
    """Compute ``kernel`` exactly up to ``w_out`` bits with a normalized result.

    ``gamma`` estimates the infinity norm of the result and, together with
    ``w_tmp``, positions a bit window for a first pass.  If the window
    misses the leading bit (overflow) or keeps fewer than ``w_out`` bits
    below it (underflow), all rows are recomputed.  The output is identical
    either way.
    """
    if w_out < 1 or w_out > w_tmp:
        raise InvalidWindow(f"need 0 < w_out <= w_tmp, got {w_out}, {w_tmp}")
    _check_gamma(gamma)
    spec = kernel.spec
    mu_tmp = _window_top(gamma, spec.e)
    lam_tmp = mu_tmp - w_tmp

    exact = kernel.rows()
    mu_star = max(1, max_msb(exact))
    # temporary window [lam_tmp, mu_tmp) of each exact row, wrapped to w_tmp bits
    tmp = wrap(ashr_array(exact, lam_tmp), w_tmp)

    lam_out = mu_star - w_out
    e_out = spec.e + lam_out
    overflow = mu_tmp < mu_star
    underflow = lam_out < lam_tmp
    recompute = overflow or underflow or force_recompute
    if recompute:
        exact = kernel.rows()
        mant = wrap(ashr_array(exact, lam_out), w_out)
    else:
        mant = wrap(ashr_array(tmp, lam_out - lam_tmp), w_out)
    return QcompResult(BfpBlock(mant, w_out, e_out, (kernel.n,)), recompute, overflow,
                       underflow, mu_tmp, mu_star)


def nnqcomp(kernel: Kernel, w_out: int, gamma: BfpBlock) -> QcompResult:
    """Single-pass variant: window fixed by ``gamma``, saturating, unnormalized."""
    if w_out < 1:
        raise InvalidWindow("w_out must be positive")
    _check_gamma(gamma)
    spec = kernel.spec
    mu_out = _window_top(gamma, spec.e)
    lam_out = mu_out - w_out
    lo, hi = -(1 << (w_out - 1)), (1 << (w_out - 1)) - 1
    shifted = ashr_array(kernel.rows(), lam_out)
    mant = clamp_array(shifted, lo, hi)
    saturated = int(np.count_nonzero(mant != shifted))
    return QcompResult(BfpBlock(mant, w_out, spec.e + lam_out, (kernel.n,)),
                       mu_tmp=mu_out, saturated=saturated)


def _run(kernel: Kernel, w_out: int, gamma: BfpBlock, w_tmp: int | None,
         normalized: bool) -> QcompResult:
    if normalized:
        return qcomp(kernel, w_out, w_out if w_tmp is None else w_tmp, gamma)
    return nnqcomp(kernel, w_out, gamma)


def qaxpby(x, y, alpha, beta, w_out, gamma, w_tmp=None) -> QcompResult:
    return _run(AxpbyKernel(x, y, alpha, beta), w_out, gamma, w_tmp, True)


def qsub(x, y, w_out, gamma, w_tmp=None) -> QcompResult:
    return _run(AxpbyKernel(x, y, ONE, MINUS_ONE), w_out, gamma, w_tmp, True)


def qspmv(A, x, m_A, w_out, gamma, w_tmp=None) -> QcompResult:
    return _run(SpmvKernel(A, x, m_A), w_out, gamma, w_tmp, True)


def qgemv(A, x, y, alpha, beta, m_A, w_out, gamma, w_tmp=None) -> QcompResult:
    return _run(GemvKernel(A, x, y, alpha, beta, m_A), w_out, gamma, w_tmp, True)


def nnqaxpby(x, y, alpha, beta, w_out, gamma) -> QcompResult:
    return nnqcomp(AxpbyKernel(x, y, alpha, beta), w_out, gamma)


def nnqsub(x, y, w_out, gamma) -> QcompResult:
    return nnqcomp(AxpbyKernel(x, y, ONE, MINUS_ONE), w_out, gamma)


def nnqspmv(A, x, m_A, w_out, gamma) -> QcompResult:
    return nnqcomp(SpmvKernel(A, x, m_A), w_out, gamma)


def nnqgemv(A, x, y, alpha, beta, m_A, w_out, gamma) -> QcompResult:
    return nnqcomp(GemvKernel(A, x, y, alpha, beta, m_A), w_out, gamma)
