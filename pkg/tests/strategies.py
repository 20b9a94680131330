"""Hypothesis strategies and a rational oracle for the windowed kernels."""
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from bfpmg.bfp import BfpBlock, BfpMatrix, from_rationals, normalize
from bfpmg.wideint import t_range


@st.composite
def blocks(draw, n=None, min_w=2, max_w=16, max_n=64, exp=(-12, 12)):
    w = draw(st.integers(min_w, max_w))
    n = draw(st.integers(1, max_n)) if n is None else n
    lo, hi = t_range(w)
    mant = draw(st.lists(st.integers(lo, hi), min_size=n, max_size=n))
    arr = np.empty(n, dtype=object)
    arr[:] = mant
    return BfpBlock(arr, w, draw(st.integers(*exp)), (n,))


@st.composite
def scalars(draw, min_w=2, max_w=16, positive=False):
    w = draw(st.integers(min_w, max_w))
    lo, hi = t_range(w)
    m = draw(st.integers(1 if positive else lo, hi))
    return BfpBlock(np.array([m], dtype=object), w, draw(st.integers(-8, 8)), ())


@st.composite
def sparse(draw, n, m, max_row=8, min_w=2, max_w=16):
    w = draw(st.integers(min_w, max_w))
    lo, hi = t_range(w)
    indptr, indices, data = [0], [], []
    for _ in range(n):
        k = draw(st.integers(0, min(max_row, m)))
        cols = sorted(draw(st.sets(st.integers(0, m - 1), min_size=k, max_size=k)))
        for c in cols:
            indices.append(c)
            data.append(draw(st.integers(lo, hi)))
        indptr.append(len(indices))
    arr = np.empty(len(data), dtype=object)
    arr[:] = data
    return BfpMatrix(np.array(indptr, dtype=np.int64), np.array(indices, dtype=np.int64), arr, w,
                     draw(st.integers(-8, 8)), (n, m))


@st.composite
def gammas(draw):
    """Normalized positive scalar estimates with a wide range of magnitudes."""
    return normalize(draw(scalars(2, 16, positive=True)))


def rat_axpby(x, y, alpha, beta):
    a, b = alpha.value(), beta.value()
    return [a * xi + b * yi for xi, yi in zip(x.to_rational(), y.to_rational())]


def rat_spmv(A, x):
    xs = x.to_rational()
    dense = A.to_rational_dense()
    return [sum((aij * xj for aij, xj in zip(row, xs)), Fraction(0)) for row in dense]


def rat_gemv(A, x, y, alpha, beta):
    ax = rat_spmv(A, x)
    a, b = alpha.value(), beta.value()
    return [a * u + b * v for u, v in zip(ax, y.to_rational())]


def oracle(values, w_out):
    """Floor of the exact values to a normalized width-``w_out`` block (nonzero case)."""
    return from_rationals(values, w_out)


def nn_oracle(values, w_out, gamma):
    """Saturating single-window oracle: window top at ``msb(gamma)`` in absolute bits."""
    from bfpmg.wideint import msb_int

    top = msb_int(int(gamma.mant[0])) + gamma.e
    e = top - w_out
    lo, hi = t_range(w_out)
    scale = Fraction(2) ** (-e)
    out = []
    for v in values:
        f = (v * scale).numerator // (v * scale).denominator
        out.append(min(max(f, lo), hi))
    return out, e
