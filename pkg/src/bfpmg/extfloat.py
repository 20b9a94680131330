"""Extended-precision floating point helpers built on MPFR (via gmpy2).

Setup and reference computations run at a configurable mantissa width
(400 bits by default).  Vectors are numpy object arrays of ``mpfr``; sparse
matrices use the small :class:`ExtCSR` container below, which supports the
handful of operations the FEM and multigrid setup need.
"""
from __future__ import annotations

import contextlib
from fractions import Fraction
from typing import Iterable, Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

DEFAULT_PREC = 400

gmpy2.get_context().precision = DEFAULT_PREC

__all__ = [
    "DEFAULT_PREC",
    "ExtCSR",
    "precision",
    "current_precision",
    "ext",
    "ext_array",
    "ext_zeros",
    "to_float",
    "dot",
    "inf_norm",
    "BandCholesky",
    "solve_spd",
]


def current_precision() -> int:
    return gmpy2.get_context().precision


@contextlib.contextmanager
def precision(bits: int):
    """Temporarily run MPFR arithmetic at ``bits`` of mantissa."""
    ctx = gmpy2.get_context()
    old = ctx.precision
    ctx.precision = bits
    try:
        yield
    finally:
        ctx.precision = old


def ext(v) -> mpfr:
    if isinstance(v, Fraction):
        return mpfr(gmpy2.mpq(v.numerator, v.denominator))
    return mpfr(v)


def ext_array(values: Iterable) -> np.ndarray:
    vals = [ext(v) for v in values]
    out = np.empty(len(vals), dtype=object)
    out[:] = vals
    return out


def ext_zeros(n: int) -> np.ndarray:
    out = np.empty(n, dtype=object)
    out[:] = [mpfr(0)] * n
    return out


def to_float(a) -> np.ndarray:
    return np.array([float(v) for v in a], dtype=float)


def dot(x: np.ndarray, y: np.ndarray) -> mpfr:
    if len(x) == 0:
        return mpfr(0)
    return gmpy2.fsum(list(x * y))


def inf_norm(x: np.ndarray) -> mpfr:
    if len(x) == 0:
        return mpfr(0)
    return max(abs(v) for v in x)


class ExtCSR:
    """CSR matrix with ``mpfr`` entries."""

    def __init__(self, indptr, indices, data, shape):
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.data = data if isinstance(data, np.ndarray) and data.dtype == object \
            else ext_array(data)
        self.shape = tuple(shape)

    # construction -------------------------------------------------------
    @classmethod
    def from_dict(cls, entries: dict, shape) -> "ExtCSR":
        """Build from ``{(i, j): value}``; columns are sorted within rows."""
        n = shape[0]
        rows: list[list] = [[] for _ in range(n)]
        for (i, j), v in entries.items():
            rows[i].append((j, v))
        indptr, indices, data = [0], [], []
        for r in rows:
            r.sort(key=lambda t: t[0])
            for j, v in r:
                indices.append(j)
                data.append(v)
            indptr.append(len(indices))
        return cls(indptr, indices, ext_array(data), shape)

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence]) -> "ExtCSR":
        entries = {}
        for i, r in enumerate(rows):
            for j, v in enumerate(r):
                if v != 0:
                    entries[(i, j)] = v
        return cls.from_dict(entries, (len(rows), len(rows[0]) if rows else 0))

    @classmethod
    def identity(cls, n: int) -> "ExtCSR":
        return cls(np.arange(n + 1), np.arange(n), ext_array([1] * n), (n, n))

    @classmethod
    def diag(cls, d: np.ndarray) -> "ExtCSR":
        n = len(d)
        return cls(np.arange(n + 1), np.arange(n), np.array(d, dtype=object), (n, n))

    # queries --------------------------------------------------------------
    @property
    def nnz(self) -> int:
        return len(self.data)

    @property
    def max_row_nnz(self) -> int:
        return int(np.max(np.diff(self.indptr))) if self.shape[0] else 0

    def bandwidth(self) -> int:
        if self.nnz == 0:
            return 0
        rows = np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))
        return int(np.max(np.abs(rows - self.indices)))

    def row(self, i: int):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def get(self, i: int, j: int):
        cols, vals = self.row(i)
        k = np.searchsorted(cols, j)
        if k < len(cols) and cols[k] == j:
            return vals[k]
        return mpfr(0)

    def diagonal(self) -> np.ndarray:
        n = min(self.shape)
        return ext_array([self.get(i, i) for i in range(n)])

    def to_dict(self) -> dict:
        out = {}
        for i in range(self.shape[0]):
            cols, vals = self.row(i)
            for j, v in zip(cols, vals):
                out[(i, int(j))] = v
        return out

    def to_dense(self) -> list[list]:
        n, m = self.shape
        out = [[mpfr(0)] * m for _ in range(n)]
        for (i, j), v in self.to_dict().items():
            out[i][j] = v
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        return sp.csr_matrix((to_float(self.data), self.indices, self.indptr), shape=self.shape)

    # arithmetic -----------------------------------------------------------
    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.shape[0]
        out = ext_zeros(n)
        if self.nnz == 0:
            return out
        prod = self.data * x[self.indices]
        counts = np.diff(self.indptr)
        nonempty = counts > 0
        starts = self.indptr[:-1][nonempty]
        out[nonempty] = np.add.reduceat(prod, starts)
        return out

    __matmul__ = matvec

    def transpose(self) -> "ExtCSR":
        entries = {(j, i): v for (i, j), v in self.to_dict().items()}
        return ExtCSR.from_dict(entries, (self.shape[1], self.shape[0]))

    @property
    def T(self) -> "ExtCSR":
        return self.transpose()

    def scale_rows(self, d: np.ndarray) -> "ExtCSR":
        counts = np.diff(self.indptr)
        factors = np.repeat(np.asarray(d, dtype=object), counts)
        return ExtCSR(self.indptr, self.indices, self.data * factors, self.shape)

    def scale_cols(self, d: np.ndarray) -> "ExtCSR":
        factors = np.asarray(d, dtype=object)[self.indices]
        return ExtCSR(self.indptr, self.indices, self.data * factors, self.shape)

    def scale(self, s) -> "ExtCSR":
        return ExtCSR(self.indptr, self.indices, self.data * s, self.shape)

    def add(self, other: "ExtCSR") -> "ExtCSR":
        entries = self.to_dict()
        for k, v in other.to_dict().items():
            entries[k] = entries[k] + v if k in entries else v
        return ExtCSR.from_dict(entries, self.shape)

    def kron(self, other: "ExtCSR") -> "ExtCSR":
        """Kronecker product; row index is ``i * n_other + k``."""
        n1, m1 = self.shape
        n2, m2 = other.shape
        indptr, indices, data = [0], [], []
        orows = [other.row(k) for k in range(n2)]
        for i in range(n1):
            c1, v1 = self.row(i)
            for k in range(n2):
                c2, v2 = orows[k]
                for j, a in zip(c1, v1):
                    indices.extend(int(j) * m2 + c2)
                    data.extend(a * v2)
                indptr.append(len(indices))
        return ExtCSR(indptr, indices, ext_array(data) if data else ext_array([]),
                      (n1 * n2, m1 * m2))

    def abs_inf_norm(self) -> mpfr:
        """``max_i sum_j |a_ij|``."""
        best = mpfr(0)
        for i in range(self.shape[0]):
            _, vals = self.row(i)
            s = gmpy2.fsum([abs(v) for v in vals]) if len(vals) else mpfr(0)
            if s > best:
                best = s
        return best

    def matmul(self, other: "ExtCSR") -> "ExtCSR":
        """Sparse product ``self @ other``."""
        entries: dict = {}
        orows = [other.row(k) for k in range(other.shape[0])]
        for i in range(self.shape[0]):
            acc: dict = {}
            cols, vals = self.row(i)
            for k, a in zip(cols, vals):
                c2, v2 = orows[int(k)]
                for j, b in zip(c2, v2):
                    j = int(j)
                    acc[j] = acc[j] + a * b if j in acc else a * b
            for j, v in acc.items():
                entries[(i, j)] = v
        return ExtCSR.from_dict(entries, (self.shape[0], other.shape[1]))

    def submatrix(self, rows: slice, cols: slice) -> "ExtCSR":
        r0, r1, _ = rows.indices(self.shape[0])
        c0, c1, _ = cols.indices(self.shape[1])
        entries = {(i - r0, j - c0): v for (i, j), v in self.to_dict().items()
                   if r0 <= i < r1 and c0 <= j < c1}
        return ExtCSR.from_dict(entries, (r1 - r0, c1 - c0))

    def dump_triplets(self) -> str:
        """Coordinate triplets ``row col value`` with full-precision decimals."""
        lines = []
        for (i, j), v in sorted(self.to_dict().items()):
            lines.append(f"{i} {j} {_fmt(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse_triplets(cls, text: str, shape) -> "ExtCSR":
        entries = {}
        for ln in text.strip().splitlines():
            i, j, v = ln.split()
            entries[(int(i), int(j))] = mpfr(v)
        return cls.from_dict(entries, shape)


def _fmt(v: mpfr) -> str:
    # shortest decimal that round-trips at the current precision
    return str(v)


class BandCholesky:
    """Cholesky factor of a symmetric positive definite band matrix."""

    def __init__(self, A: ExtCSR, bw: int | None = None):
        n = A.shape[0]
        bw = A.bandwidth() if bw is None else bw
        self.n, self.bw = n, bw
        # L[i][k] stores L[i, i - bw + k]
        L = [[mpfr(0)] * (bw + 1) for _ in range(n)]
        for i in range(n):
            cols, vals = A.row(i)
            for j, v in zip(cols, vals):
                j = int(j)
                if i - bw <= j <= i:
                    L[i][j - i + bw] = v
        for i in range(n):
            Li = L[i]
            for j in range(max(0, i - bw), i + 1):
                Lj = L[j]
                s = Li[j - i + bw]
                lo = max(0, i - bw, j - bw)
                for k in range(lo, j):
                    s -= Li[k - i + bw] * Lj[k - j + bw]
                if j == i:
                    if s <= 0:
                        raise np.linalg.LinAlgError("matrix is not positive definite")
                    Li[bw] = gmpy2.sqrt(s)
                else:
                    Li[j - i + bw] = s / Lj[bw]
        self.L = L

    def solve(self, b: np.ndarray) -> np.ndarray:
        n, bw, L = self.n, self.bw, self.L
        y = [mpfr(0)] * n
        for i in range(n):
            s = b[i]
            Li = L[i]
            for k in range(max(0, i - bw), i):
                s -= Li[k - i + bw] * y[k]
            y[i] = s / Li[bw]
        x = [mpfr(0)] * n
        for i in range(n - 1, -1, -1):
            s = y[i]
            for k in range(i + 1, min(n, i + bw + 1)):
                s -= L[k][i - k + bw] * x[k]
            x[i] = s / L[i][bw]
        out = np.empty(n, dtype=object)
        out[:] = x
        return out


def solve_spd(A: ExtCSR, b: np.ndarray, tol_bits: int = 200, max_band: int = 24,
              max_iter: int = 60) -> np.ndarray:
    """Solve ``A x = b`` for SPD ``A`` to relative residual ``2**-tol_bits``.

    Narrow-band systems use a band Cholesky in extended precision.  Wider
    systems use iterative refinement: residuals in extended precision,
    corrections from a double-precision sparse LU.
    """
    if A.bandwidth() <= max_band:
        return BandCholesky(A).solve(b)
    import scipy.sparse.linalg as spla

    lu = spla.splu(A.to_scipy().tocsc())
    bnorm = inf_norm(b)
    x = ext_zeros(A.shape[0])
    if bnorm == 0:
        return x
    target = bnorm * gmpy2.exp2(-tol_bits)
    for _ in range(max_iter):
        r = b - A.matvec(x)
        rn = inf_norm(r)
        if rn <= target:
            return x
        # scale so the float64 solve sees O(1) data
        scale = rn
        dx = lu.solve(np.array([float(v / scale) for v in r]))
        x = x + ext_array(dx.tolist()) * scale
    raise RuntimeError("iterative refinement did not reach the requested residual")
