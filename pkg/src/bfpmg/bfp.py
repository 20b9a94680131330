"""Block floating point containers.

A block stores integer mantissas of one common width ``q`` and a single
shared exponent ``e``; entry ``i`` represents ``m_i * 2**e``.  Mantissas are
Python ints held in numpy object arrays, so widths are unbounded and every
operation on them is exact.

Two containers are provided:

* :class:`BfpBlock` -- scalars, vectors and dense matrices.
* :class:`BfpMatrix` -- sparse CSR matrices, one exponent for all stored
  entries.

All rounding in this module is truncation toward minus infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .wideint import ashr_array, max_msb, msb_int

__all__ = [
    "BfpBlock",
    "BfpMatrix",
    "epsilon",
    "exact_ints",
    "normalize",
    "quantize",
    "inf_norm_upper",
    "scalar",
    "scalar_from_value",
    "from_values",
    "from_extfloat",
    "from_rationals",
    "to_rational",
    "zeros",
    "DEFAULT_Q_GAMMA",
]

DEFAULT_Q_GAMMA = 16


def _obj(values: Iterable[int]) -> np.ndarray:
    vals = [int(v) for v in values]
    out = np.empty(len(vals), dtype=object)
    out[:] = vals
    return out


def epsilon(q: int) -> Fraction:
    """Spacing of a normalized width-``q`` block with entries in ``[-1, 1)``."""
    if q < 1:
        raise ValueError("q must be positive")
    return Fraction(1, 1 << (q - 1))


@dataclass(frozen=True)
class BfpBlock:
    """Dense BFP block (scalar, vector or dense matrix).

    ``mant`` is a flat object array; ``shape`` is ``()`` for a scalar,
    ``(n,)`` for a vector and ``(n, m)`` for a row-major dense matrix.
    """

    mant: np.ndarray
    q: int
    e: int
    shape: tuple = field(default=None)

    def __post_init__(self):
        if self.mant.dtype != object:
            object.__setattr__(self, "mant", _obj(self.mant))
        if self.shape is None:
            object.__setattr__(self, "shape", (len(self.mant),))
        if self.q < 1:
            raise ValueError("mantissa width must be positive")
        if int(np.prod(self.shape, dtype=np.int64)) != len(self.mant):
            raise ValueError("shape does not match number of mantissas")

    # basic properties ---------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.mant)

    @property
    def layout(self) -> str:
        if self.shape == ():
            return "1"
        return "x".join(str(s) for s in self.shape)

    def is_zero(self) -> bool:
        return not any(self.mant)

    def max_msb(self) -> int:
        return max_msb(self.mant)

    def is_normalized(self) -> bool:
        if self.is_zero():
            return self.e == 0
        return self.max_msb() == self.q

    def fits(self) -> bool:
        """Every mantissa lies in ``T_q``."""
        return self.max_msb() <= self.q

    def max_abs(self) -> int:
        """Largest mantissa magnitude (an int)."""
        if self.n == 0:
            return 0
        return max(self.mant.max(), -self.mant.min(), 0)

    def inf_norm(self) -> Fraction:
        return Fraction(self.max_abs()) * Fraction(2) ** self.e

    def value(self) -> Fraction:
        """Exact value of a scalar block."""
        if self.n != 1:
            raise ValueError("value() needs a single-entry block")
        return Fraction(int(self.mant[0])) * Fraction(2) ** self.e

    def to_rational(self) -> list[Fraction]:
        scale = Fraction(2) ** self.e
        return [Fraction(int(m)) * scale for m in self.mant]

    def to_float(self) -> np.ndarray:
        return np.array([math.ldexp(int(m), self.e) if m else 0.0 for m in self.mant],
                        dtype=float)

    def to_mpfr(self) -> np.ndarray:
        import gmpy2

        out = np.empty(self.n, dtype=object)
        for i, m in enumerate(self.mant):
            out[i] = gmpy2.mul_2exp(gmpy2.mpfr(int(m)), self.e)
        return out

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        if not isinstance(other, BfpBlock):
            return NotImplemented
        return (self.q == other.q and self.e == other.e and self.shape == other.shape
                and bool(np.all(self.mant == other.mant)))

    def __hash__(self):
        return hash((self.q, self.e, self.shape, tuple(self.mant)))

    def __repr__(self) -> str:
        head = ", ".join(str(m) for m in self.mant[:6])
        if self.n > 6:
            head += ", ..."
        return f"BfpBlock(q={self.q}, e={self.e}, d={self.layout}, m=[{head}])"

    # fixture format -----------------------------------------------------
    def dump(self) -> str:
        lines = [f"{self.q} {self.e} {self.layout}"]
        lines.extend(str(int(m)) for m in self.mant)
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "BfpBlock":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        q, e, d = lines[0].split()
        shape = () if d == "1" else tuple(int(s) for s in d.split("x"))
        mant = _obj([int(ln) for ln in lines[1:]])
        return cls(mant, int(q), int(e), shape)


def zeros(n: int, q: int = 1) -> BfpBlock:
    return BfpBlock(_obj([0] * n), q, 0, (n,))


def scalar(m: int, e: int = 0, q: int | None = None) -> BfpBlock:
    """Scalar block; width defaults to the minimal one holding ``m``."""
    return BfpBlock(_obj([m]), msb_int(m) if q is None else q, e, ())


def normalize(x: BfpBlock) -> BfpBlock:
    """Value-preserving normalization (minimal exponent at width ``x.q``)."""
    if x.is_zero():
        return BfpBlock(x.mant.copy(), x.q, 0, x.shape)
    shift = x.q - x.max_msb()
    if shift < 0:
        raise ValueError("block mantissas exceed the declared width")
    return BfpBlock(x.mant << shift if shift else x.mant.copy(), x.q, x.e - shift, x.shape)


def quantize(x: BfpBlock, w: int) -> BfpBlock:
    """Normalized width-``w`` copy of ``x``, truncated toward minus infinity."""
    if w < 1:
        raise ValueError("w must be positive")
    if x.is_zero():
        return BfpBlock(x.mant.copy(), w, 0, x.shape)
    s = x.max_msb() - w
    return BfpBlock(ashr_array(x.mant, s), w, x.e + s, x.shape)


def inf_norm_upper(x: BfpBlock | "BfpMatrix", q_gamma: int = DEFAULT_Q_GAMMA) -> BfpBlock:
    """Normalized positive scalar ``>= max_i |x_i|``, rounded up to ``q_gamma`` bits.

    For an all-zero block one unit in the last place of ``x`` is returned,
    since the windowed kernels need ``gamma > 0``.
    """
    if q_gamma < 2:
        raise ValueError("q_gamma must be at least 2")
    big = x.max_abs()
    if big == 0:
        return BfpBlock(_obj([1 << (q_gamma - 2)]), q_gamma, x.e - (q_gamma - 2), ())
    return _round_up_scalar(big, x.e, q_gamma)


def _round_up_scalar(num: int, e: int, q: int) -> BfpBlock:
    """Normalized width-``q`` scalar ``>= num * 2**e`` for ``num > 0``."""
    s = msb_int(num) - q
    limit = (1 << (q - 1)) - 1
    while True:
        m = num << (-s) if s <= 0 else -((-num) >> s)
        if m <= limit:
            return BfpBlock(_obj([m]), q, e + s, ())
        s += 1


def scalar_from_value(v, q: int, round_up: bool = False) -> BfpBlock:
    """Normalized width-``q`` scalar for an exact rational/int/mpfr ``v``.

    Truncates toward minus infinity unless ``round_up`` (then ``v > 0`` is
    required and the result is ``>= v``).
    """
    if round_up:
        frac = _as_fraction(v)
        if frac <= 0:
            raise ValueError("round_up requires a positive value")
        num, den = frac.numerator, frac.denominator
        # num/den = (num * 2**k // den) * 2**-k rounded up at a fine grid first
        k = max(0, den.bit_length() + q + 2)
        fine = -((-num << k) // den)
        return _round_up_scalar(fine, -k, q)
    return from_rationals([v], q, shape=())


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v)
    # gmpy2 mpfr / mpz / mpq
    if hasattr(v, "as_integer_ratio"):
        n, d = v.as_integer_ratio()
        return Fraction(int(n), int(d))
    return Fraction(v)


def exact_ints(values: Sequence) -> tuple[np.ndarray, int]:
    """Exact integer mantissas with a common exponent for dyadic ``values``.

    Accepts ints, floats, gmpy2 ``mpfr`` and dyadic fractions.
    """
    import gmpy2

    pairs = []
    for v in values:
        if isinstance(v, int):
            pairs.append((v, 0))
        elif isinstance(v, Fraction):
            d = v.denominator
            if d & (d - 1):
                raise ValueError(f"{v} is not dyadic")
            pairs.append((v.numerator, -(d.bit_length() - 1)))
        else:
            mv = v if isinstance(v, type(gmpy2.mpfr(0))) else gmpy2.mpfr(v)
            if not gmpy2.is_finite(mv):
                raise ValueError("non-finite value")
            if mv == 0:
                pairs.append((0, 0))
                continue
            m, ex = mv.as_mantissa_exp()
            m, ex = int(m), int(ex)
            tz = (m & -m).bit_length() - 1
            pairs.append((m >> tz, ex + tz))
    nz = [ex for m, ex in pairs if m]
    base = min(nz) if nz else 0
    out = np.empty(len(pairs), dtype=object)
    out[:] = [m << (ex - base) if m else 0 for m, ex in pairs]
    return out, base


def from_values(values: Sequence, w: int, shape=None) -> BfpBlock:
    """Quantize dyadic values (ints, floats, mpfr) to a normalized width-``w`` block."""
    mant, base = exact_ints(values)
    n = len(mant)
    exact = BfpBlock(mant, max(max_msb(mant), 1), base, (n,) if shape is None else shape)
    return quantize(exact, w)


def from_extfloat(values: Sequence, w: int, shape=None) -> BfpBlock:
    """``quant`` of extended-precision masters: floor to ``w`` bits, normalized."""
    return from_values(values, w, shape)


def from_rationals(values: Sequence, w: int, shape=None) -> BfpBlock:
    """Floor-quantize arbitrary rationals to a normalized width-``w`` block."""
    fr = [_as_fraction(v) for v in values]
    n = len(fr)
    shape = (n,) if shape is None else shape
    if all(f == 0 for f in fr):
        return BfpBlock(_obj([0] * n), w, 0, shape)
    top = max(abs(f) for f in fr)
    # initial guess for the exponent, then adjust until max msb == w
    e = math.floor(math.log2(top.numerator) - math.log2(top.denominator)) + 2 - w
    def floor_at(e):
        scale = Fraction(2) ** (-e)
        return _obj([math.floor(f * scale) for f in fr])

    while True:
        mant = floor_at(e)
        mu = max_msb(mant)
        if mu > w:
            e += mu - w
        elif mu < w:
            e -= w - mu
        else:
            break
    # the smallest exponent that fits; the msb can stay at w one step lower
    while True:
        finer = floor_at(e - 1)
        if max_msb(finer) > w:
            return BfpBlock(mant, w, e, shape)
        mant, e = finer, e - 1


def to_rational(x: BfpBlock) -> list[Fraction]:
    return x.to_rational()


@dataclass(frozen=True)
class BfpMatrix:
    """Sparse CSR matrix of width-``q`` mantissas sharing exponent ``e``."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    q: int
    e: int
    shape: tuple

    @property
    def nnz(self) -> int:
        return len(self.data)

    @property
    def max_row_nnz(self) -> int:
        if len(self.indptr) < 2:
            return 0
        return int(np.max(np.diff(self.indptr)))

    def max_abs(self) -> int:
        if self.nnz == 0:
            return 0
        return max(self.data.max(), -self.data.min(), 0)

    def max_msb(self) -> int:
        return max_msb(self.data)

    def is_zero(self) -> bool:
        return not any(self.data)

    def is_normalized(self) -> bool:
        if self.is_zero():
            return self.e == 0
        return self.max_msb() == self.q

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def to_rational_dense(self) -> list[list[Fraction]]:
        n, m = self.shape
        scale = Fraction(2) ** self.e
        out = [[Fraction(0)] * m for _ in range(n)]
        for i in range(n):
            cols, vals = self.row(i)
            for j, v in zip(cols, vals):
                out[i][int(j)] = Fraction(int(v)) * scale
        return out

    def quantize(self, w: int) -> "BfpMatrix":
        if self.is_zero():
            return BfpMatrix(self.indptr, self.indices, self.data.copy(), w, 0, self.shape)
        s = self.max_msb() - w
        return BfpMatrix(self.indptr, self.indices, ashr_array(self.data, s), w,
                         self.e + s, self.shape)

    @classmethod
    def from_csr(cls, indptr, indices, values, w: int | None = None, shape=None) -> "BfpMatrix":
        """Exact (``w=None``) or floor-quantized matrix from dyadic CSR values."""
        mant, base = exact_ints(values)
        indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64)
        if shape is None:
            shape = (len(indptr) - 1, int(indices.max()) + 1 if len(indices) else 0)
        exact = cls(indptr, indices, mant, max(max_msb(mant), 1), base, tuple(shape))
        return exact if w is None else exact.quantize(w)

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence], w: int | None = None) -> "BfpMatrix":
        indptr, indices, values = [0], [], []
        ncols = 0
        for r in rows:
            ncols = max(ncols, len(r))
            for j, v in enumerate(r):
                if v != 0:
                    indices.append(j)
                    values.append(v)
            indptr.append(len(indices))
        return cls.from_csr(indptr, indices, values, w, (len(rows), ncols))

    @classmethod
    def identity(cls, n: int) -> "BfpMatrix":
        return cls(np.arange(n + 1, dtype=np.int64), np.arange(n, dtype=np.int64),
                   _obj([1] * n), 2, 0, (n, n))
