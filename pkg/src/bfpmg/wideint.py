"""Arbitrary-width two's-complement integers.

A :class:`WideInt` is a Python integer tagged with an explicit bit-width
``w``; its value always lies in ``T_w = [-2**(w-1), 2**(w-1) - 1]``.
Arithmetic grows the width so that results are exact, while ``decr``
narrows it by dropping leading bits (like a cast to a narrower type).

The vectorised helpers at the bottom (:func:`msb_int`, :func:`wrap`,
:func:`max_msb`, ...) operate on plain ints or numpy object arrays and are
what the BLAS kernels use on their hot paths.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "WideInt",
    "WidthError",
    "t_range",
    "fits",
    "msb_int",
    "wrap",
    "max_msb",
    "ashr_array",
    "clamp_array",
    "exact_arith",
]


class WidthError(ValueError):
    """Raised on an invalid cast or a shift that leaves the declared width."""


def t_range(w: int) -> tuple[int, int]:
    """Return ``(lo, hi)`` bounds of ``T_w``."""
    if w < 1:
        raise WidthError(f"width must be positive, got {w}")
    return -(1 << (w - 1)), (1 << (w - 1)) - 1


def fits(v: int, w: int) -> bool:
    lo, hi = t_range(w)
    return lo <= v <= hi


def msb_int(v: int) -> int:
    """Minimal two's-complement width holding ``v`` (``msb(0) == 1``)."""
    return (v if v >= 0 else ~v).bit_length() + 1


def wrap(v, w: int):
    """Keep the rightmost ``w`` bits of ``v`` and reinterpret them signed.

    Works on ints and on numpy object arrays of ints.
    """
    half = 1 << (w - 1)
    return ((v + half) & ((1 << w) - 1)) - half


def max_msb(m: np.ndarray) -> int:
    """``max_i msb(m_i)`` for an object array; 1 for an empty/zero block."""
    if len(m) == 0:
        return 1
    hi = m.max()
    lo = m.min()
    top = max(hi, ~lo)
    return int(top).bit_length() + 1


def ashr_array(m: np.ndarray, s: int) -> np.ndarray:
    """Floor division by ``2**s``; negative ``s`` is an exact left shift."""
    if s >= 0:
        return m >> s
    return m << (-s)


def clamp_array(m: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return np.minimum(np.maximum(m, lo), hi)


@dataclass(frozen=True)
class WideInt:
    """Two's-complement integer ``value`` of bit-width ``width``."""

    value: int
    width: int

    def __post_init__(self):
        if self.width < 1:
            raise WidthError(f"width must be positive, got {self.width}")
        if not fits(self.value, self.width):
            raise WidthError(f"{self.value} does not fit in {self.width} bits")

    @classmethod
    def minimal(cls, value: int) -> "WideInt":
        return cls(value, msb_int(value))

    # exact arithmetic -------------------------------------------------
    def __add__(self, other: "WideInt") -> "WideInt":
        return WideInt(self.value + other.value, max(self.width, other.width) + 1)

    def __sub__(self, other: "WideInt") -> "WideInt":
        return WideInt(self.value - other.value, max(self.width, other.width) + 1)

    def __mul__(self, other: "WideInt") -> "WideInt":
        return WideInt(self.value * other.value, self.width + other.width)

    def __neg__(self) -> "WideInt":
        return WideInt(-self.value, self.width + 1)

    # shifts and casts -------------------------------------------------
    def ashr(self, s: int) -> "WideInt":
        """Arithmetic right shift; rounds toward negative infinity."""
        if s < 0:
            raise ValueError("shift count must be non-negative")
        return WideInt(self.value >> s, self.width)

    def shl(self, s: int) -> "WideInt":
        """Exact left shift. The caller must have widened first."""
        if s < 0:
            raise ValueError("shift count must be non-negative")
        v = self.value << s
        if not fits(v, self.width):
            raise WidthError(f"left shift by {s} overflows {self.width} bits")
        return WideInt(v, self.width)

    def incr(self, b: int) -> "WideInt":
        """Sign-extend by ``b`` bits."""
        if b < 0:
            raise ValueError("b must be non-negative")
        return WideInt(self.value, self.width + b)

    def decr(self, b: int) -> "WideInt":
        """Drop the ``b`` leftmost bits and reinterpret the rest."""
        if b < 0:
            raise ValueError("b must be non-negative")
        if b >= self.width:
            raise WidthError(f"cannot drop {b} bits from a {self.width}-bit value")
        w = self.width - b
        return WideInt(wrap(self.value, w), w)

    def msb(self) -> int:
        return msb_int(self.value)

    def clamp(self, lo: int, hi: int) -> "WideInt":
        if lo > hi:
            raise ValueError("lo must not exceed hi")
        return WideInt(min(max(self.value, lo), hi), self.width)

    # formatting ---------------------------------------------------------
    def hex(self) -> str:
        """Two's-complement bit pattern as hex, most significant digit first."""
        digits = (self.width + 3) // 4
        return format(self.value & ((1 << self.width) - 1), f"0{digits}x")

    def dump(self) -> str:
        return f"{self.value} {self.width} {self.hex()}"

    @classmethod
    def parse(cls, line: str) -> "WideInt":
        value, width, hexstr = line.split()
        out = cls(int(value), int(width))
        if out.hex() != hexstr:
            raise ValueError(f"hex field {hexstr!r} disagrees with value {value}")
        return out

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:
        return f"WideInt({self.value}, w={self.width})"


def exact_arith(a: WideInt, b: WideInt, op: str) -> WideInt:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")
