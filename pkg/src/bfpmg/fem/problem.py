"""Model problems and their manufactured solutions."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import gmpy2
from gmpy2 import mpfr

__all__ = ["ProblemSpec", "Manufactured", "manufactured", "PDES"]

PDES = ("poisson", "biharmonic")


@dataclass(frozen=True)
class ProblemSpec:
    """A discretization: PDE, dimension ``d``, degree ``p`` and level ``j``.

    The mesh size is ``h = 2**-j``; ``k = p + 1`` is the approximation order
    and ``2m`` the PDE order (``m = 1`` Poisson, ``m = 2`` biharmonic).
    """

    pde: str = "poisson"
    d: int = 1
    p: int = 1
    j: int = 1
    solution: str = "default"

    def __post_init__(self):
        if self.pde not in PDES:
            raise ValueError(f"unknown pde {self.pde!r}")
        if self.d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.j < 1:
            raise ValueError("level must be at least 1")
        if self.pde == "poisson" and self.p < 1:
            raise ValueError("poisson needs p >= 1")
        if self.pde == "biharmonic" and (self.d != 1 or self.p < 3):
            raise ValueError("biharmonic needs d = 1 and p >= 3")

    @property
    def m(self) -> int:
        return 1 if self.pde == "poisson" else 2

    @property
    def k(self) -> int:
        return self.p + 1

    @property
    def h(self) -> float:
        return 2.0 ** -self.j

    @property
    def n_elements(self) -> int:
        return 1 << self.j

    @property
    def n1d(self) -> int:
        """Interior basis functions per direction."""
        return (1 << self.j) + self.p - 2 * self.m

    @property
    def n(self) -> int:
        return self.n1d ** self.d

    def at(self, j: int) -> "ProblemSpec":
        return replace(self, j=j)

    @property
    def key(self) -> tuple:
        return (self.pde, self.d, self.p, self.solution)


@dataclass(frozen=True)
class Manufactured:
    """Separable manufactured solution ``u = scale * prod_i g_i(x_i)``.

    ``factors[i][r]`` is the ``r``-th derivative of the ``i``-th factor.
    ``rhs`` is the right-hand side as a sum of separable terms
    ``(coefficient, (factor index per direction, ...))``; for the problems
    here it is a single term.
    """

    name: str
    factors: tuple                  # per direction: tuple of derivative callables
    rhs_scale: Callable[[], mpfr]   # f = rhs_scale * prod_i rhs_factor_i
    rhs_factors: tuple              # per direction: callable
    energy_sq: Callable[[], mpfr]   # a(u, u)
    description: str = ""

    def u(self, *x):
        out = mpfr(1)
        for fac, xi in zip(self.factors, x):
            out *= fac[0](xi)
        return out

    def f(self, *x):
        out = self.rhs_scale()
        for fac, xi in zip(self.rhs_factors, x):
            out *= fac(xi)
        return out


def _pi():
    return gmpy2.const_pi()


def _sin_k(kf: int):
    """Derivatives 0..4 of ``sin(kf * pi * x)``."""
    def d(r):
        def g(x):
            w = kf * _pi()
            s = gmpy2.sin(w * x) if r % 2 == 0 else gmpy2.cos(w * x)
            sign = (1, 1, -1, -1)[r % 4]
            return sign * w ** r * s
        return g
    return tuple(d(r) for r in range(5))


def _sin2_pi():
    """Derivatives 0..4 of ``sin(pi x)**2 = (1 - cos(2 pi x)) / 2``."""
    def d(r):
        def g(x):
            w = 2 * _pi()
            if r == 0:
                return (1 - gmpy2.cos(w * x)) / 2
            # derivative of -cos(w x)/2
            c = gmpy2.cos(w * x) if r % 2 == 0 else gmpy2.sin(w * x)
            sign = (-1, 1, 1, -1)[r % 4]
            return sign * w ** r * c / 2
        return g
    return tuple(d(r) for r in range(5))


def manufactured(spec: ProblemSpec) -> Manufactured:
    """The fixed manufactured solution for ``spec``.

    * Poisson 1D: ``u = sin(3 pi x)``, ``f = 9 pi^2 sin(3 pi x)``.
    * Poisson 2D: ``u = sin(2 pi x) sin(3 pi y)``, ``f = 13 pi^2 u``.
    * Biharmonic 1D: ``u = sin(pi x)^2``, ``f = -8 pi^4 cos(2 pi x)``.
    """
    if spec.solution != "default":
        raise ValueError(f"unknown manufactured solution {spec.solution!r}")
    if spec.pde == "poisson" and spec.d == 1:
        s3 = _sin_k(3)
        return Manufactured("sin3", (s3,), lambda: 9 * _pi() ** 2, (s3[0],),
                            lambda: 9 * _pi() ** 2 / 2, "u = sin(3 pi x)")
    if spec.pde == "poisson":
        s2, s3 = _sin_k(2), _sin_k(3)
        return Manufactured("sin2sin3", (s2, s3), lambda: 13 * _pi() ** 2, (s2[0], s3[0]),
                            lambda: 13 * _pi() ** 2 / 4, "u = sin(2 pi x) sin(3 pi y)")
    s = _sin2_pi()
    return Manufactured("sin2", (s,), lambda: -8 * _pi() ** 4,
                        (lambda x: gmpy2.cos(2 * _pi() * x),),
                        lambda: 2 * _pi() ** 4, "u = sin(pi x)^2")
