"""BFP iterative refinement, V(1,0)-cycle and full multigrid with ``D = I``.

Widths come from a :class:`Schedule` with three per-level functions:
``wcheck`` (stored matrix/right-hand side), ``w`` (working precision of
the iterate) and ``wdot`` (low precision of residuals and the inner
V-cycle).  Only the IR correction and the FMG prolongation produce results
at width ``w``; every other call produces ``wdot`` bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..bfp import BfpBlock, from_values, zeros
from ..blas import (MINUS_ONE, ONE, AxpbyKernel, GemvKernel, Kernel, SpmvKernel, nnqcomp,
                    qcomp)
from .hierarchy import Hierarchy
from .policy import GammaPolicy, TraceRecord, add_up, mul_up, norm_up

__all__ = [
    "Schedule",
    "IRResult",
    "FMGResult",
    "BfpMultigrid",
    "ir",
    "vcycle",
    "fmg",
    "DEFAULT_N",
    "default_n",
]

# IR-V iterations per FMG level, indexed by degree
DEFAULT_N = {
    "poisson": {1: 2, 2: 1, 3: 1, 4: 3, 5: 7, 6: 15},
    "biharmonic": {3: 2, 4: 1, 5: 2, 6: 4},
}


def default_n(pde: str, p: int) -> int:
    try:
        return DEFAULT_N[pde][p]
    except KeyError:
        raise ValueError(f"no default N for {pde} p={p}") from None


@dataclass(frozen=True)
class Schedule:
    """Per-level mantissa widths ``(wcheck_j, w_j, wdot_j)``.

    With ``flat=True`` the V-cycle started on level ``l`` uses the widths of
    level ``l`` on all coarser levels too.
    """

    wcheck: Callable[[int], int]
    w: Callable[[int], int]
    wdot: Callable[[int], int]
    flat: bool = False
    name: str = ""

    @classmethod
    def fixed(cls, wcheck: int, w: int, wdot: int, flat: bool = True, name: str = "") -> "Schedule":
        return cls(lambda j: wcheck, lambda j: w, lambda j: wdot, flat, name or f"fixed{wcheck}/{w}/{wdot}")

    @classmethod
    def affine(cls, slopes: tuple[int, int, int], intercepts: tuple[int, int, int],
               ordered: bool = True, name: str = "") -> "Schedule":
        """``w(j) = slope * j + intercept`` per width; ``ordered`` enforces ``wcheck >= w >= wdot``."""
        (sc, sw, sd), (ic, iw, id_) = slopes, intercepts

        def wd(j):
            return max(1, sd * j + id_)

        def w(j):
            v = max(1, sw * j + iw)
            return max(v, wd(j)) if ordered else v

        def wc(j):
            v = max(1, sc * j + ic)
            return max(v, w(j)) if ordered else v

        return cls(wc, w, wd, False, name or f"affine{slopes}{intercepts}")

    def widths(self, j: int) -> tuple[int, int, int]:
        return self.wcheck(j), self.w(j), self.wdot(j)

    def table(self, levels) -> list[tuple[int, int, int, int]]:
        return [(j, *self.widths(j)) for j in levels]


@dataclass
class IRResult:
    x: BfpBlock
    residual_norms: list = field(default_factory=list)
    last_residual: BfpBlock | None = None
    iterations: int = 0
    stopped: str = ""


@dataclass
class FMGResult:
    x: BfpBlock
    per_level: dict = field(default_factory=dict)   # level -> BfpBlock after its IR-V steps
    trace: list = field(default_factory=list)


class BfpMultigrid:
    """Solver state: hierarchy, widths, gamma policy and the call trace."""

    def __init__(self, hierarchy: Hierarchy, schedule: Schedule, policy: GammaPolicy | None = None,
                 record: bool = True):
        self.h = hierarchy
        self.schedule = schedule
        self.policy = policy or GammaPolicy()
        self.record = record
        self.trace: list[TraceRecord] = []
        self._fmg_level: int | None = None

    # ------------------------------------------------------------------
    def _call(self, step: str, kernel: Kernel, w_out: int, gamma: BfpBlock, level: int,
              iteration: int = 0) -> BfpBlock:
        pol = self.policy
        w_tmp = pol.w_tmp(step, w_out)
        if pol.normalized(step, iteration):
            res = qcomp(kernel, w_out, w_tmp, gamma)
            normalized = True
        else:
            res = nnqcomp(kernel, w_out, gamma)
            normalized = False
        if self.record:
            self.trace.append(TraceRecord(
                step, level, self._fmg_level, iteration, w_out, w_tmp,
                float(gamma.value()), normalized, res.recomputed, res.overflow,
                res.underflow, res.saturated))
        return res.z

    def _vwidth(self, level: int, top: int) -> int:
        return self.schedule.wdot(top if self.schedule.flat else level)

    # ------------------------------------------------------------------
    def vcycle(self, level: int, r: BfpBlock, top: int | None = None) -> BfpBlock:
        """Approximate ``A y = r`` with one V(1,0)-cycle."""
        top = level if top is None else top
        h = self.h
        lv = h.level(level)
        wd = self._vwidth(level, top)
        A = lv.A_q(wd)
        c1, c2 = h.cheb_q(wd)
        q = self.policy.q_gamma
        rn = norm_up(r, q)
        y = self._call("v_relax", GemvKernel(A, r, r, c2, c1, lv.m_A), wd,
                       mul_up(h.gamma_const("c1"), rn, q), level)
        if level > 1:
            rv = self._call("v_residual", GemvKernel(A, y, r, ONE, MINUS_ONE, lv.m_A), wd,
                            mul_up(h.gamma_const("vres"), rn, q), level)
            rc = self._call("v_restrict", SpmvKernel(lv.R_q(wd), rv, lv.m_R), wd,
                            mul_up(h.gamma_const(f"R{level}"), norm_up(rv, q), q), level)
            d = self.vcycle(level - 1, rc, top)
            y = self._call("v_correct", GemvKernel(lv.P_q(wd), d, y, MINUS_ONE, ONE, lv.m_P), wd,
                           add_up(norm_up(y, q), norm_up(d, q), q), level)
        return y

    # ------------------------------------------------------------------
    def ir(self, level: int, x0: BfpBlock | None = None, max_iters: int = 1, tol=-1,
           gamma_first: BfpBlock | None = None, b: BfpBlock | None = None,
           callback: Callable[[int, BfpBlock], bool] | None = None) -> IRResult:
        """Iterative refinement with the V-cycle as inner solver.

        Runs until ``||r||_inf < tol`` or ``max_iters`` corrections (the
        FMG driver passes ``tol = -1``, i.e. exactly ``max_iters`` steps).
        ``gamma_first`` bounds the first residual; it defaults to
        ``||b||_inf``.  ``callback(i, x)`` returning true stops early.
        """
        lv = self.h.level(level)
        wc, w, wd = self.schedule.widths(level)
        q = self.policy.q_gamma
        A = lv.A_q(wc)
        b = lv.b_q(wc) if b is None else b
        x = zeros(lv.n, w) if x0 is None else x0
        prev = norm_up(b, q) if gamma_first is None else gamma_first
        out = IRResult(x)
        i = 0
        while True:
            i += 1
            step = "ir_residual_first" if i == 1 else "ir_residual"
            r = self._call(step, GemvKernel(A, x, b, ONE, MINUS_ONE, lv.m_A), wd, prev, level, i)
            rnorm = r.inf_norm()
            out.residual_norms.append(rnorm)
            prev = norm_up(r, q)
            out.last_residual = prev
            if rnorm < tol:
                out.stopped = "tol"
                out.iterations = i - 1
                break
            y = self.vcycle(level, r)
            x = self._call("ir_correction", AxpbyKernel(x, y, ONE, MINUS_ONE), w,
                           add_up(norm_up(x, q), norm_up(y, q), q), level, i)
            out.x, out.iterations = x, i
            if callback is not None and callback(i, x):
                out.stopped = "callback"
                break
            if i >= max_iters:
                out.stopped = "max_iters"
                break
        out.x = x
        return out

    # ------------------------------------------------------------------
    def fmg(self, level: int | None = None, N: int | Callable[[int], int] | None = None) -> FMGResult:
        """Full multigrid: coarse solve, prolongate, ``N`` IR-V steps per level."""
        level = self.h.ell if level is None else level
        if N is None:
            N = default_n(self.h.spec.pde, self.h.spec.p)
        nfun = N if callable(N) else (lambda j: N)
        result = FMGResult(None)
        x, last = None, None
        q = self.policy.q_gamma
        for j in range(1, level + 1):
            self._fmg_level = j
            lv = self.h.level(j)
            w = self.schedule.w(j)
            if j == 1:
                x = zeros(lv.n, w)
            else:
                x = self._call("fmg_prolong", SpmvKernel(lv.P_q(w), x, lv.m_P), w,
                               norm_up(x, q), j)
            res = self.ir(j, x, max_iters=nfun(j), tol=-1, gamma_first=last)
            x, last = res.x, res.last_residual
            result.per_level[j] = x
        self._fmg_level = None
        result.x = x
        result.trace = self.trace
        return result

    # ------------------------------------------------------------------
    def initial_guess(self, level: int, w: int) -> BfpBlock:
        """Prolongated coarse reference solution, quantized to ``w`` bits."""
        if level == 1:
            return zeros(self.h.level(1).n, w)
        lv = self.h.level(level)
        coarse = self.h.level(level - 1).u_h
        return from_values(lv.P.matvec(coarse), w)


def ir(hierarchy: Hierarchy, level: int, schedule: Schedule, x0=None, max_iters: int = 1,
       tol=-1, policy: GammaPolicy | None = None, **kw) -> IRResult:
    return BfpMultigrid(hierarchy, schedule, policy).ir(level, x0, max_iters, tol, **kw)


def vcycle(hierarchy: Hierarchy, level: int, r: BfpBlock, schedule: Schedule,
           policy: GammaPolicy | None = None) -> BfpBlock:
    return BfpMultigrid(hierarchy, schedule, policy).vcycle(level, r)


def fmg(hierarchy: Hierarchy, schedule: Schedule, level: int | None = None, N=None,
        policy: GammaPolicy | None = None) -> FMGResult:
    return BfpMultigrid(hierarchy, schedule, policy).fmg(level, N)


