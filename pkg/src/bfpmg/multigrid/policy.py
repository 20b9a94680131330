"""Choice of the norm bound ``gamma`` and the temporary width for each solver step.

Each windowed kernel call needs ``gamma >= ||z||_inf`` (an estimate; a
wrong one only costs a recomputation or, without normalization, some
accuracy) and ``w_tmp = w_out + w_add``.  The defaults are:

=====================  ==============================  =======
step                   gamma                           w_add
=====================  ==============================  =======
IR residual, i = 1     residual norm of coarser level  5
IR residual, i > 1     previous residual norm          4
IR correction          ||x|| + ||y||                   0
V relaxation           c1 ||r||                        2
V residual             (2 c1 + 1) ||r|| / 4            4
V restriction          ||R|| ||r_v||                   6
V correction           ||y|| + ||d||                   1
FMG prolongation       ||x||                           0
=====================  ==============================  =======

The V-residual rule comes from writing the smoother as
``y = -c2 E r + (c1 - c2) r`` with ``E = I - A``: then
``||A y - r|| <= (2 c2 + 2 |c1 - c2| + 1) ||r|| = (2 c1 + 1) ||r||`` when
``diag(A) = I`` and ``E`` and the row sums of ``A`` are nonnegative.  That
bound is liberal, so it is scaled by 1/4.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..bfp import DEFAULT_Q_GAMMA, BfpBlock, _obj, inf_norm_upper
from ..bfp import _round_up_scalar as _round_up

__all__ = [
    "STEPS",
    "DEFAULT_W_ADD",
    "MODES",
    "GammaPolicy",
    "TraceRecord",
    "mul_up",
    "add_up",
    "norm_up",
]

STEPS = (
    "ir_residual_first",
    "ir_residual",
    "ir_correction",
    "v_relax",
    "v_residual",
    "v_restrict",
    "v_correct",
    "fmg_prolong",
)

DEFAULT_W_ADD = {
    "ir_residual_first": 5,
    "ir_residual": 4,
    "ir_correction": 0,
    "v_relax": 2,
    "v_residual": 4,
    "v_restrict": 6,
    "v_correct": 1,
    "fmg_prolong": 0,
}

MODES = ("qcomp", "nnqcomp", "hybrid")


def _tiny(q: int, e: int) -> BfpBlock:
    return BfpBlock(_obj([1 << (q - 2)]), q, e - (q - 2), ())


def norm_up(x, q: int = DEFAULT_Q_GAMMA) -> BfpBlock:
    """``||x||_inf`` rounded up to a ``q``-bit scalar (one ulp of ``x`` if zero)."""
    return inf_norm_upper(x, q)


def mul_up(a: BfpBlock, b: BfpBlock, q: int = DEFAULT_Q_GAMMA) -> BfpBlock:
    """Upper bound of the product of two positive scalars, ``q`` bits."""
    ma, mb = int(a.mant[0]), int(b.mant[0])
    if ma <= 0 or mb <= 0:
        raise ValueError("mul_up needs positive scalars")
    return _round_up(ma * mb, a.e + b.e, q)


def add_up(a: BfpBlock, b: BfpBlock, q: int = DEFAULT_Q_GAMMA) -> BfpBlock:
    """Upper bound of the sum of two positive scalars, ``q`` bits."""
    ma, mb = int(a.mant[0]), int(b.mant[0])
    e = min(a.e, b.e)
    total = (ma << (a.e - e)) + (mb << (b.e - e))
    if total <= 0:
        return _tiny(q, e)
    return _round_up(total, e, q)


@dataclass
class GammaPolicy:
    """Normalization mode and extra temporary bits per solver step.

    ``mode`` is ``"qcomp"`` (always normalize), ``"nnqcomp"`` (never) or
    ``"hybrid"`` (normalize only the IR residual during the first
    ``hybrid_iters`` IR iterations).  ``w_add_cap`` limits every
    ``w_add`` (``None`` means no cap).
    """

    mode: str = "qcomp"
    w_add: dict = field(default_factory=lambda: dict(DEFAULT_W_ADD))
    w_add_cap: int | None = None
    q_gamma: int = DEFAULT_Q_GAMMA
    hybrid_iters: int = 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        missing = set(STEPS) - set(self.w_add)
        if missing:
            raise ValueError(f"w_add lacks steps {sorted(missing)}")
        if self.w_add_cap is not None and self.w_add_cap < 0:
            raise ValueError("w_add_cap must be nonnegative")

    def extra_bits(self, step: str) -> int:
        add = self.w_add[step]
        return add if self.w_add_cap is None else min(add, self.w_add_cap)

    def w_tmp(self, step: str, w_out: int) -> int:
        return w_out + self.extra_bits(step)

    def normalized(self, step: str, iteration: int = 0) -> bool:
        if self.mode == "qcomp":
            return True
        if self.mode == "nnqcomp":
            return False
        return step.startswith("ir_residual") and 1 <= iteration <= self.hybrid_iters


@dataclass
class TraceRecord:
    """One windowed kernel call of the solver."""

    step: str
    level: int
    fmg_level: int | None
    iteration: int
    w_out: int
    w_tmp: int
    gamma: float
    normalized: bool
    recomputed: bool
    overflow: bool
    underflow: bool
    saturated: int = 0

    HEADER = ("step", "level", "fmg_level", "iteration", "w_out", "w_tmp", "gamma",
              "normalized", "recomputed", "overflow", "underflow", "saturated")

    def as_row(self) -> tuple:
        return (self.step, self.level, "" if self.fmg_level is None else self.fmg_level,
                self.iteration, self.w_out, self.w_tmp, f"{self.gamma:.6e}",
                int(self.normalized), int(self.recomputed), int(self.overflow),
                int(self.underflow), self.saturated)
