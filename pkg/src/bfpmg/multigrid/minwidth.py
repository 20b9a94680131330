"""Staged search for the smallest mantissa widths giving an accurate solution.

For each level ``j`` the three widths are found one after the other, each
increased one bit at a time starting from 1:

1. ``wcheck`` with ``w = wdot = 200``;
2. ``w`` with the found ``wcheck`` and ``wdot = 200``;
3. ``wdot`` with both found widths.

A width is accepted when IR-V, started from the prolongated reference
solution of level ``j - 1`` and limited to 50 iterations, reaches an energy
error within ``1.5`` times that of the reference solution.  The widths are
applied on every level of the V-cycle ("flat" schedule).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .hierarchy import Hierarchy
from .policy import GammaPolicy
from .solver import BfpMultigrid, Schedule

__all__ = ["WidthRun", "MinWidthResult", "accepts", "min_widths", "STAGES"]

log = logging.getLogger(__name__)

STAGES = ("wcheck", "w", "wdot")
WIDE = 200


@dataclass
class WidthRun:
    widths: tuple[int, int, int]
    accepted: bool
    iterations: int
    best_ratio: float
    reason: str


@dataclass
class MinWidthResult:
    level: int
    wcheck: int
    w: int
    wdot: int
    runs: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"wcheck": self.wcheck, "w": self.w, "wdot": self.wdot}


def accepts(hierarchy: Hierarchy, level: int, wcheck: int, w: int, wdot: int,
            max_iters: int = 50, target: float = 1.5, policy: GammaPolicy | None = None,
            patience: int = 6, diverge: float = 1e3) -> WidthRun:
    """Run IR-V at fixed widths and report whether the target ratio is reached.

    Besides the iteration cap, a run stops early when the best ratio has not
    improved by 1% for ``patience`` iterations, or when the ratio exceeds
    ``diverge`` times its initial value.  Neither shortcut changes the
    outcome in practice: the ratio of a stagnating run does not recover.
    """
    lv = hierarchy.level(level)
    sched = Schedule.fixed(wcheck, w, wdot, flat=True)
    mg = BfpMultigrid(hierarchy, sched, policy, record=False)
    x0 = mg.initial_guess(level, w)
    r0 = lv.ratio(x0) if level > 1 else float("inf")
    if r0 <= target:
        return WidthRun((wcheck, w, wdot), True, 0, r0, "initial")
    state = {"best": r0, "since": 0, "reason": "max_iters", "ok": False, "ratio": r0}

    def cb(i, x):
        r = lv.ratio(x)
        state["ratio"] = r
        if r <= target:
            state["ok"], state["reason"] = True, "accepted"
            return True
        if r < 0.99 * state["best"]:
            state["best"], state["since"] = r, 0
        else:
            state["since"] += 1
        if state["since"] >= patience:
            state["reason"] = "stagnated"
            return True
        if r0 != float("inf") and r > diverge * r0:
            state["reason"] = "diverged"
            return True
        return False

    res = mg.ir(level, x0, max_iters=max_iters, callback=cb)
    return WidthRun((wcheck, w, wdot), state["ok"], res.iterations,
                    min(state["best"], state["ratio"]), state["reason"])


def _search(fn, start: int, limit: int) -> tuple[int, list]:
    runs = []
    for wv in range(start, limit + 1):
        run = fn(wv)
        runs.append(run)
        if run.accepted:
            return wv, runs
    raise RuntimeError(f"no width up to {limit} was accepted")


def min_widths(hierarchy: Hierarchy, level: int, max_iters: int = 50, target: float = 1.5,
               policy: GammaPolicy | None = None, start: int = 1, limit: int = WIDE) -> MinWidthResult:
    """Minimal ``(wcheck, w, wdot)`` on ``level`` by the staged one-bit search."""
    kw = dict(max_iters=max_iters, target=target, policy=policy)
    wc, runs1 = _search(lambda v: accepts(hierarchy, level, v, WIDE, WIDE, **kw), start, limit)
    w, runs2 = _search(lambda v: accepts(hierarchy, level, wc, v, WIDE, **kw), start, limit)
    wd, runs3 = _search(lambda v: accepts(hierarchy, level, wc, w, v, **kw), start, limit)
    log.info("level %d: wcheck=%d w=%d wdot=%d", level, wc, w, wd)
    return MinWidthResult(level, wc, w, wd, runs1 + runs2 + runs3)
