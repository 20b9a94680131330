"""Smoother parameter, convergence rates and width schedules.

* :func:`estimate_eta` minimizes the exact-arithmetic V-cycle rate over the
  grid ``eta = i/100``.
* :func:`conv_rate_vcycle` measures the energy-norm rate of one BFP IR-V
  step by applying it to every canonical basis vector.
* :func:`bfp_prec_est` finds the constants of the affine schedules
  ``wcheck_j = j (m + k) + q`` and ``wdot_j = j m + q`` by binary search.
* :func:`estimate_w` is a surrogate for the working width: ``w_j = k j + q_w``
  with ``q_w`` the smallest constant for which FMG is accurate up to the
  estimation level.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg

from ..bfp import from_values, zeros
from ..extfloat import current_precision
from ..fem import ProblemSpec
from .hierarchy import ELL_EST, Hierarchy, _rho, chebyshev_coeffs, level_data, solver_setup
from .policy import GammaPolicy
from .solver import BfpMultigrid, Schedule, default_n

__all__ = [
    "ETA_GRID",
    "estimate_eta",
    "exact_rate",
    "conv_rate_vcycle",
    "binary_search_min",
    "PrecEstimate",
    "bfp_prec_est",
    "WEstimate",
    "estimate_w",
    "estimated_schedule",
    "WIDE",
]

log = logging.getLogger(__name__)

ETA_GRID = tuple(Fraction(i, 100) for i in range(101))
WIDE = 200  # "effectively exact" width used while another width is studied


def _dense(M) -> np.ndarray:
    return M.to_scipy().toarray()


@lru_cache(maxsize=None)
def _float_levels(spec: ProblemSpec, ell: int, prec: int):
    """float64 copies of the scaled operators of levels ``1..ell``."""
    out = []
    for j in range(1, ell + 1):
        lv = level_data(spec.at(j))
        P = _dense(lv.P) if lv.P is not None else None
        R = _dense(lv.R) if lv.R is not None else None
        out.append((_dense(lv.A), P, R, _dense(lv.A_raw)))
    return tuple(out)


def _vcycle_operator(levels, c1: float, c2: float) -> np.ndarray:
    """Matrix ``B`` with ``y = B r`` for the exact V(1,0)-cycle."""
    B = None
    for A, P, R, _ in levels:
        n = A.shape[0]
        S = c1 * np.eye(n) + c2 * A
        if B is None:
            B = S
        else:
            B = S + P @ B @ R @ (np.eye(n) - A @ S)
    return B


def _energy_rate(E: np.ndarray, A_raw: np.ndarray) -> float:
    M = E.T @ A_raw @ E
    M = (M + M.T) / 2
    lam = scipy.linalg.eigh(M, A_raw, eigvals_only=True)[-1]
    return float(np.sqrt(max(lam, 0.0)))


def exact_rate(spec: ProblemSpec, level: int, rho, eta) -> float:
    """Energy-norm rate ``||I - B A||_A`` of the exact-arithmetic V-cycle."""
    levels = _float_levels(spec, level, current_precision())
    cc = chebyshev_coeffs(float(rho), float(eta))
    B = _vcycle_operator(levels, cc.c1, cc.c2)
    A, _, _, A_raw = levels[-1]
    return _energy_rate(np.eye(A.shape[0]) - B @ A, A_raw)


def estimate_eta(spec: ProblemSpec, ell_est: int = ELL_EST, rho=None, grid=ETA_GRID) -> Fraction:
    """``eta`` on ``grid`` minimizing the exact V-cycle rate on level ``ell_est``.

    Ties go to the smaller value.
    """
    if not grid:
        raise ValueError("empty eta grid")
    rho = _rho(spec.at(ell_est)) if rho is None else rho
    best, best_rate = None, np.inf
    for eta in grid:
        r = exact_rate(spec, ell_est, rho, eta)
        if r < best_rate:
            best, best_rate = eta, r
    return best


def conv_rate_vcycle(hierarchy: Hierarchy, schedule: Schedule, level: int,
                     policy: GammaPolicy | None = None) -> float:
    """Energy-norm rate of one BFP IR-V step on ``level``.

    Column ``i`` of the propagation matrix ``V`` is the iterate after one
    IR-V step with ``b = 0`` started from the ``i``-th unit vector (stored
    at the working width).  The rate is ``sqrt(lambda_max)`` of
    ``V^T A V x = lambda A x`` with the unscaled stiffness matrix.
    """
    lv = hierarchy.level(level)
    n = lv.n
    w = schedule.w(level)
    b0 = zeros(n, schedule.wcheck(level))
    mg = BfpMultigrid(hierarchy, schedule, policy, record=False)
    V = np.empty((n, n))
    for i in range(n):
        e = [0] * n
        e[i] = 1
        res = mg.ir(level, from_values(e, w), max_iters=1, b=b0)
        V[:, i] = res.x.to_float()
    return _energy_rate(V, _float_levels(hierarchy.spec, level, current_precision())[-1][3])


def binary_search_min(pred, lo: int, hi: int) -> tuple[int, bool]:
    """Smallest ``q`` in ``[lo, hi]`` with ``pred(q)``, assuming monotonicity.

    Returns ``(q, feasible)``; if even ``pred(hi)`` fails, ``(hi, False)``.
    """
    if not pred(hi):
        return hi, False
    a, b = lo, hi
    while a < b:
        mid = (a + b) // 2
        if pred(mid):
            b = mid
        else:
            a = mid + 1
    return a, True


@dataclass
class PrecEstimate:
    q_check: int
    q_dot: int
    m: int
    k: int
    rho_ref: float
    feasible: bool
    evaluations: dict

    def wcheck(self, j: int) -> int:
        return j * (self.m + self.k) + self.q_check

    def wdot(self, j: int) -> int:
        return j * self.m + self.q_dot


def bfp_prec_est(hierarchy: Hierarchy, w, j_c: int = 5, q_max: int = 64, rho_thresh: float = 1.05,
                 policy: GammaPolicy | None = None, flat: bool = False) -> PrecEstimate:
    """Constants of the affine ``wcheck`` / ``wdot`` schedules (binary search).

    ``w`` is the working-width function.  ``qcheck`` is searched with
    ``wdot`` at ``q_max``; then ``qdot`` with ``wcheck`` at the found value.
    A constant is accepted when the rate is below ``rho_thresh`` times the
    rate obtained with both constants at ``q_max``.
    """
    spec = hierarchy.spec
    m, k = spec.m, spec.k
    j_c = min(j_c, hierarchy.ell)
    evals: dict = {}

    def sched(qc, qd):
        return Schedule(lambda j: j * (m + k) + qc, w, lambda j: j * m + qd, flat)

    def rate(qc, qd):
        if (qc, qd) not in evals:
            evals[(qc, qd)] = conv_rate_vcycle(hierarchy, sched(qc, qd), j_c, policy)
        return evals[(qc, qd)]

    ref = rate(q_max, q_max)
    qc, ok1 = binary_search_min(lambda q: rate(q, q_max) < rho_thresh * ref, 1, q_max)
    qd, ok2 = binary_search_min(lambda q: rate(qc, q) < rho_thresh * ref, 1, q_max)
    if not (ok1 and ok2):
        log.warning("bfp_prec_est: no feasible constant up to q_max=%d", q_max)
    return PrecEstimate(qc, qd, m, k, ref, ok1 and ok2, evals)


@dataclass
class WEstimate:
    q_w: int
    k: int
    feasible: bool
    ratios: dict

    def __call__(self, j: int) -> int:
        return self.k * j + self.q_w


def _fmg_ratios(hierarchy: Hierarchy, schedule: Schedule, level: int, N, policy) -> list[float]:
    res = BfpMultigrid(hierarchy, schedule, policy, record=False).fmg(level, N)
    return [hierarchy.level(j).ratio(x) for j, x in res.per_level.items()]


def estimate_w(hierarchy: Hierarchy, j_c: int = 5, q_max: int = 64, N=None,
               policy: GammaPolicy | None = None, target: float = 1.5) -> WEstimate:
    """Smallest ``q_w`` such that FMG with ``w_j = k j + q_w`` (other widths
    at :data:`WIDE`) keeps the error ratio ``<= target`` on levels ``1..j_c``."""
    spec = hierarchy.spec
    k = spec.k
    j_c = min(j_c, hierarchy.ell)
    N = default_n(spec.pde, spec.p) if N is None else N
    ratios: dict = {}

    def ok(q):
        s = Schedule(lambda j: WIDE, lambda j: k * j + q, lambda j: WIDE)
        r = _fmg_ratios(hierarchy, s, j_c, N, policy)
        ratios[q] = r
        return max(r) <= target

    q, feasible = binary_search_min(ok, 1, q_max)
    if not feasible:
        log.warning("estimate_w: ratio target not reached up to q_max=%d", q_max)
    return WEstimate(q, k, feasible, ratios)


def estimated_schedule(spec: ProblemSpec, ell: int | None = None, j_c: int = 5, q_max: int = 64,
                       rho_thresh: float = 1.05, policy: GammaPolicy | None = None,
                       hierarchy: Hierarchy | None = None):
    """Full progressive schedule: :func:`estimate_w` followed by :func:`bfp_prec_est`.

    Returns ``(schedule, w_estimate, prec_estimate)``; the schedule enforces
    ``wcheck >= w >= wdot`` level by level.
    """
    ell = spec.j if ell is None else ell
    h = hierarchy or solver_setup(spec, max(ell, min(j_c, ell)))
    west = estimate_w(h, j_c, q_max, policy=policy)
    pest = bfp_prec_est(h, west, j_c, q_max, rho_thresh, policy)
    sched = Schedule.affine((spec.m + spec.k, spec.k, spec.m), (pest.q_check, west.q_w, pest.q_dot),
                            name="estimated")
    return sched, west, pest
