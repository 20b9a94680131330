import random

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from bfpmg import analysis as an
from bfpmg.extfloat import ExtCSR, dot, ext_array
from bfpmg.fem import ProblemSpec
from bfpmg.multigrid import level_data

TINY = mpfr(2) ** -100


def poisson_1d(j):
    return level_data(ProblemSpec("poisson", 1, 1, j)).A_raw


@pytest.fixture(scope="module")
def eig6():
    A = poisson_1d(6)
    return A, an.smallest_eigpairs(A, 8)


def test_eigenvalues_closed_form(eig6):
    A, rep = eig6
    h = mpfr(2) ** -6
    for i, lam in enumerate(rep.eigenvalues, 1):
        want = 4 / h * gmpy2.sin(i * gmpy2.const_pi() * h / 2) ** 2
        assert abs(lam - want) < mpfr(2) ** -90 * want
    assert rep.eigenvalues == sorted(rep.eigenvalues) and rep.eigenvalues[0] > 0


def test_eigenpair_certificates(eig6):
    A, rep = eig6
    for lam, v, res in zip(rep.eigenvalues, rep.eigenvectors, rep.residuals):
        assert res <= TINY
        r = A.matvec(v) - v * lam
        assert gmpy2.sqrt(dot(r, r)) <= TINY * gmpy2.sqrt(dot(v, v))
    V = rep.eigenvectors
    for i in range(len(V)):
        for k in range(i):
            assert abs(dot(V[i], V[k])) <= mpfr(2) ** -90


def test_quant_error_of_representable_vector_is_zero():
    A = poisson_1d(3)
    v = ext_array([1, -0.5, 0.25, 0.75, -1, 0.5, 0.125])
    assert an.quant_error(v, 5, A) == 0


@pytest.mark.parametrize("j", [4, 6, 8, 10])
def test_quant_error_below_condition_bound(j):
    A = poisson_1d(j)
    kappa = an.condition_numbers(A, 1).kappa
    for v in an.smallest_eigpairs(A, 8).eigenvectors:
        for w in (5, 10, 15):
            assert an.quant_error(v, w, A) <= 4 * an.quant_bound(kappa, w)


def test_quant_error_shrinks_with_width(eig6):
    A, rep = eig6
    v = rep.eigenvectors[2]
    errs = [an.quant_error(v, w, A) for w in range(4, 30)]
    for a, b in zip(errs, errs[1:]):
        assert b <= 2 * a


def test_checkerboard_factors():
    """With ``lambda_min = 1`` scaling, ``||z||_A ~ kappa**0.5 ||z||`` and ``||z|| ~ n``."""
    ratios, norms = [], []
    for j in (4, 5, 6):
        A = level_data(ProblemSpec("poisson", 2, 1, j)).A_raw
        c = an.condition_numbers(A, 1)
        n = 2 ** j - 1
        z = ext_array(an.checkerboard(n).tolist())
        nz = gmpy2.sqrt(dot(z, z))
        za = an.energy_norm(z, A) / gmpy2.sqrt(c.lambda_min)
        ratios.append(float(za / (gmpy2.sqrt(c.kappa) * nz)))
        norms.append(float(nz) / n)
    assert max(ratios) / min(ratios) < 1.1 and min(ratios) > 0.1
    assert all(0.6 < r < 0.8 for r in norms)


def test_checkerboard_pattern():
    assert list(an.checkerboard(3)) == [1, 0, 1, 0, 1, 0, 1, 0, 1]


# --- discrete harmonic ------------------------------------------------------------

@pytest.fixture(scope="module")
def harmonic():
    A = an.poisson_fd_2d(8, scaled=True)
    return A, an.discrete_harmonic_min(A)


def test_harmonic_certificates(harmonic):
    A, dh = harmonic
    cert = dh.certificate(A)
    assert cert["v_p"] <= TINY and cert["harmonic"] <= TINY and cert["energy"] <= TINY
    assert dh.bound == 1 / gmpy2.sqrt(max(dh.inv_diag))


def test_harmonic_is_minimal(harmonic):
    A, dh = harmonic
    rng = np.random.default_rng(7)
    n = A.shape[0]
    for _ in range(1000):
        x = rng.uniform(-1, 1, n)
        x[rng.integers(n)] = rng.choice([-1.0, 1.0])
        assert an.energy_norm(ext_array(x.tolist()), A) >= dh.bound


def test_spectral_fast_path_matches_exact(harmonic):
    _, dh = harmonic
    assert abs(an.harmonic_bound_fd2d(8) - float(dh.bound)) < 1e-12


def test_fd_lambda_min_is_one_after_scaling():
    A = an.poisson_fd_2d(6, scaled=True)
    lam = np.linalg.eigvalsh(A.to_scipy().toarray())[0]
    assert abs(lam - 1) < 1e-12


def test_growth_exponent_monotone_bound():
    b = [an.harmonic_bound_fd2d(n) for n in (8, 16, 32)]
    assert b[0] < b[1] < b[2]


# --- condition numbers ---------------------------------------------------------------

def test_condition_diagonal():
    A = ExtCSR.diag(ext_array([1, 4, 9, 2]))
    c = an.condition_numbers(A, 1)
    assert abs(c.kappa - 9) < mpfr(2) ** -100 and abs(c.kappa_lower - 9) < mpfr(2) ** -100
    assert abs(c.h - 1 / mpfr(3)) < mpfr(2) ** -100


def test_condition_growth_poisson_p1():
    js = list(range(4, 10))
    reps = [an.condition_numbers(poisson_1d(j), 1) for j in js]
    slope = an.fitted_slope(js, [np.log2(float(r.kappa)) for r in reps])
    assert abs(slope - 2) < 0.1
    for a, b in zip(reps, reps[1:]):
        assert abs(float(b.h / a.h) - 0.5) < 0.05
        assert b.kappa_lower >= b.kappa * (1 - mpfr(2) ** -80)  # equal in exact arithmetic here
