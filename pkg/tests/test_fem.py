import math
import random
from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from gmpy2 import mpfr

from bfpmg.extfloat import BandCholesky
from bfpmg.fem import (ProblemSpec, assemble, energy_error, energy_error_direct, gauss_legendre,
                       knot_vector, manufactured, n_basis, prolongation, reference_solve)
from bfpmg.fem.bspline import evaluate

SPECS = [ProblemSpec("poisson", 1, p, 4) for p in range(1, 7)] + \
        [ProblemSpec("biharmonic", 1, p, 4) for p in range(3, 7)] + \
        [ProblemSpec("poisson", 2, p, 3) for p in (1, 2)]


def _slope(js, errs):
    return float(np.polyfit(js, [math.log2(float(e)) for e in errs], 1)[0])


def test_gauss_legendre_one_point():
    x, w = gauss_legendre(1)
    assert x[0] == 0 and w[0] == 2


def test_gauss_legendre_two_points():
    x, w = gauss_legendre(2)
    third = 1 / gmpy2.sqrt(mpfr(3))
    assert abs(x[1] - third) < mpfr(2) ** -390 and abs(x[0] + third) < mpfr(2) ** -390
    assert all(abs(wi - 1) < mpfr(2) ** -390 for wi in w)


@pytest.mark.parametrize("nq", [3, 5, 8])
def test_gauss_legendre_exact_for_polynomials(nq):
    x, w = gauss_legendre(nq)
    for deg in range(2 * nq):
        got = sum(wi * xi ** deg for xi, wi in zip(x, w))
        want = 0 if deg % 2 else mpfr(2) / (deg + 1)
        assert abs(got - want) < mpfr(2) ** -380


def test_knot_vector_is_open_uniform():
    assert knot_vector(2, 1) == [0, 0, 0, Fraction(1, 2), 1, 1, 1]
    assert n_basis(2, 1) == 4


def test_poisson_p1_stencil():
    A, _ = assemble(ProblemSpec("poisson", 1, 1, 3))
    dense = A.to_dense()
    tol = mpfr(2) ** -380
    for i in range(1, 6):
        assert abs(dense[i][i] - 16) < tol
        assert abs(dense[i][i - 1] + 8) < tol and abs(dense[i][i + 1] + 8) < tol


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"{s.pde}-d{s.d}-p{s.p}")
def test_stiffness_is_spd(spec):
    A, b = assemble(spec)
    D = A.to_scipy().toarray()
    assert np.allclose(D, D.T, rtol=0, atol=1e-12 * abs(D).max())
    BandCholesky(A)  # raises if not positive definite
    assert len(b) == A.shape[0] == spec.n


def test_manufactured_solutions():
    x = mpfr("0.3")
    pi = gmpy2.const_pi()
    u = manufactured(ProblemSpec("poisson", 1, 1, 1))
    assert abs(u.u(x) - gmpy2.sin(3 * pi * x)) < mpfr(2) ** -380
    assert abs(u.f(x) - 9 * pi ** 2 * gmpy2.sin(3 * pi * x)) < mpfr(2) ** -370
    u2 = manufactured(ProblemSpec("poisson", 2, 1, 1))
    y = mpfr("0.7")
    assert abs(u2.f(x, y) - 13 * pi ** 2 * u2.u(x, y)) < mpfr(2) ** -370
    ub = manufactured(ProblemSpec("biharmonic", 1, 3, 1))
    assert abs(ub.u(x) - gmpy2.sin(pi * x) ** 2) < mpfr(2) ** -380
    assert abs(ub.f(x) + 8 * pi ** 4 * gmpy2.cos(2 * pi * x)) < mpfr(2) ** -360
    for end in (mpfr(0), mpfr(1)):
        assert abs(u.u(end)) < mpfr(2) ** -380 and abs(ub.u(end)) < mpfr(2) ** -380


def test_prolongation_p1_columns():
    P = prolongation(ProblemSpec("poisson", 1, 1, 3)).to_dense()
    col = [P[i][1] for i in range(len(P))]
    assert col[1:6] == [0, Fraction(1, 2), 1, Fraction(1, 2), 0] or \
        [float(c) for c in col[1:6]] == [0, 0.5, 1, 0.5, 0]


@pytest.mark.parametrize("p", [2, 3, 5])
def test_prolongation_is_nested(p):
    """Refining a coarse spline reproduces it pointwise."""
    spec = ProblemSpec("poisson", 1, p, 4)
    P = prolongation(spec)
    rng = random.Random(p)
    coarse = np.array([mpfr(rng.uniform(-1, 1)) for _ in range(P.shape[1])], dtype=object)
    fine = P.matvec(coarse)
    pad = lambda c: [mpfr(0)] + list(c) + [mpfr(0)]
    for x in ("0.1", "0.37", "0.5", "0.81"):
        xv = mpfr(x)
        a = evaluate(pad(coarse), p, 3, xv)
        b = evaluate(pad(fine), p, 4, xv)
        assert abs(a - b) < mpfr(2) ** -350


@pytest.mark.parametrize("p", [2, 4])
def test_prolongation_partition_of_unity_interior(p):
    P = prolongation(ProblemSpec("poisson", 1, p, 5)).to_scipy().toarray()
    rows = P.sum(axis=1)
    assert np.allclose(rows[p + 1:-(p + 1)], 1.0)


def test_reference_residual():
    spec = ProblemSpec("poisson", 1, 3, 6)
    A, b = assemble(spec)
    u = reference_solve(spec)
    r = A.matvec(u) - b
    assert max(abs(v) for v in r) < mpfr(2) ** -200 * max(abs(v) for v in b)


@pytest.mark.parametrize("pde,p,order", [("poisson", 1, 1), ("poisson", 2, 2), ("poisson", 3, 3),
                                         ("biharmonic", 3, 2), ("biharmonic", 4, 3)])
def test_energy_error_rate(pde, p, order):
    js = list(range(3, 9))
    errs = [energy_error(reference_solve(ProblemSpec(pde, 1, p, j)), ProblemSpec(pde, 1, p, j))
            for j in js]
    assert abs(_slope(js, errs) + order) < 0.15


def test_energy_error_of_zero_is_norm_of_u():
    # ||u||_L^2 = int (3 pi cos(3 pi x))^2 = 9 pi^2 / 2
    spec = ProblemSpec("poisson", 1, 2, 3)
    e = energy_error([mpfr(0)] * spec.n, spec)
    assert abs(e - gmpy2.sqrt(9 * gmpy2.const_pi() ** 2 / 2)) < mpfr(2) ** -300


def test_energy_error_matches_direct_quadrature():
    spec = ProblemSpec("biharmonic", 1, 4, 4)
    u = reference_solve(spec)
    assert abs(energy_error(u, spec) - energy_error_direct(u, spec)) < mpfr(2) ** -150


def test_perturbation_bounded_by_basis_energy():
    spec = ProblemSpec("poisson", 1, 3, 5)
    A, _ = assemble(spec)
    u = reference_solve(spec)
    i, delta = spec.n // 2, mpfr("1e-3")
    v = u.copy()
    v[i] += delta
    diff = abs(energy_error(v, spec, A) - energy_error(u, spec, A))
    assert 0 < diff <= delta * gmpy2.sqrt(A.get(i, i)) * (1 + mpfr(2) ** -100)


def test_nodal_error_p1_second_order():
    errs = []
    for j in (4, 5, 6):
        spec = ProblemSpec("poisson", 1, 1, j)
        u = reference_solve(spec)
        m = manufactured(spec)
        h = mpfr(2) ** -j
        errs.append(max(abs(u[i] - m.u((i + 1) * h)) for i in range(spec.n)))
    assert all(e < 2 * (mpfr(2) ** -j) ** 2 * 50 for e, j in zip(errs, (4, 5, 6)))
    assert errs[2] < errs[0] / 10
