import itertools
from math import comb

import numpy as np
import pytest
import sympy

from pmo.polyalg import (PolyMatrix, Polynomial, basis, basis_size, det_adjugate, eval_matrix,
                         grad_adjoint, grad_apply, gradient, grlex_key, grlex_rank, hessian,
                         monomials_upto, partial_matrix)

X = sympy.symbols("x1:5")


def to_sympy(p: Polynomial):
    xs = X[:p.nvars]
    return sum((c * sympy.prod([v**e for v, e in zip(xs, a)]) for a, c in p.items()), sympy.Integer(0))


def from_sympy(expr, n):
    poly = sympy.Poly(sympy.expand(expr), *X[:n])
    return Polynomial(n, {tuple(m): float(c) for m, c in poly.terms()})


def random_poly(rng, n, d, nterms=6):
    terms = {}
    mons = monomials_upto(n, d)
    for idx in rng.choice(len(mons), size=min(nterms, len(mons)), replace=False):
        terms[mons[idx]] = float(rng.integers(-5, 6))
    return Polynomial(n, terms)


def test_basis_sizes_match_binomials():
    for n in range(1, 5):
        for d in range(0, 6):
            assert basis_size(n, d) == comb(n + d, d) == len(basis(n, d))


def test_grlex_order_small_case():
    # graded, then lexicographic with x1 > x2
    assert monomials_upto(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


def test_grlex_rank_is_position_in_basis():
    for n in (1, 2, 3):
        b = basis(n, 5)
        for i, a in enumerate(b):
            assert grlex_rank(a) == i
        keys = [grlex_key(a) for a in b]
        assert keys == sorted(keys)


def test_arithmetic_matches_sympy():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(1, 4))
        p, q = random_poly(rng, n, 3), random_poly(rng, n, 2)
        sp_, sq = to_sympy(p), to_sympy(q)
        assert (p * q).allclose(from_sympy(sp_ * sq, n))
        assert (p + q).allclose(from_sympy(sp_ + sq, n))
        assert (p - 2.5 * q).allclose(from_sympy(sp_ - sympy.Rational(5, 2) * sq, n))
        assert (q ** 3).allclose(from_sympy(sq ** 3, n))


def test_derivatives_match_sympy():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        p = random_poly(rng, n, 4)
        e = to_sympy(p)
        for i, g in enumerate(gradient(p)):
            assert g.allclose(from_sympy(sympy.diff(e, X[i]), n))
        H = hessian(p)
        for i, j in itertools.product(range(n), repeat=2):
            assert H[i, j].allclose(from_sympy(sympy.diff(e, X[i], X[j]), n))


def test_evaluation():
    x1, x2 = Polynomial.variables(2)
    p = 3 * x1**2 * x2 - x2 + 1
    assert p([2.0, -1.0]) == pytest.approx(-12 + 1 + 1)
    G = PolyMatrix.from_rows(2, [[x1, x2], [x2, 1 - x1]])
    np.testing.assert_allclose(eval_matrix(G, [0.5, 2.0]), [[0.5, 2.0], [2.0, 0.5]])


def test_polymatrix_is_symmetric_by_construction():
    x1, x2 = Polynomial.variables(2)
    G = PolyMatrix.from_rows(2, [[x1, x2], [x2, x1 * x2]])
    assert G[0, 1] == G[1, 0]
    with pytest.raises(ValueError):
        PolyMatrix.from_rows(2, [[x1, x2], [x1, x1]])


def test_degree_bookkeeping():
    x1, x2 = Polynomial.variables(2)
    G = PolyMatrix.from_rows(2, [[1 - x1**2, x2], [x2, x1**3]])
    assert G.degree == 3
    assert G.half_degree == 2
    assert Polynomial.zero(2).is_zero()


def test_det_adjugate_matches_sympy():
    rng = np.random.default_rng(3)
    for m in (1, 2, 3):
        rows = [[None] * m for _ in range(m)]
        for i in range(m):
            for j in range(i, m):
                rows[i][j] = rows[j][i] = random_poly(rng, 2, 2, nterms=3)
        A = PolyMatrix.from_rows(2, rows)
        det, adj = det_adjugate(A)
        S = sympy.Matrix(m, m, lambda i, j: to_sympy(A[i, j]))
        assert det.allclose(from_sympy(S.det(), 2), atol=1e-8)
        Sadj = S.adjugate()
        for i in range(m):
            for j in range(m):
                assert adj[i, j].allclose(from_sympy(Sadj[i, j], 2), atol=1e-8)


def test_partial_matrix_and_gradient_operators():
    x1, x2, x3 = Polynomial.variables(3)
    G = PolyMatrix.from_rows(3, [[x1 * x2, x3**2], [x3**2, x1 - x2]])
    u = np.array([1.0, 2.0, -1.0])
    P0 = eval_matrix(partial_matrix(G, 0), u)
    np.testing.assert_allclose(P0, [[2.0, 0.0], [0.0, 1.0]])
    d = np.array([1.0, -1.0, 0.5])
    expect = sum(di * eval_matrix(partial_matrix(G, i), u) for i, di in enumerate(d))
    np.testing.assert_allclose(grad_apply(G, u, d), expect)
    Xm = np.array([[1.0, 2.0], [2.0, 3.0]])
    # <grad G(u)[d], X> = d . grad G(u)^*(X)
    assert np.sum(grad_apply(G, u, d) * Xm) == pytest.approx(d @ grad_adjoint(G, u, Xm))
