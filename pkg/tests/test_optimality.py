import numpy as np
import pytest

from pmo.optimality import (InfeasiblePoint, audit, check_ndc, kernel_basis, lagrangian_hessian,
                            schur_reduce, svec, svec_basis)
from pmo.polyalg import PolyMatrix, Polynomial, eval_matrix


def test_svec_basis_orthonormal():
    B = svec_basis(3)
    gram = np.einsum("kij,lij->kl", B, B)
    np.testing.assert_allclose(gram, np.eye(6), atol=1e-15)
    X = np.array([[1.0, 2.0, 0.0], [2.0, 3.0, -1.0], [0.0, -1.0, 5.0]])
    assert np.linalg.norm(svec(X)) == pytest.approx(np.linalg.norm(X))


def test_kernel_and_infeasible_point():
    x1, x2 = Polynomial.variables(2)
    G = PolyMatrix.from_rows(2, [[x1, x2], [x2, 1.0]])
    r, E = kernel_basis(G, [0.0, 0.0])
    assert r == 1 and E.shape == (2, 1)
    with pytest.raises(InfeasiblePoint):
        kernel_basis(G, [-1.0, 0.0])


def test_scalar_constraint_reduces_to_licq():
    # g = 1 - x1^2 - x2^2 at (1, 0): grad g != 0 so NDC holds; f = x1 has multiplier 1/2
    x1, x2 = Polynomial.variables(2)
    G = PolyMatrix.from_rows(2, [[1 - x1**2 - x2**2]])
    rep = audit(-x1, G, [1.0, 0.0])
    assert rep.verdicts == (True, True, True)
    assert rep.Lambda[0, 0] == pytest.approx(0.5)
    # at the maximizer of x1 the multiplier is -1/2, so u is not a KKT point
    rep = audit(x1, G, [1.0, 0.0])
    assert rep.Lambda[0, 0] == pytest.approx(-0.5)
    assert rep.verdicts == (True, False, None)


def test_ndc_fails_at_singular_point():
    # G = diag(x1, x1): two kernel directions from a single variable
    x1, = Polynomial.variables(1)
    G = PolyMatrix.from_rows(1, [[x1, 0.0], [0.0, x1]])
    ok, ev = check_ndc(G, [0.0])
    assert not ok and ev["required_rank"] == 3


def test_lagrangian_hessian_linear_case_is_hessian_of_f():
    x1, x2 = Polynomial.variables(2)
    G = PolyMatrix.from_rows(2, [[1 + x1, x2], [x2, 1 - x1]])
    f = x1**2 + 3 * x2**2
    W, H = lagrangian_hessian(f, G, [0.0, 0.0], np.zeros((2, 2)))
    np.testing.assert_allclose(W, [[2.0, 0.0], [0.0, 6.0]], atol=1e-12)


def test_schur_identity_on_elliptope(problem):
    p = problem("elliptope")
    red = schur_reduce(p.G, [1.0, 1.0, 1.0])
    assert red.r == 1
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.standard_normal(3)
        Q = red.Q(x)
        Gp = eval_matrix(p.G, x)[np.ix_(red.perm, red.perm)]
        L = Q.T @ Gp @ Q
        np.testing.assert_allclose(L[1:, 1:], eval_matrix(red.T, x), atol=1e-10)
        np.testing.assert_allclose(L[:1, 1:], 0.0, atol=1e-10)


def test_report_json_fields(problem):
    p = problem("elliptope")
    js = audit(p.f, p.G, [1.0, 1.0, 1.0]).to_json()
    assert js["rank_G"] == 1 and js["verdicts"] == [True, True, True]
    assert js["cross_check"]["consistent"]
