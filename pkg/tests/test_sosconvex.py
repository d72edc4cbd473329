import numpy as np
import pytest

from pmo.polyalg import PolyMatrix, Polynomial
from pmo.sosconvex import (gram_search, hessian_form, is_sos_convex_negG, is_sos_convex_poly,
                           neg_hessian_form, solve_convex)


def test_hessian_form_of_quadratic():
    x1, x2 = Polynomial.variables(2)
    form = hessian_form(x1**2 + x1 * x2)
    h1, h2 = Polynomial.variables(4)[2:]
    assert form.allclose(2 * h1 * h1 + 2 * h1 * h2)


def test_gram_search_simple_square():
    x, y = Polynomial.variables(2)
    ok, w = gram_search((x - y) ** 2, [(1, 0), (0, 1)])
    assert ok
    assert w.polynomial().allclose((x - y) ** 2, atol=1e-6)
    ok, _ = gram_search(x * y, [(1, 0), (0, 1)])
    assert not ok


def test_sos_convex_polynomials():
    x1, x2, x3 = Polynomial.variables(3)
    assert is_sos_convex_poly((x1**2 + x2**2 + x3**2) ** 2)[0]
    assert is_sos_convex_poly(x1**4 + x2**2)[0]
    assert not is_sos_convex_poly(x1**4 - x1**2)[0]  # not convex at 0
    with pytest.raises(ValueError):
        is_sos_convex_poly(x1**3)


def test_negG_tests():
    x1, x2, x3 = Polynomial.variables(3)
    nrm = x1**2 + x2**2 + x3**2
    assert is_sos_convex_negG(PolyMatrix.identity(3, 2, 1 - nrm))[0]
    assert is_sos_convex_negG(PolyMatrix.from_rows(3, [[x1, x2], [x2, x3]]))[0]  # linear
    # -G = x1^2 - 1 is convex but G = 1 - ... here G = x1^2 - 1 so -G = 1 - x1^2 is concave
    assert not is_sos_convex_negG(PolyMatrix.from_rows(3, [[x1**2 - 1]]))[0]


def test_neg_hessian_form_scalar():
    x1, x2 = Polynomial.variables(2)
    form = neg_hessian_form(PolyMatrix.from_rows(2, [[1 - x1**2 - x2**2]]))
    V = Polynomial.variables(5)
    xi, h1, h2 = V[2], V[3], V[4]
    assert form.allclose(2 * xi * xi * (h1 * h1 + h2 * h2))


def test_solve_convex_small():
    a, b = Polynomial.variables(2)
    res = solve_convex(a**2 + b**2, PolyMatrix.from_rows(2, [[a - 1]]))
    assert res.valid
    assert res.value == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(res.minimizer, [1.0, 0.0], atol=1e-5)
    with pytest.raises(ValueError):
        solve_convex(a**4 - a**2, PolyMatrix.from_rows(2, [[1 - a**2 - b**2]]))
