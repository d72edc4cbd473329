import numpy as np
import pytest

from pmo.hierarchy import (ExtractionFailed, FlatTruncation, HierarchyOptions, check_flat_truncation,
                           extract_atoms, numerical_rank, run, solve_order)
from pmo.moment import AtomicMeasure, Tms, tms_from_atoms
from pmo.polyalg import PolyMatrix, Polynomial


def test_numerical_rank_gap_rule():
    assert numerical_rank(np.diag([1.0, 0.5, 1e-9]))[0] == 2
    assert numerical_rank(np.diag([1.0, 1e-5, 1e-7]))[0] == 2
    # 2e-6 passes the cut, but the next value is only 4x smaller
    assert numerical_rank(np.diag([1.0, 2e-6, 5e-7]))[0] is None
    assert numerical_rank(np.zeros((2, 2)))[0] == 0


def test_flat_truncation_on_atomic_tms():
    mu = AtomicMeasure(np.array([[0.0, 0.0], [1.0, 1.0]]), np.array([0.3, 0.7]))
    y = tms_from_atoms(mu, 6)
    flat = check_flat_truncation(y, 3, 1)
    assert flat is not None and flat.rank == 2
    got = extract_atoms(y, flat)
    np.testing.assert_allclose(got.atoms, mu.atoms, atol=1e-8)
    np.testing.assert_allclose(got.weights, mu.weights, atol=1e-8)


def test_no_flat_truncation_for_generic_tms():
    rng = np.random.default_rng(0)
    # a tms whose moment matrices are all full rank: a measure with many atoms
    mu = AtomicMeasure(rng.uniform(-1, 1, size=(12, 2)), np.full(12, 1 / 12))
    y = tms_from_atoms(mu, 4)
    assert check_flat_truncation(y, 2, 1) is None


def test_extraction_rejects_inconsistent_flat_claim():
    mu = AtomicMeasure(np.array([[0.2], [0.9]]), np.array([0.5, 0.5]))
    y = tms_from_atoms(mu, 6)
    vals = y.values.copy()
    vals[-1] += 0.3  # break the degree-6 moment; ranks up to t=2 are unchanged
    bad = Tms(1, 6, vals)
    flat = FlatTruncation(3, 2, 2, 1, np.zeros(0), np.zeros(0))
    with pytest.raises(ExtractionFailed):
        extract_atoms(bad, flat)


def test_interval_minimum():
    x, = Polynomial.variables(1)
    res = run(-x, PolyMatrix.from_rows(1, [[1 - x**2]]), HierarchyOptions(k_max=3))
    assert res.converged
    assert res.value == pytest.approx(-1.0, abs=1e-6)
    np.testing.assert_allclose(res.minimizers, [[1.0]], atol=1e-5)


def test_two_global_minimizers():
    # min -x^2 on [-1, 1]: minimizers at +-1
    x, = Polynomial.variables(1)
    res = run(-x**2, PolyMatrix.from_rows(1, [[1 - x**2]]), HierarchyOptions(k_max=4))
    assert res.converged
    assert res.value == pytest.approx(-1.0, abs=1e-6)
    np.testing.assert_allclose(np.sort(res.minimizers[:, 0]), [-1.0, 1.0], atol=1e-4)


def test_bounds_are_monotone(problem):
    p = problem("scc_fails")
    res = run(p.f, p.G, HierarchyOptions(k_max=3))
    moms = [o.mom for o in res.orders]
    assert all(b >= a - 2e-6 for a, b in zip(moms, moms[1:]))
    for o in res.orders:
        assert o.sos <= o.mom + 1e-6


def test_order_below_minimum_is_rejected(problem):
    p = problem("sosc_fails")
    with pytest.raises(ValueError):
        solve_order(p.f, p.G, 2)
