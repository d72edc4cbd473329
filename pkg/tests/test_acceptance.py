"""Acceptance checks; the run ends with one PASS/FAIL line per criterion.

    pytest tests/test_acceptance.py -v
"""
import time

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from _gen import archimedean_instance, random_poly, random_polymatrix
from pmo.hierarchy import HierarchyOptions, check_flat_truncation, extract_atoms, run, solve_order
from pmo.moment import AtomicMeasure, dirac_tms, localizing_block, moment_matrix, tms_from_atoms, Tms
from pmo.optimality import _second_partials, audit, lagrangian_hessian, schur_reduce
from pmo.polyalg import (PolyMatrix, Polynomial, basis, det_adjugate, eval_matrix, grad_adjoint,
                         grad_apply, gradient, hessian, matmul, partial_matrix)
from pmo.sdp import OPTIMAL, min_order
from pmo.sosconvex import hessian_form, is_sos_convex_negG, is_sos_convex_poly, solve_convex

TRIALS = settings(max_examples=1000, deadline=None, derandomize=True,
                  suppress_health_check=[HealthCheck.too_slow])
seeds = st.integers(0, 2**32 - 1)


def criterion(n, text):
    return pytest.mark.criterion(n, text)


# -- 1 -----------------------------------------------------------------------

C1 = "ball/Hankel example at k=2: bounds ~0, flat, minimizer at the origin, <= 30 s"


@criterion(1, C1)
def test_hankel_ball_order_two(problem):
    p = problem("hankel_ball")
    t0 = time.perf_counter()
    res = run(p.f, p.G, HierarchyOptions(k_max=2))
    elapsed = time.perf_counter() - t0
    last = res.orders[-1]
    assert last.k == 2
    assert abs(last.mom) <= 1e-6 and abs(last.sos) <= 1e-6
    assert res.converged and res.flat is not None
    assert len(res.minimizers) == 1
    assert np.max(np.abs(res.minimizers[0])) <= 1e-4
    assert elapsed <= 30.0


# -- 2 -----------------------------------------------------------------------

C2 = "SOS-convex example: both certificates; convex solve and k=2 agree on 1.1321 and the minimizer"
U_STAR = np.array([0.3977, 0.3096, 0.5057])


@criterion(2, C2)
def test_sos_convex_certificates(problem):
    p = problem("sos_convex")
    assert is_sos_convex_poly(p.f)[0]
    assert is_sos_convex_negG(p.G)[0]


@criterion(2, C2)
def test_sos_convex_solves_agree(problem):
    p = problem("sos_convex")
    conv = solve_convex(p.f, p.G)
    assert conv.valid and conv.order == 2
    hier = run(p.f, p.G, HierarchyOptions(k_min=2, k_max=2))
    assert hier.converged
    assert abs(conv.value - 1.1321) <= 1e-3
    assert abs(hier.value - 1.1321) <= 1e-3
    assert abs(conv.value - hier.value) <= 1e-3
    assert np.max(np.abs(conv.minimizer - U_STAR)) <= 1e-3
    assert np.max(np.abs(hier.minimizers[0] - U_STAR)) <= 1e-3


# -- 3 -----------------------------------------------------------------------

C3 = "audit verdicts (F,-,-), (T,F,-), (T,T,F) at 0; elliptope (1,1,1) NDC, rank 1, grad det = 0"


@criterion(3, C3)
@pytest.mark.parametrize("name,expect", [
    ("ndc_fails", (False, None, None)),
    ("scc_fails", (True, False, None)),
    ("sosc_fails", (True, True, False)),
])
def test_counterexample_verdicts(problem, name, expect):
    p = problem(name)
    assert audit(p.f, p.G, np.zeros(p.nvars)).verdicts == expect


@criterion(3, C3)
def test_elliptope_corner(problem):
    p = problem("elliptope")
    u = np.ones(3)
    rep = audit(p.f, p.G, u)
    assert rep.ndc and rep.rank == 1
    det, _ = det_adjugate(p.G)
    assert np.linalg.norm([g(u) for g in gradient(det)]) <= 1e-8
    # closed form: det = 1 - x1^2 - x2^2 - x3^2 + 2 x1 x2 x3
    x1, x2, x3 = u
    oracle = np.array([-2 * x1 + 2 * x2 * x3, -2 * x2 + 2 * x1 * x3, -2 * x3 + 2 * x1 * x2])
    assert np.linalg.norm(oracle) <= 1e-8


# -- 4 -----------------------------------------------------------------------

C4 = "counterexample (ii) bounds k=2..4: <= 1e-6, nondecreasing within 2e-6, not converged"


@criterion(4, C4)
def test_counterexample_bounds(problem):
    p = problem("scc_fails")
    res = run(p.f, p.G, HierarchyOptions(k_min=2, k_max=4))
    assert [o.k for o in res.orders] == [2, 3, 4]
    moms = [o.mom for o in res.orders]
    assert all(o.mom_status == OPTIMAL for o in res.orders)
    assert all(v <= 1e-6 for v in moms)
    assert all(b >= a - 2e-6 for a, b in zip(moms, moms[1:]))
    assert not res.converged and res.flat is None


# -- 5 -----------------------------------------------------------------------

C5 = "the three displayed order-2 localizing matrices, entry-exact on random y"

# each entry is a signed list of moment indices "ij" meaning y_{ij}
DISPLAYED = {
    "1-x1x2": [["+00 -11", "+10 -21", "+01 -12"],
               ["+10 -21", "+20 -31", "+11 -22"],
               ["+01 -12", "+11 -22", "+02 -13"]],
    "x1+x2": [["+10 +01", "+20 +11", "+11 +02"],
              ["+20 +11", "+30 +21", "+21 +12"],
              ["+11 +02", "+21 +12", "+12 +03"]],
    "x1^2-x2^2": [["+20 -02", "+30 -12", "+21 -03"],
                  ["+30 -12", "+40 -22", "+31 -13"],
                  ["+21 -03", "+31 -13", "+22 -04"]],
}


def pattern_value(y: Tms, cell: str) -> float:
    total = 0.0
    for tok in cell.split():
        sign = 1.0 if tok[0] == "+" else -1.0
        total += sign * y[(int(tok[1]), int(tok[2]))]
    return total


@criterion(5, C5)
@pytest.mark.parametrize("seed", range(5))
def test_displayed_localizing_matrices(seed):
    x1, x2 = Polynomial.variables(2)
    G = PolyMatrix.from_rows(2, [[1 - x1 * x2, x1 + x2], [x1 + x2, x1**2 - x2**2]])
    y = Tms(2, 4, np.random.default_rng(seed).standard_normal(15))
    L = localizing_block(y, G, 2)
    assert L.shape == (6, 6)
    blocks = {(0, 0): "1-x1x2", (0, 1): "x1+x2", (1, 0): "x1+x2", (1, 1): "x1^2-x2^2"}
    for (i, j), name in blocks.items():
        expect = np.array([[pattern_value(y, c) for c in row] for row in DISPLAYED[name]])
        np.testing.assert_allclose(L[3 * i:3 * i + 3, 3 * j:3 * j + 3], expect, rtol=0, atol=1e-12)


# -- 6 -----------------------------------------------------------------------

C6 = "property suites (1000 randomized trials each; 20 random Archimedean instances)"


def _small(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 4))
    return rng, n, m


@criterion(6, C6)
@TRIALS
@given(seeds)
def test_adjoint_identity(seed):
    rng, n, m = _small(seed)
    G = random_polymatrix(rng, n, m, 3)
    u, d = rng.standard_normal(n), rng.standard_normal(n)
    X = rng.standard_normal((m, m))
    X = X + X.T
    lhs = np.sum(grad_apply(G, u, d) * X)
    rhs = d @ grad_adjoint(G, u, X)
    assert abs(lhs - rhs) <= 1e-9 * (1.0 + abs(lhs))


@criterion(6, C6)
@TRIALS
@given(seeds)
def test_adjugate_identity(seed):
    rng, n, m = _small(seed)
    A = random_polymatrix(rng, n, m, 2, nterms=3)
    det, adj = det_adjugate(A)
    prod = matmul(A.rows(), adj.rows(), n)
    scale = 1.0 + det.max_abs_coeff()
    for i in range(m):
        for j in range(m):
            target = det if i == j else Polynomial.zero(n)
            assert (prod[i][j] - target).max_abs_coeff() <= 1e-10 * scale


@criterion(6, C6)
@TRIALS
@given(seeds)
def test_dirac_outer_product(seed):
    rng, n, _ = _small(seed)
    k = int(rng.integers(1, 4))
    u = rng.uniform(-1.5, 1.5, n)
    v = np.prod(u[None, :] ** basis(n, k).array, axis=1)
    np.testing.assert_allclose(moment_matrix(dirac_tms(u, 2 * k), k), np.outer(v, v), rtol=1e-12, atol=1e-12)


@criterion(6, C6)
@TRIALS
@given(seeds)
def test_atomic_round_trip(seed):
    rng, n, _ = _small(seed)
    r = int(rng.integers(1, 4))
    while True:  # well separated atoms
        A = rng.uniform(-1, 1, (r, n))
        if r == 1 or min(np.linalg.norm(A[i] - A[j]) for i in range(r) for j in range(i)) >= 0.3:
            break
    w = rng.uniform(0.1, 1.0, r)
    w /= w.sum()
    y = tms_from_atoms(AtomicMeasure(A, w), 6)
    flat = check_flat_truncation(y, 3, 1)
    assert flat is not None and flat.rank == r
    got = extract_atoms(y, flat, seed=int(rng.integers(1000)))
    order = np.lexsort(A.T[::-1])
    assert np.max(np.abs(got.atoms - A[order])) <= 1e-6
    assert np.max(np.abs(got.weights - w[order])) <= 1e-6


@criterion(6, C6)
@pytest.mark.parametrize("seed", range(20))
def test_weak_duality_and_monotonicity(seed):
    f, G = archimedean_instance(seed)
    k0 = min_order(f, G)
    a, b = solve_order(f, G, k0), solve_order(f, G, k0 + 1)
    for o in (a, b):
        assert o.mom_status == OPTIMAL and o.sos_status == OPTIMAL
        assert o.sos <= o.mom + 1e-6
    assert b.mom >= a.mom - 2e-6
    assert b.sos >= a.sos - 2e-6
    # 0 is feasible, so every lower bound is below f(0)
    assert b.mom <= f(np.zeros(f.nvars)) + 1e-6


@criterion(6, C6)
@TRIALS
@given(seeds)
def test_schur_identity(seed):
    rng, n, m = _small(seed)
    m = max(m, 2)
    r = int(rng.integers(1, m))
    # G(0) is PSD of rank r; G(x) = G(0) + linear + quadratic terms
    W = rng.standard_normal((m, r))
    G0 = W @ W.T
    ent = {}
    for i in range(m):
        for j in range(i, m):
            p = random_poly(rng, n, 2, nterms=3)
            ent[(i, j)] = p - p.coeff((0,) * n) + G0[i, j]
    G = PolyMatrix(n, m, ent)
    red = schur_reduce(G, np.zeros(n))
    assert red.r == r
    x = rng.uniform(-1, 1, n)
    Q = red.Q(x)
    Gp = eval_matrix(G, x)[np.ix_(red.perm, red.perm)]
    L = Q.T @ Gp @ Q
    pu = red.p(x)
    A = eval_matrix(red.A, x)
    scale = 1.0 + np.max(np.abs(L))
    assert np.max(np.abs(L[:r, :r] - pu**2 * A)) <= 1e-8 * scale
    assert np.max(np.abs(L[:r, r:])) <= 1e-8 * scale
    assert np.max(np.abs(L[r:, r:] - eval_matrix(red.T, x))) <= 1e-8 * scale


def _fd_grad(fun, u, h=1e-6):
    out = []
    for i in range(u.size):
        e = np.zeros(u.size)
        e[i] = h
        out.append((fun(u + e) - fun(u - e)) / (2 * h))
    return np.array(out)


def _close(a, b, tol=1e-4):
    a, b = np.asarray(a), np.asarray(b)
    return np.max(np.abs(a - b), initial=0.0) <= tol * (1.0 + np.max(np.abs(b), initial=0.0))


@criterion(6, C6)
@TRIALS
@given(seeds)
def test_finite_differences(seed):
    rng, n, m = _small(seed)
    f = random_poly(rng, n, 4, nterms=6)
    G = random_polymatrix(rng, n, m, 3)
    u = rng.uniform(-1, 1, n)
    grad = np.array([g(u) for g in gradient(f)])
    assert _close(grad, _fd_grad(f, u))
    H = eval_matrix(hessian(f), u)
    assert _close(H, _fd_grad(lambda v: np.array([g(v) for g in gradient(f)]), u))
    # first and second partials of G
    P = np.stack([eval_matrix(partial_matrix(G, i), u) for i in range(n)])
    assert _close(P, _fd_grad(lambda v: eval_matrix(G, v), u))
    assert _close(_second_partials(G, u), _fd_grad(lambda v: np.stack(
        [eval_matrix(partial_matrix(G, i), v) for i in range(n)]), u))
    d = rng.standard_normal(n)
    t = 1e-6
    assert _close(grad_apply(G, u, d), (eval_matrix(G, u + t * d) - eval_matrix(G, u - t * d)) / (2 * t))
    # Hessian of the Lagrangian f - <Lambda, G>
    Lam = rng.standard_normal((m, m))
    Lam = Lam + Lam.T
    W, Hc = lagrangian_hessian(f, G, u, Lam)
    lag_grad = lambda v: np.array([g(v) for g in gradient(f)]) - grad_adjoint(G, v, Lam)
    assert _close(W - Hc, _fd_grad(lag_grad, u))
    # h^T hess f(x) h as a polynomial in (x, h)
    h = rng.standard_normal(n)
    form = hessian_form(f)
    fd2 = (f(u + 1e-4 * h) - 2 * f(u) + f(u - 1e-4 * h)) / 1e-8
    assert _close(form(np.concatenate([u, h])), fd2)
    assert _close(form(np.concatenate([u, h])), h @ H @ h)


# -- 7 -----------------------------------------------------------------------

C7 = "golden instances: SDP residuals <= 1e-8, certificate reconstruction <= 1e-6"

GOLDEN = [("hankel_ball", 1), ("hankel_ball", 2), ("scc_fails", 2), ("scc_fails", 3), ("scc_fails", 4),
          ("sos_convex", 2), ("ndc_fails", 2), ("elliptope", 1), ("sosc_fails", 3)]


def reconstruct(cert, G, n):
    """``[x]^T Q0 [x] + sum Q1[(i,a),(j,b)] x^(a+b) G_ij`` as a term dict."""
    acc = {}

    def add(alpha, c):
        acc[alpha] = acc.get(alpha, 0.0) + c

    b0 = basis(n, cert.k)
    for a, ma in enumerate(b0):
        for b, mb in enumerate(b0):
            add(tuple(x + y for x, y in zip(ma, mb)), cert.Q0[a, b])
    b1 = basis(n, cert.k - cert.dG)
    s = len(b1)
    for i in range(G.m):
        for j in range(G.m):
            gij = G[i, j]
            for a, ma in enumerate(b1):
                for b, mb in enumerate(b1):
                    q = cert.Q1[i * s + a, j * s + b]
                    if q == 0.0:
                        continue
                    for gam, c in gij.items():
                        add(tuple(x + y + z for x, y, z in zip(ma, mb, gam)), q * c)
    return acc


@criterion(7, C7)
@pytest.mark.parametrize("name,k", GOLDEN, ids=[f"{n}-k{k}" for n, k in GOLDEN])
def test_solver_contract(problem, name, k):
    p = problem(name)
    o = solve_order(p.f, p.G, k)
    assert o.mom_status == OPTIMAL and o.sos_status == OPTIMAL
    assert max(o.residuals.values()) <= 1e-8
    assert max(o.sos_residuals.values()) <= 1e-8
    cert = o.certificate
    assert cert is not None
    assert np.linalg.eigvalsh(cert.Q0)[0] >= -1e-12
    assert np.linalg.eigvalsh(cert.Q1)[0] >= -1e-12
    rec = reconstruct(cert, p.G, p.nvars)
    target = dict((p.f - cert.gamma).items())
    keys = set(rec) | set(target)
    resid = max(abs(rec.get(a, 0.0) - target.get(a, 0.0)) for a in keys)
    assert resid <= 1e-6


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
