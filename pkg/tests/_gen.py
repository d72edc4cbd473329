"""Random instances shared by the property suites."""
import numpy as np

from pmo.polyalg import PolyMatrix, Polynomial, monomials_upto


def random_poly(rng, n, d, nterms=None, scale=1.0):
    mons = monomials_upto(n, d)
    k = len(mons) if nterms is None else min(nterms, len(mons))
    idx = rng.choice(len(mons), size=k, replace=False)
    return Polynomial(n, {mons[i]: float(scale * rng.standard_normal()) for i in idx})


def random_polymatrix(rng, n, m, d, nterms=4):
    ent = {}
    for i in range(m):
        for j in range(i, m):
            ent[(i, j)] = random_poly(rng, n, d, nterms)
    return PolyMatrix(n, m, ent)


def archimedean_instance(seed):
    """``f`` of degree <= 4 and ``G = diag((1 - |x|^2) I, B(x))`` with ``B(0) > 0``,
    so ``0`` is feasible and the quadratic module is Archimedean."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, 4))
    m_ball = int(rng.integers(1, m + 1))
    xs = Polynomial.variables(n)
    ball = 1 - sum((v * v for v in xs[1:]), xs[0] * xs[0])
    ent = {(i, i): ball for i in range(m_ball)}
    for i in range(m_ball, m):
        for j in range(i, m):
            p = random_poly(rng, n, 2, nterms=3, scale=0.5)
            p = p - p.coeff((0,) * n)  # B(0) = I exactly
            ent[(i, j)] = p + (1.0 if i == j else 0.0)
    G = PolyMatrix(n, m, ent)
    f = random_poly(rng, n, int(rng.integers(1, 5)), nterms=6)
    return f, G
