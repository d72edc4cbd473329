"""SOS-convexity tests and the lowest-order solve for SOS-convex instances.

Both tests look for a PSD Gram matrix of a scalar form:

* ``f``: ``h^T hess f(x) h`` over the monomials ``h_i x^alpha``,
  ``|alpha| <= d - 1``, which is the same as ``hess f = P^T P``.
* ``-G``: ``-h^T hess_x(xi^T G(x) xi) h`` over ``xi_a h_b x^alpha``, and
  if that fails, ``|xi|^2`` times it over ``xi_a xi_c h_b x^alpha``. This
  is a sufficient test only; a failure is reported as "not certified".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from pmo.moment import Tms
from pmo.polyalg import Monomial, PolyMatrix, Polynomial, eval_matrix, hessian, monomials_upto
from pmo.sdp import OPTIMAL, SolveOptions, assemble_moment_relaxation, solve
from pmo.sdp.relax import _psd_clip, max_margin_grams


@dataclass
class GramWitness:
    """``p = v^T Q v`` for the monomial vector ``v``."""

    monomials: list
    Q: Optional[np.ndarray]
    margin: float
    residual: float
    nvars: int
    multiplier: str = "1"

    def polynomial(self) -> Polynomial:
        acc = {}
        for a, ma in enumerate(self.monomials):
            for b, mb in enumerate(self.monomials):
                if self.Q[a, b] != 0.0:
                    key = tuple(x + y for x, y in zip(ma, mb))
                    acc[key] = acc.get(key, 0.0) + self.Q[a, b]
        return Polynomial(self.nvars, acc)


def gram_search(p: Polynomial, monomials: Sequence[Monomial], tol: float | None = None,
                opts: SolveOptions | None = None):
    """``(found, witness)``: is ``p`` an SOS of polynomials spanned by ``monomials``?"""
    tol = 1e-6 * (1.0 + p.max_abs_coeff()) if tol is None else tol
    monos = [tuple(m) for m in monomials]
    s = len(monos)
    iu, ju = np.triu_indices(s)
    keys = {}
    rows, cols, vals = [], [], []
    for col, (a, b) in enumerate(zip(iu, ju)):
        key = tuple(x + y for x, y in zip(monos[a], monos[b]))
        rows.append(keys.setdefault(key, len(keys)))
        cols.append(col)
        vals.append(1.0 if a == b else 2.0)
    for key in p.terms:
        if key not in keys:
            # a term no Gram entry can produce
            return False, GramWitness(monos, None, float("nan"), float("inf"), p.nvars)
    C = sp.csc_matrix((vals, (rows, cols)), shape=(len(keys), iu.size))
    rhs = np.zeros(len(keys))
    for key, c in p.terms.items():
        rhs[keys[key]] = c
    sol, margin, Qs = max_margin_grams([s], [C], rhs, opts)
    if sol.status != OPTIMAL:
        return False, GramWitness(monos, None, float("nan"), float("inf"), p.nvars)
    w = GramWitness(monos, _psd_clip(Qs[0]), margin, float("nan"), p.nvars)
    w.residual = (p - w.polynomial()).max_abs_coeff()
    return w.residual <= tol, w


def _lift(p: Polynomial, nvars: int) -> Polynomial:
    """``p`` in the first ``p.nvars`` of ``nvars`` variables."""
    pad = (0,) * (nvars - p.nvars)
    return Polynomial(nvars, {a + pad: c for a, c in p.items()})


def hessian_form(f: Polynomial) -> Polynomial:
    """``h^T hess f(x) h`` in the variables ``(x, h)``."""
    n = f.nvars
    H = hessian(f)
    hs = Polynomial.variables(2 * n)[n:]
    out = Polynomial.zero(2 * n)
    for i in range(n):
        for j in range(n):
            if not H[i, j].is_zero():
                out = out + _lift(H[i, j], 2 * n) * hs[i] * hs[j]
    return out


def is_sos_convex_poly(f: Polynomial, opts: SolveOptions | None = None):
    """``(certified, witness)`` that ``hess f = P^T P``."""
    if f.degree < 2 or f.degree % 2:
        raise ValueError(f"need an even degree >= 2, got {f.degree}")
    n = f.nvars
    d = f.degree // 2
    monos = [alpha + tuple(int(k == i) for k in range(n))
             for i in range(n) for alpha in monomials_upto(n, d - 1)]
    return gram_search(hessian_form(f), monos, opts=opts)


def neg_hessian_form(G: PolyMatrix) -> Polynomial:
    """``-h^T hess_x(xi^T G(x) xi) h`` in the variables ``(x, xi, h)``."""
    n, m = G.nvars, G.m
    N = 2 * n + m
    V = Polynomial.variables(N)
    xi, hv = V[n:n + m], V[n + m:]
    out = Polynomial.zero(N)
    for (a, b), g in G.entries():
        H = hessian(g)
        w = xi[a] * xi[b] * (1.0 if a == b else 2.0)
        for i in range(n):
            for j in range(n):
                if not H[i, j].is_zero():
                    out = out - _lift(H[i, j], N) * w * hv[i] * hv[j]
    return out


def _neg_G_monomials(n: int, m: int, t: int, xi_deg: int):
    monos = []
    for tail_xi in monomials_upto(m, xi_deg):
        if sum(tail_xi) != xi_deg:
            continue
        for b in range(n):
            tail = tail_xi + tuple(int(k == b) for k in range(n))
            monos += [alpha + tail for alpha in monomials_upto(n, t)]
    return monos


def is_sos_convex_negG(G: PolyMatrix, opts: SolveOptions | None = None):
    """``(certified, witness)``; ``False`` means only "not certified".

    The form is first tried as it is. Forms like Choi's biquadratic are
    nonnegative without being SOS, so on failure ``|xi|^2`` times the form
    is tried; an SOS there is linear in ``h`` and still factors
    ``-hess(xi^T G xi) = F^T F`` for each fixed ``xi``.
    """
    n, m = G.nvars, G.m
    form = neg_hessian_form(G)
    if form.is_zero():
        return True, GramWitness([], np.zeros((0, 0)), float("inf"), 0.0, 2 * n + m)
    t = max(0, math.ceil((G.degree - 2) / 2))
    ok, w = gram_search(form, _neg_G_monomials(n, m, t, 1), opts=opts)
    if ok:
        return ok, w
    xi = Polynomial.variables(2 * n + m)[n:n + m]
    mult = sum((v * v for v in xi[1:]), xi[0] * xi[0])
    ok2, w2 = gram_search(mult * form, _neg_G_monomials(n, m, t, 2), opts=opts)
    if ok2:
        w2.multiplier = "|xi|^2"
        return ok2, w2
    return False, w


@dataclass
class ConvexResult:
    value: float
    minimizer: np.ndarray
    order: int
    status: str
    valid: bool
    message: str = ""
    y: Optional[Tms] = field(default=None, repr=False)

    def __iter__(self):
        return iter((self.value, self.minimizer))


def solve_convex(f: Polynomial, G: PolyMatrix, opts: SolveOptions | None = None,
                 check: bool = True, feas_tol: float = 1e-6) -> ConvexResult:
    """Lowest-order moment relaxation; the minimizer is the vector of first moments."""
    if check:
        if not is_sos_convex_poly(f, opts)[0]:
            raise ValueError("f is not certified SOS-convex")
        if not is_sos_convex_negG(G, opts)[0]:
            raise ValueError("-G is not certified SOS-convex")
    d = max(math.ceil(f.degree / 2), G.half_degree, 1)
    sol = solve(assemble_moment_relaxation(f, G, d), opts)
    if sol.status != OPTIMAL:
        return ConvexResult(float("nan"), np.full(f.nvars, np.nan), d, sol.status, False,
                            f"moment relaxation {sol.status}")
    y = Tms(f.nvars, 2 * d, sol.y)
    u = y.first_moments()
    value = float(sol.primal_obj)
    lmin = np.linalg.eigvalsh(eval_matrix(G, u))[0]
    msg = []
    if lmin < -feas_tol:
        msg.append(f"first moments infeasible (lambda_min {lmin:.2e})")
    if f(u) > value + 1e-6:
        msg.append(f"f(u) = {f(u):.10g} exceeds the bound {value:.10g}")
    return ConvexResult(value, u, d, sol.status, not msg, "; ".join(msg), y)
