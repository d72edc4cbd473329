"""Optimality conditions of ``min f(x) s.t. G(x) PSD`` at a candidate point.

Checks the nondegeneracy condition (NDC), first-order stationarity with a
multiplier supported on the kernel of ``G(u)``, strict complementarity (SCC)
and the second-order sufficient condition (SOSC) including the curvature
term ``H``. :func:`schur_reduce` builds the polynomial Schur complement
``T = p^2 (C - B^T A^-1 B)`` used as a cross-check.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from pmo.polyalg import (PolyMatrix, Polynomial, det_adjugate, eval_matrix, eval_poly, gradient,
                         hessian, matmul, partial_matrix)

log = logging.getLogger(__name__)

RANK_TOL = 1e-6
FEAS_TOL = 1e-6


class InfeasiblePoint(Exception):
    pass


class NoPivotBlock(Exception):
    pass


def _partials(G: PolyMatrix, u) -> np.ndarray:
    return np.stack([eval_matrix(partial_matrix(G, i), u) for i in range(G.nvars)])


def _second_partials(G: PolyMatrix, u) -> np.ndarray:
    """``(n, n, m, m)`` array of ``d^2 G / dx_i dx_j (u)``."""
    n, m = G.nvars, G.m
    out = np.zeros((n, n, m, m))
    for i in range(n):
        Gi = partial_matrix(G, i)
        for j in range(i, n):
            out[i, j] = out[j, i] = eval_matrix(partial_matrix(Gi, j), u)
    return out


def _grad_f(f: Polynomial, u) -> np.ndarray:
    return np.array([eval_poly(g, u) for g in gradient(f)])


def _threshold(w, rank_tol):
    return rank_tol * max(np.max(np.abs(w), initial=0.0), 1.0)


def svec_basis(d: int) -> np.ndarray:
    """Orthonormal basis of ``S^d``: ``(d(d+1)/2, d, d)``, diagonal units first
    in row-major upper-triangle order, off-diagonals scaled by ``1/sqrt 2``."""
    iu, ju = np.triu_indices(d)
    out = np.zeros((iu.size, d, d))
    for k, (i, j) in enumerate(zip(iu, ju)):
        if i == j:
            out[k, i, i] = 1.0
        else:
            out[k, i, j] = out[k, j, i] = np.sqrt(0.5)
    return out


def svec(X: np.ndarray) -> np.ndarray:
    d = X.shape[0]
    return np.einsum("kij,ij->k", svec_basis(d), X)


# ---------------------------------------------------------------------------


def kernel_basis(G: PolyMatrix, u, rank_tol: float = RANK_TOL, feas_tol: float = FEAS_TOL):
    """``(r, E)``: numerical rank of ``G(u)`` and an orthonormal kernel basis."""
    Gu = eval_matrix(G, u)
    w, V = np.linalg.eigh(Gu)
    if w.size and w[0] < -feas_tol:
        raise InfeasiblePoint(f"lambda_min(G(u)) = {w[0]:.3e} < -{feas_tol:.1e}")
    zero = w <= _threshold(w, rank_tol)
    return int(np.sum(~zero)), V[:, zero]


def pinv_sym(M: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    w, V = np.linalg.eigh(M)
    keep = w > _threshold(w, rank_tol)
    return (V[:, keep] / w[keep]) @ V[:, keep].T


def ndc_matrix(G: PolyMatrix, u, E: np.ndarray) -> np.ndarray:
    """Matrix of ``h -> svec(E^T (grad G(u)[h]) E)``, shape ``(sigma(m - r), n)``."""
    d = E.shape[1]
    if d == 0:
        return np.zeros((0, G.nvars))
    P = _partials(G, u)
    return np.stack([svec(E.T @ Pi @ E) for Pi in P], axis=1)


def _rank(sv, rank_tol):
    return int(np.sum(sv > rank_tol * max(np.max(sv, initial=0.0), 1.0)))


def check_ndc(G: PolyMatrix, u, rank_tol: float = RANK_TOL, feas_tol: float = FEAS_TOL):
    """``(holds, evidence)``; holds iff ``h -> E^T grad G(u)[h] E`` is onto ``S^(m-r)``."""
    r, E = kernel_basis(G, u, rank_tol, feas_tol)
    d = G.m - r
    need = d * (d + 1) // 2
    Mn = ndc_matrix(G, u, E)
    sv = la.svdvals(Mn) if Mn.size else np.zeros(0)
    rank = _rank(sv, rank_tol)
    return bool(rank == need), {"rank_G": r, "corank": d, "required_rank": need, "rank": rank,
                                "singular_values": sv}


def solve_multiplier(f: Polynomial, G: PolyMatrix, u, rank_tol: float = RANK_TOL,
                     feas_tol: float = FEAS_TOL, E: Optional[np.ndarray] = None):
    """``(Lambda, residual)`` with ``Lambda = E M E^T`` minimizing
    ``|grad f(u) - grad G(u)^* Lambda|``."""
    if E is None:
        _, E = kernel_basis(G, u, rank_tol, feas_tol)
    g = _grad_f(f, u)
    d = E.shape[1]
    if d == 0:
        return np.zeros((G.m, G.m)), float(np.linalg.norm(g))
    Bs = svec_basis(d)
    P = _partials(G, u)
    cols = np.array([[np.sum(Pi * (E @ Bk @ E.T)) for Bk in Bs] for Pi in P])  # (n, sigma)
    coef, _, rank, _ = la.lstsq(cols, g)
    if rank < Bs.shape[0]:
        warnings.warn("multiplier is not unique at this point (NDC fails)", RuntimeWarning, stacklevel=2)
    Lam = E @ np.tensordot(coef, Bs, axes=1) @ E.T
    Lam = 0.5 * (Lam + Lam.T)
    return Lam, float(np.linalg.norm(g - cols @ coef))


def check_scc(G: PolyMatrix, u, Lam: np.ndarray, rank_tol: float = RANK_TOL,
              feas_tol: float = FEAS_TOL) -> bool:
    r, _ = kernel_basis(G, u, rank_tol, feas_tol)
    w = np.linalg.eigvalsh(0.5 * (Lam + Lam.T))
    rank_L = int(np.sum(np.abs(w) > _threshold(w, rank_tol)))
    return bool(r + rank_L == G.m)


def lagrangian_hessian(f: Polynomial, G: PolyMatrix, u, Lam: np.ndarray, rank_tol: float = RANK_TOL):
    """``(W, H)`` with ``W = hess f(u) - sum_ij Lam_ij hess G_ij(u) + H``."""
    Hf = eval_matrix(hessian(f), u)
    D2 = _second_partials(G, u)
    HL = Hf - np.einsum("abij,ij->ab", D2, Lam)
    P = _partials(G, u)
    Gp = pinv_sym(eval_matrix(G, u), rank_tol)
    H = 2.0 * np.einsum("ij,ajk,kl,bli->ab", Lam, P, Gp, P)
    H = 0.5 * (H + H.T)
    return HL + H, H


def critical_subspace(G: PolyMatrix, u, rank_tol: float = RANK_TOL, feas_tol: float = FEAS_TOL):
    """Orthonormal basis of ``N(u) = {h : E^T grad G(u)[h] E = 0}``."""
    _, E = kernel_basis(G, u, rank_tol, feas_tol)
    Mn = ndc_matrix(G, u, E)
    if Mn.shape[0] == 0:
        return np.eye(G.nvars)
    U, sv, Vt = la.svd(Mn)
    rank = _rank(sv, rank_tol)
    return Vt[rank:].T


def check_sosc(f: Polynomial, G: PolyMatrix, u, Lam: np.ndarray, rank_tol: float = RANK_TOL,
               feas_tol: float = FEAS_TOL):
    """``(holds, lambda_min)`` of ``W`` restricted to ``N(u)``; vacuous if ``N(u) = {0}``."""
    Bn = critical_subspace(G, u, rank_tol, feas_tol)
    W, _ = lagrangian_hessian(f, G, u, Lam, rank_tol)
    if Bn.shape[1] == 0:
        return True, float("inf")
    lmin = float(np.linalg.eigvalsh(Bn.T @ W @ Bn)[0])
    return bool(lmin > 1e-7 * (1.0 + np.linalg.norm(W, 2))), lmin


# ---------------------------------------------------------------------------
# Schur reduction


@dataclass
class SchurReduction:
    perm: list
    p: Polynomial
    T: PolyMatrix
    A: PolyMatrix = field(repr=False)
    B: list = field(repr=False)  # r x (m - r) nested list
    adjA: PolyMatrix = field(repr=False)

    def __iter__(self):
        return iter((self.perm, self.p, self.T))

    @property
    def r(self) -> int:
        return self.A.m

    def Q(self, x) -> np.ndarray:
        """``p(x) [[I, -A^-1 B], [0, I]]`` evaluated at ``x``, in permuted order."""
        r, m = self.A.m, len(self.perm)
        px = eval_poly(self.p, x)
        adj = eval_matrix(self.adjA, x)
        Bx = np.array([[eval_poly(q, x) for q in row] for row in self.B]).reshape(r, m - r)
        Q = px * np.eye(m)
        Q[:r, r:] = -adj @ Bx
        return Q


def _pivots(M: np.ndarray, r: int, floor: float):
    """Greedy pivoted Cholesky: ``r`` diagonal pivots of largest residual."""
    R = M.copy()
    piv = []
    for _ in range(r):
        diag = np.diag(R).copy()
        diag[piv] = -np.inf
        j = int(np.argmax(diag))
        if diag[j] <= floor:
            raise NoPivotBlock(f"pivot {len(piv) + 1} of {r} is numerically zero ({diag[j]:.2e})")
        piv.append(j)
        col = R[:, j] / np.sqrt(R[j, j])
        R = R - np.outer(col, col)
    return piv


def schur_reduce(G: PolyMatrix, u, rank_tol: float = RANK_TOL, feas_tol: float = FEAS_TOL) -> SchurReduction:
    """``(perm, p, T)`` with ``p = det A`` and ``T = p^2 C - p B^T adj(A) B``
    where ``[[A, B], [B^T, C]]`` is ``G`` permuted so ``A(u)`` is nonsingular."""
    r, _ = kernel_basis(G, u, rank_tol, feas_tol)
    if r < 1:
        raise NoPivotBlock("G(u) = 0: there is no nonsingular principal block")
    Gu = eval_matrix(G, u)
    w = np.linalg.eigvalsh(Gu)
    piv = _pivots(Gu, r, _threshold(w, rank_tol))
    rest = [i for i in range(G.m) if i not in piv]
    n = G.nvars
    A = G.submatrix(piv)
    B = [[G[i, j] for j in rest] for i in piv]
    C = G.submatrix(rest)
    p, adjA = det_adjugate(A)
    if abs(eval_poly(p, u)) <= _threshold(w, rank_tol) ** r:
        raise NoPivotBlock("selected pivot block is singular at u")
    BtadjB = matmul(matmul([list(col) for col in zip(*B)], adjA.rows(), n), B, n) if rest else []
    p2 = p * p
    ent = {}
    for a in range(len(rest)):
        for b in range(a, len(rest)):
            ent[(a, b)] = p2 * C[a, b] - p * BtadjB[a][b]
    T = PolyMatrix(n, len(rest), ent)
    return SchurReduction(piv + rest, p, T, A, B, adjA)


# ---------------------------------------------------------------------------


@dataclass
class OptimalityReport:
    point: np.ndarray
    rank: int
    E: np.ndarray
    Lambda: np.ndarray
    stationarity_residual: float
    ndc: bool
    ndc_evidence: dict
    scc: bool
    rank_Lambda: int
    sosc: bool
    sosc_min_eig: float
    N: np.ndarray
    cross_check: dict = field(default_factory=dict)

    @property
    def verdicts(self):
        """``(NDC, SCC, SOSC)``; a condition after the first failing one is ``None``."""
        out = [self.ndc, None, None]
        if self.ndc:
            out[1] = self.scc
            if self.scc:
                out[2] = self.sosc
        return tuple(out)

    def to_json(self) -> dict:
        ev = self.ndc_evidence
        return {
            "point": [float(v) for v in self.point],
            "rank_G": self.rank,
            "kernel_basis": self.E.tolist(),
            "multiplier": self.Lambda.tolist(),
            "stationarity_residual": self.stationarity_residual,
            "ndc": self.ndc,
            "ndc_rank": ev["rank"],
            "ndc_required_rank": ev["required_rank"],
            "ndc_singular_values": [float(v) for v in ev["singular_values"]],
            "scc": self.scc,
            "rank_multiplier": self.rank_Lambda,
            "sosc": self.sosc,
            "sosc_min_eig": self.sosc_min_eig if np.isfinite(self.sosc_min_eig) else None,
            "critical_subspace": self.N.tolist(),
            "verdicts": list(self.verdicts),
            "cross_check": self.cross_check,
        }


def _reduced_cross_check(f, G, u, Lam, ndc, rank_tol, feas_tol) -> dict:
    red = schur_reduce(G, u, rank_tol, feas_tol)
    r = red.r
    d = G.m - r
    pu = eval_poly(red.p, u)
    Lp = Lam[np.ix_(red.perm, red.perm)]
    Theta = Lp[r:, r:] / pu ** 2
    PT = _partials(red.T, u)  # (n, d, d)
    g = _grad_f(f, u)
    stat = float(np.linalg.norm(g - np.einsum("aij,ij->a", PT, Theta)))
    Bs = svec_basis(d)
    Mt = np.array([[np.sum(Pi * Bk) for Bk in Bs] for Pi in PT])  # (n, sigma)
    sv = la.svdvals(Mt) if Mt.size else np.zeros(0)
    regular = _rank(sv, rank_tol * max(pu ** 2, 1e-300)) == Bs.shape[0]
    return {"pivots": [int(i) for i in red.perm[:r]], "p_u": float(pu),
            "theta_stationarity": stat,
            "theta_ok": bool(stat <= 1e-6 * (1.0 + np.linalg.norm(g))),
            "gradT_regular": bool(regular), "consistent": bool(regular) == bool(ndc)}


def audit(f: Polynomial, G: PolyMatrix, u, rank_tol: float = RANK_TOL,
          feas_tol: float = FEAS_TOL) -> OptimalityReport:
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != G.nvars:
        raise ValueError(f"point has dimension {u.shape[0]}, problem has {G.nvars} variables")
    r, E = kernel_basis(G, u, rank_tol, feas_tol)
    ndc, ev = check_ndc(G, u, rank_tol, feas_tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        Lam, res = solve_multiplier(f, G, u, rank_tol, feas_tol, E=E)
    w = np.linalg.eigvalsh(Lam)
    rank_L = int(np.sum(np.abs(w) > _threshold(w, rank_tol)))
    scc = bool(r + rank_L == G.m)
    sosc, lmin = check_sosc(f, G, u, Lam, rank_tol, feas_tol)
    # a multiplier that does not make u stationary cannot satisfy SCC/SOSC
    g = _grad_f(f, u)
    if res > 1e-6 * (1.0 + np.linalg.norm(g)):
        scc = sosc = False
    # nor can one that is not PSD (u is then not a KKT point)
    if w.size and w[0] < -_threshold(w, rank_tol):
        scc = sosc = False
    cross = {}
    if 1 <= r < G.m:
        try:
            cross = _reduced_cross_check(f, G, u, Lam, ndc, rank_tol, feas_tol)
        except NoPivotBlock as e:
            cross = {"error": str(e)}
    return OptimalityReport(u, r, E, Lam, res, ndc, ev, scc, rank_L, sosc, lmin,
                            critical_subspace(G, u, rank_tol, feas_tol), cross)
