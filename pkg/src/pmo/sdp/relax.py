"""Moment and SOS relaxations of ``min f(x) s.t. G(x) PSD`` and QM certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from pmo.moment import MomentMap, localizing_block_map, moment_map
from pmo.polyalg import PolyMatrix, Polynomial, basis, basis_size
from pmo.sdp.backends import SolveOptions, solve
from pmo.sdp.problem import OPTIMAL, PsdBlock, SdpProblem


class NotCertified(Exception):
    """No quadratic-module certificate found at this order (not a proof of non-membership)."""


def min_order(f: Polynomial, G: PolyMatrix) -> int:
    return max(math.ceil(max(f.degree, 0) / 2), G.half_degree, 1)


def _check_degrees(f: Polynomial, G: PolyMatrix, k: int):
    if f.nvars != G.nvars:
        raise ValueError("f and G have different numbers of variables")
    if f.degree > 2 * k:
        raise ValueError(f"deg(f) = {f.degree} exceeds 2k = {2 * k}")
    if G.half_degree > k:
        raise ValueError(f"d_G = {G.half_degree} exceeds k = {k}")


def assemble_moment_relaxation(f: Polynomial, G: PolyMatrix, k: int) -> SdpProblem:
    """``min <f, y>  s.t.  M_k[y] PSD, L_G^(k)[y] PSD, y_0 = 1``.

    Variable ``j`` is ``y_alpha`` for the ``j``-th monomial of ``basis(n, 2k)``.
    """
    _check_degrees(f, G, k)
    n = f.nvars
    N = basis_size(n, 2 * k)
    M = moment_map(n, k)
    L = localizing_block_map(G, k)
    blocks = [PsdBlock(M.size, np.zeros((M.size, M.size)), M.coeffs),
              PsdBlock(L.size, np.zeros((L.size, L.size)), L.coeffs)]
    A = sp.csr_matrix(([1.0], ([0], [0])), shape=(1, N))
    return SdpProblem(N, f.coeff_vector(2 * k), blocks, A, np.ones(1),
                      meta={"kind": "moment", "k": k, "nvars": n, "basis": basis(n, 2 * k)})


def _svec_columns(mmap: MomentMap):
    """Coefficient columns of the Gram entries ``Q_IJ, I <= J`` against a
    moment map: column ``(I, J)`` is the coefficient vector of the polynomial
    multiplying ``Q_IJ`` in ``<Q, L[x]>``."""
    s = mmap.size
    iu, ju = np.triu_indices(s)
    C = mmap.coeffs.tocsr()
    up = C[iu * s + ju]
    low = C[ju * s + iu]
    off = sp.diags((iu != ju).astype(float))
    return (up + off @ low).T.tocsc(), iu, ju


def _gram_block(nvars_total: int, first: int, s: int) -> PsdBlock:
    iu, ju = np.triu_indices(s)
    cnt = iu.size
    rows = np.concatenate([iu * s + ju, (ju * s + iu)[iu != ju]])
    cols = np.concatenate([first + np.arange(cnt), (first + np.arange(cnt))[iu != ju]])
    F = sp.csc_matrix((np.ones(rows.size), (rows, cols)), shape=(s * s, nvars_total))
    return PsdBlock(s, np.zeros((s, s)), F)


def _sos_layout(f: Polynomial, G: PolyMatrix, k: int, n_scalars: int):
    n = f.nvars
    M = moment_map(n, k)
    L = localizing_block_map(G, k)
    C0, _, _ = _svec_columns(M)
    C1, _, _ = _svec_columns(L)
    n0, n1 = C0.shape[1], C1.shape[1]
    N = n_scalars + n0 + n1
    blocks = [_gram_block(N, n_scalars, M.size), _gram_block(N, n_scalars + n0, L.size)]
    return M, L, C0, C1, blocks, N


def assemble_sos_relaxation(f: Polynomial, G: PolyMatrix, k: int) -> SdpProblem:
    """``max gamma  s.t.  f - gamma = <Q0, [x]_k [x]_k^T> + <Q1, L_G-form>``.

    Variable 0 is ``gamma``; then the upper triangles of ``Q0`` and ``Q1``
    (row-major). ``Q1`` is indexed block-major, row ``i*s + a`` pairing
    constraint row ``i`` with monomial ``a`` of ``[x]_{k - d_G}``. The problem
    minimizes ``-gamma``.
    """
    _check_degrees(f, G, k)
    M, L, C0, C1, blocks, N = _sos_layout(f, G, k, 1)
    nmom = M.nmoments
    e0 = sp.csc_matrix(([1.0], ([0], [0])), shape=(nmom, 1))
    A = sp.hstack([e0, C0, C1]).tocsr()
    c = np.zeros(N)
    c[0] = -1.0
    return SdpProblem(N, c, blocks, A, f.coeff_vector(2 * k),
                      meta={"kind": "sos", "k": k, "sizes": (M.size, L.size)})


def _unpack_gram(y, first, s):
    Q = np.zeros((s, s))
    iu, ju = np.triu_indices(s)
    Q[iu, ju] = y[first:first + iu.size]
    Q[ju, iu] = y[first:first + iu.size]
    return Q


def sos_grams(problem: SdpProblem, y):
    s0, s1 = problem.meta["sizes"]
    first = problem.nvars - (s0 * (s0 + 1) // 2) - (s1 * (s1 + 1) // 2)
    Q0 = _unpack_gram(y, first, s0)
    Q1 = _unpack_gram(y, first + s0 * (s0 + 1) // 2, s1)
    return Q0, Q1


@dataclass
class QmCertificate:
    """``f - gamma = [x]_k^T Q0 [x]_k + sum over (i,a),(j,b) of
    Q1[(i,a),(j,b)] x^(alpha_a + alpha_b) G_ij``."""

    k: int
    gamma: float
    Q0: np.ndarray
    Q1: np.ndarray
    dG: int
    residual: float = float("nan")
    margin: float = float("nan")
    info: dict = field(default_factory=dict, repr=False)

    def sigma(self, nvars: int) -> Polynomial:
        return gram_polynomial(self.Q0, nvars, self.k)

    def reconstruct(self, G: PolyMatrix) -> Polynomial:
        """``sigma + sum_t v_t^T G v_t`` rebuilt with polynomial arithmetic."""
        n = G.nvars
        t = self.k - self.dG
        bt = basis(n, t)
        s = len(bt)
        total = self.sigma(n)
        for i in range(G.m):
            for j in range(G.m):
                g = G[i, j]
                if g.is_zero():
                    continue
                block = self.Q1[i * s:(i + 1) * s, j * s:(j + 1) * s]
                acc = {}
                for a in range(s):
                    for b in range(s):
                        if block[a, b] != 0.0:
                            key = tuple(x + z for x, z in zip(bt[a], bt[b]))
                            acc[key] = acc.get(key, 0.0) + block[a, b]
                total = total + Polynomial(n, acc) * g
        return total

    def check(self, f: Polynomial, G: PolyMatrix) -> float:
        """Max coefficient residual of ``f - gamma - reconstruct(G)``."""
        return (f - self.gamma - self.reconstruct(G)).max_abs_coeff()

    def to_json(self) -> dict:
        return {"order": self.k, "gamma": self.gamma, "dG": self.dG,
                "residual": self.residual, "margin": self.margin,
                "Q0": self.Q0.tolist(), "Q1": self.Q1.tolist()}

    @classmethod
    def from_json(cls, data) -> "QmCertificate":
        return cls(int(data["order"]), float(data["gamma"]), np.array(data["Q0"], dtype=float),
                   np.array(data["Q1"], dtype=float), int(data["dG"]),
                   float(data.get("residual", float("nan"))), float(data.get("margin", float("nan"))))


def gram_polynomial(Q: np.ndarray, nvars: int, d: int) -> Polynomial:
    """``[x]_d^T Q [x]_d``."""
    bd = basis(nvars, d)
    acc = {}
    for a in range(len(bd)):
        for b in range(len(bd)):
            if Q[a, b] != 0.0:
                key = tuple(x + z for x, z in zip(bd[a], bd[b]))
                acc[key] = acc.get(key, 0.0) + Q[a, b]
    return Polynomial(nvars, acc)


def _psd_clip(Q):
    w, V = np.linalg.eigh(0.5 * (Q + Q.T))
    return (V * np.maximum(w, 0.0)) @ V.T


def default_cert_tol(f: Polynomial) -> float:
    return 1e-6 * (1.0 + f.max_abs_coeff())


def max_margin_grams(sizes, coeff_maps, rhs, opts: SolveOptions | None = None):
    """Find PSD Grams ``Q_b`` with ``sum_b C_b svec(Q_b) = rhs`` by maximizing
    the uniform margin ``t`` in ``Q_b = Q_b' + t I``, ``Q_b' PSD``, ``t <= 1``.

    ``C_b`` acts on the row-major upper triangle of ``Q_b``. Returns
    ``(solution status, t, [Q_b])`` with the Grams not yet clipped.
    """
    neq = len(rhs)
    ntri = [s * (s + 1) // 2 for s in sizes]
    N = 2 + sum(ntri)
    t_col = np.zeros((neq, 1))
    for s, C in zip(sizes, coeff_maps):
        iu, ju = np.triu_indices(s)
        t_col += np.asarray(C[:, np.flatnonzero(iu == ju)].sum(axis=1)).reshape(neq, 1)
    A_top = sp.hstack([sp.csc_matrix(t_col), sp.csc_matrix((neq, 1))] + list(coeff_maps))
    cap = sp.csc_matrix(([1.0, 1.0], ([0, 0], [0, 1])), shape=(1, N))
    A = sp.vstack([A_top, cap]).tocsr()
    b = np.concatenate([np.asarray(rhs, dtype=float), [1.0]])
    slack = PsdBlock(1, np.zeros((1, 1)), sp.csc_matrix(([1.0], ([0], [1])), shape=(1, N)))
    blocks, first = [slack], 2
    for s, nt in zip(sizes, ntri):
        blocks.append(_gram_block(N, first, s))
        first += nt
    c = np.zeros(N)
    c[0] = -1.0
    sol = solve(SdpProblem(N, c, blocks, A, b, meta={"kind": "gram margin"}), opts)
    if sol.status != OPTIMAL:
        return sol, float("nan"), []
    t = float(sol.y[0])
    Qs, first = [], 2
    for s, nt in zip(sizes, ntri):
        Qs.append(_unpack_gram(sol.y, first, s) + t * np.eye(s))
        first += nt
    return sol, t, Qs


def certify_qm_membership(f: Polynomial, gamma: float, G: PolyMatrix, k: int,
                          tol: float | None = None, opts: SolveOptions | None = None) -> QmCertificate:
    """Search Grams with ``f - gamma`` in ``QM[G]_{2k}``; raise :class:`NotCertified` on failure.

    The SDP maximizes the uniform margin ``t`` with ``Q0 - t I``, ``Q1 - t I``
    PSD (capped at ``t <= 1``); Grams are clipped to the PSD cone and the
    identity is re-verified by polynomial arithmetic before returning.
    """
    _check_degrees(f, G, k)
    tol = default_cert_tol(f) if tol is None else tol
    M, L, C0, C1, _, _ = _sos_layout(f, G, k, 0)
    sol, margin, Qs = max_margin_grams([M.size, L.size], [C0, C1], (f - gamma).coeff_vector(2 * k), opts)
    if sol.status != OPTIMAL:
        raise NotCertified(f"SDP status {sol.status} at order {k}")
    Q0, Q1 = (_psd_clip(Q) for Q in Qs)
    cert = QmCertificate(k, float(gamma), Q0, Q1, G.half_degree, margin=margin,
                         info={"sdp": sol.residuals})
    cert.residual = cert.check(f, G)
    if cert.residual > tol:
        raise NotCertified(
            f"best Gram margin {margin:.3e}; reconstruction residual {cert.residual:.3e} > {tol:.3e}")
    return cert


def certificate_from_moment_dual(f: Polynomial, G: PolyMatrix, k: int, sol, gamma: float) -> QmCertificate:
    """Grams read off the block multipliers of a solved moment relaxation."""
    Q0, Q1 = (_psd_clip(z) for z in sol.Z)
    cert = QmCertificate(k, float(gamma), Q0, Q1, G.half_degree, info={"source": "moment dual"})
    cert.residual = cert.check(f, G)
    return cert
