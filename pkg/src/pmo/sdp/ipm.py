"""Built-in primal-dual interior-point solver.

The core works on the textbook pair

    (P)  min <C, X>  s.t.  <A_i, X> = b_i,  X PSD
    (D)  max b^T y   s.t.  sum_i y_i A_i + S = C,  S PSD

with the Nesterov-Todd (default) or HKM search direction and Mehrotra predictor-corrector steps, all
dense. A canonical :class:`~pmo.sdp.problem.SdpProblem` reaches the core by
one of two reductions:

* LMI form: equalities are eliminated, the remaining free variables become
  the (D) multipliers ``y`` and the problem blocks become ``S``. Used for
  moment relaxations, where the number of moments is small.
* Gram form: if every block is a bare matrix variable (each upper-triangle
  entry owned by its own scalar variable, no constant term) then those
  blocks become ``X`` of (P) and the leftover scalars are eliminated through
  the equalities. Used for SOS relaxations, whose Gram entries far outnumber
  the coefficient-matching equalities.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from pmo.sdp.problem import (INFEASIBLE, MAX_ITER, NUMERICAL_TROUBLE, OPTIMAL, UNBOUNDED,
                             SdpProblem, SdpSolution, dual_objective, residuals)

log = logging.getLogger(__name__)


@dataclass
class IpmOptions:
    tol: float = 1e-8
    max_iter: int = 200
    infeas_tol: float = 1e-9
    step_frac_min: float = 0.9
    refine: int = 3
    direction: str = "nt"  # "nt" | "hkm"
    polish_tol: float = 1e-5
    verbose: bool = False
    reduction: str = "auto"  # "auto" | "lmi" | "gram"


# ---------------------------------------------------------------------------
# core


def _sym(M):
    return 0.5 * (M + M.T)


def _chol(M):
    """Lower Cholesky factor; ``None`` if ``M`` is not numerically PD."""
    try:
        return la.cholesky(M, lower=True, check_finite=False)
    except la.LinAlgError:
        return None


def _max_step(L, dM):
    """Largest alpha with ``L L^T + alpha dM`` PSD (inf if unbounded)."""
    W = la.solve_triangular(L, dM, lower=True, check_finite=False)
    W = la.solve_triangular(L, W.T, lower=True, check_finite=False)
    lmin = np.linalg.eigvalsh(_sym(W))[0]
    return np.inf if lmin >= 0 else -1.0 / lmin


def _cholx(M):
    L = _chol(M)
    if L is None:
        raise la.LinAlgError("iterate lost positive definiteness")
    return L


class _HKM:
    """HKM direction: ``dX = (Rc - X dS) S^-1`` symmetrized."""

    def __init__(self, X, S):
        self.X = X
        self.LX = _cholx(X)
        self.LS = _cholx(S)
        self.LSinv = la.solve_triangular(self.LS, np.eye(S.shape[0]), lower=True, check_finite=False)
        self.Sinv = self.LSinv.T @ self.LSinv

    def schur_factor(self, Ab):
        # M_ij = <Lx^T A_i Ls^-T, Lx^T A_j Ls^-T>
        return np.matmul(np.matmul(self.LX.T[None], Ab), self.LSinv.T[None])

    def _rc(self, pred):
        return 0.0 if pred is None else pred @ self.Sinv

    def base(self, pred, Rd):
        return self._rc(pred) - self.X - self.X @ Rd @ self.Sinv

    def dx(self, pred, dS):
        return self._rc(pred) - self.X - self.X @ dS @ self.Sinv

    def corrector(self, target, dXp, dSp):
        return target * np.eye(self.X.shape[0]) - dXp @ dSp


class _NT:
    """Nesterov-Todd direction in the scaled space where ``X`` and ``S`` both
    become the diagonal ``D``; ``W = G G^T`` satisfies ``W S W = X``."""

    def __init__(self, X, S):
        self.LX = _cholx(X)
        self.LS = _cholx(S)
        U, d, Vt = la.svd(self.LS.T @ self.LX, check_finite=False)
        self.d = d
        sq = np.sqrt(d)
        self.G = (self.LX @ Vt.T) / sq[None, :]
        # G^{-1} = D^{1/2} V^T L_X^{-1}
        self.Ginv = sq[:, None] * la.solve_triangular(self.LX, Vt.T, lower=True, trans="T",
                                                       check_finite=False).T
        self.W = self.G @ self.G.T

    def schur_factor(self, Ab):
        return np.matmul(np.matmul(self.G.T[None], Ab), self.G[None])

    def _T(self, pred):
        if pred is None:
            return -np.diag(self.d)
        return pred

    def base(self, pred, Rd):
        return self.G @ self._T(pred) @ self.G.T - self.W @ Rd @ self.W

    def dx(self, pred, dS):
        return self.G @ self._T(pred) @ self.G.T - self.W @ dS @ self.W

    # scaled space: dX = G dXt G^T and A(dX)_i = <G^T A_i G, dXt>
    def scaled_dx(self, pred, dS):
        return self._T(pred) - self.G.T @ dS @ self.G

    def unscale(self, dXt):
        return self.G @ dXt @ self.G.T

    def corrector(self, target, dXp, dSp):
        dx = self.Ginv @ dXp @ self.Ginv.T
        ds = self.G.T @ dSp @ self.G
        R = target * np.eye(self.d.size) - np.diag(self.d ** 2) - 0.5 * (dx @ ds + ds @ dx)
        return 2.0 * R / (self.d[:, None] + self.d[None, :])


class _Core:
    def __init__(self, C, A, b, opts: IpmOptions, check=None):
        self.C = [np.asarray(c, dtype=float) for c in C]
        self.A = A  # list of (m, s, s)
        self.b = np.asarray(b, dtype=float)
        self.m = self.b.shape[0]
        self.opts = opts
        self.check = check
        self.sizes = [c.shape[0] for c in self.C]
        self.nu = sum(self.sizes)
        # row scaling keeps the Schur complement well balanced
        norms = np.zeros(self.m)
        for Ab in self.A:
            norms += np.einsum("ijk,ijk->i", Ab, Ab)
        norms = np.sqrt(norms)
        norms[norms == 0] = 1.0
        self.rowscale = 1.0 / norms
        self.A = [Ab * self.rowscale[:, None, None] for Ab in self.A]
        self.b = self.b * self.rowscale
        self._Amat = None

    def _polishes(self, X, Rp, scal, B, msolve):
        """Candidate corrections with ``A(X + dX) = b``: in the scaled metric
        (``dX = W A^T(w) W``) first, then least norm."""
        w = msolve(Rp)
        z = B.T @ w
        out, pos = [], 0
        for x, sc in zip(X, scal):
            d = z[pos:pos + x.size].reshape(x.shape)
            out.append(x + _sym(sc.unscale(d)) if hasattr(sc, "unscale") else x)
            pos += x.size
        yield out
        if self._Amat is None:
            self._Amat = np.hstack([Ab.reshape(self.m, -1) for Ab in self.A])
        v = la.lstsq(self._Amat, Rp, check_finite=False)[0]
        out, pos = [], 0
        for x in X:
            out.append(x + _sym(v[pos:pos + x.size].reshape(x.shape)))
            pos += x.size
        yield out

    def op(self, X):
        out = np.zeros(self.m)
        for Ab, Xb in zip(self.A, X):
            out += np.einsum("ijk,jk->i", Ab, Xb)
        return out

    def adj(self, y):
        return [np.tensordot(y, Ab, axes=1) for Ab in self.A]

    def start(self):
        X, S = [], []
        for Ab, Cb, s in zip(self.A, self.C, self.sizes):
            nA = np.sqrt(np.einsum("ijk,ijk->i", Ab, Ab)) if self.m else np.zeros(0)
            xi = max(10.0, np.sqrt(s), s * np.max((1 + np.abs(self.b)) / (1 + nA), initial=0.0))
            eta = max(10.0, np.sqrt(s), np.max(nA, initial=0.0), np.linalg.norm(Cb))
            X.append(xi * np.eye(s))
            S.append(eta * np.eye(s))
        return X, np.zeros(self.m), S

    def solve(self):
        o = self.opts
        X, y, S = self.start()
        normb = 1.0 + np.linalg.norm(self.b)
        normC = 1.0 + np.sqrt(sum(np.sum(c * c) for c in self.C))
        status = MAX_ITER
        it = 0
        history = []
        stall = 0
        for it in range(1, o.max_iter + 1):
            Rp = self.b - self.op(X)
            AtY = self.adj(y)
            Rd = [c - s - a for c, s, a in zip(self.C, S, AtY)]
            xs = sum(np.sum(x * s) for x, s in zip(X, S))
            mu = xs / self.nu
            pobj = sum(np.sum(c * x) for c, x in zip(self.C, X))
            dobj = float(self.b @ y)
            rp = np.linalg.norm(Rp) / normb
            rd = np.sqrt(sum(np.sum(r * r) for r in Rd)) / normC
            gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
            relxs = xs / (1 + abs(pobj) + abs(dobj))
            history.append((it, pobj, dobj, rp, rd, gap, mu))
            if o.verbose:
                log.info("it %3d pobj %+.8e dobj %+.8e rp %.1e rd %.1e gap %.1e mu %.1e",
                         it, pobj, dobj, rp, rd, gap, mu)
            if max(rp, rd, gap, relxs) <= o.tol:
                if self.check is None or self.check(X, y * self.rowscale, S) <= o.tol:
                    status = OPTIMAL
                    break
            # infeasibility certificates
            if dobj > 0:
                if np.sqrt(sum(np.sum((c - r) ** 2) for c, r in zip(self.C, Rd))) / dobj < o.infeas_tol:
                    status = "P_INFEASIBLE"
                    break
            if pobj < 0:
                if np.linalg.norm(self.b - Rp) / (-pobj) < o.infeas_tol:
                    status = "D_INFEASIBLE"
                    break

            try:
                scal = [(_NT if o.direction == "nt" else _HKM)(x, s_) for x, s_ in zip(X, S)]
            except la.LinAlgError:
                status = NUMERICAL_TROUBLE
                break
            # M = B B^T is never formed: a QR factor of B^T keeps the
            # Schur system at sqrt of its condition number
            Rfac = None
            B = None
            if self.m:
                B = np.hstack([sc.schur_factor(Ab).reshape(self.m, -1) for sc, Ab in zip(scal, self.A)])
                Rfac = la.qr(B.T, mode="r", check_finite=False)[0][:self.m]
                dR = np.abs(np.diag(Rfac))
                floor = 1e-15 * dR.max(initial=0.0)
                if dR.min(initial=1.0) <= floor:
                    Rfac = Rfac + np.diag(np.where(dR <= floor, floor + 1e-300, 0.0))

            def msolve(r):
                z = la.solve_triangular(Rfac, r, trans="T", check_finite=False)
                return la.solve_triangular(Rfac, z, check_finite=False)

            if (self.check is not None and self.m and rp > o.tol and rp <= o.polish_tol
                    and max(rd, gap, relxs) <= o.tol):
                # near the end the primal residual can stall on roundoff; a
                # correction back onto A(X) = b usually finishes the solve
                done = False
                for Xp in self._polishes(X, Rp, scal, B, msolve):
                    if self.check(Xp, y * self.rowscale, S) <= o.tol:
                        X, status, done = Xp, OPTIMAL, True
                        break
                if done:
                    break

            def direction(pred):
                if o.direction == "nt":
                    return direction_scaled(pred)
                # dX = H + V(A^T dy) with V the block scaling operator
                H = [sc.base(p, r) for sc, p, r in zip(scal, pred, Rd)]

                def assemble(dy):
                    dS = [r - a for r, a in zip(Rd, self.adj(dy))]
                    dX = [_sym(sc.dx(p, ds)) for sc, p, ds in zip(scal, pred, dS)]
                    return dX, dS

                if self.m == 0:
                    dy = np.zeros(0)
                    dX, dS = assemble(dy)
                    return dX, dy, dS
                dy = msolve(Rp - self.op(H))
                dX, dS = assemble(dy)
                # refine against the unreduced equation A(dX) = Rp
                for _ in range(o.refine):
                    r = Rp - self.op(dX)
                    if np.linalg.norm(r) <= 1e-15 * (1 + np.linalg.norm(Rp)):
                        break
                    dy = dy + msolve(r)
                    dX, dS = assemble(dy)
                return dX, dy, dS

            def direction_scaled(pred):
                # everything in the NT-scaled space, where A(dX) = B vec(dXt);
                # avoids the cancellation between the large terms of dX
                def assemble(dy):
                    dS = [r - a for r, a in zip(Rd, self.adj(dy))]
                    dXt = [sc.scaled_dx(p, ds) for sc, p, ds in zip(scal, pred, dS)]
                    return dXt, dS

                def bop(dXt):
                    return B @ np.concatenate([d.ravel() for d in dXt]) if self.m else np.zeros(0)

                dy = np.zeros(self.m)
                dXt, dS = assemble(dy)
                if self.m:
                    for _ in range(1 + o.refine):
                        r = Rp - bop(dXt)
                        if np.linalg.norm(r) <= 1e-15 * (1 + np.linalg.norm(Rp)):
                            break
                        dy = dy + msolve(r)
                        dXt, dS = assemble(dy)
                dX = [_sym(sc.unscale(d)) for sc, d in zip(scal, dXt)]
                return dX, dy, dS

            def steps(dX, dS):
                ap = min([_max_step(sc.LX, d) for sc, d in zip(scal, dX)] + [np.inf])
                ad = min([_max_step(sc.LS, d) for sc, d in zip(scal, dS)] + [np.inf])
                return ap, ad

            dXp, dyp, dSp = direction([None] * len(X))
            ap, ad = steps(dXp, dSp)
            ap1, ad1 = min(1.0, ap), min(1.0, ad)
            xs_aff = sum(np.sum((x + ap1 * dx) * (s_ + ad1 * ds))
                         for x, dx, s_, ds in zip(X, dXp, S, dSp))
            expon = max(1.0, 3.0 * min(ap1, ad1) ** 2)
            sigma = min(1.0, max(0.0, xs_aff / xs) ** expon)
            corr = [sc.corrector(sigma * mu, dx, ds) for sc, dx, ds in zip(scal, dXp, dSp)]
            dX, dy, dS = direction(corr)
            ap, ad = steps(dX, dS)
            gamma = max(o.step_frac_min, 0.9 + 0.09 * min(ap1, ad1))
            ap = min(1.0, gamma * ap)
            ad = min(1.0, gamma * ad)
            if ap < 1e-12 and ad < 1e-12:
                stall += 1
                if stall >= 3:
                    status = NUMERICAL_TROUBLE
                    break
            else:
                stall = 0
            log.debug("steps ap %.3e ad %.3e sigma %.2e", ap, ad, sigma)
            X = [x + ap * d for x, d in zip(X, dX)]
            y = y + ad * dy
            S = [s_ + ad * d for s_, d in zip(S, dS)]
        return X, y * self.rowscale, S, status, it, history


# ---------------------------------------------------------------------------
# reductions


def _gram_structure(problem: SdpProblem):
    """Return per-variable embedding ``(block, row, col, kappa)`` or None."""
    N = problem.nvars
    owner = {}
    for bi, blk in enumerate(problem.blocks):
        if np.any(blk.F0 != 0):
            return None
        s = blk.size
        F = blk.F.tocsc()
        covered = np.zeros((s, s), dtype=bool)
        for j in range(N):
            lo, hi = F.indptr[j], F.indptr[j + 1]
            if lo == hi:
                continue
            if j in owner:
                return None
            idx = F.indices[lo:hi]
            vals = F.data[lo:hi]
            rr, cc = np.divmod(idx, s)
            if len(idx) == 1 and rr[0] == cc[0]:
                a = c = int(rr[0])
            elif len(idx) == 2 and rr[0] == cc[1] and rr[1] == cc[0] and vals[0] == vals[1]:
                a, c = int(min(rr)), int(max(rr))
            else:
                return None
            if vals[0] == 0 or covered[a, c]:
                return None
            covered[a, c] = True
            owner[j] = (bi, a, c, float(vals[0]))
        if not np.all(covered[np.triu_indices(s)]):
            return None
    return owner


def _embed(vec_by_var, owner, sizes):
    """Linear functional on embedded scalars -> symmetric matrices ``G`` with
    ``<G, X> = sum_j g_j X_ac / kappa_j``."""
    mats = [np.zeros((s, s)) for s in sizes]
    for j, (bi, a, c, kap) in owner.items():
        g = vec_by_var[j]
        if a == c:
            mats[bi][a, a] = g / kap
        else:
            mats[bi][a, c] = mats[bi][c, a] = g / (2 * kap)
    return mats


def _orth_rows(E, e, tol):
    """Independent rows of ``E x = e`` via SVD: returns (U_r, E_r, e_r, consistent)."""
    if E.shape[0] == 0:
        return np.zeros((0, 0)), E, e, True
    U, sv, _ = la.svd(E, full_matrices=True, check_finite=False)
    r = int(np.sum(sv > tol * max(sv[0] if sv.size else 0.0, 1.0)))
    Ur = U[:, :r]
    resid = e - Ur @ (Ur.T @ e)
    ok = np.linalg.norm(resid) <= 1e-9 * (1 + np.linalg.norm(e))
    return Ur, Ur.T @ E, Ur.T @ e, ok


def _finish(problem, y, Z, lam, status, it, history, opts, reduction):
    res = residuals(problem, y, Z, lam)
    if status == OPTIMAL and max(res.values()) > opts.tol:
        status = NUMERICAL_TROUBLE
    return SdpSolution(status=status, y=y, Z=Z, lam=lam, primal_obj=problem.objective(y),
                       dual_obj=dual_objective(problem, Z, lam), residuals=res,
                       iterations=it, info={"history": history, "reduction": reduction})


def _solve_gram(problem: SdpProblem, owner, opts: IpmOptions) -> SdpSolution:
    N = problem.nvars
    sizes = [blk.size for blk in problem.blocks]
    emb = np.array(sorted(owner), dtype=int)
    free = np.array([j for j in range(N) if j not in owner], dtype=int)
    A = problem.A.toarray()
    b = problem.b
    Ax, Aw = A[:, emb], A[:, free]
    cx, cw = problem.c[emb], problem.c[free]
    offset = problem.offset
    if free.size:
        Aw_pinv = la.pinv(Aw, check_finite=False)
        # free directions the equalities do not pin down must not move the objective
        if np.linalg.norm(cw - Aw.T @ (Aw_pinv.T @ cw)) > 1e-9 * (1 + np.linalg.norm(cw)):
            return _status_only(problem, UNBOUNDED, "gram")
        Uw, svw, _ = la.svd(Aw, full_matrices=True, check_finite=False)
        rw = int(np.sum(svw > 1e-12 * max(svw[0] if svw.size else 0, 1.0)))
        V = Uw[:, rw:]
        lam_w = Aw_pinv.T @ cw
        g = cx - Ax.T @ lam_w
        offset = offset + float(lam_w @ b)
    else:
        Aw_pinv = np.zeros((0, A.shape[0]))
        V = np.eye(A.shape[0])
        lam_w = np.zeros(A.shape[0])
        g = cx
    E, e = V.T @ Ax, V.T @ b
    Ur, Er, er, ok = _orth_rows(E, e, 1e-12)
    if not ok:
        return _status_only(problem, INFEASIBLE, "gram")
    gfull = np.zeros(N)
    gfull[emb] = g
    C = _embed(gfull, owner, sizes)
    m = Er.shape[0]
    Ablk = [np.zeros((m, s, s)) for s in sizes]
    for row in range(m):
        full = np.zeros(N)
        full[emb] = Er[row]
        for bi, M in enumerate(_embed(full, owner, sizes)):
            Ablk[bi][row] = M

    def unpack(X):
        y = np.zeros(N)
        for j, (bi, a, c, kap) in owner.items():
            y[j] = X[bi][a, c] / kap
        if free.size:
            y[free] = Aw_pinv @ (b - Ax @ y[emb])
        return y

    def lam_of(yt):
        return lam_w + V @ (Ur @ yt)

    def check(X, yt, S):
        return max(residuals(problem, unpack(X), [_sym(s) for s in S], lam_of(yt)).values())

    core = _Core(C, Ablk, er, opts, check)
    X, yt, S, status, it, hist = core.solve()
    status = {"P_INFEASIBLE": INFEASIBLE, "D_INFEASIBLE": UNBOUNDED}.get(status, status)
    return _finish(problem, unpack(X), [_sym(s) for s in S], lam_of(yt), status, it, hist, opts, "gram")


def _solve_lmi(problem: SdpProblem, opts: IpmOptions) -> SdpSolution:
    N = problem.nvars
    A = problem.A.tocsr()
    b = problem.b
    yp = np.zeros(N)
    nnz_rows = np.diff(A.indptr)
    pins = A.shape[0] > 0 and np.all(nnz_rows == 1) and len(set(A.indices)) == A.shape[0]
    if A.shape[0] == 0 or pins:
        pinned = A.indices if A.shape[0] else np.zeros(0, dtype=int)
        if A.shape[0]:
            yp[pinned] = b / A.data
        free = np.setdiff1d(np.arange(N), pinned)
        Nmat = sp.csc_matrix((np.ones(free.size), (free, np.arange(free.size))), shape=(N, free.size))
    else:
        Ad = A.toarray()
        yp = la.lstsq(Ad, b, check_finite=False)[0]
        if np.linalg.norm(Ad @ yp - b) > 1e-9 * (1 + np.linalg.norm(b)):
            return _status_only(problem, INFEASIBLE, "lmi")
        Nmat = sp.csc_matrix(la.null_space(Ad, rcond=1e-12))
    nz = Nmat.shape[1]
    C, Ablk = [], []
    for blk in problem.blocks:
        s = blk.size
        C.append(blk.value(yp))
        Ft = (blk.F @ Nmat)
        Ft = Ft.toarray() if sp.issparse(Ft) else np.asarray(Ft)
        Ablk.append(-Ft.T.reshape(nz, s, s))
    ct = Nmat.T @ problem.c
    At = A.T.toarray() if A.shape[0] else np.zeros((N, 0))

    def lam_of(Z):
        if A.shape[0] == 0:
            return np.zeros(0)
        rhs = problem.c - sum(blk.adjoint(z) for blk, z in zip(problem.blocks, Z))
        return la.lstsq(At, rhs, check_finite=False)[0]

    def check(X, z, S):
        Z = [_sym(x) for x in X]
        return max(residuals(problem, yp + Nmat @ z, Z, lam_of(Z)).values())

    core = _Core(C, Ablk, -ct, opts, check)
    X, z, S, status, it, hist = core.solve()
    status = {"P_INFEASIBLE": UNBOUNDED, "D_INFEASIBLE": INFEASIBLE}.get(status, status)
    Z = [_sym(x) for x in X]
    return _finish(problem, yp + Nmat @ z, Z, lam_of(Z), status, it, hist, opts, "lmi")


def _status_only(problem, status, reduction) -> SdpSolution:
    nan = float("nan")
    return SdpSolution(status=status, y=np.full(problem.nvars, nan),
                       Z=[np.full((b.size, b.size), nan) for b in problem.blocks],
                       lam=np.full(problem.n_eq, nan), primal_obj=nan, dual_obj=nan,
                       residuals={}, iterations=0, info={"reduction": reduction})


def solve_ipm(problem: SdpProblem, opts: IpmOptions | None = None) -> SdpSolution:
    opts = opts or IpmOptions()
    if opts.reduction in ("auto", "gram"):
        owner = _gram_structure(problem)
        if owner is not None:
            return _solve_gram(problem, owner, opts)
        if opts.reduction == "gram":
            raise ValueError("problem blocks are not bare matrix variables")
    return _solve_lmi(problem, opts)
