"""Driver for the matrix Moment-SOS hierarchy.

Orders ``k = k_min, k_min + 1, ...`` are solved in turn. After each moment
solve the optimal ``y*`` is scanned for a flat truncation; when one is found
the atoms of the representing measure are extracted and validated, and the
loop stops.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.linalg as la

from pmo.moment import AtomicMeasure, Tms, moment_matrix
from pmo.polyalg import PolyMatrix, Polynomial, basis, basis_size, eval_matrix
from pmo.sdp import (OPTIMAL, QmCertificate, SolveOptions, assemble_moment_relaxation,
                     assemble_sos_relaxation, min_order, solve)
from pmo.sdp.relax import _psd_clip, default_cert_tol, sos_grams

log = logging.getLogger(__name__)


class ExtractionFailed(Exception):
    """The flat moment vector is not matched by the atoms that were read off it."""


@dataclass
class HierarchyOptions:
    k_min: Optional[int] = None
    k_max: int = 6
    tol: float = 1e-8
    rank_tol: float = 1e-6
    gap_ratio: float = 100.0
    feas_tol: float = 1e-6
    val_tol: Optional[float] = None  # default max(1e-6, 1e-6 |f_mom|)
    atom_tol: float = 1e-6
    seed: int = 0
    backend: Optional[str] = None
    sos: bool = True

    def solve_options(self) -> SolveOptions:
        return SolveOptions(tol=self.tol, backend=self.backend)

    def value_tol(self, value: float) -> float:
        if self.val_tol is not None:
            return self.val_tol
        return max(1e-6, 1e-6 * abs(value))


@dataclass
class FlatTruncation:
    t: int
    rank_t: int
    rank_low: int
    dG: int
    sv_t: np.ndarray = field(repr=False)
    sv_low: np.ndarray = field(repr=False)

    @property
    def rank(self) -> int:
        return self.rank_t

    def to_json(self) -> dict:
        return {"t": self.t, "rank_t": self.rank_t, "rank_low": self.rank_low, "dG": self.dG,
                "sv_t": [float(v) for v in self.sv_t], "sv_low": [float(v) for v in self.sv_low]}


@dataclass
class OrderResult:
    k: int
    mom: float
    y: Optional[Tms]
    sos: Optional[float]
    certificate: Optional[QmCertificate]
    mom_status: str
    sos_status: Optional[str] = None
    residuals: dict = field(default_factory=dict, repr=False)
    sos_residuals: dict = field(default_factory=dict, repr=False)

    @property
    def status(self) -> str:
        return self.mom_status


@dataclass
class HierarchyResult:
    orders: List[OrderResult]
    converged: bool
    flat: Optional[FlatTruncation] = None
    measure: Optional[AtomicMeasure] = None
    certificate: Optional[QmCertificate] = None
    message: str = ""

    @property
    def value(self) -> float:
        """Moment bound at the stopping (or last) order."""
        good = [o for o in self.orders if o.mom_status == OPTIMAL]
        return good[-1].mom if good else float("nan")

    @property
    def bounds(self):
        return [(o.k, o.mom, o.sos) for o in self.orders]

    @property
    def minimizers(self) -> np.ndarray:
        return self.measure.atoms if self.measure is not None else np.zeros((0, 0))


# ---------------------------------------------------------------------------


def solve_order(f: Polynomial, G: PolyMatrix, k: int, opts: HierarchyOptions | None = None) -> OrderResult:
    """Solve the order-``k`` moment and SOS relaxations."""
    opts = opts or HierarchyOptions()
    if k < min_order(f, G):
        raise ValueError(f"order {k} is below the minimal order {min_order(f, G)}")
    so = opts.solve_options()
    msol = solve(assemble_moment_relaxation(f, G, k), so)
    y = None
    if np.all(np.isfinite(msol.y)):
        y = Tms(f.nvars, 2 * k, msol.y)
    rec = OrderResult(k, float(msol.primal_obj), y, None, None, msol.status, residuals=msol.residuals)
    if not opts.sos:
        return rec
    sprob = assemble_sos_relaxation(f, G, k)
    ssol = solve(sprob, so)
    rec.sos_status = ssol.status
    rec.sos_residuals = ssol.residuals
    if ssol.status == OPTIMAL:
        rec.sos = -float(ssol.primal_obj)
        Q0, Q1 = sos_grams(sprob, ssol.y)
        cert = QmCertificate(k, rec.sos, _psd_clip(Q0), _psd_clip(Q1), G.half_degree,
                             info={"source": "sos relaxation", "sdp": ssol.residuals})
        cert.residual = cert.check(f, G)
        if cert.residual <= default_cert_tol(f):
            rec.certificate = cert
    return rec


def numerical_rank(M: np.ndarray, rank_tol: float = 1e-6, gap_ratio: float = 100.0):
    """``(rank, singular values)``; rank is ``None`` when there is no clear gap."""
    sv = la.svdvals(M) if M.size else np.zeros(0)
    if sv.size == 0 or sv[0] <= 0:
        return 0, sv
    r = int(np.sum(sv >= rank_tol * sv[0]))
    if r < sv.size and sv[r - 1] < gap_ratio * sv[r]:
        return None, sv
    return r, sv


def check_flat_truncation(y: Tms, k: int, dG: int, rank_tol: float = 1e-6,
                          gap_ratio: float = 100.0) -> FlatTruncation | None:
    """Smallest ``t`` in ``[d, k]`` with ``rank M_t = rank M_{t-d}``, ``d = max(d_G, 1)``."""
    if y.order < 2 * k:
        raise ValueError(f"tms of order {y.order} is too short for k = {k}")
    d = max(dG, 1)
    cache = {}

    def rank(t):
        if t not in cache:
            cache[t] = numerical_rank(moment_matrix(y, t), rank_tol, gap_ratio)
        return cache[t]

    for t in range(d, k + 1):
        rt, svt = rank(t)
        rl, svl = rank(t - d)
        if rt is None or rl is None:
            continue
        if rt == rl and rt > 0:
            return FlatTruncation(t, rt, rl, dG, svt, svl)
    return None


def extract_atoms(y: Tms, flat: FlatTruncation, seed: int = 0, atom_tol: float = 1e-6) -> AtomicMeasure:
    """Atoms and weights of the measure behind a flat ``y``.

    ``M_t = V V^T``; pivot monomials of degree ``<= t - d`` are chosen by a
    pivoted QR, every row of ``V`` is written in the pivot rows, and the
    multiplication matrices ``N_i`` are read off. A random combination of
    them is put in real Schur form; its orthogonal vectors diagonalize every
    ``N_i`` simultaneously and give the atom coordinates.
    """
    n, t, r = y.nvars, flat.t, flat.rank_t
    d = max(flat.dG, 1)
    M = moment_matrix(y, t)
    w, U = np.linalg.eigh(M)
    order = np.argsort(w)[::-1][:r]
    if np.any(w[order] <= 0):
        raise ExtractionFailed("moment matrix has nonpositive leading eigenvalues")
    V = U[:, order] * np.sqrt(w[order])
    bt = basis(n, t)
    nlow = basis_size(n, t - d)
    _, _, piv = la.qr(V[:nlow].T, pivoting=True, mode="economic")
    piv = np.sort(piv[:r])
    try:
        W = la.solve(V[piv].T, V.T).T  # rows of V in the pivot basis
    except la.LinAlgError as e:
        raise ExtractionFailed(f"singular pivot block: {e}") from None
    Ns = []
    for i in range(n):
        rows = []
        for p in piv:
            alpha = list(bt[p])
            alpha[i] += 1
            rows.append(W[bt.index(tuple(alpha))])
        Ns.append(np.array(rows))
    rng = np.random.default_rng(seed)
    c = rng.random(n)
    c /= c.sum()
    N = sum(ci * Ni for ci, Ni in zip(c, Ns))
    _, Q = la.schur(N, output="real")
    atoms = np.array([[Q[:, j] @ Ni @ Q[:, j] for Ni in Ns] for j in range(r)])
    # weights from the moments of degree <= 2t
    b2 = basis(n, 2 * t)
    Vand = np.prod(atoms[:, None, :] ** b2.array[None, :, :], axis=2).T
    target = y.values[:len(b2)]
    wts, *_ = la.lstsq(Vand, target)
    resid = np.max(np.abs(Vand @ wts - target)) / (1.0 + np.max(np.abs(target)))
    if resid > atom_tol:
        raise ExtractionFailed(f"moment match residual {resid:.3e} exceeds {atom_tol:.1e}")
    if np.any(wts <= 0):
        raise ExtractionFailed(f"nonpositive weights {wts}")
    order = np.lexsort(atoms.T[::-1])
    return AtomicMeasure(atoms[order], wts[order] / wts.sum())


def _validate(f, G, mu: AtomicMeasure, value: float, opts: HierarchyOptions):
    for u in mu.atoms:
        lmin = np.linalg.eigvalsh(eval_matrix(G, u))[0]
        if lmin < -opts.feas_tol:
            return f"atom {u} is infeasible (lambda_min {lmin:.2e})"
        gap = abs(f(u) - value)
        if gap > opts.value_tol(value):
            return f"atom {u} has f = {f(u):.10g}, bound {value:.10g}"
    return ""


def run(f: Polynomial, G: PolyMatrix, opts: HierarchyOptions | None = None) -> HierarchyResult:
    opts = opts or HierarchyOptions()
    k0 = min_order(f, G) if opts.k_min is None else max(opts.k_min, min_order(f, G))
    orders: List[OrderResult] = []
    notes = []
    for k in range(k0, opts.k_max + 1):
        rec = solve_order(f, G, k, opts)
        orders.append(rec)
        log.info("order %d: mom %s (%s) sos %s (%s)", k, rec.mom, rec.mom_status, rec.sos, rec.sos_status)
        if rec.mom_status != OPTIMAL or rec.y is None:
            notes.append(f"k={k}: moment relaxation {rec.mom_status}")
            continue
        flat = check_flat_truncation(rec.y, k, G.half_degree, opts.rank_tol, opts.gap_ratio)
        if flat is None:
            continue
        try:
            mu = extract_atoms(rec.y, flat, opts.seed, opts.atom_tol)
        except ExtractionFailed as e:
            notes.append(f"k={k}: flat at t={flat.t} but extraction failed ({e})")
            continue
        bad = _validate(f, G, mu, rec.mom, opts)
        if bad:
            notes.append(f"k={k}: {bad}")
            continue
        if rec.sos is not None and abs(rec.sos - rec.mom) > opts.value_tol(rec.mom):
            # flat, but the SOS side has not caught up: keep going
            notes.append(f"k={k}: flat but sos {rec.sos:.10g} != mom {rec.mom:.10g}")
            continue
        if rec.sos is None and opts.sos:
            notes.append(f"k={k}: sos relaxation {rec.sos_status}; value certified by flatness only")
        return HierarchyResult(orders, True, flat, mu, rec.certificate, "; ".join(notes))
    notes.append(f"no flat truncation through k = {opts.k_max}")
    last = orders[-1] if orders else None
    return HierarchyResult(orders, False, None, None, last.certificate if last else None, "; ".join(notes))
