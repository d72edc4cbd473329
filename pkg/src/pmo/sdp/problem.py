"""Canonical conic form shared by every relaxation and every backend.

    minimize    c^T y + offset
    subject to  F0_b + sum_j y_j F_j^b  PSD   for every block b
                A y = b

Dual multipliers are one PSD matrix ``Z_b`` per block and a vector ``lam``
for the equalities, so that at optimality
``c = sum_b <F_j^b, Z_b> + A^T lam`` and the dual objective is
``b^T lam - sum_b <F0_b, Z_b> + offset``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import scipy.sparse as sp

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITER = "MaxIter"
NUMERICAL_TROUBLE = "NumericalTrouble"
STATUSES = (OPTIMAL, INFEASIBLE, UNBOUNDED, MAX_ITER, NUMERICAL_TROUBLE)


@dataclass
class PsdBlock:
    """``F0 + sum_j y_j F_j`` as a dense ``F0`` and a sparse ``(size*size, nvars)``
    operator whose column ``j`` is ``F_j`` flattened row-major."""

    size: int
    F0: np.ndarray
    F: sp.csc_matrix = field(repr=False)

    def __post_init__(self):
        self.F0 = np.asarray(self.F0, dtype=float).reshape(self.size, self.size)
        self.F = sp.csc_matrix(self.F)
        if self.F.shape[0] != self.size * self.size:
            raise ValueError("block operator has wrong number of rows")

    def value(self, y) -> np.ndarray:
        S = self.F0 + (self.F @ np.asarray(y, dtype=float)).reshape(self.size, self.size)
        return 0.5 * (S + S.T)

    def adjoint(self, Z) -> np.ndarray:
        """``(<F_j, Z>)_j``."""
        return self.F.T @ np.asarray(Z, dtype=float).ravel()

    def check_symmetric(self, tol=1e-12):
        if np.abs(self.F0 - self.F0.T).max(initial=0.0) > tol:
            return False
        n = self.size
        perm = (np.arange(n * n).reshape(n, n).T).ravel()
        diff = self.F - self.F[perm, :]
        return diff.count_nonzero() == 0 or np.abs(diff.data).max() <= tol


@dataclass
class SdpProblem:
    nvars: int
    c: np.ndarray
    blocks: List[PsdBlock]
    A: Optional[sp.csr_matrix] = None
    b: Optional[np.ndarray] = None
    offset: float = 0.0
    meta: Dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        if self.c.shape[0] != self.nvars:
            raise ValueError("objective length does not match nvars")
        if self.A is None:
            self.A = sp.csr_matrix((0, self.nvars))
            self.b = np.zeros(0)
        self.A = sp.csr_matrix(self.A)
        self.b = np.asarray(self.b, dtype=float).ravel()
        if self.A.shape != (self.b.shape[0], self.nvars):
            raise ValueError("equality data has inconsistent shape")
        for blk in self.blocks:
            if blk.F.shape[1] != self.nvars:
                raise ValueError("block operator has wrong number of columns")
            if not blk.check_symmetric():
                raise ValueError("block matrices must be symmetric")

    @property
    def n_eq(self) -> int:
        return self.A.shape[0]

    def objective(self, y) -> float:
        return float(self.c @ y + self.offset)

    # JSON ---------------------------------------------------------------

    def to_json(self) -> dict:
        blocks = []
        for blk in self.blocks:
            r, cidx = np.triu_indices(blk.size)
            keep = blk.F0[r, cidx] != 0
            F0 = [[int(i), int(j), float(blk.F0[i, j])] for i, j in zip(r[keep], cidx[keep])]
            coo = blk.F.tocoo()
            rows, cols = np.divmod(coo.row, blk.size)
            upper = rows <= cols
            Fj = sorted([int(j), int(i), int(k), float(v)]
                        for j, i, k, v in zip(coo.col[upper], rows[upper], cols[upper], coo.data[upper])
                        if v != 0)
            blocks.append({"size": blk.size, "F0": F0, "Fj": Fj})
        A = self.A.tocoo()
        return {
            "vars": self.nvars,
            "objective": [float(v) for v in self.c],
            "offset": float(self.offset),
            "psd_blocks": blocks,
            "eq": {"rows": int(self.n_eq),
                   "A": sorted([int(i), int(j), float(v)] for i, j, v in zip(A.row, A.col, A.data) if v != 0),
                   "b": [float(v) for v in self.b]},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, data: dict) -> "SdpProblem":
        from pmo.schemas import validate
        validate(data, "sdp_problem")
        N = int(data["vars"])
        blocks = []
        for bd in data["psd_blocks"]:
            s = int(bd["size"])
            F0 = np.zeros((s, s))
            for i, j, v in bd["F0"]:
                F0[i, j] = F0[j, i] = v
            rows, cols, vals = [], [], []
            for j, i, k, v in bd["Fj"]:
                rows.append(i * s + k)
                cols.append(j)
                vals.append(v)
                if i != k:
                    rows.append(k * s + i)
                    cols.append(j)
                    vals.append(v)
            F = sp.csc_matrix((vals, (rows, cols)), shape=(s * s, N))
            blocks.append(PsdBlock(s, F0, F))
        eq = data.get("eq") or {"rows": 0, "A": [], "b": []}
        p = int(eq.get("rows", len(eq["b"])))
        if eq["A"]:
            i, j, v = zip(*eq["A"])
            A = sp.csr_matrix((v, (i, j)), shape=(p, N))
        else:
            A = sp.csr_matrix((p, N))
        return cls(N, np.asarray(data["objective"], dtype=float), blocks, A,
                   np.asarray(eq["b"], dtype=float), float(data.get("offset", 0.0)))

    @classmethod
    def loads(cls, text: str) -> "SdpProblem":
        return cls.from_json(json.loads(text))


@dataclass
class SdpSolution:
    status: str
    y: np.ndarray
    Z: List[np.ndarray]
    lam: np.ndarray
    primal_obj: float
    dual_obj: float
    residuals: Dict[str, float]
    iterations: int = 0
    info: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else float("inf")


def _psd_violation(M: np.ndarray) -> float:
    if M.size == 0:
        return 0.0
    lmin = np.linalg.eigvalsh(0.5 * (M + M.T))[0]
    return max(0.0, -lmin) / (1.0 + np.linalg.norm(M))


def residuals(problem: SdpProblem, y, Z, lam) -> Dict[str, float]:
    """KKT residuals of a candidate primal-dual pair, all relative.

    ``primal_eq``   ||Ay - b|| / (1 + ||b||)
    ``primal_psd``  max_b  max(0, -lmin(S_b)) / (1 + ||S_b||)
    ``dual_eq``     ||c - sum_b F_b^*(Z_b) - A^T lam|| / (1 + ||c||)
    ``dual_psd``    max_b  max(0, -lmin(Z_b)) / (1 + ||Z_b||)
    ``gap``         |pobj - dobj| / (1 + |pobj| + |dobj|)
    ``compl``       sum_b <S_b, Z_b> / (1 + |pobj| + |dobj|)
    """
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    r_eq = np.linalg.norm(problem.A @ y - problem.b) / (1.0 + np.linalg.norm(problem.b))
    r_psd = 0.0
    r_dpsd = 0.0
    grad = problem.c - problem.A.T @ lam
    compl = 0.0
    dobj = float(problem.b @ lam) + problem.offset
    for blk, Zb in zip(problem.blocks, Z):
        S = blk.value(y)
        r_psd = max(r_psd, _psd_violation(S))
        r_dpsd = max(r_dpsd, _psd_violation(Zb))
        grad = grad - blk.adjoint(Zb)
        compl += float(np.sum(S * Zb))
        dobj -= float(np.sum(blk.F0 * Zb))
    pobj = problem.objective(y)
    denom = 1.0 + abs(pobj) + abs(dobj)
    return {
        "primal_eq": float(r_eq),
        "primal_psd": float(r_psd),
        "dual_eq": float(np.linalg.norm(grad) / (1.0 + np.linalg.norm(problem.c))),
        "dual_psd": float(r_dpsd),
        "gap": float(abs(pobj - dobj) / denom),
        "compl": float(abs(compl) / denom),
    }


def dual_objective(problem: SdpProblem, Z, lam) -> float:
    val = float(problem.b @ lam) + problem.offset
    for blk, Zb in zip(problem.blocks, Z):
        val -= float(np.sum(blk.F0 * Zb))
    return val
