"""Truncated multi-sequences, the Riesz functional, moment and localizing matrices.

Every matrix here is affine-linear in the moment vector, so each builder
comes in two flavours: a :class:`MomentMap` (the sparse linear operator
``y -> L[y]``, used to assemble relaxations) and a plain function that applies
it to a concrete :class:`Tms`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from pmo import kernels
from pmo.polyalg import PolyMatrix, Polynomial, basis, basis_size


class Tms:
    """Dense truncated multi-sequence ``(y_alpha)_{|alpha| <= order}``.

    Values are stored in graded lex order of ``basis(nvars, order)``.
    """

    __slots__ = ("nvars", "order", "values")

    def __init__(self, nvars: int, order: int, values):
        values = np.array(values, dtype=float).ravel()
        expected = basis_size(nvars, order)
        if values.shape[0] != expected:
            raise ValueError(
                f"tms of order {order} in {nvars} variables needs {expected} values, got {values.shape[0]}")
        self.nvars = nvars
        self.order = order
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def from_dict(cls, nvars: int, order: int, mapping) -> "Tms":
        b = basis(nvars, order)
        vals = np.zeros(len(b))
        for a, v in mapping.items():
            vals[b.index(tuple(a))] = v
        return cls(nvars, order, vals)

    @property
    def half_order(self) -> int:
        return self.order // 2

    def __getitem__(self, alpha) -> float:
        return float(self.values[basis(self.nvars, self.order).index(tuple(alpha))])

    def truncate(self, order: int) -> "Tms":
        if order > self.order:
            raise ValueError(f"cannot truncate order {self.order} tms to order {order}")
        return Tms(self.nvars, order, self.values[:basis_size(self.nvars, order)])

    def first_moments(self) -> np.ndarray:
        """``(y_{e_1}, ..., y_{e_n})``."""
        return np.array(self.values[1:1 + self.nvars])

    def __repr__(self):
        return f"Tms(nvars={self.nvars}, order={self.order})"


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely atomic probability measure ``sum_j w_j delta_{u_j}``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != weights.shape[0]:
            raise ValueError("need one weight per atom")
        if np.any(weights <= 0):
            raise ValueError("atomic weights must be strictly positive")
        if abs(weights.sum() - 1.0) > 1e-8:
            raise ValueError(f"weights sum to {weights.sum()}, expected 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def nvars(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.atoms.shape[0]


def tms_from_atoms(mu: AtomicMeasure, order: int) -> Tms:
    b = basis(mu.nvars, order)
    V = np.prod(mu.atoms[:, None, :] ** b.array[None, :, :], axis=2)  # (atoms, basis)
    return Tms(mu.nvars, order, mu.weights @ V)


def dirac_tms(u, order: int) -> Tms:
    u = np.asarray(u, dtype=float).ravel()
    return tms_from_atoms(AtomicMeasure(u[None, :], np.ones(1)), order)


def riesz(y: Tms, p: Polynomial) -> float:
    if p.nvars != y.nvars:
        raise ValueError("polynomial and tms have different numbers of variables")
    if p.degree > y.order:
        raise ValueError(f"deg(p) = {p.degree} exceeds tms order {y.order}")
    b = basis(y.nvars, y.order)
    return float(sum(c * y.values[b.index(a)] for a, c in p.items()))


@dataclass
class MomentMap:
    """Linear map ``y -> sum_alpha y_alpha * A_alpha`` into ``size x size``
    symmetric matrices; ``coeffs`` has one column per moment index (graded lex)
    and one row per row-major matrix entry."""

    size: int
    nmoments: int
    coeffs: sp.csc_matrix = field(repr=False)

    def __call__(self, y) -> np.ndarray:
        vals = y.values if isinstance(y, Tms) else np.asarray(y, dtype=float)
        if vals.shape[0] < self.nmoments:
            raise ValueError(f"need at least {self.nmoments} moments, got {vals.shape[0]}")
        return (self.coeffs @ vals[:self.nmoments]).reshape(self.size, self.size)

    def matrix_of(self, j: int) -> np.ndarray:
        return self.coeffs[:, j].toarray().reshape(self.size, self.size)


def _scalar_pattern(q: Polynomial, t: int):
    """Upper-triangle triplets of ``L_y(q [x]_t [x]_t^T)``."""
    if q.is_zero():
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty, np.zeros(0)
    exps = np.array(list(q.terms.keys()), dtype=np.int64).reshape(-1, q.nvars)
    coefs = np.array(list(q.terms.values()), dtype=float)
    return kernels.localizing_triplets(basis(q.nvars, t).array, exps, coefs)


def _to_map(size, nmom, rows, cols, var, val) -> MomentMap:
    off = rows != cols
    r = np.concatenate([rows * size + cols, (cols * size + rows)[off]])
    v = np.concatenate([val, val[off]])
    j = np.concatenate([var, var[off]])
    A = sp.csc_matrix((v, (r, j)), shape=(size * size, nmom))
    A.sum_duplicates()
    return MomentMap(size, nmom, A)


def localizing_degree(q: Polynomial, k: int) -> int:
    """``t = k - ceil(deg(q)/2)``."""
    return k - math.ceil(max(q.degree, 0) / 2)


def localizing_scalar_map(q: Polynomial, k: int, t: int | None = None) -> MomentMap:
    t = localizing_degree(q, k) if t is None else t
    if t < 0 or q.degree > 2 * k:
        raise ValueError(f"deg(q) = {q.degree} exceeds 2k = {2 * k}")
    size = basis_size(q.nvars, t)
    return _to_map(size, basis_size(q.nvars, 2 * k), *_scalar_pattern(q, t))


def moment_map(nvars: int, k: int) -> MomentMap:
    return localizing_scalar_map(Polynomial.constant(nvars, 1.0), k)


def localizing_block_map(G: PolyMatrix, k: int) -> MomentMap:
    """Block map of ``L_G^(k)``; every block lives on ``[x]_{k - d_G}``."""
    dG = G.half_degree
    t = k - dG
    if t < 0:
        raise ValueError(f"order k = {k} is below d_G = {dG}")
    s = basis_size(G.nvars, t)
    size = G.m * s
    R, C, V, X = [], [], [], []
    for (i, j), q in G.entries():
        rows, cols, var, val = _scalar_pattern(q, t)
        if i == j:
            R.append(i * s + rows)
            C.append(i * s + cols)
            V.append(var)
            X.append(val)
        else:
            # block (i, j) is the full s x s localizing matrix of q, not just its triangle
            full_r = np.concatenate([rows, cols[rows != cols]])
            full_c = np.concatenate([cols, rows[rows != cols]])
            full_v = np.concatenate([var, var[rows != cols]])
            full_x = np.concatenate([val, val[rows != cols]])
            R.append(i * s + full_r)
            C.append(j * s + full_c)
            V.append(full_v)
            X.append(full_x)
    cat = (lambda L, dt: np.concatenate(L) if L else np.zeros(0, dtype=dt))
    return _to_map(size, basis_size(G.nvars, 2 * k), cat(R, np.int64), cat(C, np.int64),
                   cat(V, np.int64), cat(X, float))


def _check_order(y: Tms, k: int):
    if y.order < 2 * k:
        raise ValueError(f"tms of order {y.order} is too short for k = {k}")


def moment_matrix(y: Tms, k: int) -> np.ndarray:
    _check_order(y, k)
    return moment_map(y.nvars, k)(y)


def localizing_scalar(y: Tms, q: Polynomial, k: int) -> np.ndarray:
    _check_order(y, k)
    return localizing_scalar_map(q, k)(y)


def localizing_block(y: Tms, G: PolyMatrix, k: int) -> np.ndarray:
    _check_order(y, k)
    return localizing_block_map(G, k)(y)
