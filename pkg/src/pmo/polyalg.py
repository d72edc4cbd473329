"""Sparse multivariate polynomials and symmetric polynomial matrices.

Monomials are plain tuples of nonnegative exponents. Everything that
enumerates monomials uses graded lexicographic order: lower total degree
first, and within one degree ``x1`` dominates ``x2`` dominates ... so the
degree-``d`` prefix of any basis is itself a basis.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Dict, Iterable, Mapping, Sequence, Tuple

import numpy as np

Monomial = Tuple[int, ...]

# drop |c| < PRUNE_REL * max|coeff| after floating arithmetic
PRUNE_REL = 1e-12
MAX_DET_SIZE = 8


def degree(alpha: Monomial) -> int:
    return sum(alpha)


def grlex_key(alpha: Monomial):
    return (sum(alpha), tuple(-a for a in alpha))


def _compositions(total: int, parts: int):
    """Exponent vectors of one total degree, in descending lex order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def monomials_upto(n: int, d: int) -> list[Monomial]:
    out: list[Monomial] = []
    for t in range(d + 1):
        out.extend(_compositions(t, n))
    return out


class MonomialBasis:
    """All exponent vectors with ``|alpha| <= d`` in graded lex order."""

    __slots__ = ("n", "d", "monomials", "_index", "_array")

    def __init__(self, n: int, d: int):
        if n < 0 or d < 0:
            raise ValueError("MonomialBasis needs n >= 0 and d >= 0")
        self.n = n
        self.d = d
        self.monomials = tuple(monomials_upto(n, d)) if n > 0 else ((),)
        self._index = {a: i for i, a in enumerate(self.monomials)}
        self._array = None

    def __len__(self):
        return len(self.monomials)

    def __iter__(self):
        return iter(self.monomials)

    def __getitem__(self, i):
        return self.monomials[i]

    def index(self, alpha: Monomial) -> int:
        return self._index[tuple(alpha)]

    def __contains__(self, alpha) -> bool:
        return tuple(alpha) in self._index

    @property
    def array(self) -> np.ndarray:
        """Exponents as an ``(len, n)`` int64 array (cached)."""
        if self._array is None:
            arr = np.array(self.monomials, dtype=np.int64).reshape(len(self), self.n)
            arr.setflags(write=False)
            self._array = arr
        return self._array

    def evaluate(self, u) -> np.ndarray:
        """The monomial vector ``[u]_d``."""
        u = np.asarray(u, dtype=float)
        if self.n == 0:
            return np.ones(1)
        return np.prod(u[None, :] ** self.array, axis=1)

    def __repr__(self):
        return f"MonomialBasis(n={self.n}, d={self.d}, size={len(self)})"


@lru_cache(maxsize=256)
def basis(n: int, d: int) -> MonomialBasis:
    return MonomialBasis(n, d)


def basis_size(n: int, d: int) -> int:
    if d < 0:
        return 0
    return math.comb(n + d, d)


def grlex_rank(alpha: Sequence[int]) -> int:
    """Position of ``alpha`` in the graded lex enumeration of all monomials."""
    n = len(alpha)
    d = sum(alpha)
    if n == 0:
        return 0
    rank = math.comb(n + d - 1, n) if d > 0 else 0
    rem = d
    for i in range(n - 1):
        k = n - i - 1  # variables after position i
        for a in range(alpha[i] + 1, rem + 1):
            rank += math.comb(rem - a + k - 1, k - 1)
        rem -= alpha[i]
    return rank


def _prune(terms: Dict[Monomial, float]) -> Dict[Monomial, float]:
    if not terms:
        return terms
    scale = max(abs(c) for c in terms.values())
    if scale == 0.0:
        return {}
    cut = PRUNE_REL * scale
    return {a: c for a, c in terms.items() if abs(c) >= cut}


class Polynomial:
    """Real polynomial in ``nvars`` variables stored as ``{exponents: coeff}``.

    Instances are treated as immutable; arithmetic always returns new objects.
    """

    __slots__ = ("nvars", "_terms")

    def __init__(self, nvars: int, terms: Mapping[Sequence[int], float] | None = None):
        self.nvars = int(nvars)
        clean: Dict[Monomial, float] = {}
        for alpha, c in (terms or {}).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.nvars:
                raise ValueError(
                    f"exponent {alpha} has length {len(alpha)}, expected {self.nvars}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        self._terms = {a: c for a, c in clean.items() if c != 0.0}

    @classmethod
    def _raw(cls, nvars: int, terms: Dict[Monomial, float]) -> "Polynomial":
        p = object.__new__(cls)
        p.nvars = nvars
        p._terms = terms
        return p

    @classmethod
    def constant(cls, nvars: int, c: float) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls._raw(nvars, {})

    @classmethod
    def var(cls, nvars: int, i: int) -> "Polynomial":
        """The coordinate ``x_{i+1}`` (``i`` is 0-based)."""
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, {tuple(alpha): 1.0})

    @classmethod
    def variables(cls, nvars: int) -> list["Polynomial"]:
        return [cls.var(nvars, i) for i in range(nvars)]

    @classmethod
    def from_coeffs(cls, nvars: int, coeffs, d: int) -> "Polynomial":
        """Inverse of :meth:`coeff_vector` on ``basis(nvars, d)``."""
        b = basis(nvars, d)
        return cls(nvars, {a: c for a, c in zip(b, coeffs)})

    @property
    def terms(self) -> Dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        if not self._terms:
            return -1
        return max(sum(a) for a in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coeff_vector(self, d: int | None = None) -> np.ndarray:
        d = self.degree if d is None else d
        b = basis(self.nvars, max(d, 0))
        v = np.zeros(len(b))
        for a, c in self._terms.items():
            if sum(a) > d:
                raise ValueError(f"polynomial of degree {self.degree} does not fit degree {d}")
            v[b.index(a)] = c
        return v

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    # arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"nvars mismatch: {self.nvars} vs {other.nvars}")
            return other
        if isinstance(other, (int, float, np.integer, np.floating)):
            return Polynomial.constant(self.nvars, float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for a, c in other._terms.items():
            out[a] = out.get(a, 0.0) + c
        return Polynomial._raw(self.nvars, _prune({a: c for a, c in out.items() if c != 0.0}))

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw(self.nvars, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.integer, np.floating)):
            s = float(other)
            if s == 0.0:
                return Polynomial.zero(self.nvars)
            return Polynomial._raw(self.nvars, {a: s * c for a, c in self._terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        from pmo import kernels
        return Polynomial._raw(self.nvars, _prune(kernels.poly_mul(self._terms, other._terms)))

    __rmul__ = __mul__

    def __truediv__(self, s):
        if not isinstance(s, (int, float, np.integer, np.floating)):
            return NotImplemented
        return self * (1.0 / float(s))

    def __pow__(self, e: int):
        if not isinstance(e, (int, np.integer)) or e < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = Polynomial.constant(self.nvars, 1.0)
        base = self
        while e:
            if e & 1:
                out = out * base
            base = base * base if e > 1 else base
            e >>= 1
        return out

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.nvars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.nvars == other.nvars and self._terms == other._terms

    def __hash__(self):
        return hash((self.nvars, frozenset(self._terms.items())))

    def allclose(self, other: "Polynomial", atol=1e-10) -> bool:
        return (self - other).max_abs_coeff() <= atol

    # calculus and evaluation --------------------------------------------

    def __call__(self, u) -> float:
        return eval_poly(self, u)

    def diff(self, i: int) -> "Polynomial":
        if not 0 <= i < self.nvars:
            raise IndexError(f"variable index {i} out of range for {self.nvars} variables")
        out: Dict[Monomial, float] = {}
        for a, c in self._terms.items():
            if a[i] == 0:
                continue
            b = a[:i] + (a[i] - 1,) + a[i + 1:]
            out[b] = out.get(b, 0.0) + c * a[i]
        return Polynomial._raw(self.nvars, out)

    def substitute_shift(self, offset: int, nvars: int) -> "Polynomial":
        """Embed into ``nvars`` variables, occupying positions offset..offset+n-1."""
        out = {}
        for a, c in self._terms.items():
            b = [0] * nvars
            b[offset:offset + self.nvars] = a
            out[tuple(b)] = c
        return Polynomial._raw(nvars, out)

    def __repr__(self):
        if not self._terms:
            return f"Polynomial({self.nvars}, 0)"
        parts = []
        for a in sorted(self._terms, key=grlex_key):
            c = self._terms[a]
            mono = "*".join(
                f"x{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(a) if e)
            parts.append(f"{c:+g}" + (f"*{mono}" if mono else ""))
        return f"Polynomial({self.nvars}, {' '.join(parts)})"


def eval_poly(p: Polynomial, u) -> float:
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != p.nvars:
        raise ValueError(f"point has dimension {u.shape[0]}, polynomial has {p.nvars} variables")
    if not p._terms:
        return 0.0
    exps = np.fromiter(itertools.chain.from_iterable(p._terms), dtype=np.int64,
                       count=len(p._terms) * p.nvars).reshape(len(p._terms), p.nvars)
    coefs = np.fromiter(p._terms.values(), dtype=float, count=len(p._terms))
    if p.nvars == 0:
        return float(coefs.sum())
    return float(coefs @ np.prod(u[None, :] ** exps, axis=1))


def gradient(p: Polynomial) -> list[Polynomial]:
    return [p.diff(i) for i in range(p.nvars)]


def hessian(p: Polynomial) -> "PolyMatrix":
    g = gradient(p)
    entries = {}
    for i in range(p.nvars):
        for j in range(i, p.nvars):
            entries[(i, j)] = g[i].diff(j)
    return PolyMatrix(p.nvars, p.nvars, entries)


class PolyMatrix:
    """Symmetric ``m x m`` matrix of polynomials; only ``i <= j`` is stored.

    Indices are 0-based. Missing entries are zero.
    """

    __slots__ = ("nvars", "m", "_entries")

    def __init__(self, nvars: int, m: int, entries: Mapping[Tuple[int, int], Polynomial] | None = None):
        self.nvars = int(nvars)
        self.m = int(m)
        self._entries: Dict[Tuple[int, int], Polynomial] = {}
        for (i, j), p in (entries or {}).items():
            if not (0 <= i < m and 0 <= j < m):
                raise IndexError(f"entry ({i}, {j}) outside a {m}x{m} matrix")
            if i > j:
                i, j = j, i
            if isinstance(p, (int, float)):
                p = Polynomial.constant(nvars, p)
            if p.nvars != nvars:
                raise ValueError("entry has wrong number of variables")
            if (i, j) in self._entries:
                raise ValueError(f"duplicate entry ({i}, {j})")
            if not p.is_zero():
                self._entries[(i, j)] = p

    @classmethod
    def from_rows(cls, nvars: int, rows: Sequence[Sequence]) -> "PolyMatrix":
        """Build from a full nested list; the upper triangle is used and
        symmetry is checked."""
        m = len(rows)
        entries = {}
        for i in range(m):
            for j in range(m):
                a = rows[i][j]
                a = Polynomial.constant(nvars, a) if isinstance(a, (int, float)) else a
                if j >= i:
                    entries[(i, j)] = a
                else:
                    b = rows[j][i]
                    b = Polynomial.constant(nvars, b) if isinstance(b, (int, float)) else b
                    if not a.allclose(b, 0.0):
                        raise ValueError(f"matrix is not symmetric at ({i}, {j})")
        return cls(nvars, m, entries)

    @classmethod
    def diag(cls, polys: Sequence[Polynomial]) -> "PolyMatrix":
        nvars = polys[0].nvars
        return cls(nvars, len(polys), {(i, i): p for i, p in enumerate(polys)})

    @classmethod
    def identity(cls, nvars: int, m: int, scale: Polynomial | float = 1.0) -> "PolyMatrix":
        if isinstance(scale, (int, float)):
            scale = Polynomial.constant(nvars, scale)
        return cls(nvars, m, {(i, i): scale for i in range(m)})

    def __getitem__(self, ij) -> Polynomial:
        i, j = ij
        if not (0 <= i < self.m and 0 <= j < self.m):
            raise IndexError(f"entry ({i}, {j}) outside a {self.m}x{self.m} matrix")
        if i > j:
            i, j = j, i
        return self._entries.get((i, j)) or Polynomial.zero(self.nvars)

    def entries(self):
        """Nonzero upper-triangle entries as ``((i, j), poly)`` pairs."""
        return self._entries.items()

    def rows(self) -> list[list[Polynomial]]:
        return [[self[i, j] for j in range(self.m)] for i in range(self.m)]

    @property
    def degree(self) -> int:
        return max((p.degree for p in self._entries.values()), default=-1)

    @property
    def half_degree(self) -> int:
        """``d_G = max ceil(deg(G_ij) / 2)``."""
        return max((math.ceil(p.degree / 2) for p in self._entries.values()), default=0)

    def map(self, fn) -> "PolyMatrix":
        return PolyMatrix(self.nvars, self.m, {ij: fn(p) for ij, p in self._entries.items()})

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        keys = set(self._entries) | set(other._entries)
        return PolyMatrix(self.nvars, self.m, {k: self[k] + other[k] for k in keys})

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        keys = set(self._entries) | set(other._entries)
        return PolyMatrix(self.nvars, self.m, {k: self[k] - other[k] for k in keys})

    def scale(self, p: Polynomial | float) -> "PolyMatrix":
        return self.map(lambda q: q * p)

    def submatrix(self, rows: Sequence[int]) -> "PolyMatrix":
        """Principal submatrix on ``rows`` (in the given order)."""
        entries = {}
        for a, i in enumerate(rows):
            for b in range(a, len(rows)):
                entries[(a, b)] = self[i, rows[b]]
        return PolyMatrix(self.nvars, len(rows), entries)

    def is_zero(self) -> bool:
        return not self._entries

    def allclose(self, other: "PolyMatrix", atol=1e-10) -> bool:
        if self.m != other.m:
            return False
        return all((self[i, j] - other[i, j]).max_abs_coeff() <= atol
                   for i in range(self.m) for j in range(i, self.m))

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.m == other.m and self.nvars == other.nvars and self._entries == other._entries

    def __call__(self, u) -> np.ndarray:
        return eval_matrix(self, u)

    def __repr__(self):
        return f"PolyMatrix(nvars={self.nvars}, m={self.m}, nnz={len(self._entries)})"


def eval_matrix(G: PolyMatrix, u) -> np.ndarray:
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != G.nvars:
        raise ValueError(f"point has dimension {u.shape[0]}, matrix has {G.nvars} variables")
    out = np.zeros((G.m, G.m))
    for (i, j), p in G.entries():
        out[i, j] = out[j, i] = eval_poly(p, u)
    return out


def partial_matrix(G: PolyMatrix, i: int) -> PolyMatrix:
    """Entrywise derivative with respect to ``x_{i+1}`` (0-based ``i``)."""
    if not 0 <= i < G.nvars:
        raise IndexError(f"variable index {i} out of range for {G.nvars} variables")
    return G.map(lambda p: p.diff(i))


def _partials_at(G: PolyMatrix, u) -> np.ndarray:
    return np.stack([eval_matrix(partial_matrix(G, i), u) for i in range(G.nvars)]) \
        if G.nvars else np.zeros((0, G.m, G.m))


def grad_apply(G: PolyMatrix, u, d) -> np.ndarray:
    """The directional derivative ``sum_i d_i dG/dx_i (u)``."""
    d = np.asarray(d, dtype=float).ravel()
    if d.shape[0] != G.nvars:
        raise ValueError(f"direction has dimension {d.shape[0]}, expected {G.nvars}")
    return np.tensordot(d, _partials_at(G, u), axes=1)


def grad_adjoint(G: PolyMatrix, u, X) -> np.ndarray:
    """Adjoint of :func:`grad_apply`: ``(<dG/dx_i (u), X>)_i``."""
    X = np.asarray(X, dtype=float)
    if X.shape != (G.m, G.m):
        raise ValueError(f"X has shape {X.shape}, expected {(G.m, G.m)}")
    return np.einsum("ijk,jk->i", _partials_at(G, u), X)


# determinants -------------------------------------------------------------

def _det_rows(rows: list[list[Polynomial]], nvars: int) -> Polynomial:
    k = len(rows)
    if k == 0:
        return Polynomial.constant(nvars, 1.0)
    if k == 1:
        return rows[0][0]
    if k == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = Polynomial.zero(nvars)
    for j in range(k):
        a = rows[0][j]
        if a.is_zero():
            continue
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        term = a * _det_rows(minor, nvars)
        total = total + term if j % 2 == 0 else total - term
    return total


def det_adjugate(A: PolyMatrix) -> Tuple[Polynomial, PolyMatrix]:
    """Determinant and adjugate by cofactor expansion (``m <= 8``)."""
    m = A.m
    if m > MAX_DET_SIZE:
        raise ValueError(f"cofactor expansion limited to m <= {MAX_DET_SIZE}, got {m}")
    rows = A.rows()
    det = _det_rows(rows, A.nvars)
    if m == 1:
        return det, PolyMatrix.identity(A.nvars, 1)
    adj = {}
    for i in range(m):
        for j in range(i, m):
            # adj[i, j] = (-1)^(i+j) * minor(j, i); symmetric input => symmetric adjugate
            minor = [r[:i] + r[i + 1:] for k, r in enumerate(rows) if k != j]
            c = _det_rows(minor, A.nvars)
            adj[(i, j)] = c if (i + j) % 2 == 0 else -c
    return det, PolyMatrix(A.nvars, m, adj)


def matmul(A: Sequence[Sequence[Polynomial]], B: Sequence[Sequence[Polynomial]], nvars: int):
    """Product of general (not necessarily symmetric) polynomial matrices as nested lists."""
    rows, inner, cols = len(A), len(B), len(B[0]) if B else 0
    out = []
    for i in range(rows):
        row = []
        for j in range(cols):
            acc = Polynomial.zero(nvars)
            for k in range(inner):
                if not A[i][k].is_zero() and not B[k][j].is_zero():
                    acc = acc + A[i][k] * B[k][j]
            row.append(acc)
        out.append(row)
    return out
