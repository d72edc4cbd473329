"""Pure-Python implementations of the hot kernels.

These are the reference versions; ``pmo._kernels`` (Cython) must agree with
them exactly. Both expose the same four functions.
"""
from math import comb

import numpy as np


def poly_mul(ta, tb):
    """Product of two term maps ``{exponent tuple: coeff}`` (no pruning)."""
    out = {}
    get = out.get
    for a, ca in ta.items():
        for b, cb in tb.items():
            key = tuple(x + y for x, y in zip(a, b))
            out[key] = get(key, 0.0) + ca * cb
    return {k: v for k, v in out.items() if v != 0.0}


def _rank(alpha, n):
    d = 0
    for a in alpha:
        d += a
    rank = comb(n + d - 1, n) if d > 0 else 0
    rem = d
    for i in range(n - 1):
        k = n - i - 1
        for a in range(alpha[i] + 1, rem + 1):
            rank += comb(rem - a + k - 1, k - 1)
        rem -= alpha[i]
    return rank


def grlex_rank_array(exps):
    exps = np.asarray(exps, dtype=np.int64)
    n = exps.shape[1]
    if n == 0:
        return np.zeros(exps.shape[0], dtype=np.int64)
    return np.array([_rank(tuple(row), n) for row in exps.tolist()], dtype=np.int64)


def localizing_triplets(basis_exps, shift_exps, shift_coefs):
    """Sparse pattern of ``sum_g q_g y_{a+b+g}`` over the upper triangle.

    Returns ``(rows, cols, var, val)`` with ``rows <= cols``; ``var`` is the
    graded lex rank of the moment index. Duplicate ``(row, col, var)`` keys
    are possible only if ``shift_exps`` repeats.
    """
    B = np.asarray(basis_exps, dtype=np.int64)
    S = np.asarray(shift_exps, dtype=np.int64)
    c = np.asarray(shift_coefs, dtype=float)
    s, n = B.shape
    rows, cols, var, val = [], [], [], []
    rank_cache = {}
    for a in range(s):
        ba = B[a].tolist()
        for b in range(a, s):
            bb = B[b].tolist()
            base = [x + y for x, y in zip(ba, bb)]
            for t in range(S.shape[0]):
                key = tuple(x + y for x, y in zip(base, S[t].tolist()))
                r = rank_cache.get(key)
                if r is None:
                    r = rank_cache[key] = _rank(key, n) if n else 0
                rows.append(a)
                cols.append(b)
                var.append(r)
                val.append(c[t])
    return (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
            np.array(var, dtype=np.int64), np.array(val, dtype=float))


def gram_coefficient_map(basis_exps):
    """For a Gram matrix on ``basis_exps``, the graded lex rank of
    ``x^(a_i + a_j)`` for every upper-triangle pair ``i <= j``.

    Returns ``(rows, cols, ranks)``.
    """
    B = np.asarray(basis_exps, dtype=np.int64)
    s, n = B.shape
    iu, ju = np.triu_indices(s)
    sums = B[iu] + B[ju]
    return iu.astype(np.int64), ju.astype(np.int64), grlex_rank_array(sums) if n else np.zeros(len(iu), dtype=np.int64)
