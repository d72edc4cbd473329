# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``pmo._kernels_py`` (same results)."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t

cnp.import_array()


cdef int64_t[:, ::1] _binom_table(int N):
    cdef int64_t[:, ::1] C = np.zeros((N + 1, N + 1), dtype=np.int64)
    cdef int i, j
    for i in range(N + 1):
        C[i, 0] = 1
        for j in range(1, i + 1):
            C[i, j] = C[i - 1, j - 1] + C[i - 1, j]
    return C


cdef inline int64_t _binom(int64_t[:, ::1] C, int a, int b) nogil:
    if b < 0 or a < 0 or b > a:
        return 0
    return C[a, b]


cdef int64_t _rank(const int64_t* alpha, int n, int64_t[:, ::1] C) nogil:
    cdef int64_t d = 0, rank = 0, rem
    cdef int i, k
    cdef int64_t a
    for i in range(n):
        d += alpha[i]
    if d > 0:
        rank = _binom(C, n + d - 1, n)
    rem = d
    for i in range(n - 1):
        k = n - i - 1
        a = alpha[i] + 1
        while a <= rem:
            rank += _binom(C, rem - a + k - 1, k - 1)
            a += 1
        rem -= alpha[i]
    return rank


def poly_mul(dict ta, dict tb):
    """Product of two term maps ``{exponent tuple: coeff}`` (no pruning)."""
    cdef dict out = {}
    cdef double ca, cb
    cdef tuple a, b, key
    for a, ca in ta.items():
        for b, cb in tb.items():
            key = tuple([x + y for x, y in zip(a, b)])
            out[key] = out.get(key, 0.0) + ca * cb
    return {k: v for k, v in out.items() if v != 0.0}


def grlex_rank_array(exps):
    cdef cnp.ndarray[int64_t, ndim=2, mode="c"] E = np.ascontiguousarray(exps, dtype=np.int64)
    cdef Py_ssize_t rows = E.shape[0], r
    cdef int n = E.shape[1]
    cdef cnp.ndarray[int64_t, ndim=1] out = np.zeros(rows, dtype=np.int64)
    if n == 0 or rows == 0:
        return out
    cdef int64_t dmax = E.sum(axis=1).max()
    cdef int64_t[:, ::1] C = _binom_table(n + dmax + 1)
    for r in range(rows):
        out[r] = _rank(&E[r, 0], n, C)
    return out


def localizing_triplets(basis_exps, shift_exps, shift_coefs):
    """Sparse pattern of ``sum_g q_g y_{a+b+g}`` over the upper triangle."""
    cdef cnp.ndarray[int64_t, ndim=2, mode="c"] B = np.ascontiguousarray(basis_exps, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=2, mode="c"] S = np.ascontiguousarray(shift_exps, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] c = np.ascontiguousarray(shift_coefs, dtype=float)
    cdef Py_ssize_t s = B.shape[0], ns = S.shape[0], a, b, t, k, pos = 0
    cdef int n = B.shape[1]
    cdef Py_ssize_t total = (s * (s + 1) // 2) * ns
    cdef cnp.ndarray[int64_t, ndim=1] rows = np.empty(total, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] cols = np.empty(total, dtype=np.int64)
    cdef cnp.ndarray[int64_t, ndim=1] var = np.empty(total, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] val = np.empty(total, dtype=float)
    if total == 0:
        return rows, cols, var, val
    cdef int64_t dmax = 2 * (B.sum(axis=1).max() if s else 0) + (S.sum(axis=1).max() if ns else 0)
    cdef int64_t[:, ::1] C = _binom_table(n + dmax + 1)
    cdef cnp.ndarray[int64_t, ndim=1] key = np.zeros(max(n, 1), dtype=np.int64)
    for a in range(s):
        for b in range(a, s):
            for t in range(ns):
                for k in range(n):
                    key[k] = B[a, k] + B[b, k] + S[t, k]
                rows[pos] = a
                cols[pos] = b
                var[pos] = _rank(&key[0], n, C) if n else 0
                val[pos] = c[t]
                pos += 1
    return rows, cols, var, val


def gram_coefficient_map(basis_exps):
    """Graded lex rank of ``x^(a_i + a_j)`` for every pair ``i <= j``."""
    B = np.asarray(basis_exps, dtype=np.int64)
    s, n = B.shape
    iu, ju = np.triu_indices(s)
    if not n:
        return iu.astype(np.int64), ju.astype(np.int64), np.zeros(len(iu), dtype=np.int64)
    return iu.astype(np.int64), ju.astype(np.int64), grlex_rank_array(B[iu] + B[ju])
