# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sampling and scatter kernels; see ``_kernels_py`` for the reference."""
from cython cimport floating

ctypedef long long i64


def random_walks(const i64[::1] indptr, const i64[::1] indices,
                 const i64[::1] starts, const double[:, ::1] uniforms,
                 i64[:, ::1] walks, i64[::1] lengths):
    cdef Py_ssize_t n_walks = walks.shape[0], length = walks.shape[1]
    cdef Py_ssize_t i, n
    cdef i64 v, lo, deg, j
    with nogil:
        for i in range(n_walks):
            for n in range(length):
                walks[i, n] = -1
            v = starts[i]
            walks[i, 0] = v
            n = 1
            while n < length:
                lo = indptr[v]
                deg = indptr[v + 1] - lo
                if deg == 0:
                    break
                j = <i64>(uniforms[i, n - 1] * deg)
                if j >= deg:
                    j = deg - 1
                v = indices[lo + j]
                walks[i, n] = v
                n += 1
            lengths[i] = n


def count_window_pairs(const i64[:, ::1] walks, const i64[::1] lengths, Py_ssize_t window):
    cdef Py_ssize_t i, a, b, n, lo, hi
    cdef Py_ssize_t total = 0
    with nogil:
        for i in range(walks.shape[0]):
            n = lengths[i]
            for a in range(n):
                lo = a - window if a > window else 0
                hi = a + window + 1 if a + window + 1 < n else n
                for b in range(lo, hi):
                    if a != b and walks[i, a] != walks[i, b]:
                        total += 1
    return total


def window_pairs(const i64[:, ::1] walks, const i64[::1] lengths, Py_ssize_t window,
                 i64[:, ::1] out):
    cdef Py_ssize_t i, a, b, n, lo, hi
    cdef Py_ssize_t k = 0
    with nogil:
        for i in range(walks.shape[0]):
            n = lengths[i]
            for a in range(n):
                lo = a - window if a > window else 0
                hi = a + window + 1 if a + window + 1 < n else n
                for b in range(lo, hi):
                    if a != b and walks[i, a] != walks[i, b]:
                        out[k, 0] = walks[i, a]
                        out[k, 1] = walks[i, b]
                        k += 1
    return k


def scatter_add_rows(floating[:, ::1] out, const i64[::1] index, const floating[:, ::1] rows):
    cdef Py_ssize_t m, j, d = out.shape[1]
    cdef i64 r
    with nogil:
        for m in range(index.shape[0]):
            r = index[m]
            for j in range(d):
                out[r, j] += rows[m, j]
