# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled quantization kernels; see ``_pykernels`` for the reference versions."""
import numpy as np

BUCKETS_PER_BOUNDARY = 4


cdef inline Py_ssize_t _search(const double[::1] b, Py_ssize_t lo, Py_ssize_t hi,
                               double v) nogil:
    # count of boundaries strictly below v within b[lo:hi]: cells are (p_{k-1}, p_k]
    cdef Py_ssize_t mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if b[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef struct Index:
    double b0
    double b1
    double inv_w
    Py_ssize_t m


cdef inline Py_ssize_t _cell(const double[::1] b, Py_ssize_t nb, const Py_ssize_t[::1] start,
                             Index ix, double v) nogil:
    cdef Py_ssize_t j, lo, hi
    if not v > ix.b0:
        return 0
    if v > ix.b1:
        return nb
    j = <Py_ssize_t>((v - ix.b0) * ix.inv_w)
    if j >= ix.m:
        j = ix.m - 1
    lo = start[j]
    hi = start[j + 1]
    # rounding in j can put v just outside its bucket; fall back to a full search
    if (lo > 0 and b[lo - 1] >= v) or (hi < nb and b[hi] < v):
        return _search(b, 0, nb, v)
    return _search(b, lo, hi, v)


def _bucket_index(const double[::1] boundaries):
    """Uniform buckets over [p_1, p_{K-1}]; start[j] counts boundaries below bucket j."""
    b = np.asarray(boundaries)
    nb = b.shape[0]
    m = max(1, BUCKETS_PER_BOUNDARY * nb)
    span = b[nb - 1] - b[0]
    inv_w = m / span if span > 0 else 0.0
    edges = b[0] + np.arange(m + 1) * (span / m)
    start = np.searchsorted(b, edges, side="left").astype(np.intp)
    start[m] = nb
    cdef Index ix
    ix.b0 = b[0]
    ix.b1 = b[nb - 1]
    ix.inv_w = inv_w
    ix.m = m
    return start, ix


def encode(const double[::1] boundaries, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], nb = boundaries.shape[0], i
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] o = out
    cdef Py_ssize_t[::1] start
    cdef Index ix
    if nb == 0:
        out[:] = 0
        return out
    start, ix = _bucket_index(boundaries)
    with nogil:
        for i in range(n):
            o[i] = _cell(boundaries, nb, start, ix, x[i])
    return out


def quantize(const double[::1] boundaries, const double[::1] table, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], nb = boundaries.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t[::1] start
    cdef Index ix
    if nb == 0:
        out[:] = table[0]
        return out
    start, ix = _bucket_index(boundaries)
    with nogil:
        for i in range(n):
            o[i] = table[_cell(boundaries, nb, start, ix, x[i])]
    return out


def cell_counts(const double[::1] boundaries, const double[::1] x):
    cdef Py_ssize_t n = x.shape[0], nb = boundaries.shape[0], i
    out = np.zeros(nb + 1, dtype=np.int64)
    cdef long long[::1] o = out
    cdef Py_ssize_t[::1] start
    cdef Index ix
    if nb == 0:
        out[0] = n
        return out
    start, ix = _bucket_index(boundaries)
    with nogil:
        for i in range(n):
            o[_cell(boundaries, nb, start, ix, x[i])] += 1
    return out


def table_error_sums(const double[::1] target, const double[::1] boundaries,
                     const double[::1] table, const double[::1] x):
    """Sums of e**2 and e**4 for e = target - table[cell(x)], in index order."""
    cdef Py_ssize_t n = x.shape[0], nb = boundaries.shape[0], i
    cdef double e, e2, s1 = 0.0, s2 = 0.0
    cdef Py_ssize_t[::1] start
    cdef Index ix
    if nb == 0:
        return error_sums(target, np.full(n, table[0]))
    start, ix = _bucket_index(boundaries)
    with nogil:
        for i in range(n):
            e = target[i] - table[_cell(boundaries, nb, start, ix, x[i])]
            e2 = e * e
            s1 += e2
            s2 += e2 * e2
    return s1, s2


def error_sums(const double[::1] a, const double[::1] b):
    cdef Py_ssize_t n = a.shape[0], i
    cdef double e, e2, s1 = 0.0, s2 = 0.0
    with nogil:
        for i in range(n):
            e = a[i] - b[i]
            e2 = e * e
            s1 += e2
            s2 += e2 * e2
    return s1, s2
