# cython: language_level=3
"""Compiled twins of the kernels in ``_pykernels``.

Same signatures, same summation order. Loops run without the GIL so
segments and one-vs-rest classes can be scored from worker threads.
"""
import numpy as np

from libc.stdlib cimport malloc, free
from libc.string cimport memset
from libc.math cimport NAN

NAME = "cython"


cdef inline double _split_ig(const long long *left, long long n_left,
                             const long long[:] totals, const double[:] xlogx,
                             long long N, double hnum) noexcept nogil:
    cdef Py_ssize_t c, C = totals.shape[0]
    cdef double sl = 0.0, sr = 0.0, ig, h
    for c in range(C):
        sl = sl + xlogx[left[c]]
    for c in range(C):
        sr = sr + xlogx[totals[c] - left[c]]
    ig = (hnum - ((xlogx[n_left] - sl) + (xlogx[N - n_left] - sr))) / N
    h = hnum / N
    if ig < 0.0:
        ig = 0.0
    if ig > h:
        ig = h
    return ig


cdef double _hnum(const long long[:] totals, const double[:] xlogx, long long *N) noexcept nogil:
    cdef Py_ssize_t c
    cdef long long n = 0
    cdef double s = 0.0
    for c in range(totals.shape[0]):
        n += totals[c]
    for c in range(totals.shape[0]):
        s = s + xlogx[totals[c]]
    N[0] = n
    return xlogx[n] - s


def ig_binary(const long long[:] indptr, const long long[:] rows, const long long[:] y,
              const long long[:] class_totals, const double[:] xlogx):
    cdef Py_ssize_t ncol = indptr.shape[0] - 1, C = class_totals.shape[0]
    cdef Py_ssize_t j, k
    cdef long long N
    cdef double hnum
    out = np.zeros(ncol, dtype=np.float64)
    cdef double[:] res = out
    cdef long long *left = <long long *> malloc(max(C, 1) * sizeof(long long))
    if left == NULL:
        raise MemoryError()
    try:
        with nogil:
            hnum = _hnum(class_totals, xlogx, &N)
            for j in range(ncol):
                memset(left, 0, C * sizeof(long long))
                for k in range(indptr[j], indptr[j + 1]):
                    left[y[rows[k]]] += 1
                res[j] = _split_ig(left, indptr[j + 1] - indptr[j], class_totals, xlogx, N, hnum)
    finally:
        free(left)
    return out


def ig_frequency(const long long[:] indptr, const long long[:] rows, const double[:] values,
                 const long long[:] y, const long long[:] class_totals, const double[:] xlogx):
    cdef Py_ssize_t ncol = indptr.shape[0] - 1, C = class_totals.shape[0]
    cdef Py_ssize_t j, k, i, c, end
    cdef long long N, n_left, nnz
    cdef double hnum, best, best_thr, prev, v, g
    cdef bint have_left
    ig_out = np.zeros(ncol, dtype=np.float64)
    thr_out = np.full(ncol, np.nan, dtype=np.float64)
    cdef double[:] ig_res = ig_out
    cdef double[:] thr_res = thr_out
    cdef long long *left = <long long *> malloc(max(C, 1) * sizeof(long long))
    if left == NULL:
        raise MemoryError()
    try:
        with nogil:
            hnum = _hnum(class_totals, xlogx, &N)
            for j in range(ncol):
                nnz = indptr[j + 1] - indptr[j]
                if nnz == 0:
                    continue
                # left side starts as the instances lacking the feature
                memset(left, 0, C * sizeof(long long))
                for k in range(indptr[j], indptr[j + 1]):
                    left[y[rows[k]]] += 1
                for c in range(C):
                    left[c] = class_totals[c] - left[c]
                n_left = N - nnz
                have_left = n_left > 0
                prev = 0.0
                best = -1.0
                best_thr = NAN
                end = indptr[j + 1]
                i = indptr[j]
                while i < end:
                    v = values[i]
                    if have_left:
                        g = _split_ig(left, n_left, class_totals, xlogx, N, hnum)
                        if g > best:
                            best = g
                            best_thr = (prev + v) / 2.0
                    while i < end and values[i] == v:
                        left[y[rows[i]]] += 1
                        n_left += 1
                        i += 1
                    prev = v
                    have_left = True
                if best >= 0.0:
                    ig_res[j] = best
                    thr_res[j] = best_thr
    finally:
        free(left)
    return ig_out, thr_out


def sgd_hinge(const long long[:] indptr, const long long[:] indices, const double[:] data,
              const double[:] ysign, const long long[:] order, double lam, double[:] w, long long t0):
    cdef Py_ssize_t d = w.shape[0] - 1, k, j, i
    cdef long long t = t0
    cdef double s = 1.0, eta, acc, dot, step, yi
    v_arr = np.array(w, dtype=np.float64)
    cdef double[:] v = v_arr
    with nogil:
        for k in range(order.shape[0]):
            i = order[k]
            t += 1
            eta = 1.0 / (lam * t)
            acc = 0.0
            for j in range(indptr[i], indptr[i + 1]):
                acc = acc + v[indices[j]] * data[j]
            acc = acc + v[d]
            dot = s * acc
            s *= 1.0 - eta * lam
            if s == 0.0:
                for j in range(d + 1):
                    v[j] = 0.0
                s = 1.0
            yi = ysign[i]
            if yi * dot < 1.0:
                step = eta * yi / s
                for j in range(indptr[i], indptr[i + 1]):
                    v[indices[j]] += step * data[j]
                v[d] += step
        for j in range(d + 1):
            w[j] = s * v[j]
    return t
