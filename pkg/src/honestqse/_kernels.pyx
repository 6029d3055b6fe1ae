# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: batched Born log-likelihoods and inverse-CDF/systematic sampling."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY

cnp.import_array()

cdef double PROB_FLOOR = 1e-15


def log_likelihoods(const double complex[:, :, ::1] particles,
                    const double complex[:, :, ::1] effects,
                    const double[::1] counts):
    """sum_k counts[k] * ln Re Tr(E_k rho_n) for each particle n."""
    cdef Py_ssize_t n = particles.shape[0], d = particles.shape[1], m = effects.shape[0]
    cdef Py_ssize_t i, k, a, b
    cdef double acc, p
    cdef double complex tr
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(m):
                if counts[k] == 0.0:
                    continue
                tr = 0.0
                for a in range(d):
                    for b in range(d):
                        tr = tr + effects[k, a, b] * particles[i, b, a]
                p = tr.real
                if p <= PROB_FLOOR:
                    acc = -INFINITY
                    break
                acc = acc + counts[k] * log(p)
            res[i] = acc
    return out


def sample_outcomes(const double[::1] cdf, const double[::1] uniforms):
    """Index of the first cdf entry strictly above each uniform (cdf[-1] == 1)."""
    cdef Py_ssize_t n = uniforms.shape[0], m = cdf.shape[0]
    cdef Py_ssize_t i, lo, hi, mid
    cdef double u
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    with nogil:
        for i in range(n):
            u = uniforms[i]
            lo = 0
            hi = m - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if u < cdf[mid]:
                    hi = mid
                else:
                    lo = mid + 1
            res[i] = lo
    return out


def systematic_resample(const double[::1] weights, double u):
    """Systematic resampling indices for normalized weights and offset u in [0, 1)."""
    cdef Py_ssize_t n = weights.shape[0]
    cdef Py_ssize_t i, j = 0
    cdef double cum = weights[0], pos
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    with nogil:
        for i in range(n):
            pos = (i + u) / n
            while pos >= cum and j < n - 1:
                j += 1
                cum += weights[j]
            res[i] = j
    return out
