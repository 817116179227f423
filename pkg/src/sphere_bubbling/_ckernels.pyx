# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: compensated reductions and Gegenbauer recurrences.

Every routine here has a numpy twin in ``_pykernels`` with the same
signature; ``kernels`` picks one at import time.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def weighted_sum(const double[::1] values, const double[::1] weights):
    """Neumaier-compensated sum of ``values * weights`` in index order."""
    cdef Py_ssize_t i, m = values.shape[0]
    cdef double s = 0.0, c = 0.0, x, t
    if weights.shape[0] != m:
        raise ValueError("values and weights differ in length")
    for i in range(m):
        x = values[i] * weights[i]
        t = s + x
        if fabs(s) >= fabs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


cdef inline double _b(Py_ssize_t k, double mu) nogil:
    cdef double kk = <double>k
    if k == 0:
        return 0.0
    return kk * (kk + 2.0 * mu) / ((2.0 * kk + 2.0 * mu + 1.0) * (2.0 * kk + 2.0 * mu - 1.0))


def gegenbauer_table(const double[::1] t, Py_ssize_t L, double mu, double p0):
    """Orthonormal polynomials for weight (1-t^2)^mu, degrees 0..L at nodes t."""
    cdef Py_ssize_t m = t.shape[0], k, j
    out = np.empty((L + 1, m), dtype=np.float64)
    cdef double[:, ::1] P = out
    cdef double sb, sbn
    for j in range(m):
        P[0, j] = p0
    if L >= 1:
        sbn = sqrt(_b(1, mu))
        for j in range(m):
            P[1, j] = t[j] * p0 / sbn
    for k in range(1, L):
        sb = sqrt(_b(k, mu))
        sbn = sqrt(_b(k + 1, mu))
        for j in range(m):
            P[k + 1, j] = (t[j] * P[k, j] - sb * P[k - 1, j]) / sbn
    return out


def zonal_synthesis(const double[::1] coeffs, const double[::1] t, double mu, double p0):
    """Sum_k coeffs[k] p_k(t) by forward recurrence, without storing the table."""
    cdef Py_ssize_t m = t.shape[0], L = coeffs.shape[0] - 1, k, j
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] acc = out
    cdef double pkm1, pk, pkp1, sb, sbn, tj
    for j in range(m):
        tj = t[j]
        pkm1 = p0
        acc[j] = coeffs[0] * pkm1
        if L >= 1:
            pk = tj * p0 / sqrt(_b(1, mu))
            acc[j] += coeffs[1] * pk
            for k in range(1, L):
                sb = sqrt(_b(k, mu))
                sbn = sqrt(_b(k + 1, mu))
                pkp1 = (tj * pk - sb * pkm1) / sbn
                acc[j] += coeffs[k + 1] * pkp1
                pkm1 = pk
                pk = pkp1
    return out
