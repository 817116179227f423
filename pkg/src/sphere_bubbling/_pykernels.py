"""Numpy implementations of the hot loops (fallback for ``_ckernels``)."""
import math

import numpy as np


def weighted_sum(values, weights):
    """Exactly rounded sum of ``values * weights`` (order independent)."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if values.shape != weights.shape:
        raise ValueError("values and weights differ in length")
    return math.fsum((values * weights).tolist())


def _b(k, mu):
    if k == 0:
        return 0.0
    return k * (k + 2.0 * mu) / ((2.0 * k + 2.0 * mu + 1.0) * (2.0 * k + 2.0 * mu - 1.0))


def gegenbauer_table(t, L, mu, p0):
    t = np.ascontiguousarray(t, dtype=np.float64)
    out = np.empty((L + 1, t.size))
    out[0] = p0
    if L >= 1:
        out[1] = t * p0 / math.sqrt(_b(1, mu))
    for k in range(1, L):
        out[k + 1] = (t * out[k] - math.sqrt(_b(k, mu)) * out[k - 1]) / math.sqrt(_b(k + 1, mu))
    return out


def zonal_synthesis(coeffs, t, mu, p0):
    coeffs = np.asarray(coeffs, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    L = coeffs.size - 1
    pkm1 = np.full_like(t, p0)
    acc = coeffs[0] * pkm1
    if L >= 1:
        pk = t * p0 / math.sqrt(_b(1, mu))
        acc = acc + coeffs[1] * pk
        for k in range(1, L):
            pkp1 = (t * pk - math.sqrt(_b(k, mu)) * pkm1) / math.sqrt(_b(k + 1, mu))
            acc = acc + coeffs[k + 1] * pkp1
            pkm1, pk = pk, pkp1
    return acc
