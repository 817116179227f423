"""Zonal spectral realisation of the intertwining operator P_gamma on S^n.

A zonal field about a centre ``a`` is a function of ``t = x . a``.  It is
expanded in the L^2(S^n)-normalised zonal harmonics

    Y_k(x) = p_k(x . a) / sqrt(omega_n),

where ``p_k`` are the orthonormal Gegenbauer polynomials for the weight
``(1 - t^2)^mu`` on [-1, 1], ``mu = (n - 2)/2``.  P_gamma is diagonal on
degree ``k`` with eigenvalue Gamma(k + n/2 + gamma) / Gamma(k + n/2 - gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from . import kernels
from .errors import DomainError, TruncationError
from .geometry import ProblemParams, north_pole, omega

DEFAULT_L = 400
TAIL_WIDTH = 8
CHOP = 1e-10
PLATEAU = 32


def pgamma_eigenvalue(k, params: ProblemParams):
    """Eigenvalue of P_gamma on spherical harmonics of degree ``k``.

    Evaluated as a difference of log-gamma values so that large degrees do
    not overflow.  ``k`` may be an integer or an integer array.
    """
    n, g = params.n, params.gamma
    if n / 2.0 <= g:
        raise DomainError("need n/2 > gamma")
    k_arr = np.asarray(k)
    if np.any(k_arr < 0):
        raise DomainError("degree must be nonnegative")
    kf = k_arr.astype(float)
    out = np.exp(special.gammaln(kf + n / 2.0 + g) - special.gammaln(kf + n / 2.0 - g))
    return float(out) if out.ndim == 0 else out


def _mu(n: int) -> float:
    return (n - 2) / 2.0


def _p0(n: int) -> float:
    """Constant orthonormal polynomial: 1/sqrt(int (1-t^2)^mu dt)."""
    mu = _mu(n)
    return 1.0 / math.sqrt(special.beta(0.5, mu + 1.0))


@lru_cache(maxsize=32)
def jacobi_nodes(n: int, m: int):
    """Gauss-Jacobi nodes and weights for the weight (1-t^2)^mu, mu = (n-2)/2."""
    mu = _mu(n)
    t, w = special.roots_jacobi(m, mu, mu)
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


def gegenbauer_table(t, L: int, n: int) -> np.ndarray:
    """Orthonormal Gegenbauer values p_0..p_L at ``t`` as an (L+1, len(t)) array."""
    t = np.ascontiguousarray(np.atleast_1d(t), dtype=float)
    return np.asarray(kernels.gegenbauer_table(t, int(L), _mu(n), _p0(n)))


@dataclass(frozen=True)
class ZonalExpansion:
    """Coefficients of a zonal field against the normalised zonal harmonics.

    Attributes
    ----------
    center : ndarray
        Symmetry axis of the field.
    coeffs : ndarray
        ``coeffs[k]`` multiplies ``Y_k``; length ``L + 1``.
    params : ProblemParams
    residual : float
        Relative L^2 reconstruction error measured at the quadrature nodes.
    tail : float
        Relative size of the last few coefficients, a truncation estimate.
    tolerance : float
        Tolerance the expansion was requested with.
    """

    center: np.ndarray
    coeffs: np.ndarray
    params: ProblemParams
    residual: float = 0.0
    tail: float = 0.0
    tolerance: float = 1e-8

    @property
    def L(self) -> int:
        return self.coeffs.size - 1

    @property
    def truncated(self) -> bool:
        return max(self.residual, self.tail) > self.tolerance

    def evaluate_t(self, t) -> np.ndarray:
        """Field values at ``t = cos(theta)``."""
        n = self.params.n
        t = np.ascontiguousarray(np.atleast_1d(t), dtype=float)
        vals = kernels.zonal_synthesis(np.ascontiguousarray(self.coeffs), t, _mu(n), _p0(n))
        return np.asarray(vals) / math.sqrt(omega(n))

    def __call__(self, x) -> np.ndarray:
        """Field values at ambient points ``x`` (shape (m, n+1) or (n+1,))."""
        x = np.asarray(x, dtype=float)
        t = np.clip(np.atleast_2d(x) @ self.center, -1.0, 1.0)
        v = self.evaluate_t(t)
        return v[0] if x.ndim == 1 else v

    def with_coeffs(self, coeffs) -> "ZonalExpansion":
        return ZonalExpansion(self.center, np.asarray(coeffs, dtype=float), self.params,
                              self.residual, self.tail, self.tolerance)


def _chop(coeffs: np.ndarray) -> np.ndarray:
    """Zero the rounding plateau of a resolved coefficient vector.

    Coefficients at the rounding floor carry no information but are amplified
    by the eigenvalue ladder and by p_k(1) ~ k^(mu+1/2).  When the last
    ``PLATEAU`` coefficients sit below ``CHOP`` relative to the largest one the
    field is resolved; everything below ten times that plateau is noise.
    """
    big = float(np.abs(coeffs).max(initial=0.0))
    if big == 0.0 or coeffs.size <= 2 * PLATEAU:
        return coeffs
    plateau = float(np.abs(coeffs[-PLATEAU:]).max())
    if plateau > CHOP * big:
        return coeffs
    out = coeffs.copy()
    out[np.abs(out) < 10.0 * plateau] = 0.0
    return out


def zonal_expand(profile: Callable[[np.ndarray], np.ndarray], L: int, params: ProblemParams,
                 center=None, tol: float = 1e-8, strict: bool = False,
                 n_nodes: int | None = None) -> ZonalExpansion:
    """Expand the zonal field ``profile(t)``, ``t = x . center``, up to degree ``L``.

    Coefficients are computed by Gauss-Jacobi quadrature with
    ``n_nodes`` (default ``2L + 64``) nodes.  The reconstruction residual and
    a tail estimate are stored on the result.

    Raises
    ------
    TruncationError
        Only when ``strict`` is set and the residual or tail exceeds ``tol``.
    """
    n = params.n
    if L < 0:
        raise DomainError("L must be nonnegative")
    center = north_pole(n) if center is None else np.asarray(center, dtype=float)
    m = n_nodes or (2 * L + 64)
    t, w = jacobi_nodes(n, m)
    f = np.asarray(profile(np.asarray(t)), dtype=float)
    if f.shape != t.shape:
        f = np.broadcast_to(f, t.shape).astype(float)
    P = gegenbauer_table(t, L, n)
    root = math.sqrt(omega(n))
    # c_k = int_{S^n} f Y_k = sqrt(omega_n) * int f p_k (1-t^2)^mu dt
    wf = np.ascontiguousarray(w * f)
    coeffs = np.array([kernels.weighted_sum(np.ascontiguousarray(P[k]), wf) for k in range(L + 1)])
    coeffs *= root
    coeffs = _chop(coeffs)
    recon = np.asarray(kernels.zonal_synthesis(coeffs, np.ascontiguousarray(t), _mu(n), _p0(n))) / root
    norm2 = kernels.weighted_sum(np.ascontiguousarray(f * f), np.ascontiguousarray(w))
    err2 = kernels.weighted_sum(np.ascontiguousarray((recon - f) ** 2), np.ascontiguousarray(w))
    residual = math.sqrt(err2 / norm2) if norm2 > 0 else math.sqrt(err2)
    tail_block = coeffs[max(0, L + 1 - TAIL_WIDTH):]
    cnorm = float(np.linalg.norm(coeffs))
    tail = float(np.linalg.norm(tail_block)) / cnorm if cnorm > 0 else 0.0
    exp = ZonalExpansion(center, coeffs, params, residual, tail, tol)
    if strict and exp.truncated:
        raise TruncationError(
            f"zonal expansion at L={L} under-resolved: residual {residual:.3g}, tail {tail:.3g}")
    return exp


def apply_pgamma(e: ZonalExpansion) -> ZonalExpansion:
    """P_gamma applied degree by degree; the centre is unchanged."""
    eig = pgamma_eigenvalue(np.arange(e.L + 1), e.params)
    return e.with_coeffs(e.coeffs * eig)


def hgamma_inner(u, v, params: ProblemParams | None = None, rule=None) -> float:
    """The energy pairing <u, v> = int v P_gamma u.

    ``u`` and ``v`` are either two expansions about the same centre (spectral
    route) or two :class:`~sphere_bubbling.bubbles.BubbleParams` (closed-form
    route through the bubble equation; ``params`` is required and ``rule``
    is forwarded to
    :func:`~sphere_bubbling.bubbles.interaction_integral`).
    """
    if isinstance(u, ZonalExpansion) and isinstance(v, ZonalExpansion):
        if u.params != v.params:
            raise DomainError("expansions belong to different problems")
        if not np.allclose(u.center, v.center, atol=1e-14):
            raise DomainError("spectral pairing needs a common centre")
        L = min(u.L, v.L)
        eig = pgamma_eigenvalue(np.arange(L + 1), u.params)
        a = np.ascontiguousarray(u.coeffs[:L + 1] * eig)
        return kernels.weighted_sum(a, np.ascontiguousarray(v.coeffs[:L + 1]))
    from .bubbles import BubbleParams, interaction_integral

    if isinstance(u, BubbleParams) and isinstance(v, BubbleParams):
        if params is None:
            raise DomainError("bubble pairing needs ProblemParams")
        return interaction_integral(u, v, params, rule)
    raise TypeError("hgamma_inner accepts two ZonalExpansions or two BubbleParams")
