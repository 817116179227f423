"""Sphere geometry, stereographic charts and quadrature on S^n.

Points of S^n are ambient unit vectors of length n+1.  The "north pole" is
the last ambient axis e_{n+1}.  Stereographic projection from a pole maps the
equator orthogonal to that pole onto the unit sphere of R^n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import special
from scipy.stats import qmc

from . import kernels
from .errors import DomainError, NonFiniteSample, PoleSingularity

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    """Dimension ``n`` and fractional order ``gamma`` with derived exponents."""

    n: int
    gamma: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"n must be an integer >= 3, got {self.n!r}")
        if not (0.0 < self.gamma < 1.0):
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def critical_exponent(self) -> float:
        """2n/(n-2gamma), the critical Sobolev exponent."""
        return 2.0 * self.n / (self.n - 2.0 * self.gamma)

    @property
    def bubble_exponent(self) -> float:
        """(n-2gamma)/2."""
        return (self.n - 2.0 * self.gamma) / 2.0

    @property
    def gradient_exponent(self) -> float:
        """(n+2gamma)/(n-2gamma), the power on the right of P_gamma u = u^p."""
        return (self.n + 2.0 * self.gamma) / (self.n - 2.0 * self.gamma)

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    def to_dict(self):
        return {"n": self.n, "gamma": self.gamma}


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere S^n in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2.0) / math.gamma((n + 1) / 2.0)


def omega(n: int) -> float:
    """omega_n: surface area of S^{n-1} in R^n (radial factor of R^n integrals)."""
    return sphere_area(n - 1)


def north_pole(n: int) -> np.ndarray:
    e = np.zeros(n + 1)
    e[-1] = 1.0
    return e


def axis(n: int, i: int, sign: float = 1.0) -> np.ndarray:
    """Ambient axis e_i (1-based, as in the expression variables x1..x_{n+1})."""
    e = np.zeros(n + 1)
    e[i - 1] = sign
    return e


def as_sphere_point(x, tol: float = UNIT_TOL) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DomainError("a sphere point is a 1-D ambient vector")
    if abs(np.linalg.norm(x) - 1.0) > tol:
        raise DomainError(f"point is not on the unit sphere (|x| = {float(np.linalg.norm(x)):.17g})")
    return x


def geodesic_distance(a, b) -> float:
    """Great-circle distance in [0, pi].

    Equal to arccos of the clamped inner product; evaluated through
    atan2(|b - (a.b)a|, a.b) so that tiny distances keep full precision.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(np.clip(a @ b, -1.0, 1.0))
    s = float(np.linalg.norm(b - c * a))
    return math.atan2(s, c)


def exp_map(a, v) -> np.ndarray:
    """Riemannian exponential at ``a`` of the ambient tangent vector ``v``."""
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    t = float(np.linalg.norm(v))
    if t == 0.0:
        return a.copy()
    x = math.cos(t) * a + (math.sin(t) / t) * v
    return x / np.linalg.norm(x)


def tangent_basis(a) -> np.ndarray:
    """Orthonormal basis of T_a S^n as the columns of an (n+1, n) array.

    The Householder reflection taking the north pole to ``a`` is applied to
    e_1..e_n, so at the north pole the basis is the first n ambient axes.
    """
    a = np.asarray(a, dtype=float)
    m = a.size
    v = -a.copy()
    v[-1] += 1.0
    vv = float(v @ v)
    eye = np.eye(m)
    if vv < 1e-300:
        return eye[:, :-1].copy()
    H = eye - (2.0 / vv) * np.outer(v, v)
    return H[:, :-1]


def frame(a, b=None) -> np.ndarray:
    """Orthonormal (n+1)x(n+1) matrix whose first column is ``a``.

    If ``b`` is given (and not parallel to ``a``) the second column is the
    unit tangent at ``a`` pointing toward ``b``.
    """
    a = np.asarray(a, dtype=float)
    T = tangent_basis(a)
    if b is not None:
        b = np.asarray(b, dtype=float)
        w = b - (a @ b) * a
        nw = np.linalg.norm(w)
        if nw > 1e-13:
            w = w / nw
            # rotate the tangent basis so that its first vector is w
            coords = T.T @ w
            Q = _householder_to_e1(coords)
            T = T @ Q
    return np.column_stack([a, T])


def _householder_to_e1(u):
    """Orthogonal matrix whose first column is the unit vector ``u``."""
    m = u.size
    e1 = np.zeros(m)
    e1[0] = 1.0
    v = u - e1
    vv = float(v @ v)
    if vv < 1e-300:
        return np.eye(m)
    return np.eye(m) - (2.0 / vv) * np.outer(v, v)


def stereographic_project(x, pole) -> np.ndarray:
    """Project ``x`` from ``pole`` to R^n (coordinates in ``tangent_basis(pole)``)."""
    x = np.asarray(x, dtype=float)
    pole = np.asarray(pole, dtype=float)
    if geodesic_distance(x, pole) < 1e-9:
        raise PoleSingularity("cannot project the projection pole itself")
    c = float(x @ pole)
    return tangent_basis(pole).T @ (x - c * pole) / (1.0 - c)


def stereographic_inverse(y, pole) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    pole = np.asarray(pole, dtype=float)
    r2 = float(y @ y)
    x = (2.0 * (tangent_basis(pole) @ y) + (r2 - 1.0) * pole) / (r2 + 1.0)
    return x / np.linalg.norm(x)


def stereographic_conformal_factor(y) -> float:
    """Scale factor 2/(1+|y|^2) of the round metric in the stereographic chart."""
    y = np.asarray(y, dtype=float)
    return 2.0 / (1.0 + float(y @ y))


# ---------------------------------------------------------------------------
# quadrature

@lru_cache(maxsize=64)
def _gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def composite_gauss(breaks: Sequence[float], order: int):
    """Gauss-Legendre nodes/weights on each sub-interval of ``breaks``."""
    x, w = _gauss_legendre(order)
    br = np.asarray(breaks, dtype=float)
    lo, hi = br[:-1, None], br[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + half * (x[None, :] + 1.0)).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


def graded_breaks(lo: float, hi: float, foci: Sequence[float] = (), width: float | None = None,
                  growth: float = 2.0, base: int = 4) -> np.ndarray:
    """Breakpoints on [lo, hi] refined geometrically around each focus.

    Around a focus c the points c +- width*growth^k are inserted; the rest of
    the interval is cut into ``base`` equal pieces.
    """
    pts = set(np.linspace(lo, hi, base + 1).tolist())
    if width is not None and width > 0:
        for c in foci:
            if not (lo <= c <= hi):
                continue
            pts.add(float(c))
            h = width
            while h < (hi - lo):
                for s in (c - h, c + h):
                    if lo < s < hi:
                        pts.add(float(s))
                h *= growth
    br = np.array(sorted(pts))
    keep = np.concatenate([[True], np.diff(br) > 1e-14 * (hi - lo)])
    return br[keep]


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes (ambient unit vectors) and positive weights on S^n.

    ``kind`` is ``"zonal-1D"``, ``"tensor-product"`` or ``"quasi-monte-carlo"``.
    A zonal rule carries one representative node per polar angle and is only
    valid for integrands that are zonal about ``center``.
    """

    kind: str
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    resolution: dict = field(default_factory=dict)
    center: np.ndarray | None = None

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def total_weight(self) -> float:
        return kernels.weighted_sum(np.ones_like(self.weights), self.weights)


def zonal_nodes(n: int, breaks=None, order: int = 24, lam: float | None = None,
                foci: Sequence[float] = ()):
    """Polar-angle nodes and weights for zonal integrals on S^n.

    Weights include omega_n sin^{n-1}(theta), so ``sum(w*g(theta))``
    approximates the integral of the zonal field g over S^n.  When ``lam`` is
    given the breakpoints are refined at scale 1/lam around theta = 0 (and
    around ``foci``).
    """
    if breaks is None:
        width = None if lam is None else 0.25 / lam
        breaks = graded_breaks(0.0, math.pi, (0.0, *foci), width, base=8)
    th, w = composite_gauss(breaks, order)
    w = w * omega(n) * np.sin(th) ** (n - 1)
    return th, w


def zonal_rule(n: int, center=None, order: int = 24, lam: float | None = None,
               breaks=None) -> QuadratureRule:
    """Zonal rule about ``center`` (default north pole)."""
    center = north_pole(n) if center is None else np.asarray(center, dtype=float)
    th, w = zonal_nodes(n, breaks=breaks, order=order, lam=lam)
    F = frame(center)
    nodes = np.outer(np.cos(th), F[:, 0]) + np.outer(np.sin(th), F[:, 1])
    return QuadratureRule("zonal-1D", n, nodes, w,
                          {"polar_nodes": int(th.size), "order": order}, center)


def zonal_integral(g: Callable[[np.ndarray], np.ndarray], n: int, order: int = 24,
                   lam: float | None = None, breaks=None) -> float:
    """omega_n * int_0^pi g(theta) sin^{n-1}(theta) d theta."""
    th, w = zonal_nodes(n, breaks=breaks, order=order, lam=lam)
    vals = np.asarray(g(th), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample("zonal integrand is not finite at some node")
    return kernels.weighted_sum(np.ascontiguousarray(vals), w)


def tensor_rule(n: int, rot=None, polar_breaks: Sequence | None = None, order: int = 16,
                inner: int = 16, n_phi: int = 32) -> QuadratureRule:
    """Tensor-product rule on S^n in hyperspherical coordinates.

    Polar angles theta_1..theta_{n-1} use composite Gauss-Legendre (breakpoints
    per axis from ``polar_breaks``; axes without breakpoints use ``inner``
    plain Gauss nodes) and the last angle is uniform with ``n_phi`` points.
    ``rot`` is an orthonormal frame; its first column is the rule's pole.
    """
    polar_breaks = list(polar_breaks or [])
    axes = []
    for k in range(n - 1):
        if k < len(polar_breaks) and polar_breaks[k] is not None:
            th, w = composite_gauss(polar_breaks[k], order)
        else:
            th, w = composite_gauss([0.0, math.pi], inner)
        axes.append((th, w * np.sin(th) ** (n - 1 - k)))
    phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    wphi = np.full(n_phi, 2.0 * math.pi / n_phi)
    grids = np.meshgrid(*[a[0] for a in axes], phi, indexing="ij")
    wgrids = np.meshgrid(*[a[1] for a in axes], wphi, indexing="ij")
    weights = np.ones_like(grids[0])
    for wg in wgrids:
        weights = weights * wg
    ang = [g.ravel() for g in grids]
    m = ang[0].size
    local = np.empty((m, n + 1))
    s = np.ones(m)
    for k in range(n - 1):
        local[:, k] = s * np.cos(ang[k])
        s = s * np.sin(ang[k])
    local[:, n - 1] = s * np.cos(ang[n - 1])
    local[:, n] = s * np.sin(ang[n - 1])
    if rot is not None:
        local = local @ np.asarray(rot, dtype=float).T
    res = {"polar_nodes": [int(a[0].size) for a in axes], "phi_nodes": n_phi, "order": order}
    center = None if rot is None else np.asarray(rot)[:, 0].copy()
    return QuadratureRule("tensor-product", n, local, weights.ravel(), res, center)


def qmc_rule(n: int, m: int = 2 ** 16, seed: int = 0) -> QuadratureRule:
    """Equal-weight rule from scrambled Sobol points pushed to S^n via normals."""
    eng = qmc.Sobol(d=n + 1, scramble=True, seed=seed)
    # draw a full power-of-two block (keeps the balance properties) and truncate
    u = eng.random_base2(max(0, math.ceil(math.log2(m))))[:m]
    z = special.ndtri(np.clip(u, 1e-16, 1 - 1e-16))
    nodes = z / np.linalg.norm(z, axis=1, keepdims=True)
    w = np.full(m, sphere_area(n) / m)
    return QuadratureRule("quasi-monte-carlo", n, nodes, w, {"points": m, "seed": seed})


def default_rule(n: int, **kw) -> QuadratureRule:
    """Tensor product up to n = 5, quasi-Monte-Carlo above."""
    if n <= 5:
        return tensor_rule(n, **kw)
    return qmc_rule(n, **{k: v for k, v in kw.items() if k in ("m", "seed")})


def sphere_integral(f: Callable[[np.ndarray], np.ndarray], rule: QuadratureRule) -> float:
    """Integral over S^n of ``f`` (called on an (M, n+1) node array)."""
    vals = np.asarray(f(rule.nodes), dtype=float)
    if vals.shape != rule.weights.shape:
        vals = np.broadcast_to(vals, rule.weights.shape)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample("integrand is not finite at some quadrature node")
    return kernels.weighted_sum(np.ascontiguousarray(vals, dtype=float), rule.weights)


def quasi_uniform_points(n: int, m: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy point set on S^n."""
    return qmc_rule(n, m=m, seed=seed).nodes
