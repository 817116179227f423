"""Prescribed curvature fields K on S^n and their critical points.

A field is a parsed expression in the ambient coordinates x1..x{n+1}.  All
sphere-intrinsic quantities are obtained from the ambient derivatives:

* gradient: tangential projection ``(I - a a^T) grad K``;
* Hessian in ``tangent_basis(a)``: ``B^T (D^2 K - (a . grad K) I) B``;
* Laplace-Beltrami: ``tr D^2 K - a^T D^2 K a - n (a . grad K)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import expression as ex
from .errors import DegenerateCritical, LaplacianDegenerate, PositivityViolation
from .geometry import ProblemParams, exp_map, quasi_uniform_points, tangent_basis

PROBE_POINTS = 10_000
DEGENERACY_TOL = 1e-8
MERGE_RADIUS = 1e-6
RESIDUAL_TOL = 1e-10


def _arr(X):
    X = np.asarray(X)
    return X if np.iscomplexobj(X) else X.astype(float, copy=False)


class CurvatureField:
    """A positive curvature candidate K on S^n.

    Parameters
    ----------
    text : str
        Expression over x1..x{n+1}.
    params : ProblemParams
    probe : int
        Number of quasi-uniform points used for the positivity probe; 0 skips it.
    """

    def __init__(self, text: str, params: ProblemParams, probe: int = PROBE_POINTS, seed: int = 0):
        self.text = text
        self.params = params
        self.dim = params.n + 1
        self.tree = ex.parse(text, self.dim)
        self._f = ex.compile_expr(self.tree)
        dtrees = [ex.diff(self.tree, i) for i in range(self.dim)]
        self._df = [ex.compile_expr(t) for t in dtrees]
        self._d2f = [[None] * self.dim for _ in range(self.dim)]
        for i in range(self.dim):
            for j in range(i, self.dim):
                fn = ex.compile_expr(ex.diff(dtrees[i], j))
                self._d2f[i][j] = self._d2f[j][i] = fn
        self.probe_min = None
        if probe:
            self._probe(probe, seed)

    def __repr__(self):
        return f"CurvatureField({self.text!r}, n={self.params.n})"

    def _probe(self, m: int, seed: int):
        X = quasi_uniform_points(self.params.n, m, seed)
        v = self.value(X)
        bad = ~np.isfinite(v) | (v <= 0)
        if np.any(bad):
            k = int(np.flatnonzero(bad)[0]) if np.any(~np.isfinite(v)) else int(np.argmin(v))
            raise PositivityViolation(
                f"K is not positive on S^{self.params.n}: K = {float(v[k]):.17g} at a probe point",
                X[k].copy(), float(v[k]))
        k = int(np.argmin(v))
        self.probe_min = float(v[k])

    # ambient derivatives (complex input is allowed for complex-step use) --
    def value(self, X):
        return self._f(_arr(X))

    def ambient_grad(self, X) -> np.ndarray:
        X = _arr(X)
        return np.stack([f(X) for f in self._df], axis=-1)

    def ambient_hess(self, X) -> np.ndarray:
        X = _arr(X)
        rows = [np.stack([self._d2f[i][j](X) for j in range(self.dim)], axis=-1)
                for i in range(self.dim)]
        return np.stack(rows, axis=-2)

    # sphere-intrinsic ----------------------------------------------------
    def grad(self, a) -> np.ndarray:
        """Riemannian gradient as an ambient tangent vector (batched over rows)."""
        a = np.asarray(a, dtype=float)
        g = self.ambient_grad(a)
        return g - np.sum(g * a, axis=-1, keepdims=True) * a

    def hess(self, a) -> np.ndarray:
        """n x n Riemannian Hessian in ``tangent_basis(a)``."""
        a = np.asarray(a, dtype=float)
        H = self.ambient_hess(a)
        g = self.ambient_grad(a)
        B = tangent_basis(a)
        M = H - float(a @ g) * np.eye(self.dim)
        out = B.T @ M @ B
        return 0.5 * (out + out.T)

    def laplacian(self, a):
        """Laplace-Beltrami of K at ``a`` (batched over rows)."""
        a = _arr(a)
        H = self.ambient_hess(a)
        g = self.ambient_grad(a)
        tr = np.trace(H, axis1=-2, axis2=-1)
        aHa = np.einsum("...i,...ij,...j->...", a, H, a)
        return tr - aHa - self.params.n * np.sum(a * g, axis=-1)


def parse_curvature(text: str, params: ProblemParams, probe: int = PROBE_POINTS,
                    seed: int = 0) -> CurvatureField:
    """Parse ``text`` into a :class:`CurvatureField` and run the positivity probe.

    Raises
    ------
    ExpressionSyntaxError
        Malformed text (carries the character position).
    ArityError
        Wrong number of function arguments.
    PositivityViolation
        K <= 0 (or non-finite) at some probe point; the witness is attached.
    """
    return CurvatureField(text, params, probe=probe, seed=seed)


def grad_sphere(K: CurvatureField, a) -> np.ndarray:
    return K.grad(a)


def hess_sphere(K: CurvatureField, a) -> np.ndarray:
    return K.hess(a)


def laplace_beltrami(K: CurvatureField, a) -> float:
    return float(K.laplacian(np.asarray(a, dtype=float)))


# ---------------------------------------------------------------------------
# critical points

@dataclass(frozen=True)
class CriticalPointRecord:
    """A non-degenerate critical point of K."""

    location: np.ndarray
    index: int
    laplacian: float
    in_I_plus: bool
    residual: float
    K_value: float
    hessian_eigenvalues: np.ndarray = field(repr=False, default=None)
    label: str = ""

    def to_dict(self) -> dict:
        return {"label": self.label, "location": [float(v) for v in self.location],
                "index": int(self.index), "laplacian": float(self.laplacian),
                "in_I_plus": bool(self.in_I_plus), "K_value": float(self.K_value),
                "residual": float(self.residual)}


@dataclass
class SearchStats:
    starts: int
    converged: int
    failed: int
    distinct: int


def _batch_tangent_basis(X: np.ndarray) -> np.ndarray:
    """tangent_basis for each row of X: array (m, n+1, n)."""
    m, d = X.shape
    V = -X.copy()
    V[:, -1] += 1.0
    vv = np.einsum("ij,ij->i", V, V)
    safe = np.where(vv < 1e-300, 1.0, vv)
    H = np.eye(d)[None] - (2.0 / safe)[:, None, None] * V[:, :, None] * V[:, None, :]
    H[vv < 1e-300] = np.eye(d)
    return H[:, :, :-1]


def _batch_derivs(K: CurvatureField, X):
    B = _batch_tangent_basis(X)
    g_amb = K.ambient_grad(X)
    H_amb = K.ambient_hess(X)
    ag = np.einsum("ij,ij->i", X, g_amb)
    g = np.einsum("mij,mi->mj", B, g_amb)
    M = H_amb - ag[:, None, None] * np.eye(K.dim)[None]
    H = np.einsum("mia,mij,mjb->mab", B, M, B)
    H = 0.5 * (H + np.transpose(H, (0, 2, 1)))
    return B, g, H


def _newton_search(K: CurvatureField, X0: np.ndarray, max_iter: int = 200,
                   radius: float = 0.5):
    """Batched Levenberg-Marquardt on |grad K|^2 / 2 with exp-map retraction."""
    X = X0.copy()
    m = X.shape[0]
    mu = np.full(m, 1e-3)
    rad = np.full(m, radius)
    active = np.ones(m, dtype=bool)
    B, g, H = _batch_derivs(K, X)
    gn = np.linalg.norm(g, axis=1)
    scale = np.maximum(1.0, np.abs(K.value(X)))
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        lam_, Q = np.linalg.eigh(H[idx])
        gq = np.einsum("mij,mi->mj", Q, g[idx])
        sq = -lam_ * gq / (lam_ ** 2 + mu[idx, None] * (gn[idx, None] + 1e-300))
        s = np.einsum("mij,mj->mi", Q, sq)
        sn = np.linalg.norm(s, axis=1)
        cap = np.minimum(1.0, rad[idx] / np.maximum(sn, 1e-300))
        s *= cap[:, None]
        V = np.einsum("mij,mj->mi", B[idx], s)
        Xn = np.empty_like(X[idx])
        for r, (x, v) in enumerate(zip(X[idx], V)):
            Xn[r] = exp_map(x, v)
        Bn, gn_, Hn = _batch_derivs(K, Xn)
        gnn = np.linalg.norm(gn_, axis=1)
        ok = gnn < gn[idx]
        acc = idx[ok]
        X[acc], B[acc], g[acc], H[acc], gn[acc] = Xn[ok], Bn[ok], gn_[ok], Hn[ok], gnn[ok]
        mu[acc] = np.maximum(mu[acc] * 0.1, 1e-12)
        rej = idx[~ok]
        mu[rej] *= 10.0
        rad[rej] *= 0.5
        done = gn <= 1e-13 * scale
        stuck = (rad < 1e-14) | (mu > 1e12)
        active &= ~(done | stuck)
    return X, gn


def _merge(points: np.ndarray, radius: float) -> list:
    reps: list = []
    for x in points:
        for r in reps:
            if math.atan2(np.linalg.norm(x - (x @ r) * r), x @ r) < radius:
                break
        else:
            reps.append(x)
    return reps


def _polish(K: CurvatureField, y: np.ndarray, steps: int = 4) -> np.ndarray:
    for _ in range(steps):
        B = tangent_basis(y)
        g = B.T @ K.grad(y)
        if np.linalg.norm(g) == 0.0:
            break
        H = K.hess(y)
        try:
            s = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            break
        y_new = exp_map(y, B @ s)
        if np.linalg.norm(tangent_basis(y_new).T @ K.grad(y_new)) <= np.linalg.norm(g):
            y = y_new
        else:
            break
    return y


def find_critical_points(K: CurvatureField, n_starts: int = 512, seed: int = 0,
                         merge_radius: float = MERGE_RADIUS, tol: float = DEGENERACY_TOL,
                         return_stats: bool = False):
    """All non-degenerate critical points of K reachable from a multistart.

    Starts are scrambled Sobol points pushed to S^n.  Each start runs a
    trust-region Levenberg-Marquardt iteration on |grad K|^2/2; converged
    points are merged within ``merge_radius`` in start order and polished by
    plain Newton steps.

    Raises
    ------
    DegenerateCritical
        A Hessian eigenvalue is below ``tol`` times the field scale.
    LaplacianDegenerate
        |Delta K| is below the same threshold at a critical point.
    """
    n = K.params.n
    X0 = quasi_uniform_points(n, n_starts, seed)
    X, gn = _newton_search(K, X0)
    scale_pts = np.maximum(1.0, np.abs(K.value(X)))
    conv = gn <= 1e-9 * scale_pts
    reps = _merge(X[conv], merge_radius)
    records = []
    for y in reps:
        y = _polish(K, y)
        res = float(np.linalg.norm(K.grad(y)))
        H = K.hess(y)
        eig = np.linalg.eigvalsh(H)
        Kv = float(K.value(y))
        scale = max(float(np.abs(K.ambient_hess(y)).max()), abs(Kv))
        thr = tol * scale
        if np.min(np.abs(eig)) < thr:
            raise DegenerateCritical(
                f"degenerate critical point: Hessian eigenvalue {float(eig[np.argmin(np.abs(eig))]):.3e}", y)
        lap = float(K.laplacian(y))
        if abs(lap) < thr:
            raise LaplacianDegenerate(f"Laplacian {float(lap):.3e} vanishes at a critical point", y)
        records.append(CriticalPointRecord(y, int(np.sum(eig < 0)), lap, bool(-lap > 0), res, Kv,
                                           eig))
    records = _merge_records(records, merge_radius)
    records.sort(key=lambda r: (-r.K_value, tuple(np.round(-r.location, 12))))
    records = [CriticalPointRecord(r.location, r.index, r.laplacian, r.in_I_plus, r.residual,
                                   r.K_value, r.hessian_eigenvalues, f"y{i + 1}")
               for i, r in enumerate(records)]
    if return_stats:
        stats = SearchStats(n_starts, int(conv.sum()), int((~conv).sum()), len(records))
        return records, stats
    return records


def _merge_records(records, radius):
    out = []
    for r in records:
        if all(math.atan2(np.linalg.norm(r.location - (r.location @ s.location) * s.location),
                          r.location @ s.location) >= radius for s in out):
            out.append(r)
    return out


def classify_Iplus(records: Sequence[CriticalPointRecord]) -> list:
    """Records with -Delta K > 0, by descending K value (ties by location)."""
    sel = [r for r in records if r.in_I_plus]
    sel.sort(key=lambda r: (-r.K_value, tuple(np.round(-r.location, 12))))
    return sel


def euler_checksum(records: Sequence[CriticalPointRecord]) -> int:
    """sum (-1)^ind over the records; equals chi(S^n) for a Morse function."""
    return int(sum((-1) ** r.index for r in records))
