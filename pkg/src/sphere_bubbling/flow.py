"""Reduced gradient flow on the bubble parameters (a_i, lam_i).

The flow descends the reduced energy ``E = leading + laplacian + interaction``
of :mod:`sphere_bubbling.functional` restricted to the alpha-equilibrium
slice ``alpha_i ~ K(a_i)^{-(n-2gamma)/(4gamma)}``.  Velocities are

    d log lam_i / ds = w^lam_i G^lam_i,     G^lam_i = -(1/alpha_i) dE/dlog lam_i
    d a_i / ds       = w^a_i   G^a_i,       G^a_i   = -(1/(alpha_i lam_i)) grad_{a_i} E

with nonnegative pseudogradient weights ``w``, so E is non-increasing along
every trajectory.  The leading parts of G^lam and G^a are the gradient
expansions of :mod:`sphere_bubbling.functional`.  Derivatives of E are taken
by complex-step differentiation, which is exact to rounding for this
analytic function.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bubbles import (BubbleConfiguration, BubbleParams, ConstantsTable, constants_table,
                      make_configuration)
from .catalog import InfinityPoint
from .curvature import CurvatureField
from .errors import AmbiguousMatch, StepFailure
from .geometry import ProblemParams, exp_map, geodesic_distance, tangent_basis

REGIMES = ("interior", "near-critical", "concentrating")
EVENT_KINDS = ("Concentration", "StallNearInterior", "CenterCollision", "TimeLimit")
CSTEP = 1e-30


# ---------------------------------------------------------------------------
# states and results

@dataclass(frozen=True)
class FlowState:
    s: float
    config: BubbleConfiguration
    regime: str = "interior"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")


@dataclass(frozen=True)
class Escape:
    """Sentinel: the final centres match no critical point at infinity."""

    reason: str = "no match"

    def to_dict(self):
        return {"escape": self.reason}


@dataclass
class FlowEvent:
    kind: str
    s: float
    target: InfinityPoint | None = None
    lambda_comparability: float = 1.0
    center_errors: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "s": float(self.s),
                "target": None if self.target is None else self.target.to_dict(),
                "lambda_comparability": float(self.lambda_comparability),
                "center_errors": [float(e) for e in self.center_errors],
                "message": self.message}


@dataclass
class Trajectory:
    params: ProblemParams
    s: list = field(default_factory=list)
    centers: list = field(default_factory=list)
    lams: list = field(default_factory=list)
    regimes: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    max_log_rate: float = 0.0
    steps: int = 0
    rejected: int = 0

    def append(self, s, centers, lams, regime, energy):
        self.s.append(float(s))
        self.centers.append(np.array(centers))
        self.lams.append(np.array(lams))
        self.regimes.append(regime)
        self.energy.append(float(energy))

    @property
    def final_centers(self) -> np.ndarray:
        return self.centers[-1]

    @property
    def final_lams(self) -> np.ndarray:
        return self.lams[-1]

    def columns(self) -> list:
        p = len(self.lams[0]) if self.lams else 0
        d = self.params.n + 1
        cols = ["s"]
        for i in range(p):
            cols += [f"a{i + 1}_x{k + 1}" for k in range(d)] + [f"lambda{i + 1}"]
        return cols + ["regime", "J"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns())
        for s, C, L, r, e in zip(self.s, self.centers, self.lams, self.regimes, self.energy):
            row = ["%.17g" % s]
            for c, l in zip(C, L):
                row += ["%.17g" % v for v in c] + ["%.17g" % l]
            w.writerow(row + [r, "%.17g" % e])
        return buf.getvalue()


@dataclass(frozen=True)
class FlowSettings:
    lam_max: float = 1e3
    lam_min: float = 1.0
    s_max: float = 1e5
    match_radius: float = 0.1
    collision_radius: float = 1e-3
    sample_interval: float = 50.0
    rtol: float = 1e-8
    atol: float = 1e-10
    h0: float = 1e-2
    max_steps: int = 200_000
    regime_C: float = 10.0
    grad_threshold: float = 2.0  # 2/c^2 with c = 1
    concentrating_lambda: float = 100.0


# ---------------------------------------------------------------------------
# reduced energy on the alpha-equilibrium slice

def alpha_equilibrium(centers, K: CurvatureField, S: float, params: ProblemParams) -> np.ndarray:
    """alpha_i = K(a_i)^{-(n-2gamma)/(4gamma)}, normalised so that sum alpha_i^2 S = 1."""
    Kc = np.atleast_1d(K.value(np.atleast_2d(centers)))
    e = (params.n - 2.0 * params.gamma) / (4.0 * params.gamma)
    a = Kc ** (-e)
    return a / np.sqrt(np.sum(a * a) * S)


def _energy(C, lam, K: CurvatureField, params: ProblemParams, ct: ConstantsTable):
    """Reduced energy at centres C (p, n+1) and concentrations lam; complex-step safe."""
    n, g = params.n, params.gamma
    two_star = params.critical_exponent
    pexp = params.gradient_exponent
    beta = (n - 2.0 * g) / n
    q = params.bubble_exponent
    S = ct.S
    Kc = K.value(C)
    dK = K.laplacian(C)
    a = Kc ** (-(n - 2.0 * g) / (4.0 * g))
    a = a / np.sqrt(np.sum(a * a) * S)
    G1 = np.sum(a ** two_star * Kc) * S
    G2 = np.sum(a * a) * S
    lead = G2 / G1 ** beta
    lap = -lead * beta * (2.0 / n) * (ct.c2 / G1) * np.sum(a ** two_star * dK / lam ** 2)
    p = C.shape[0]
    inter = 0.0
    if p > 1:
        D = C[:, None, :] - C[None, :, :]
        h = 0.25 * np.sum(D * D, axis=-1)
        Li, Lj = lam[:, None], lam[None, :]
        G = Li / Lj + Lj / Li + Li * Lj * h
        iu = ~np.eye(p, dtype=bool)
        eps = np.where(iu, G, 1.0) ** (-q)
        b = a[:, None] * a[None, :] / G2 - 2.0 * (a ** pexp * Kc)[:, None] * a[None, :] / G1
        inter = lead * ct.interaction_coefficient * np.sum(np.where(iu, eps * b, 0.0))
    return lead + lap + inter, a


def reduced_energy(centers, lams, K, params, constants=None) -> float:
    ct = constants or constants_table(params)
    E, _ = _energy(np.atleast_2d(np.asarray(centers, dtype=float)),
                   np.atleast_1d(np.asarray(lams, dtype=float)), K, params, ct)
    return float(np.real(E))


def reduced_gradient(centers, lams, K, params, constants=None):
    """(G_lam, G_a, alpha): the un-weighted reduced velocities and the equilibrium alpha.

    ``G_lam[i] = -(1/alpha_i) dE/dlog lam_i`` and
    ``G_a[i] = -(1/(alpha_i lam_i)) grad_{a_i} E`` (ambient tangent vectors).
    """
    ct = constants or constants_table(params)
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    L = np.atleast_1d(np.asarray(lams, dtype=float))
    p, d = C.shape
    E0, alpha = _energy(C, L, K, params, ct)
    alpha = np.real(alpha)
    Gl = np.empty(p)
    Ga = np.zeros((p, d))
    for i in range(p):
        Lc = L.astype(complex)
        Lc[i] = L[i] * np.exp(1j * CSTEP)
        dE = np.imag(_energy(C, Lc, K, params, ct)[0]) / CSTEP
        Gl[i] = -dE / alpha[i]
        B = tangent_basis(C[i])
        g = np.empty(d - 1)
        for k in range(d - 1):
            Cc = C.astype(complex)
            Cc[i] = C[i] + 1j * CSTEP * B[:, k]
            g[k] = np.imag(_energy(Cc, L.astype(complex), K, params, ct)[0]) / CSTEP
        Ga[i] = -(B @ g) / (alpha[i] * L[i])
    return Gl, Ga, alpha


def _smoothstep(x):
    x = min(max(x, 0.0), 1.0)
    return x * x * (3.0 - 2.0 * x)


def pseudogradient_regimes(state: FlowState, K: CurvatureField, params: ProblemParams,
                           C: float = 10.0, threshold: float = 2.0,
                           concentrating_lambda: float = 100.0, constants=None, G_lam=None):
    """Regime tag and per-bubble channel weights.

    * centre channel: always on (weight 1); it dominates when
      ``lam |grad K| >= threshold``.
    * lambda channel: weight 1 while ``lam |grad K| <= threshold``, fading to 0
      at twice the threshold.  Its sign is that of the curvature term: increase
      near maxima with -Delta K > 0, decrease where Delta K > 0.
    * interaction branch: when ``sum_{j != i} eps_ij > C / lam_i^2`` the lambda
      channel of the largest offending lambda is switched on.

    Returns ``(tag, weights)`` with ``weights`` a list of dicts.
    """
    cfg = state.config
    p = cfg.p
    lams = cfg.lams
    cs = cfg.centers
    r = np.array([lams[i] * np.linalg.norm(K.grad(cs[i])) for i in range(p)])
    w_lam = np.array([1.0 - _smoothstep(ri / threshold - 1.0) for ri in r])
    branch = [False] * p
    if p > 1:
        from .bubbles import epsilon_conformal

        sums = np.array([sum(epsilon_conformal(cfg.bubbles[i], cfg.bubbles[j], params)
                             for j in range(p) if j != i) for i in range(p)])
        ratio = sums * lams ** 2 / C
        offending = [i for i in range(p) if ratio[i] > 1.0]
        if offending:
            k = max(offending, key=lambda i: lams[i])
            w_lam[k] = max(w_lam[k], _smoothstep(ratio[k] - 1.0))
            branch[k] = True
    if G_lam is None:
        G_lam = reduced_gradient(cs, lams, K, params, constants)[0]
    near = bool(np.all(r <= threshold))
    if any(branch):
        tag = "interior"
    elif near and np.all(G_lam > 0) and lams.min() >= concentrating_lambda:
        tag = "concentrating"
    elif near:
        tag = "near-critical"
    else:
        tag = "interior"
    weights = [{"center": 1.0, "lambda": float(w_lam[i]),
                "lambda_sign": int(np.sign(G_lam[i])), "interaction_branch": branch[i]}
               for i in range(p)]
    return tag, weights


def reduced_velocity(state: FlowState, K: CurvatureField, params: ProblemParams,
                     constants=None, settings: FlowSettings | None = None):
    """(a_dot (p, n+1) tangent vectors, lam_dot/lam (p,)) at ``state``."""
    st = settings or FlowSettings()
    cfg = state.config
    Gl, Ga, _ = reduced_gradient(cfg.centers, cfg.lams, K, params, constants)
    _, weights = pseudogradient_regimes(state, K, params, st.regime_C, st.grad_threshold,
                                        st.concentrating_lambda, constants, G_lam=Gl)
    wl = np.array([w["lambda"] for w in weights])
    wa = np.array([w["center"] for w in weights])
    return Ga * wa[:, None], Gl * wl


# ---------------------------------------------------------------------------
# integrator

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4
# quartic continuous extension of the pair (coefficients of sigma^1..sigma^4)
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


def dopri_step(f, t, y, h, k1=None, return_stages=False):
    """One Dormand-Prince step: (y5, error estimate, k7) with FSAL reuse of k1.

    With ``return_stages`` the seven stage derivatives are appended, for use
    with :func:`dense_output`.
    """
    ks = [f(t, y) if k1 is None else k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(t + _C[i] * h, yi))
    y5 = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    if return_stages:
        return y5, err, ks[-1], np.array(ks)
    return y5, err, ks[-1]


def dense_output(y, h, stages, sigma):
    """State at ``t + sigma h`` (0 <= sigma <= 1) inside an accepted step."""
    sig = sigma ** np.arange(1, 5)
    return y + h * (stages.T @ (_P @ sig))


def _pack(C, L):
    return np.concatenate([C.ravel(), np.log(L)])


def _unpack(y, p, d):
    C = y[:p * d].reshape(p, d)
    C = C / np.linalg.norm(C, axis=1, keepdims=True)
    return C, np.exp(y[p * d:])


def _match(centers, Iplus, radius):
    """Greedy nearest matching of centres to distinct I^+ points within ``radius``."""
    used, errs, targets = set(), [], []
    for c in centers:
        best, bd = None, math.inf
        for k, y in enumerate(Iplus):
            if k in used:
                continue
            dd = geodesic_distance(c, y.location)
            if dd < bd:
                best, bd = k, dd
        if best is None or bd > radius:
            return None, errs
        used.add(best)
        errs.append(bd)
        targets.append(Iplus[best])
    return targets, errs


def integrate_flow(initial: FlowState, K: CurvatureField, params: ProblemParams,
                   Iplus: Sequence = (), catalog: Sequence[InfinityPoint] = (),
                   settings: FlowSettings | None = None, constants=None):
    """Integrate the reduced flow from ``initial`` until an event fires.

    Returns ``(trajectory, event)``.  Samples are taken every
    ``settings.sample_interval`` from the continuous extension of the
    accepted steps, plus the initial and final states.

    Raises
    ------
    StepFailure
        On step-size underflow or too many steps; carries the last state.
    """
    st = settings or FlowSettings()
    ct = constants or constants_table(params)
    cfg = initial.config
    p, d = cfg.p, params.n + 1
    traj = Trajectory(params)

    def rhs(t, y):
        C, L = _unpack(y, p, d)
        state = FlowState(t, BubbleConfiguration(np.ones(p), tuple(BubbleParams(c, l) for c, l in zip(C, L))))
        adot, ldot = reduced_velocity(state, K, params, ct, st)
        return np.concatenate([adot.ravel(), ldot])

    def record(t, y):
        C, L = _unpack(y, p, d)
        c = BubbleConfiguration(np.ones(p), tuple(BubbleParams(x, l) for x, l in zip(C, L)))
        tag, _ = pseudogradient_regimes(FlowState(t, c), K, params, st.regime_C, st.grad_threshold,
                                        st.concentrating_lambda, ct)
        traj.append(t, C, L, tag, reduced_energy(C, L, K, params, ct))
        return C, L, tag

    y = _pack(cfg.centers, cfg.lams)
    t = float(initial.s)
    h = st.h0
    record(t, y)
    next_sample = t + st.sample_interval
    k1 = None
    event = None
    while event is None:
        if traj.steps + traj.rejected > st.max_steps:
            raise StepFailure("maximum number of steps exceeded", _last_state(traj))
        h_try = min(h, st.s_max - t)
        y_new, err, k7, ks = dopri_step(rhs, t, y, h_try, k1, return_stages=True)
        scale = st.atol + st.rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / scale) ** 2)))
        if not np.isfinite(en):
            en = 1e10
        if en <= 1.0:
            # fixed-interval samples from the continuous extension
            while next_sample < t + h_try - 1e-12 * max(1.0, abs(t)):
                record(next_sample, dense_output(y, h_try, ks, (next_sample - t) / h_try))
                next_sample += st.sample_interval
            t += h_try
            C, L = _unpack(y_new, p, d)
            y = _pack(C, L)  # centres back on the sphere
            k1 = k7  # the projection moves y by rounding only, so FSAL reuse is kept
            traj.steps += 1
            traj.max_log_rate = max(traj.max_log_rate, float(np.abs(k7[p * d:]).max()))
            fac = 0.9 * en ** -0.2 if en > 0 else 5.0
            h = h_try * min(5.0, max(0.2, fac))
            if abs(t - next_sample) <= 1e-12 * max(1.0, abs(t)) or t >= st.s_max:
                record(t, y)
                next_sample = t + st.sample_interval
            event = _check_events(t, p, L, C, st, Iplus, catalog, float(np.abs(k7).max()))
        else:
            traj.rejected += 1
            h = h_try * max(0.2, 0.9 * en ** -0.25)
            if h < 1e-12 * max(1.0, abs(t)):
                raise StepFailure(f"step size underflow at s = {t!r}", _last_state(traj))
    if traj.s[-1] != t:
        record(t, y)
    return traj, event


def _last_state(traj: Trajectory):
    C, L = traj.final_centers, traj.final_lams
    cfg = BubbleConfiguration(np.ones(len(L)), tuple(BubbleParams(c, l) for c, l in zip(C, L)))
    return FlowState(traj.s[-1], cfg, traj.regimes[-1])


def _check_events(t, p, L, C, st, Iplus, catalog, speed):
    comp = float(L.max() / L.min())
    for i in range(p):
        for j in range(i):
            if geodesic_distance(C[i], C[j]) < st.collision_radius:
                return FlowEvent("CenterCollision", t, None, comp, [], f"bubbles {j + 1} and {i + 1} collide")
    if L.min() >= st.lam_max:
        targets, errs = _match(C, list(Iplus), st.match_radius)
        if targets is not None:
            target = _find_point(catalog, targets)
            return FlowEvent("Concentration", t, target, comp, errs)
    if L.min() < st.lam_min:
        return FlowEvent("StallNearInterior", t, None, comp, [],
                         f"lambda fell below {st.lam_min!r}")
    if speed < 1e-14:
        return FlowEvent("StallNearInterior", t, None, comp, [], "velocity vanished")
    if t >= st.s_max:
        return FlowEvent("TimeLimit", t, None, comp, [], "s_max reached")
    return None


def _find_point(catalog, targets):
    labels = sorted(m.label for m in targets)
    for x in catalog:
        if sorted(x.labels) == labels:
            return x
    return None


def classify_limit(trajectory: Trajectory, catalog: Sequence[InfinityPoint], Iplus: Sequence,
                   match_radius: float = 0.1):
    """The InfinityPoint whose members match the final centres, or :class:`Escape`.

    Raises
    ------
    AmbiguousMatch
        If two I^+ points lie within ``2 * match_radius`` of one final centre.
    """
    C = trajectory.final_centers
    for c in C:
        close = [y for y in Iplus if geodesic_distance(c, y.location) < 2.0 * match_radius]
        if len(close) > 1:
            raise AmbiguousMatch("two I^+ points are within twice the match radius of a centre")
    targets, _ = _match(C, list(Iplus), match_radius)
    if targets is None:
        return Escape("a final centre is not within the match radius of a distinct I^+ point")
    point = _find_point(catalog, targets)
    return point if point is not None else Escape("matched tuple is not in the catalog")


# ---------------------------------------------------------------------------
# initial placements and ensembles

def near_placement(Iplus: Sequence, p: int, lam0: float, radius: float, rng) -> FlowState:
    """p bubbles, bubble i at a uniform random direction and a uniform random
    geodesic distance in (0, radius] from the i-th point of ``Iplus``."""
    if p > len(Iplus):
        raise ValueError(f"p = {p} bubbles need at least {p} points in I^+, found {len(Iplus)}")
    centers = []
    for y in Iplus[:p]:
        a = np.asarray(getattr(y, "location", y), dtype=float)
        B = tangent_basis(a)
        u = rng.standard_normal(B.shape[1])
        r = radius * (1.0 - rng.random())
        centers.append(exp_map(a, r * (B @ u) / np.linalg.norm(u)))
    return FlowState(0.0, make_configuration(centers, [lam0] * p))


def ensemble_placements(Iplus: Sequence, p: int, lam0: float, radius: float, seed: int,
                        count: int) -> list:
    """``count`` independent placements; trajectory k uses the stream (seed, k)."""
    return [near_placement(Iplus, p, lam0, radius, np.random.default_rng([seed, k]))
            for k in range(count)]


def run_ensemble(initials: Sequence[FlowState], K: CurvatureField, params: ProblemParams,
                 Iplus: Sequence = (), catalog: Sequence[InfinityPoint] = (),
                 settings: FlowSettings | None = None, constants=None, threads: int = 1) -> list:
    """Integrate every initial state; results ``(trajectory, event)`` keep input order.

    Failures are returned in place as the raised :class:`StepFailure`.
    Trajectories share no mutable state, so ``threads > 1`` only changes
    the wall time.
    """
    ct = constants or constants_table(params)

    def one(init):
        try:
            return integrate_flow(init, K, params, Iplus, catalog, settings, ct)
        except StepFailure as exc:
            return exc

    if threads <= 1 or len(initials) <= 1:
        return [one(x) for x in initials]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, initials))
