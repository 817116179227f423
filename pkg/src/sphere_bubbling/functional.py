"""The functional J on bubble sums and its asymptotic expansions.

``J(u) = <u, u> / (int K u^{2^*})^{(n-2gamma)/n}``.  For ``u = sum alpha_i delta_i``
the numerator is assembled from the closed-form pairings and the denominator
by quadrature.  The expansion side uses

* ``Gamma_1 = sum alpha_i^{2^*} K(a_i) S`` and ``Gamma_2 = sum alpha_i^2 S``;
* leading term ``Gamma_2 / Gamma_1^beta`` with ``beta = (n-2gamma)/n``;
* Laplacian term ``-lead * beta * (2/n) * (c_2/Gamma_1) * sum alpha_i^{2^*} Delta K(a_i)/lam_i^2``;
* interaction term ``lead * sum_{i != j} C eps_ij (alpha_i alpha_j/Gamma_2 - 2 alpha_i^p alpha_j K(a_i)/Gamma_1)``
  with ``C = c_0^{2^*} c_1 omega_n`` and the conformal interaction quantity.

The sum ``E = lead + laplacian + interaction`` is the reduced energy; the
gradient expansions below are its exact derivatives along the bubble
parameters, so that the reduced flow is a descent flow for ``E``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

from .bubbles import (BubbleConfiguration, BubbleParams, ConstantsTable, bubble_value,
                      constants_table, epsilon_conformal, epsilon_derivative_lambda,
                      epsilon_grad_center, epsilon_ij, interaction_integral)
from .curvature import CurvatureField
from .errors import StepTooLarge
from .geometry import (ProblemParams, exp_map, frame, geodesic_distance, graded_breaks,
                       sphere_integral, tensor_rule)

REGIME_EPS = 0.1
REGIME_LAMBDA = 10.0


@dataclass(frozen=True)
class QuadratureSettings:
    """Resolution of the denominator quadrature (tensor rule per bubble)."""

    order: int = 16
    inner: int = 12
    n_phi: int = 12
    grading: float = 0.25


DEFAULT_QUAD = QuadratureSettings()


# ---------------------------------------------------------------------------
# numeric side

def _rules_for(config: BubbleConfiguration, params: ProblemParams, quad: QuadratureSettings):
    n = params.n
    cs, ls = config.centers, config.lams
    lam_big = max(float(ls.max()), float((1.0 / ls).max()))
    out = []
    for i in range(config.p):
        others = [k for k in range(config.p) if k != i]
        dists = [geodesic_distance(cs[i], cs[k]) for k in others]
        near = others[int(np.argmin(dists))] if others else None
        F = frame(cs[i], None if near is None else cs[near])
        br1 = graded_breaks(0.0, math.pi, (0.0, *dists), quad.grading / lam_big, base=8)
        breaks = [br1]
        if near is not None and n >= 3:
            sd = max(math.sin(min(dists)), 1e-12)
            w2 = min(1.0, quad.grading / (max(ls[near], 1.0 / ls[near]) * sd))
            breaks.append(graded_breaks(0.0, math.pi, (0.0,), w2, base=4))
        out.append(tensor_rule(n, rot=F, polar_breaks=breaks, order=quad.order,
                               inner=quad.inner, n_phi=quad.n_phi))
    return out


def curvature_integral(config: BubbleConfiguration, K: CurvatureField, params: ProblemParams,
                       quad: QuadratureSettings = DEFAULT_QUAD) -> float:
    """int K u^{2^*} over S^n, split by the partition w_i = delta_i^{2^*}/sum delta_k^{2^*}."""
    two_star = params.critical_exponent
    rules = _rules_for(config, params, quad)
    total = []
    for i, rule in enumerate(rules):
        def f(X, i=i):
            vals = np.stack([bubble_value(b, X, params) for b in config.bubbles])
            u = config.alpha @ vals
            if config.p == 1:
                return K.value(X) * u ** two_star
            d2 = vals ** two_star
            return K.value(X) * u ** two_star * d2[i] / d2.sum(axis=0)
        total.append(sphere_integral(f, rule))
    return math.fsum(total)


def energy_numerator(config: BubbleConfiguration, params: ProblemParams,
                     constants: ConstantsTable) -> float:
    """<u, u> = sum alpha_i^2 S + sum_{i != j} alpha_i alpha_j <delta_i, delta_j>."""
    a = config.alpha
    terms = [a[i] ** 2 * constants.S for i in range(config.p)]
    for i in range(config.p):
        for j in range(i + 1, config.p):
            terms.append(2.0 * a[i] * a[j] * interaction_integral(config.bubbles[i], config.bubbles[j], params))
    return math.fsum(terms)


def J_numeric(config: BubbleConfiguration, K: CurvatureField, params: ProblemParams,
              constants: ConstantsTable | None = None,
              quad: QuadratureSettings = DEFAULT_QUAD) -> float:
    """J(u) for u = sum alpha_i delta_i, numerator by pairings, denominator by quadrature."""
    ct = constants or constants_table(params)
    num = energy_numerator(config, params, ct)
    den = curvature_integral(config, K, params, quad)
    return num / den ** ((params.n - 2.0 * params.gamma) / params.n)


# ---------------------------------------------------------------------------
# expansion side

@dataclass
class ExpansionReport:
    """Term-by-term comparison of J with its asymptotic expansion."""

    p: int
    lams: list
    distances: list
    leading: float
    laplacian: float
    interaction: float
    remainder_scale: dict
    J_numeric: float | None = None
    abs_residual: float | None = None
    rel_residual: float | None = None
    in_regime: bool = True

    @property
    def total(self) -> float:
        return self.leading + self.laplacian + self.interaction

    def with_numeric(self, value: float) -> "ExpansionReport":
        r = ExpansionReport(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        r.J_numeric = float(value)
        r.abs_residual = abs(value - self.total)
        r.rel_residual = r.abs_residual / abs(value)
        return r

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d

    CSV_COLUMNS = ("p", "lams", "distances", "J_numeric", "leading", "laplacian",
                   "interaction", "residual")

    def csv_row(self) -> dict:
        return {"p": self.p, "lams": ";".join("%.17g" % v for v in self.lams),
                "distances": ";".join("%.17g" % v for v in self.distances),
                "J_numeric": "" if self.J_numeric is None else "%.17g" % self.J_numeric,
                "leading": "%.17g" % self.leading, "laplacian": "%.17g" % self.laplacian,
                "interaction": "%.17g" % self.interaction,
                "residual": "" if self.abs_residual is None else "%.17g" % self.abs_residual}


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ExpansionReport.CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


@dataclass(frozen=True)
class _Pieces:
    G1: float
    G2: float
    lead: float
    Kc: np.ndarray
    dK: np.ndarray
    eps: np.ndarray   # conformal eps, symmetric, zero diagonal
    b: np.ndarray     # bracket b_ij


def _pieces(config, K, params, ct) -> _Pieces:
    S = ct.S
    two_star = params.critical_exponent
    beta = (params.n - 2.0 * params.gamma) / params.n
    pexp = params.gradient_exponent
    a = config.alpha
    X = config.centers
    Kc = np.atleast_1d(K.value(X))
    dK = np.atleast_1d(K.laplacian(X))
    G1 = float(np.sum(a ** two_star * Kc) * S)
    G2 = float(np.sum(a ** 2) * S)
    lead = G2 / G1 ** beta
    p = config.p
    eps = np.zeros((p, p))
    bmat = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            if i != j:
                eps[i, j] = epsilon_conformal(config.bubbles[i], config.bubbles[j], params)
                bmat[i, j] = a[i] * a[j] / G2 - 2.0 * a[i] ** pexp * a[j] * Kc[i] / G1
    return _Pieces(G1, G2, lead, Kc, dK, eps, bmat)


def J_expansion(config: BubbleConfiguration, K: CurvatureField, params: ProblemParams,
                constants: ConstantsTable | None = None) -> ExpansionReport:
    """Leading, Laplacian and interaction terms of J at ``config``."""
    ct = constants or constants_table(params)
    two_star = params.critical_exponent
    beta = (params.n - 2.0 * params.gamma) / params.n
    pc = _pieces(config, K, params, ct)
    a, lams = config.alpha, config.lams
    lap = -pc.lead * beta * (2.0 / params.n) * (ct.c2 / pc.G1) * float(
        np.sum(a ** two_star * pc.dK / lams ** 2))
    inter = pc.lead * ct.interaction_coefficient * float(np.sum(pc.eps * pc.b))
    cs = config.centers
    dists = [geodesic_distance(cs[i], cs[j]) for i in range(config.p) for j in range(i + 1, config.p)]
    rem = {
        "sum_eps": float(np.sum(np.triu(pc.eps, 1))),
        "inv_lambda2": float(np.sum(1.0 / lams ** 2)),
        "grad_over_lambda": float(sum(np.linalg.norm(K.grad(c)) / l for c, l in zip(cs, lams))),
        "vbar_bound": vbar_norm_bound(config, K, params),
    }
    return ExpansionReport(config.p, [float(v) for v in lams], dists, pc.lead, lap, inter, rem,
                           in_regime=config.in_regime(params, REGIME_EPS, REGIME_LAMBDA))


def reduced_energy(config, K, params, constants=None) -> float:
    """E = leading + laplacian + interaction (the expansion total)."""
    return J_expansion(config, K, params, constants).total


def lambda_of_u(config, K, params, constants=None) -> float:
    """lambda(u) = Gamma_1^{-(n-2gamma)/n}, the expansion value of (int K u^{2^*})^{-beta}."""
    ct = constants or constants_table(params)
    pc = _pieces(config, K, params, ct)
    return pc.G1 ** (-(params.n - 2.0 * params.gamma) / params.n)


def grad_lambda_expansion(config: BubbleConfiguration, K: CurvatureField, j: int,
                          params: ProblemParams, constants: ConstantsTable | None = None) -> float:
    """Leading value of -J'(u)(lam_j d delta_j / d lam_j).

    Equals ``-(1/alpha_j) lam_j dE/dlam_j``.  The Laplacian part is
    ``-(2/alpha_j) lead beta (2/n) c_2 alpha_j^{2^*} Delta K(a_j) / (Gamma_1 lam_j^2)``,
    positive at maxima of K with Delta K < 0.  The interaction part pulls the
    concentrations toward each other's scale.
    """
    ct = constants or constants_table(params)
    two_star = params.critical_exponent
    beta = (params.n - 2.0 * params.gamma) / params.n
    pc = _pieces(config, K, params, ct)
    a, lams = config.alpha, config.lams
    lap_j = -pc.lead * beta * (2.0 / params.n) * (ct.c2 / pc.G1) * a[j] ** two_star * pc.dK[j] / lams[j] ** 2
    dE = -2.0 * lap_j
    for i in range(config.p):
        if i == j:
            continue
        de = epsilon_derivative_lambda(config.bubbles[j], config.bubbles[i], params, "conformal")
        dE += pc.lead * ct.interaction_coefficient * de * (pc.b[i, j] + pc.b[j, i])
    return -dE / a[j]


def grad_center_expansion(config: BubbleConfiguration, K: CurvatureField, j: int,
                          params: ProblemParams, constants: ConstantsTable | None = None) -> np.ndarray:
    """Leading value of -J'(u)((1/lam_j) d delta_j / d a_j) as an ambient tangent vector.

    Equals ``-(1/alpha_j)(1/lam_j) grad_{a_j} E`` restricted to the leading
    and interaction terms; the curvature part is
    ``(1/(alpha_j lam_j)) beta Gamma_2 Gamma_1^{-beta-1} alpha_j^{2^*} S grad K(a_j)``.
    """
    ct = constants or constants_table(params)
    two_star = params.critical_exponent
    beta = (params.n - 2.0 * params.gamma) / params.n
    pc = _pieces(config, K, params, ct)
    a, lams = config.alpha, config.lams
    aj = config.centers[j]
    gK = K.grad(aj)
    v = beta * pc.G2 * pc.G1 ** (-beta - 1.0) * a[j] ** two_star * ct.S * gK / lams[j]
    for i in range(config.p):
        if i == j:
            continue
        # (1/lam_j) grad_{a_j} eps_ij
        ge = epsilon_grad_center(config.bubbles[i], config.bubbles[j], params, "conformal")
        v = v - pc.lead * ct.interaction_coefficient * ge * (pc.b[i, j] + pc.b[j, i])
    return v / a[j]


# ---------------------------------------------------------------------------
# finite-difference oracle

def _moved(config: BubbleConfiguration, j: int, kind: str, s: float, direction=None):
    b = config.bubbles[j]
    if kind == "lambda":
        nb = BubbleParams(b.center, b.lam * math.exp(s))
    elif kind == "center":
        v = np.asarray(direction, dtype=float)
        nb = BubbleParams(exp_map(b.center, s * v / b.lam), b.lam)
    else:
        raise ValueError(f"unknown direction kind {kind!r}")
    return config.replace_bubble(j, nb)


def directional_derivative_numeric(config: BubbleConfiguration, K: CurvatureField, params: ProblemParams,
                                   j: int = 0, kind: str = "lambda", direction=None,
                                   step: float = 1e-2, constants: ConstantsTable | None = None,
                                   quad: QuadratureSettings = DEFAULT_QUAD, rtol: float = 0.1) -> float:
    """J'(u) applied to lam_j d delta_j/d lam_j (``kind="lambda"``) or to
    (1/lam_j) d delta_j / d a_j along ``direction`` (``kind="center"``).

    The one-parameter families are ``lam_j e^s`` and ``exp_{a_j}(s v / lam_j)``;
    their s-derivatives are divided by alpha_j.  The sign convention is that of
    the derivative itself, so it compares with the negative of the expansion
    functions above.

    Raises
    ------
    StepTooLarge
        When the 3-point and 5-point central stencils differ by more than
        ``rtol`` (relative, with an absolute floor at the quadrature noise).
    """
    ct = constants or constants_table(params)
    h = step
    Jv = {s: J_numeric(_moved(config, j, kind, s, direction), K, params, ct, quad)
          for s in (-2 * h, -h, h, 2 * h)}
    d3 = (Jv[h] - Jv[-h]) / (2 * h)
    d5 = (8 * (Jv[h] - Jv[-h]) - (Jv[2 * h] - Jv[-2 * h])) / (12 * h)
    floor = 1e-10 * abs(Jv[h]) / h
    if abs(d3 - d5) > rtol * max(abs(d5), floor) and abs(d3 - d5) > floor:
        raise StepTooLarge(f"3-point {float(d3):.17g} and 5-point {float(d5):.17g} stencils disagree")
    return d5 / config.alpha[j]


def vbar_norm_bound(config: BubbleConfiguration, K: CurvatureField, params: ProblemParams,
                    kind: str = "geodesic") -> float:
    """Bracket of the correction bound with unit constant.

    ``sum_{i<j} eps_ij^{(n+2gamma)/(2n)} (log 1/eps_ij)^{(n-2gamma)/n}
    + sum_i (|grad K(a_i)|/lam_i + 1/lam_i^2)``.
    """
    n, g = params.n, params.gamma
    terms = []
    bs = config.bubbles
    for i in range(config.p):
        for j in range(i + 1, config.p):
            e = epsilon_ij(bs[i], bs[j], params, kind)
            terms.append(e ** ((n + 2 * g) / (2 * n)) * math.log(1.0 / e) ** ((n - 2 * g) / n))
    for b in bs:
        terms.append(float(np.linalg.norm(K.grad(b.center))) / b.lam + 1.0 / b.lam ** 2)
    return math.fsum(terms)
