import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from sphere_bubbling.bubbles import (BubbleParams, bubble_derivative_center, bubble_derivative_lambda,
                                     bubble_profile, bubble_value, c1_closed_form, constants_table,
                                     epsilon_conformal, epsilon_derivative_center,
                                     epsilon_derivative_lambda, epsilon_grad_center, epsilon_ij,
                                     flat_bubble_value, flat_constant, interaction_integral,
                                     interaction_leading_term, make_configuration,
                                     normalization_constant, radial_c1, sharp_constant_closed_form,
                                     sphere_constant)
from sphere_bubbling.errors import ConvergenceFailure, DomainError, QuadratureUnderResolved
from sphere_bubbling.geometry import (ProblemParams, axis, exp_map, north_pole, sphere_area,
                                      stereographic_conformal_factor, stereographic_inverse,
                                      tangent_basis, tensor_rule)
from sphere_bubbling.spectral import hgamma_inner, zonal_expand

N4 = north_pole(4)
unit = st.lists(st.floats(-1, 1), min_size=5, max_size=5).filter(lambda v: np.linalg.norm(v) > 0.1)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_sphere_constant_reference_value(params):
    # (Gamma(5/2)/Gamma(3/2))^{3/2} = 1.5^{1.5}
    assert sphere_constant(params) == pytest.approx(1.5 ** 1.5, rel=1e-14)
    assert flat_constant(params) == pytest.approx(2 ** 1.5 * 1.5 ** 1.5, rel=1e-14)


@pytest.mark.parametrize("n,gamma", [(3, 0.25), (4, 0.5), (5, 0.75), (6, 0.9)])
def test_unit_bubble_is_constant_solution(n, gamma):
    params = ProblemParams(n, gamma)
    c = sphere_constant(params)
    X = np.random.default_rng(1).normal(size=(20, n + 1))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    vals = bubble_value(BubbleParams(north_pole(n), 1.0), X, params)
    assert np.allclose(vals, c, rtol=1e-14)
    # a constant c solves P u = u^p iff P_gamma(1) c = c^p
    p0 = special.gamma(n / 2 + gamma) / special.gamma(n / 2 - gamma)
    assert p0 * c == pytest.approx(c ** params.gradient_exponent, rel=1e-12)


@pytest.mark.parametrize("n,gamma", [(3, 0.5), (4, 0.5), (5, 0.3)])
def test_normalization_constant_spectral_calibration(n, gamma):
    params = ProblemParams(n, gamma)
    assert normalization_constant(params, verify=True, L=300) == pytest.approx(sphere_constant(params))


@given(y=st.lists(st.floats(-3, 3), min_size=4, max_size=4), lam=st.floats(0.5, 20))
@settings(max_examples=40, deadline=None)
def test_sphere_bubble_pulls_back_to_flat_bubble(params, y, lam):
    """Projecting from -a, the sphere bubble times the conformal factor^q is the flat bubble at 0."""
    y = np.array(y)
    x = stereographic_inverse(y, -N4)
    q = params.bubble_exponent
    lhs = stereographic_conformal_factor(y) ** q * bubble_value(BubbleParams(N4, lam), x, params)
    assert lhs == pytest.approx(flat_bubble_value(np.zeros(4), lam, y, params), rel=1e-10)


def test_stereographic_pole_maps_to_origin():
    assert np.allclose(stereographic_inverse(np.zeros(4), -N4), N4)


@given(c=unit, x=unit, lam=st.floats(0.3, 30))
@settings(max_examples=50, deadline=None)
def test_lambda_derivative_matches_finite_difference(params, c, x, lam):
    c, x = _unit(c), _unit(x)
    h = 1e-6 * lam
    fd = (bubble_value(BubbleParams(c, lam + h), x, params)
          - bubble_value(BubbleParams(c, lam - h), x, params)) / (2 * h)
    an = bubble_derivative_lambda(BubbleParams(c, lam), x, params)
    assert an == pytest.approx(fd, rel=1e-5, abs=1e-8 * bubble_value(BubbleParams(c, lam), x, params))


@given(c=unit, x=unit, lam=st.floats(0.3, 10), k=st.integers(0, 3))
@settings(max_examples=50, deadline=None)
def test_center_derivative_matches_finite_difference(params, c, x, lam, k):
    c, x = _unit(c), _unit(x)
    v = tangent_basis(c)[:, k]
    h = 1e-6
    fd = (bubble_value(BubbleParams(exp_map(c, h * v), lam), x, params)
          - bubble_value(BubbleParams(exp_map(c, -h * v), lam), x, params)) / (2 * h)
    an = bubble_derivative_center(BubbleParams(c, lam), x, v, params)
    scale = abs(bubble_value(BubbleParams(c, lam), x, params)) * lam
    assert an == pytest.approx(fd, rel=1e-4, abs=1e-7 * scale)


def test_bubble_params_validation():
    with pytest.raises(DomainError):
        BubbleParams(N4, 0.0)
    with pytest.raises(DomainError):
        BubbleParams(N4, float("inf"))
    with pytest.raises(DomainError):
        BubbleParams(2 * N4, 1.0)
    with pytest.raises(DomainError):
        make_configuration([N4, N4], [2.0, 3.0])
    with pytest.raises(DomainError):
        make_configuration([N4], [2.0], alpha=[-1.0])


def test_configuration_accessors(params):
    a = exp_map(N4, 1.0 * axis(4, 1))
    cfg = make_configuration([N4, a], [20.0, 30.0])
    assert cfg.p == 2
    assert np.allclose(cfg.lams, [20, 30])
    assert np.allclose(cfg.scaled(2.0).alpha, [2, 2])
    assert cfg.in_regime(params)
    assert not make_configuration([N4, a], [2.0, 30.0]).in_regime(params)
    assert cfg.max_epsilon(params) == pytest.approx(epsilon_conformal(*cfg.bubbles, params))


@given(a=unit, b=unit, li=st.floats(0.5, 50), lj=st.floats(0.5, 50))
@settings(max_examples=50, deadline=None)
def test_epsilon_symmetry(params, a, b, li, lj):
    a, b = _unit(a), _unit(b)
    if np.linalg.norm(a - b) < 1e-6:
        return
    bi, bj = BubbleParams(a, li), BubbleParams(b, lj)
    for kind in ("geodesic", "conformal"):
        assert epsilon_ij(bi, bj, params, kind) == pytest.approx(epsilon_ij(bj, bi, params, kind),
                                                                 rel=1e-13)


def test_epsilon_hand_values(params):
    d = 0.8
    bi, bj = BubbleParams(N4, 10.0), BubbleParams(exp_map(N4, d * axis(4, 1)), 20.0)
    G_geo = 0.5 + 2.0 + 200.0 * d * d
    G_conf = 0.5 + 2.0 + 200.0 * (1 - math.cos(d)) / 2
    assert epsilon_ij(bi, bj, params) == pytest.approx(G_geo ** -1.5, rel=1e-13)
    assert epsilon_conformal(bi, bj, params) == pytest.approx(G_conf ** -1.5, rel=1e-13)
    # same centre: only the scale channel survives
    same = epsilon_ij(BubbleParams(N4, 2.0), BubbleParams(N4, 8.0), params)
    assert same == pytest.approx((4 + 0.25) ** -1.5, rel=1e-13)


@pytest.mark.parametrize("kind", ["geodesic", "conformal"])
def test_epsilon_lambda_derivative(params, kind):
    aj = exp_map(N4, 0.7 * axis(4, 2))
    li, lj, h = 12.0, 7.0, 1e-6
    f = lambda l: epsilon_ij(BubbleParams(N4, l), BubbleParams(aj, lj), params, kind)
    fd = li * (f(li * (1 + h)) - f(li * (1 - h))) / (2 * h * li)
    an = epsilon_derivative_lambda(BubbleParams(N4, li), BubbleParams(aj, lj), params, kind)
    assert an == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("kind", ["geodesic", "conformal"])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_epsilon_center_gradient(params, kind, k):
    ai = N4
    aj = exp_map(N4, 0.9 * _unit([1.0, 0.5, -0.2, 0.3, 0.0]))
    li, lj, h = 5.0, 9.0, 1e-6
    v = tangent_basis(aj)[:, k]
    f = lambda s: epsilon_ij(BubbleParams(ai, li), BubbleParams(exp_map(aj, s * v), lj), params, kind)
    fd = (f(h) - f(-h)) / (2 * h) / lj
    bi, bj = BubbleParams(ai, li), BubbleParams(aj, lj)
    assert epsilon_derivative_center(bi, bj, v, params, kind) == pytest.approx(fd, rel=1e-5, abs=1e-12)
    g = epsilon_grad_center(bi, bj, params, kind)
    assert abs(g @ aj) < 1e-14  # tangent at a_j


def test_interaction_pairing_is_symmetric(params):
    """int delta_j^p delta_i = int delta_i^p delta_j, both being <delta_i, delta_j>."""
    bi = BubbleParams(N4, 4.0)
    bj = BubbleParams(exp_map(N4, 1.2 * axis(4, 3)), 6.0)
    assert interaction_integral(bi, bj, params) == pytest.approx(interaction_integral(bj, bi, params),
                                                                 rel=1e-5)


def test_interaction_same_centre_matches_spectral_pairing(params):
    bi, bj = BubbleParams(N4, 1.5), BubbleParams(N4, 3.0)
    ei = zonal_expand(bubble_profile(bi, params), 400, params)
    ej = zonal_expand(bubble_profile(bj, params), 400, params)
    assert interaction_integral(bi, bj, params) == pytest.approx(hgamma_inner(ei, ej, params), rel=1e-6)


def test_interaction_biaxial_matches_ambient_rule(params):
    bi = BubbleParams(N4, 2.0)
    bj = BubbleParams(exp_map(N4, 1.0 * axis(4, 1)), 2.5)
    # plain tensor Gauss in all angles; the bubbles are smooth at these scales
    rule = tensor_rule(4, inner=32, n_phi=48)
    ref = interaction_integral(bi, bj, params, rule=rule)
    assert interaction_integral(bi, bj, params) == pytest.approx(ref, rel=1e-6)


def test_interaction_ratio_tends_to_one(params, ct):
    devs = []
    for lam in (5.0, 10.0, 20.0):
        bi = BubbleParams(N4, lam)
        bj = BubbleParams(exp_map(N4, math.pi / 2 * axis(4, 1)), lam)
        devs.append(abs(interaction_integral(bi, bj, params)
                        / interaction_leading_term(bi, bj, params, ct) - 1))
    assert devs[0] > devs[1] > devs[2]
    assert devs[1] < 0.2


def test_interaction_under_resolved_raises(params):
    bi = BubbleParams(N4, 300.0)
    bj = BubbleParams(exp_map(N4, 0.5 * axis(4, 1)), 300.0)
    with pytest.raises(QuadratureUnderResolved):
        interaction_integral(bi, bj, params, order=2, rtol=1e-12)


def test_constants_table_against_closed_forms(params, ct):
    assert ct.c_n == pytest.approx(1.5 ** 1.5, rel=1e-14)
    assert ct.c_0 == pytest.approx(2 ** 1.5 * ct.c_n, rel=1e-14)
    assert ct.S == pytest.approx(sharp_constant_closed_form(params), rel=1e-8)
    assert ct.S == pytest.approx(ct.c_n ** (8 / 3) * 8 * math.pi ** 2 / 3, rel=1e-8)
    assert ct.c1 == pytest.approx(2 / 3, abs=1e-10)
    assert ct.omega_n == pytest.approx(2 * math.pi ** 2)
    # int_0^inf r^5 (1+r^2)^{-4} dr = B(3, 1)/2 = 1/6
    assert ct.c2 == pytest.approx(ct.c_0 ** (8 / 3) * ct.omega_n / 6, rel=1e-10)
    assert ct.interaction_coefficient == pytest.approx(ct.c_0 ** (8 / 3) * (2 / 3) * 2 * math.pi ** 2)
    assert max(ct.changes.values()) <= 1e-5
    assert set(ct.to_dict()) >= {"c_n", "c_0", "S", "c1", "c2", "omega_n"}


@pytest.mark.parametrize("n,gamma", [(3, 0.25), (3, 0.75), (5, 0.5), (6, 0.3), (8, 0.6)])
def test_c1_against_scipy_quad(n, gamma):
    params = ProblemParams(n, gamma)
    ref, _ = integrate.quad(lambda r: r ** (n - 1) * (1 + r * r) ** (-(n + 2 * gamma) / 2), 0, np.inf,
                            limit=200)
    assert radial_c1(params) == pytest.approx(ref, rel=1e-7)
    assert c1_closed_form(params) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("n,gamma", [(3, 0.4), (5, 0.5), (7, 0.8)])
def test_sharp_constant_other_dimensions(n, gamma):
    params = ProblemParams(n, gamma)
    ct = constants_table(params)
    assert ct.S == pytest.approx(sphere_constant(params) ** params.critical_exponent * sphere_area(n),
                                 rel=1e-7)


def test_constants_table_convergence_failure(params):
    with pytest.raises(ConvergenceFailure):
        constants_table(params, order=2, tol=1e-14)
