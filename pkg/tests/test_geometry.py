import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphere_bubbling.errors import DomainError, NonFiniteSample, PoleSingularity
from sphere_bubbling.geometry import (ProblemParams, as_sphere_point, composite_gauss, exp_map,
                                      frame, geodesic_distance, graded_breaks, north_pole, omega,
                                      qmc_rule, sphere_area, sphere_integral, stereographic_conformal_factor,
                                      stereographic_inverse, stereographic_project, tangent_basis,
                                      tensor_rule, zonal_integral, zonal_rule)

unit = st.lists(st.floats(-1, 1, allow_nan=False), min_size=5, max_size=5).filter(
    lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.array(v) / np.linalg.norm(v))


def test_exponents_reference_case():
    P = ProblemParams(4, 0.5)
    assert P.critical_exponent == pytest.approx(8 / 3)
    assert P.bubble_exponent == 1.5
    assert P.gradient_exponent == pytest.approx(5 / 3)
    assert P.ambient_dim == 5


@pytest.mark.parametrize("n,gamma", [(2, 0.5), (4, 0.0), (4, 1.0), (4, 1.5), (3.5, 0.5)])
def test_params_domain(n, gamma):
    with pytest.raises(DomainError):
        ProblemParams(n, gamma)


@pytest.mark.parametrize("n,area", [(2, 4 * math.pi), (3, 2 * math.pi ** 2), (4, 8 * math.pi ** 2 / 3)])
def test_sphere_area(n, area):
    assert sphere_area(n) == pytest.approx(area, rel=1e-14)
    assert omega(n + 1) == pytest.approx(area, rel=1e-14)


def test_as_sphere_point():
    as_sphere_point(north_pole(4))
    with pytest.raises(DomainError):
        as_sphere_point(np.ones(5))
    with pytest.raises(DomainError):
        as_sphere_point(np.eye(5))


@given(unit, st.floats(1e-12, 3.0))
@settings(max_examples=60, deadline=None)
def test_exp_map_distance(a, t):
    v = tangent_basis(a) @ np.array([0.3, -0.2, 0.9, 0.1])
    v = t * v / np.linalg.norm(v)
    b = exp_map(a, v)
    assert geodesic_distance(a, b) == pytest.approx(t, rel=1e-9, abs=1e-15)


def test_geodesic_distance_resolves_tiny_angles():
    a = north_pole(4)
    b = exp_map(a, 1e-10 * tangent_basis(a)[:, 0])
    # arccos of the inner product would return 0 here
    assert geodesic_distance(a, b) == pytest.approx(1e-10, rel=1e-6)
    assert geodesic_distance(a, -a) == pytest.approx(math.pi)


@given(unit)
@settings(max_examples=40, deadline=None)
def test_tangent_basis_orthonormal(a):
    B = tangent_basis(a)
    assert np.allclose(B.T @ B, np.eye(4), atol=1e-13)
    assert np.allclose(a @ B, 0.0, atol=1e-13)


@given(unit, unit)
@settings(max_examples=40, deadline=None)
def test_frame_points_toward_b(a, b):
    F = frame(a, b)
    assert np.allclose(F.T @ F, np.eye(5), atol=1e-12)
    assert np.allclose(F[:, 0], a)
    w = b - (a @ b) * a
    if np.linalg.norm(w) > 1e-6:
        assert F[:, 1] @ w == pytest.approx(np.linalg.norm(w), rel=1e-9)


@given(unit, st.lists(st.floats(-3, 3), min_size=4, max_size=4))
@settings(max_examples=60, deadline=None)
def test_stereographic_round_trip(pole, y):
    y = np.array(y)
    x = stereographic_inverse(y, pole)
    assert np.linalg.norm(x) == pytest.approx(1.0)
    assert np.allclose(stereographic_project(x, pole), y, atol=1e-9 * (1 + y @ y))


def test_stereographic_conformal_factor_matches_metric():
    pole = north_pole(4)
    y = np.array([0.3, -0.7, 0.2, 1.1])
    h = 1e-6
    for e in np.eye(4):
        dx = (stereographic_inverse(y + h * e, pole) - stereographic_inverse(y - h * e, pole)) / (2 * h)
        assert np.linalg.norm(dx) == pytest.approx(stereographic_conformal_factor(y), rel=1e-8)


def test_stereographic_pole_singularity():
    with pytest.raises(PoleSingularity):
        stereographic_project(north_pole(4), north_pole(4))


def test_composite_gauss_exact_for_polynomials():
    x, w = composite_gauss([0.0, 0.3, 1.0], 5)
    assert np.sum(w * x ** 9) == pytest.approx(0.1, rel=1e-13)


def test_graded_breaks_refine_near_focus():
    br = graded_breaks(0.0, math.pi, (0.5,), width=1e-3)
    assert br[0] == 0.0 and br[-1] == math.pi
    assert np.all(np.diff(br) > 0)
    gaps = np.diff(br)
    k = np.searchsorted(br, 0.5)
    assert gaps[k] <= 1.0001e-3


@pytest.mark.parametrize("rule", [
    lambda: tensor_rule(4, order=24, inner=24, n_phi=12),
    lambda: tensor_rule(4, rot=frame(exp_map(north_pole(4), 0.4 * np.eye(5)[0])), order=24,
                        inner=24, n_phi=12),
])
def test_tensor_rule_moments(rule):
    R = rule()
    area = sphere_area(4)
    assert R.total_weight() == pytest.approx(area, rel=1e-12)
    for i in range(5):
        # int x_i^2 = |S^n|/(n+1) and int x_i^4 = 3|S^n|/((n+1)(n+3))
        assert sphere_integral(lambda X: X[:, i] ** 2, R) == pytest.approx(area / 5, rel=1e-11)
        assert sphere_integral(lambda X: X[:, i] ** 4, R) == pytest.approx(3 * area / 35, rel=1e-11)


def test_qmc_rule_moments():
    R = qmc_rule(6, m=2 ** 14)
    assert R.total_weight() == pytest.approx(sphere_area(6), rel=1e-12)
    assert sphere_integral(lambda X: X[:, 0] ** 2, R) == pytest.approx(sphere_area(6) / 7, rel=2e-3)


def test_zonal_rule_and_integral_agree():
    g = lambda th: np.cos(th) ** 2
    R = zonal_rule(4, order=16)
    assert zonal_integral(g, 4) == pytest.approx(sphere_area(4) / 5, rel=1e-13)
    assert sphere_integral(lambda X: X[:, -1] ** 2, R) == pytest.approx(sphere_area(4) / 5, rel=1e-13)


def test_non_finite_sample():
    R = tensor_rule(4, order=4, inner=4, n_phi=4)
    with pytest.raises(NonFiniteSample):
        sphere_integral(lambda X: np.full(len(X), np.nan), R)
    with pytest.raises(NonFiniteSample):
        zonal_integral(lambda th: np.full_like(th, np.inf), 4)
