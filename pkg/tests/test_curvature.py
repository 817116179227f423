import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphere_bubbling.curvature import (classify_Iplus, euler_checksum, find_critical_points,
                                       laplace_beltrami, parse_curvature)
from sphere_bubbling.errors import (ArityError, DegenerateCritical, ExpressionSyntaxError,
                                    LaplacianDegenerate, PositivityViolation)
from sphere_bubbling.geometry import ProblemParams, exp_map, tangent_basis

P4 = ProblemParams(4, 0.5)
COEFFS = (0.01, 0.02, 0.03, 0.04, 0.06)
QUADRATIC = "1+" + "+".join(f"{c}*x{i + 1}^2" for i, c in enumerate(COEFFS))
point = st.lists(st.floats(-1, 1), min_size=5, max_size=5).filter(lambda v: np.linalg.norm(v) > 0.1)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_parse_errors_propagate():
    with pytest.raises(ExpressionSyntaxError):
        parse_curvature("1+*x1", P4)
    with pytest.raises(ExpressionSyntaxError):
        parse_curvature("1+x6", P4)  # only x1..x5 on S^4
    with pytest.raises(ArityError):
        parse_curvature("exp(x1, x2)", P4)


@pytest.mark.parametrize("text", ["1-2*x1", "x3", "0.5+x1*x2-x5^2", "1/(x1-2)"])
def test_positivity_violation_has_witness(text):
    with pytest.raises(PositivityViolation) as info:
        parse_curvature(text, P4, probe=2000)
    w = info.value.witness
    assert abs(np.linalg.norm(w) - 1) < 1e-12
    K = parse_curvature(text, P4, probe=0)
    assert float(K.value(w)) <= 0 or not np.isfinite(K.value(w))
    assert info.value.value == pytest.approx(float(K.value(w)))


def test_positive_field_records_probe_minimum():
    K = parse_curvature("2+x1", P4, probe=4000)
    assert 1.0 <= K.probe_min < 1.1


@given(x=point)
@settings(max_examples=40, deadline=None)
def test_laplacian_of_spherical_harmonics(x):
    a = _unit(x)
    n = 4
    # degree-1 harmonics: Delta x_i = -n x_i
    lin = parse_curvature("1+0.1*x5", P4, probe=0)
    assert laplace_beltrami(lin, a) == pytest.approx(-0.1 * n * a[4], abs=1e-13)
    # degree-2 harmonics: eigenvalue -2(n+1)
    for text, f in (("3+x1*x2", a[0] * a[1]), ("3+x1^2-x2^2", a[0] ** 2 - a[1] ** 2)):
        assert laplace_beltrami(parse_curvature(text, P4, probe=0), a) == pytest.approx(
            -2 * (n + 1) * f, abs=1e-12)


@given(x=point)
@settings(max_examples=30, deadline=None)
def test_hessian_trace_is_laplacian(x):
    a = _unit(x)
    K = parse_curvature("2+exp(0.3*x1)*x2+x3^3*x4", P4, probe=0)
    assert np.trace(K.hess(a)) == pytest.approx(K.laplacian(a), abs=1e-12)


@given(x=point, k=st.integers(0, 3))
@settings(max_examples=30, deadline=None)
def test_riemannian_derivatives_along_geodesics(x, k):
    a = _unit(x)
    K = parse_curvature("2+exp(0.3*x1)*x2+x3^3*x4", P4, probe=0)
    B = tangent_basis(a)
    v = B[:, k]
    h = 1e-4
    f = lambda t: float(K.value(exp_map(a, t * v)))
    d1 = (f(h) - f(-h)) / (2 * h)
    d2 = (f(h) - 2 * f(0) + f(-h)) / h ** 2
    g = K.grad(a)
    assert abs(g @ a) < 1e-14
    assert g @ v == pytest.approx(d1, abs=1e-7)
    assert K.hess(a)[k, k] == pytest.approx(d2, abs=1e-5)


def test_quadratic_field_critical_points():
    K = parse_curvature(QUADRATIC, P4)
    recs = find_critical_points(K)
    assert len(recs) == 10
    c = np.array(COEFFS)
    for r in recs:
        k = int(np.argmax(np.abs(r.location)))
        assert abs(abs(r.location[k]) - 1) < 1e-10
        # Hessian eigenvalues are 2(c_j - c_k), j != k
        assert r.index == int(np.sum(c < c[k]))
        assert r.laplacian == pytest.approx(2 * c.sum() - 2 * 5 * c[k], abs=1e-10)
        assert r.K_value == pytest.approx(1 + c[k])
        assert r.in_I_plus == (r.laplacian < 0)
        assert r.residual < 1e-10
    assert euler_checksum(recs) == 2
    assert [r.label for r in recs] == [f"y{i}" for i in range(1, 11)]
    assert all(a.K_value >= b.K_value for a, b in zip(recs, recs[1:]))
    Ip = classify_Iplus(recs)
    # Delta K < 0 iff c_k > sum(c)/5 = 0.032: only +-e4 and +-e5
    assert sorted(int(np.argmax(np.abs(r.location))) for r in Ip) == [3, 3, 4, 4]


def test_linear_field_on_odd_sphere():
    P3 = ProblemParams(3, 0.5)
    recs = find_critical_points(parse_curvature("1+0.2*x2", P3))
    assert sorted(r.index for r in recs) == [0, 3]
    assert euler_checksum(recs) == 0


def test_search_stats():
    recs, stats = find_critical_points(parse_curvature("1+0.1*x5", P4), n_starts=64,
                                       return_stats=True)
    assert stats.starts == 64
    assert stats.converged + stats.failed == 64
    assert stats.distinct == len(recs) == 2


@pytest.mark.parametrize("text", ["1", "1+0.1*x1^2+0.1*x2^2"])
def test_degenerate_fields(text):
    with pytest.raises(DegenerateCritical) as info:
        find_critical_points(parse_curvature(text, P4), n_starts=64)
    assert info.value.location is not None


def test_laplacian_degenerate():
    # 2 sum(c) = 10 c_5 makes Delta K vanish at +-e5 with a non-degenerate Hessian
    text = "1+0.01*x1^2+0.02*x2^2+0.03*x3^2+0.04*x4^2+0.025*x5^2"
    with pytest.raises(LaplacianDegenerate):
        find_critical_points(parse_curvature(text, P4), n_starts=256)


def test_record_to_dict():
    recs = find_critical_points(parse_curvature("1+0.1*x5", P4), n_starts=64)
    d = recs[0].to_dict()
    assert set(d) == {"label", "location", "index", "laplacian", "in_I_plus", "K_value", "residual"}
    assert d["index"] == 4 and d["in_I_plus"] is True
