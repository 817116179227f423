import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from sphere_bubbling import _pykernels, kernels
from sphere_bubbling.spectral import _mu, _p0, jacobi_nodes

try:
    from sphere_bubbling import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


@pytest.mark.parametrize("k", BACKENDS)
def test_weighted_sum_compensated(k):
    v = np.array([1e16, 1.0, -1e16, 1.0])
    w = np.ones(4)
    assert k.weighted_sum(v, w) == 2.0


@pytest.mark.parametrize("k", BACKENDS)
@pytest.mark.parametrize("n", [3, 4, 7])
def test_gegenbauer_orthonormal(k, n):
    L = 40
    t, w = jacobi_nodes(n, L + 10)
    P = np.asarray(k.gegenbauer_table(np.ascontiguousarray(t), L, _mu(n), _p0(n)))
    G = (P * w) @ P.T
    assert np.allclose(G, np.eye(L + 1), atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 6])
def test_gegenbauer_matches_scipy_up_to_normalisation(n):
    t = np.linspace(-0.99, 0.97, 17)  # avoids the common zero t = 0 of odd degrees
    P = kernels.gegenbauer_table(np.ascontiguousarray(t), 12, _mu(n), _p0(n))
    for deg in (1, 5, 12):
        ref = special.eval_gegenbauer(deg, (n - 1) / 2.0, t)
        row = np.asarray(P)[deg]
        c = (row @ ref) / (ref @ ref)
        assert np.allclose(row, c * ref, rtol=1e-10, atol=1e-12 * np.abs(row).max())


@pytest.mark.parametrize("k", BACKENDS)
def test_synthesis_equals_table_contraction(k):
    n, L = 4, 30
    rng = np.random.default_rng(1)
    c = np.ascontiguousarray(rng.standard_normal(L + 1))
    t = np.ascontiguousarray(np.linspace(-1, 1, 41))
    P = np.asarray(k.gegenbauer_table(t, L, _mu(n), _p0(n)))
    assert np.allclose(np.asarray(k.zonal_synthesis(c, t, _mu(n), _p0(n))), c @ P, atol=1e-12)


@needs_ext
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=200))
@settings(max_examples=80, deadline=None)
def test_backends_agree_weighted_sum(vals):
    v = np.ascontiguousarray(vals, dtype=float)
    w = np.ascontiguousarray(np.linspace(0.5, 1.5, v.size))
    a, b = _pykernels.weighted_sum(v, w), _ckernels.weighted_sum(v, w)
    assert a == pytest.approx(b, rel=1e-15, abs=1e-9)


@needs_ext
@given(st.integers(0, 60), st.integers(3, 8))
@settings(max_examples=30, deadline=None)
def test_backends_agree_tables(L, n):
    t = np.ascontiguousarray(np.cos(np.linspace(0, math.pi, 23)))
    a = np.asarray(_pykernels.gegenbauer_table(t, L, _mu(n), _p0(n)))
    b = np.asarray(_ckernels.gegenbauer_table(t, L, _mu(n), _p0(n)))
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13)
    c = np.ascontiguousarray(np.linspace(1, 2, L + 1))
    assert np.allclose(np.asarray(_pykernels.zonal_synthesis(c, t, _mu(n), _p0(n))),
                       np.asarray(_ckernels.zonal_synthesis(c, t, _mu(n), _p0(n))), rtol=1e-12, atol=1e-12)


def test_weighted_sum_shape_mismatch():
    with pytest.raises(ValueError):
        _pykernels.weighted_sum(np.ones(3), np.ones(4))


def test_fallback_selected_by_environment():
    env = dict(os.environ, SPHERE_BUBBLING_KERNELS="python")
    out = subprocess.run([sys.executable, "-c", "import sphere_bubbling.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"
