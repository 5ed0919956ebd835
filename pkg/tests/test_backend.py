import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfconc import _backend, _core_py
from rfconc.hermite import eval_hermite

_core = pytest.importorskip("rfconc._core")
IMPLS = [_core_py, _core]


def test_compiled_backend_selected():
    assert _backend.BACKEND == "cython"


@pytest.mark.parametrize("impl", IMPLS, ids=["python", "cython"])
def test_hermite_series_matches_recurrence(impl):
    rng = np.random.default_rng(1)
    c = rng.standard_normal(9)
    x = rng.standard_normal((7, 5)) * 3
    ref = sum(ck * eval_hermite(k, x) for k, ck in enumerate(c))
    np.testing.assert_allclose(_backend.hermite_series(c, x, impl), ref, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("impl", IMPLS, ids=["python", "cython"])
def test_power_series_matches_polyval(impl):
    rng = np.random.default_rng(2)
    c = rng.random(6)
    rho = rng.uniform(-1, 1, (9, 4))
    np.testing.assert_allclose(_backend.power_series(c, rho, impl), np.polynomial.polynomial.polyval(rho, c),
                               rtol=1e-13)


@pytest.mark.parametrize("impl", IMPLS, ids=["python", "cython"])
def test_hadamard_power_sums_direct(impl):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((20, 12))
    X /= np.linalg.norm(X, axis=0)
    G = X.T @ X
    off = ~np.eye(12, dtype=bool)
    ref = [np.sum(G[off] ** (2 * (ell + 1))) for ell in range(6)]
    np.testing.assert_allclose(_backend.hadamard_power_sums(G, 5, impl), ref, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=8), st.lists(st.floats(-5, 5), min_size=1, max_size=30))
def test_backends_agree(coeffs, xs):
    c = np.array(coeffs)
    x = np.array(xs)
    a = _backend.hermite_series(c, x, _core_py)
    b = _backend.hermite_series(c, x, _core)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    r = np.clip(x / 5, -1, 1)
    np.testing.assert_allclose(_backend.power_series(c, r, _core_py), _backend.power_series(c, r, _core),
                               rtol=1e-12, atol=1e-12)


def test_pure_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    code = "import rfconc._backend as b; print(b.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env={**os.environ, "RFCONC_PURE": "1"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
