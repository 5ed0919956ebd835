"""Select the compiled kernels when available, else the numpy fallback.

Set ``RFCONC_PURE=1`` to force the fallback.
"""

import os

import numpy as np

from . import _core_py

if os.environ.get("RFCONC_PURE"):
    _impl = _core_py
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _core_py

BACKEND = "cython" if _impl is not _core_py else "python"


def _flat(a):
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1)


def hermite_series(coeffs, x, impl=None):
    """Elementwise sum_k coeffs[k] h_k(x); output has the shape of ``x``."""
    impl = impl or _impl
    x = np.asarray(x, dtype=np.float64)
    out = impl.hermite_series(_flat(coeffs), _flat(x))
    return np.asarray(out).reshape(x.shape)


def power_series(coeffs, rho, impl=None):
    impl = impl or _impl
    rho = np.asarray(rho, dtype=np.float64)
    out = impl.power_series(_flat(coeffs), _flat(rho))
    return np.asarray(out).reshape(rho.shape)


def hadamard_power_sums(gram, max_ell, impl=None):
    impl = impl or _impl
    gram = np.asarray(gram, dtype=np.float64)
    n = gram.shape[0]
    return np.asarray(impl.hadamard_power_sums(_flat(gram), n, int(max_ell)))
