"""Normalized Hermite polynomials and Hermite expansions of activations.

The normalized Hermite polynomials ``h_k`` are orthonormal under the
standard Gaussian measure.  An activation ``sigma`` is summarised by its
coefficients ``zeta_k = E[sigma(xi) h_k(xi)]`` together with its L2 and L4
norms; everything downstream (kernels, ridge ceilings, lower bounds) reads
the activation only through a :class:`HermiteProfile`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import integrate

from . import _backend
from .errors import NegativeTail, QuadratureNotConverged, UnboundedActivation

# integration window for the Gaussian measure; mass outside is negligible
# for polynomially bounded integrands
QUAD_RADIUS = 12.0
DEFAULT_K_MAX = 16
DEFAULT_TOL = 1e-10

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# degree-5 polynomial activation used throughout the simulations
POLY5_COEFFS = (1.0, 1.0 / math.sqrt(6.0), 1.0 / 3.0, 1.0 / 6.0, 2.0 / 3.0, 0.5)

_KINDS = {
    "relu",
    "leaky_relu",
    "tanh",
    "sigmoid",
    "softplus",
    "identity",
    "constant",
    "hermite_poly",
}


@dataclass(frozen=True)
class ActivationSpec:
    """A scalar nonlinearity.

    ``param`` is the slope for ``leaky_relu`` and the value for ``constant``;
    ``coeffs`` are the Hermite coefficients for ``hermite_poly``.
    ``growth_exponent`` is descriptive metadata and never used in computation.
    """

    kind: str
    param: Optional[float] = None
    coeffs: Optional[tuple] = None
    growth_exponent: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "hermite_poly":
            if not self.coeffs:
                raise ValueError("hermite_poly needs a non-empty coefficient list")
            coeffs = tuple(float(c) for c in self.coeffs)
            if not all(math.isfinite(c) for c in coeffs):
                raise ValueError("hermite_poly coefficients must be finite")
            object.__setattr__(self, "coeffs", coeffs)
        if self.kind in ("leaky_relu", "constant") and self.param is None:
            raise ValueError(f"{self.kind} needs a parameter")

    # named constructors
    @classmethod
    def relu(cls):
        return cls("relu")

    @classmethod
    def leaky_relu(cls, slope):
        return cls("leaky_relu", param=float(slope))

    @classmethod
    def constant(cls, c):
        return cls("constant", param=float(c))

    @classmethod
    def hermite_poly(cls, coeffs):
        return cls("hermite_poly", coeffs=tuple(coeffs))

    @classmethod
    def poly5(cls):
        return cls("hermite_poly", coeffs=POLY5_COEFFS)

    @property
    def kinks(self):
        return (0.0,) if self.kind in ("relu", "leaky_relu") else ()

    @property
    def degree(self):
        """Polynomial degree, or None when the Hermite expansion is infinite."""
        if self.kind == "constant":
            return 0
        if self.kind == "identity":
            return 1
        if self.kind == "hermite_poly":
            nz = [k for k, c in enumerate(self.coeffs) if c != 0.0]
            return nz[-1] if nz else 0
        return None

    @property
    def exact_coeffs(self):
        """Hermite coefficients known in closed form (polynomial kinds only)."""
        if self.kind == "constant":
            return (self.param,)
        if self.kind == "identity":
            return (0.0, 1.0)
        if self.kind == "hermite_poly":
            return self.coeffs
        return None

    def __call__(self, x):
        return eval_activation(self, x)

    def label(self):
        if self.kind == "hermite_poly":
            if self.coeffs == POLY5_COEFFS:
                return "poly5"
            return "hermite:" + ",".join(repr(c) for c in self.coeffs)
        if self.param is not None:
            return f"{self.kind}:{self.param!r}"
        return self.kind


def parse_activation(text: str) -> ActivationSpec:
    """Parse CLI/config activation names.

    Accepted forms: ``relu``, ``tanh``, ``sigmoid``, ``softplus``,
    ``identity``, ``poly5``, ``leaky_relu:0.1``, ``constant:1``,
    ``hermite:c0,c1,...``.
    """
    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    if name == "poly5":
        return ActivationSpec.poly5()
    if name in ("hermite", "hermite_poly"):
        if not arg:
            raise ValueError("hermite activation needs coefficients, e.g. hermite:0,1")
        return ActivationSpec.hermite_poly([float(c) for c in arg.split(",")])
    if name in ("leaky_relu", "constant"):
        if not arg:
            raise ValueError(f"{name} needs a parameter, e.g. {name}:0.1")
        return ActivationSpec(name, param=float(arg))
    if name in _KINDS and not arg:
        return ActivationSpec(name)
    raise ValueError(f"unknown activation {text!r}")


def eval_hermite(k: int, x):
    """Normalized Hermite polynomial h_k(x) by the three-term recurrence."""
    if k < 0:
        raise ValueError("k must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.ones_like(x)
    if k == 0:
        return h_prev if x.ndim else float(h_prev)
    h_cur = x.copy()
    for j in range(1, k):
        h_prev, h_cur = h_cur, (x * h_cur - math.sqrt(j) * h_prev) / math.sqrt(j + 1)
    return h_cur if x.ndim else float(h_cur)


def eval_activation(act: ActivationSpec, xs):
    """Apply ``act`` elementwise; the output has the shape of ``xs``."""
    x = np.asarray(xs, dtype=np.float64)
    kind = act.kind
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "leaky_relu":
        return np.where(x >= 0.0, x, act.param * x)
    if kind == "tanh":
        return np.tanh(x)
    if kind == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * x))
    if kind == "softplus":
        return np.logaddexp(0.0, x)
    if kind == "identity":
        return x.copy()
    if kind == "constant":
        return np.full_like(x, act.param)
    return _backend.hermite_series(np.asarray(act.coeffs), x)


@dataclass(frozen=True)
class HermiteProfile:
    coeffs: tuple
    l2_norm_sq: float
    l4_norm: float
    k_max: int
    quad_tol: float
    activation: Optional[ActivationSpec] = field(default=None, compare=False)

    @property
    def zeta(self):
        return np.asarray(self.coeffs)

    @property
    def degree(self):
        return None if self.activation is None else self.activation.degree

    @property
    def l4_norm_sq(self):
        return self.l4_norm**2


def gaussian_expectation(f: Callable[[float], float], tol=DEFAULT_TOL, kinks: Sequence[float] = (),
                         rtol: float = 0.0):
    """E[f(xi)], xi ~ N(0, 1), by adaptive Gauss-Kronrod on [-R, R].

    The window is split at ``kinks`` before adapting.  Raises
    :class:`QuadratureNotConverged` if the error estimate exceeds
    ``max(tol, rtol * |E f|)``.
    """
    edges = [-QUAD_RADIUS, *sorted(k for k in kinks if -QUAD_RADIUS < k < QUAD_RADIUS), QUAD_RADIUS]
    pieces = len(edges) - 1

    def integrand(x):
        return f(x) * math.exp(-0.5 * x * x) * _INV_SQRT_2PI

    total = 0.0
    err = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        res = integrate.quad(integrand, a, b, epsabs=tol / pieces, epsrel=rtol, limit=500, full_output=1)
        value, abserr = res[0], res[1]
        if len(res) > 3 and abserr > max(tol / pieces, rtol * abs(value)):
            raise QuadratureNotConverged(f"quadrature on [{a}, {b}] stopped at error {abserr:.3g}: {res[3]}")
        total += value
        err += abserr
    if not math.isfinite(total) or err > max(tol, rtol * abs(total)):
        raise QuadratureNotConverged(f"quadrature error estimate {err:.3g} exceeds tol {tol:.3g}")
    return total


def _check_growth(act: ActivationSpec):
    # sigma^4 times the Gaussian density must have died out at the window edge,
    # relative to its size in the bulk
    def weighted(xs):
        return eval_activation(act, xs) ** 4 * np.exp(-0.5 * xs**2)

    edge = weighted(np.array([-QUAD_RADIUS, QUAD_RADIUS]))
    bulk = weighted(np.linspace(-4.0, 4.0, 81))
    if not np.all(np.isfinite(edge)) or edge.max() > 1e-10 * max(bulk.max(), 1e-300):
        raise UnboundedActivation(f"{act.label()} does not decay fast enough against the Gaussian weight")


def _exact_profile(act: ActivationSpec, k_max: int, tol: float) -> HermiteProfile:
    c = np.asarray(act.exact_coeffs, dtype=np.float64)
    coeffs = np.zeros(k_max + 1)
    m = min(len(c), k_max + 1)
    coeffs[:m] = c[:m]
    # Gauss-Hermite with 2*deg+2 nodes integrates sigma^4 exactly
    nodes, weights = hermegauss(2 * len(c) + 2)
    weights = weights / math.sqrt(2.0 * math.pi)
    vals = _backend.hermite_series(c, nodes)
    l4 = float(np.dot(weights, vals**4)) ** 0.25
    l2 = float(np.dot(c, c))
    return HermiteProfile(tuple(float(z) for z in coeffs), l2, l4, k_max, tol, act)


def expand_activation(act: ActivationSpec, k_max: int = DEFAULT_K_MAX, tol: float = DEFAULT_TOL,
                      method: str = "auto") -> HermiteProfile:
    """Hermite coefficients zeta_0..zeta_{k_max} and the L2/L4 norms of ``act``.

    Polynomial activations are expanded exactly (``method="auto"``); pass
    ``method="quadrature"`` to force the adaptive integrator for them too.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if method == "auto" and act.exact_coeffs is not None:
        return _exact_profile(act, k_max, tol)

    _check_growth(act)
    kinks = act.kinks

    def sigma(x):
        return float(eval_activation(act, x))

    coeffs = []
    for k in range(k_max + 1):
        coeffs.append(gaussian_expectation(lambda x, k=k: sigma(x) * float(eval_hermite(k, x)), tol, kinks))
    l2 = gaussian_expectation(lambda x: sigma(x) ** 2, tol, kinks, rtol=1e-13)
    # the L4 norm only scales thresholds; a relative tolerance is enough
    l4 = gaussian_expectation(lambda x: sigma(x) ** 4, tol, kinks, rtol=1e-10) ** 0.25
    return HermiteProfile(tuple(coeffs), l2, l4, k_max, tol, act)


def tail_mass(profile: HermiteProfile, ell: int) -> float:
    """sigma^2_{>ell} = ||sigma||_2^2 - sum_{k<=ell} zeta_k^2, clamped at 0."""
    if not 0 <= ell <= profile.k_max:
        raise ValueError(f"ell={ell} outside 0..{profile.k_max}")
    z = np.asarray(profile.coeffs[: ell + 1])
    tail = profile.l2_norm_sq - float(np.dot(z, z))
    if tail < -10.0 * profile.quad_tol:
        raise NegativeTail(f"tail mass {tail:.3g} at ell={ell} is negative beyond quadrature noise")
    return max(tail, 0.0)


def tail_masses(profile: HermiteProfile):
    """tail_mass for every ell in 0..k_max."""
    return np.array([tail_mass(profile, ell) for ell in range(profile.k_max + 1)])
