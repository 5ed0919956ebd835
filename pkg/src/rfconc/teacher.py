"""Single-neuron teacher, labels, Monte-Carlo generalization error and the
polynomial-approximation lower bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special

from .dataset import DataMatrix, sample_sphere
from .errors import DimensionMismatch
from .hermite import ActivationSpec, HermiteProfile, eval_activation, expand_activation, tail_mass
from .kernel import cross_kernel_expected, polynomial_kernel
from .rng import derive_seed, substream


@dataclass(frozen=True)
class TeacherModel:
    """f*(x) = tau(<beta, x>) with beta ~ N(0, Id_d); labels carry N(0, sigma_eps^2) noise."""

    tau: ActivationSpec
    tau_profile: HermiteProfile
    beta: np.ndarray
    sigma_eps: float
    seed: int

    @property
    def d(self):
        return self.beta.shape[0]

    def target(self, X):
        A = X.X if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
        if A.shape[0] != self.d:
            raise DimensionMismatch(f"inputs have dimension {A.shape[0]}, teacher has d={self.d}")
        return eval_activation(self.tau, A.T @ self.beta)


def sample_teacher(tau: ActivationSpec, d: int, sigma_eps: float, seed: int,
                   tau_profile: Optional[HermiteProfile] = None) -> TeacherModel:
    if d < 1:
        raise ValueError("d must be positive")
    if sigma_eps < 0:
        raise ValueError("sigma_eps must be >= 0")
    beta = substream(seed, "beta", d).standard_normal(d)
    beta.flags.writeable = False
    if tau_profile is None:
        tau_profile = expand_activation(tau)
    return TeacherModel(tau, tau_profile, beta, float(sigma_eps), seed)


def labels(model: TeacherModel, X: DataMatrix, noise_seed: int) -> np.ndarray:
    """y = tau(X^T beta) + eps."""
    f = model.target(X)
    if model.sigma_eps == 0:
        return f
    return f + model.sigma_eps * substream(noise_seed, "noise", X.n).standard_normal(X.n)


def check_compatibility(sigma_hp: HermiteProfile, tau_hp: HermiteProfile, ell: int, atol=1e-12):
    """Degrees k <= ell where sigma has a component but tau does not (warns if any)."""
    top = min(ell, sigma_hp.k_max, tau_hp.k_max)
    bad = [k for k in range(top + 1)
           if abs(sigma_hp.coeffs[k]) > atol and abs(tau_hp.coeffs[k]) <= atol]
    if bad:
        warnings.warn(f"teacher has zero Hermite coefficients at degrees {bad} where the activation does not",
                      stacklevel=2)
    return bad


def sphere_sampler(d, m, seed):
    """Default test sampler: ``m`` fresh uniform points on the sphere."""
    return sample_sphere(d, m, seed).X


@dataclass(frozen=True)
class Replicate:
    """One draw of (beta, eps) with its training labels and test points."""

    teacher: TeacherModel
    y: np.ndarray
    Z: np.ndarray
    f_test: np.ndarray
    target_m2: Optional[float] = None  # exact E_z[f*^2] when the test points are on the sphere


def draw_replicates(X: DataMatrix, tau: ActivationSpec, sigma_eps: float, B: int, M: int, seed: int,
                    test_sampler: Callable = None, tau_profile: Optional[HermiteProfile] = None):
    """``B`` independent teachers on the fixed design ``X``, each with ``M`` test points.

    Test points are uniform on the sphere unless ``test_sampler(d, m, seed)``
    is given; only the sphere default records ``target_m2``.
    """
    on_sphere = test_sampler is None
    test_sampler = test_sampler or sphere_sampler
    if tau_profile is None:
        tau_profile = expand_activation(tau, k_max=0)
    out = []
    for b in range(B):
        teacher = sample_teacher(tau, X.d, sigma_eps, derive_seed(seed, "teacher", b), tau_profile=tau_profile)
        y = labels(teacher, X, derive_seed(seed, "noise", b))
        Z = np.asarray(test_sampler(X.d, M, derive_seed(seed, "test", b)))
        m2 = target_second_moment(teacher) if on_sphere else None
        out.append(Replicate(teacher, y, Z, teacher.target(Z), m2))
    return out


def target_second_moment(model: TeacherModel) -> float:
    """E_z[f*(z)^2] for z uniform on the unit sphere, by 1-D quadrature.

    u = <beta, z> / ||beta|| has density proportional to (1 - u^2)^((d - 3) / 2).
    """
    b = float(np.linalg.norm(model.beta))
    d = model.d
    if d == 1:
        return 0.5 * float(eval_activation(model.tau, b) ** 2 + eval_activation(model.tau, -b) ** 2)
    # u = sin(t): density cos(t)^(d-2) / B(1/2, (d-1)/2) on (-pi/2, pi/2), width ~ 1/sqrt(d)
    log_norm = scipy.special.betaln(0.5, 0.5 * (d - 1))
    r = min(0.5 * math.pi, 40.0 / math.sqrt(d))

    def integrand(t):
        c = math.cos(t)
        if c <= 0.0:
            return 0.0
        w = math.exp((d - 2) * math.log(c) - log_norm) if d > 2 else math.exp(-log_norm)
        return float(eval_activation(model.tau, b * math.sin(t))) ** 2 * w

    pts = [k * r / 8 for k in range(-7, 8)]
    val, _ = scipy.integrate.quad(integrand, -r, r, points=pts, limit=400, epsabs=0, epsrel=1e-11)
    return val


def replicate_error(pred, rep: Replicate, control_variate: bool = False) -> float:
    """Test MSE of ``pred`` on one replicate.

    With ``control_variate`` the heavy-tailed E_z[f*^2] term is replaced by its
    exact value, so only mean(pred^2) - 2 mean(pred f*) is sampled.  Needs
    sphere test points (``rep.target_m2`` set).
    """
    pred = np.asarray(pred, dtype=np.float64)
    if control_variate:
        if rep.target_m2 is None:
            raise ValueError("control variate needs replicates drawn with sphere test points")
        return float(np.mean(pred * pred) - 2.0 * np.mean(pred * rep.f_test)) + rep.target_m2
    err = pred - rep.f_test
    return float(np.mean(err * err))


def generalization_error_mc(fit_recipe: Callable, X: DataMatrix, tau: ActivationSpec, sigma_eps: float,
                            test_sampler: Callable = None, B: int = 16, M: int = 2000,
                            seed: int = 0, tau_profile: Optional[HermiteProfile] = None,
                            control_variate: bool = False):
    """Monte-Carlo estimate of E[(f_hat(x) - f*(x))^2 | X].

    For each of ``B`` replicates a fresh teacher (beta, eps) is drawn, labels
    are formed on the fixed design ``X`` and ``fit_recipe(y)`` must return a
    predictor mapping a (d, M) block of test points to M predictions.
    Returns ``(mean, stderr)`` where the standard error is over replicates.
    ``control_variate`` (sphere test points only) uses the exact second
    moment of the target; see :func:`replicate_error`.
    """
    if B < 2 or M < 1:
        raise ValueError("need B >= 2 replicates and M >= 1 test points")
    if control_variate and test_sampler is not None:
        raise ValueError("the control variate needs the default sphere test sampler")
    reps = np.empty(B)
    for b, rep in enumerate(draw_replicates(X, tau, sigma_eps, B, M, seed, test_sampler, tau_profile)):
        reps[b] = replicate_error(fit_recipe(rep.y)(rep.Z), rep, control_variate)
    return float(reps.mean()), float(reps.std(ddof=1) / np.sqrt(B))


def projection_tail_norm(tau_profile: HermiteProfile, ell: int) -> float:
    """||P_{>ell} f*||^2 = sum_{k > ell} zeta_k(tau)^2."""
    return tail_mass(tau_profile, ell)


@dataclass(frozen=True)
class LowerBoundTerms:
    tail: float
    variance: float
    variance_stderr: float

    @property
    def value(self):
        return self.tail + self.variance


def lower_bound_terms(X: DataMatrix, sigma_hp: HermiteProfile, tau_hp: HermiteProfile, ell: int,
                      lam: float, sigma_eps: float, test_sampler: Callable = None,
                      M: int = 2000, seed: int = 0) -> LowerBoundTerms:
    tail = projection_tail_norm(tau_hp, ell)
    if sigma_eps == 0:
        return LowerBoundTerms(tail, 0.0, 0.0)
    K_ell = polynomial_kernel(X, sigma_hp, ell)
    factor = scipy.linalg.cho_factor(K_ell.ridge(lam), lower=True)
    Z = (test_sampler or sphere_sampler)(X.d, M, derive_seed(seed, "lower-bound-test"))
    cross = cross_kernel_expected(X, Z, sigma_hp, mode="poly", ell=ell)
    # K_m^T K^{-2} K_m = ||K^{-1} K_m||^2
    sol = scipy.linalg.cho_solve(factor, cross)
    quad = np.einsum("ij,ij->j", sol, sol)
    var = sigma_eps**2 * quad
    return LowerBoundTerms(tail, float(var.mean()), float(var.std(ddof=1) / np.sqrt(M)) if M > 1 else 0.0)


def lower_bound_estimate(X: DataMatrix, sigma_hp: HermiteProfile, tau_hp: HermiteProfile, ell: int,
                         lam: float, sigma_eps: float, test_sampler: Callable = None,
                         M: int = 2000, seed: int = 0) -> float:
    """||P_{>ell} f*||^2 + sigma_eps^2 E_x[K_l(X, x)^T (K_l + lam Id)^{-2} K_l(X, x)]."""
    return lower_bound_terms(X, sigma_hp, tau_hp, ell, lam, sigma_eps, test_sampler, M, seed).value
