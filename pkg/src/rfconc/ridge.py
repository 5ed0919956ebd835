"""Kernel ridge regression in dual form, with training error and cross-validation.

A :class:`RidgeFit` stores ``alpha = (K + lam Id)^{-1} y`` and the diagonal
of ``(K + lam Id)^{-1}``, which is all the leave-one-out shortcut and GCV
need.  The same code serves RFRR (empirical kernel), KRR (expected kernel)
and PKRR (polynomial kernel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, LambdaZero, SingularSystem, ZeroDiagonal
from .kernel import KernelMatrix

PSEUDO_RTOL = 1e-12


@dataclass(frozen=True)
class RidgeFit:
    kernel: KernelMatrix
    lam: float
    alpha: np.ndarray
    inv_diag: np.ndarray
    y: np.ndarray
    solver_info: str  # "cholesky" or "eigen_pseudo(<threshold>)"

    @property
    def n(self):
        return self.y.shape[0]

    def solve(self, b):
        """(K + lam Id)^{-1} b using the stored factorization."""
        return self._solver(b)


def _as_kernel(K):
    return K if isinstance(K, KernelMatrix) else KernelMatrix(np.asarray(K, dtype=np.float64))


def fit(K, y, lam: float, allow_pseudo: bool = True) -> RidgeFit:
    """Solve (K + lam Id) alpha = y and record diag((K + lam Id)^{-1}).

    Cholesky is tried first.  If it fails and ``allow_pseudo`` is set, the
    system is pseudo-inverted through an eigendecomposition with cutoff
    ``1e-12 * lambda_max * n``.
    """
    K = _as_kernel(K)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != K.n:
        raise DimensionMismatch(f"{y.shape[0]} labels for a {K.n}x{K.n} kernel")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    A = K.ridge(lam)
    n = K.n
    try:
        c, lower = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
        pivots = np.diag(c) ** 2
        if not np.all(pivots > PSEUDO_RTOL * max(np.abs(np.diag(A)).max(), 1e-300)):
            raise np.linalg.LinAlgError("numerically singular")
    except np.linalg.LinAlgError:
        if not allow_pseudo:
            raise SingularSystem(f"K + {lam:g} Id is not positive definite") from None
        w, V = scipy.linalg.eigh(A)
        threshold = PSEUDO_RTOL * max(w[-1], 0.0) * n
        inv_w = np.where(w > threshold, 1.0 / np.where(w > threshold, w, 1.0), 0.0)

        def solver(b, V=V, inv_w=inv_w):
            return V @ (inv_w[:, None] * (V.T @ b)) if np.ndim(b) == 2 else V @ (inv_w * (V.T @ b))

        inv_diag = (V * V) @ inv_w
        info = f"eigen_pseudo({threshold:.3g})"
    else:
        def solver(b, c=c):
            return scipy.linalg.cho_solve((c, True), b, check_finite=False)

        L_inv = scipy.linalg.solve_triangular(np.tril(c), np.eye(n), lower=True, check_finite=False)
        inv_diag = np.einsum("ki,ki->i", L_inv, L_inv)
        info = "cholesky"
    alpha = solver(y)
    result = RidgeFit(K, float(lam), alpha, inv_diag, y, info)
    object.__setattr__(result, "_solver", solver)
    return result


def predict(fit: RidgeFit, cross) -> np.ndarray:
    """Predictions cross^T alpha for an (n, m) cross-kernel."""
    cross = np.asarray(cross, dtype=np.float64)
    if cross.ndim == 1:
        cross = cross[:, None]
    if cross.shape[0] != fit.n:
        raise DimensionMismatch(f"cross-kernel has {cross.shape[0]} rows, fit has n={fit.n}")
    return cross.T @ fit.alpha


def training_error(fit: RidgeFit) -> float:
    """(1/n) ||K alpha - y||^2."""
    r = fit.kernel.M @ fit.alpha - fit.y
    return float(r @ r) / fit.n


def training_error_closed_form(fit: RidgeFit) -> float:
    """(lam^2 / n) y^T K_lam^{-2} y = (lam^2 / n) ||alpha||^2."""
    return fit.lam**2 * float(fit.alpha @ fit.alpha) / fit.n


def loo_residuals(fit: RidgeFit) -> np.ndarray:
    if np.any(fit.inv_diag <= 1e-300):
        raise ZeroDiagonal("a diagonal entry of (K + lam Id)^{-1} vanishes")
    return fit.alpha / fit.inv_diag


def loocv_shortcut(fit: RidgeFit) -> float:
    """(1/n) sum_i (alpha_i / [K_lam^{-1}]_ii)^2."""
    r = loo_residuals(fit)
    return float(r @ r) / fit.n


def _naive_residual(M, y, lam, i):
    keep = np.arange(len(y)) != i
    if keep.sum() == 0:
        return y[i]  # empty training set predicts 0
    sub = M[np.ix_(keep, keep)] + lam * np.eye(keep.sum())
    try:
        c = scipy.linalg.cho_factor(sub, lower=True)
        coef = scipy.linalg.cho_solve(c, y[keep])
    except np.linalg.LinAlgError:
        raise SingularSystem(f"leave-{i}-out system is singular") from None
    return y[i] - M[i, keep] @ coef


def loo_residuals_naive(K, y, lam, indices=None) -> np.ndarray:
    """Held-out residuals y_i - f_{-i}(x_i) by explicit refits."""
    K = _as_kernel(K)
    y = np.asarray(y, dtype=np.float64)
    idx = range(K.n) if indices is None else indices
    return np.array([_naive_residual(K.M, y, lam, i) for i in idx])


def loocv_naive(K, y, lam: float) -> float:
    """Leave-one-out CV by n refits on principal submatrices (oracle for the shortcut)."""
    K = _as_kernel(K)
    if K.n < 2:
        raise ValueError("naive LOOCV needs n >= 2")
    r = loo_residuals_naive(K, y, lam)
    return float(r @ r) / K.n


def gcv(fit: RidgeFit) -> float:
    """E_train / (lam * tr K_lam^{-1})^2 with the normalized trace tr = (1/n) Tr."""
    if fit.lam <= 0:
        raise LambdaZero("GCV is undefined at lambda = 0")
    factor = fit.lam * float(np.mean(fit.inv_diag))
    return training_error(fit) / factor**2


def primal_theta(Phi, y, lam: float) -> np.ndarray:
    """Second-layer weights minimizing (1/n)||Phi^T theta / sqrt(N) - y||^2 + (lam/n)||theta||^2.

    Solved in the N-dimensional weight space; at lam = 0 this is the
    minimum-norm least-squares solution.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    N = Phi.shape[0]
    A = Phi.T / np.sqrt(N)
    y = np.asarray(y, dtype=np.float64)
    if lam == 0:
        theta, *_ = np.linalg.lstsq(A, y, rcond=None)
        return theta
    return scipy.linalg.solve(A.T @ A + lam * np.eye(N), A.T @ y, assume_a="pos")


def primal_predict(theta, Phi_test) -> np.ndarray:
    """theta^T sigma(W z) / sqrt(N) for each test column."""
    Phi_test = np.asarray(Phi_test, dtype=np.float64)
    return Phi_test.T @ theta / np.sqrt(Phi_test.shape[0])
