"""Conjugate-kernel matrices: empirical, expected and truncated polynomial.

The empirical kernel is ``Phi^T Phi / N`` with ``Phi = sigma(W X)``; it is
accumulated over fixed row blocks of ``W`` so that memory stays bounded for
large widths.  The expected kernel is the inner-product series
``sum_k zeta_k^2 rho^k`` applied entrywise to the Gram matrix, and the
polynomial kernel keeps the first ``ell + 1`` terms plus the ridge
``sigma^2_{>ell} Id``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from . import _backend
from .dataset import DataMatrix
from .errors import DimensionMismatch, NotPositiveDefinite, TailNotConvergent
from .hermite import ActivationSpec, HermiteProfile, eval_activation, expand_activation, tail_mass
from .rng import substream

# rows of W drawn per RNG substream; fixed so W does not depend on the compute block size
W_BLOCK = 1024
SERIES_TOL = 1e-12
MAX_SERIES_ORDER = 128
COINCIDENT_TOL = 1e-12
CACHE_MAGIC = b"RFCK1"


@dataclass(frozen=True)
class RandomFeatureMap:
    """``N`` random neurons ``sigma(<w_i, x>)`` with i.i.d. N(0, 1) weights.

    Rows of ``W`` are generated lazily, block by block, from ``seed``.
    """

    N: int
    d: int
    seed: int
    act: ActivationSpec

    def __post_init__(self):
        if self.N < 1 or self.d < 1:
            raise ValueError("N and d must be positive")

    def weight_blocks(self):
        for b, start in enumerate(range(0, self.N, W_BLOCK)):
            rows = min(W_BLOCK, self.N - start)
            yield start, substream(self.seed, "W", self.d, b).standard_normal((rows, self.d))

    @property
    def W(self):
        return np.vstack([blk for _, blk in self.weight_blocks()])

    def features(self, X):
        """Phi = sigma(W X), shape (N, n).  Materializes everything; small N only."""
        X = _as_matrix(X, self.d)
        return eval_activation(self.act, self.W @ X)


@dataclass(frozen=True)
class Provenance:
    kind: str  # "empirical" | "expected" | "polynomial" | "external"
    N: Optional[int] = None
    seed: Optional[int] = None
    k_max: Optional[int] = None
    ell: Optional[int] = None

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass(frozen=True)
class KernelMatrix:
    M: np.ndarray
    provenance: Provenance = Provenance("external")
    act_profile: Optional[HermiteProfile] = field(default=None, compare=False)

    def __post_init__(self):
        M = np.array(self.M, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"kernel must be square, got {M.shape}")
        M.flags.writeable = False
        object.__setattr__(self, "M", M)

    @property
    def n(self):
        return self.M.shape[0]

    def ridge(self, lam):
        return self.M + lam * np.eye(self.n)


def _as_matrix(X, d=None):
    A = X.X if isinstance(X, DataMatrix) else np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if d is not None and A.shape[0] != d:
        raise DimensionMismatch(f"inputs have dimension {A.shape[0]}, weights expect {d}")
    return A


def empirical_kernels(fm: RandomFeatureMap, X, Z=None):
    """One pass over W: returns ``(K_N(X, X), K_N(X, Z))`` (second is None without Z)."""
    A = _as_matrix(X, fm.d)
    B = None if Z is None else _as_matrix(Z, fm.d)
    both = A if B is None else np.hstack([A, B])
    n = A.shape[1]
    gram = np.zeros((n, n))
    cross = None if B is None else np.zeros((n, B.shape[1]))
    for _, W in fm.weight_blocks():
        phi = eval_activation(fm.act, W @ both)
        phi_x = phi[:, :n]
        gram += phi_x.T @ phi_x
        if B is not None:
            cross += phi_x.T @ phi[:, n:]
    gram /= fm.N
    gram = 0.5 * (gram + gram.T)
    if cross is not None:
        cross /= fm.N
    return gram, cross


def empirical_ck(fm: RandomFeatureMap, X: DataMatrix, profile: Optional[HermiteProfile] = None) -> KernelMatrix:
    """K_N = sigma(W X)^T sigma(W X) / N."""
    gram, _ = empirical_kernels(fm, X)
    return KernelMatrix(gram, Provenance("empirical", N=fm.N, seed=fm.seed), profile)


def cross_kernel_empirical(fm: RandomFeatureMap, X: DataMatrix, Z) -> np.ndarray:
    """K_N(X, Z) with entries sigma(W x_i)^T sigma(W z_j) / N, shape (n, m)."""
    A = _as_matrix(X, fm.d)
    B = _as_matrix(Z, fm.d)
    cross = np.zeros((A.shape[1], B.shape[1]))
    for _, W in fm.weight_blocks():
        cross += eval_activation(fm.act, W @ A).T @ eval_activation(fm.act, W @ B)
    return cross / fm.N


def series_order(hp: HermiteProfile, rho_max: float, tol: float = SERIES_TOL):
    """Pick the truncation order K* of the inner-product series.

    Returns ``(profile, K*)``; the profile is re-expanded with more
    coefficients when the supplied one is too short to meet ``tol``.
    """
    degree = hp.degree
    if degree is not None:
        return hp, min(degree, hp.k_max)
    if rho_max >= 1.0:
        raise TailNotConvergent(
            "distinct points with |<x, z>| = 1 and an infinite Hermite expansion: "
            "no finite truncation of the series meets the tolerance"
        )
    while True:
        for K in range(hp.k_max + 1):
            if tail_mass(hp, K) * rho_max ** (K + 1) < tol:
                return hp, K
        if hp.activation is None or hp.k_max >= MAX_SERIES_ORDER:
            raise TailNotConvergent(
                f"series tail bound not below {tol:g} within {hp.k_max} Hermite coefficients"
            )
        hp = expand_activation(hp.activation, min(2 * hp.k_max, MAX_SERIES_ORDER), hp.quad_tol)


def _offdiag_max(rho, coincident):
    vals = np.abs(rho[~coincident])
    return float(vals.max()) if vals.size else 0.0


def expected_kernel(X: DataMatrix, hp: HermiteProfile, tol: float = SERIES_TOL) -> KernelMatrix:
    """K = sum_k zeta_k^2 (X^T X)^{.k}; diagonal set exactly to ||sigma||_2^2."""
    G = X.gram()
    eye = np.eye(X.n, dtype=bool)
    hp, order = series_order(hp, _offdiag_max(G, eye), tol)
    z2 = np.asarray(hp.coeffs[: order + 1]) ** 2
    M = _backend.power_series(z2, G)
    M = 0.5 * (M + M.T)
    M[eye] = hp.l2_norm_sq
    return KernelMatrix(M, Provenance("expected", k_max=order), hp)


def polynomial_kernel(X: DataMatrix, hp: HermiteProfile, ell: int) -> KernelMatrix:
    """K_ell = sum_{k<=ell} zeta_k^2 (X^T X)^{.k} + sigma^2_{>ell} Id."""
    if not 0 <= ell <= hp.k_max:
        raise ValueError(f"ell={ell} outside 0..{hp.k_max}")
    G = X.gram()
    z2 = np.asarray(hp.coeffs[: ell + 1]) ** 2
    M = _backend.power_series(z2, G)
    M = 0.5 * (M + M.T)
    np.fill_diagonal(M, hp.l2_norm_sq)
    return KernelMatrix(M, Provenance("polynomial", ell=ell), hp)


def cross_kernel_expected(X: DataMatrix, Z, hp: HermiteProfile, mode="full", tol: float = SERIES_TOL,
                          ell: Optional[int] = None) -> np.ndarray:
    """K(X, Z) entrywise on X^T Z, full series (``mode="full"``) or truncated (``mode="poly"``).

    Coincident points (inner product 1) get ``||sigma||_2^2``.
    """
    A = _as_matrix(X)
    B = _as_matrix(Z, A.shape[0])
    rho = A.T @ B
    coincident = np.abs(rho - 1.0) <= COINCIDENT_TOL
    if mode == "full":
        hp, order = series_order(hp, _offdiag_max(rho, coincident), tol)
    elif mode == "poly":
        if ell is None or not 0 <= ell <= hp.k_max:
            raise ValueError("poly mode needs 0 <= ell <= k_max")
        order = ell
    else:
        raise ValueError(f"unknown mode {mode!r}")
    z2 = np.asarray(hp.coeffs[: order + 1]) ** 2
    out = _backend.power_series(z2, rho)
    out[coincident] = hp.l2_norm_sq
    return out


def _eigh_ridge(K: KernelMatrix, lam: float):
    w, V = scipy.linalg.eigh(K.ridge(lam))
    if w[0] <= 1e-12:
        raise NotPositiveDefinite(f"lambda_min(K) + lambda = {w[0]:.3g} <= 1e-12")
    return w, V


def normalized_concentration(K: KernelMatrix, K_N: KernelMatrix, lam: float = 0.0) -> float:
    """Spectral norm of K_lam^{-1/2} (K_N - K) K_lam^{-1/2}."""
    if K.M.shape != K_N.M.shape:
        raise DimensionMismatch(f"kernel shapes differ: {K.M.shape} vs {K_N.M.shape}")
    w, V = _eigh_ridge(K, lam)
    inv_sqrt = (V / np.sqrt(w)) @ V.T
    S = inv_sqrt @ (K_N.M - K.M) @ inv_sqrt
    S = 0.5 * (S + S.T)
    ev = scipy.linalg.eigvalsh(S)
    return float(max(abs(ev[0]), abs(ev[-1])))


def min_eigenvalue(K) -> float:
    M = K.M if isinstance(K, KernelMatrix) else np.asarray(K)
    return float(scipy.linalg.eigvalsh(M)[0])


def save_kernel(K: KernelMatrix, path) -> None:
    """Binary cache: b"RFCK1", n (u64 LE), n*n f64 LE row-major, JSON provenance."""
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<Q", K.n))
        fh.write(np.ascontiguousarray(K.M, dtype="<f8").tobytes())
        fh.write(json.dumps(K.provenance.to_dict(), sort_keys=True).encode())


def load_kernel(path) -> KernelMatrix:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != CACHE_MAGIC:
        raise ValueError(f"{path}: not an RFCK1 kernel file")
    (n,) = struct.unpack_from("<Q", blob, 5)
    start = 13
    end = start + 8 * n * n
    if len(blob) < end:
        raise ValueError(f"{path}: truncated kernel payload")
    M = np.frombuffer(blob[start:end], dtype="<f8").reshape(n, n).astype(np.float64)
    prov = json.loads(blob[end:].decode() or "{}")
    return KernelMatrix(M, Provenance(**prov))
