"""Training/test inputs: generation, CSV ingestion and orthogonality diagnostics.

Matrices follow the d x n convention (one sample per column).  CSV files on
disk hold one sample per row and are transposed on load.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import _backend
from .errors import (
    AngleTooLarge,
    DegenerateDraw,
    NoAdmissibleEll,
    NotUnitNorm,
    ParseError,
    ZeroNormSample,
)
from .hermite import HermiteProfile, tail_mass
from .rng import substream

UNIT_TOL = 1e-10
MAX_ANGLE = 1.0 / math.sqrt(2.0)
DEFAULT_MAX_ELL = 10


@dataclass(frozen=True)
class DataMatrix:
    X: np.ndarray
    source: str = "array"
    seed: Optional[int] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, order="C")
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"X must be a non-empty 2-D array, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("X has non-finite entries")
        norms = np.linalg.norm(X, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
        if bad.size:
            raise NotUnitNorm(f"column {bad[0]} has norm {norms[bad[0]]!r}")
        X.flags.writeable = False
        object.__setattr__(self, "X", X)

    @property
    def d(self):
        return self.X.shape[0]

    @property
    def n(self):
        return self.X.shape[1]

    def gram(self):
        return self.X.T @ self.X


def sample_sphere(d: int, n: int, seed: int) -> DataMatrix:
    """n i.i.d. points uniform on the unit sphere in R^d."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    G = substream(seed, "sphere", d, n).standard_normal((d, n))
    norms = np.linalg.norm(G, axis=0)
    for j in np.flatnonzero(norms < 1e-300):
        for attempt in range(8):
            col = substream(seed, "sphere-retry", int(j), attempt).standard_normal(d)
            if np.linalg.norm(col) >= 1e-300:
                G[:, j] = col
                norms[j] = np.linalg.norm(col)
                break
        else:
            raise DegenerateDraw(f"column {j} stayed degenerate after 8 redraws")
    return DataMatrix(G / norms, source="sphere", seed=seed)


def sample_cube(d: int, n: int, seed: int) -> DataMatrix:
    """n i.i.d. points with entries +-1/sqrt(d) uniformly."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    signs = substream(seed, "cube", d, n).integers(0, 2, size=(d, n)) * 2 - 1
    return DataMatrix(signs / math.sqrt(d), source="cube", seed=seed)


def sample_unit(dist: str, d: int, n: int, seed: int) -> DataMatrix:
    if dist == "sphere":
        return sample_sphere(d, n, seed)
    if dist == "cube":
        return sample_cube(d, n, seed)
    raise ValueError(f"unknown distribution {dist!r}")


def read_matrix_csv(path) -> np.ndarray:
    """Read a headerless numeric CSV into a (rows x cols) float array."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric cell in {row!r}") from None
            if rows and len(values) != len(rows[0]):
                raise ParseError(f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(values)}")
            rows.append(values)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.array(rows, dtype=np.float64)


def load_csv(path, feature_subsample: Optional[int] = None, seed: int = 0) -> DataMatrix:
    """Load samples (rows) from CSV, optionally keep a random feature subset, normalize."""
    A = read_matrix_csv(path)
    if feature_subsample is not None:
        if not 1 <= feature_subsample <= A.shape[1]:
            raise ValueError(f"feature_subsample must be in 1..{A.shape[1]}")
        cols = np.sort(substream(seed, "features").choice(A.shape[1], feature_subsample, replace=False))
        A = A[:, cols]
    norms = np.linalg.norm(A, axis=1)
    small = np.flatnonzero(norms < 1e-12)
    if small.size:
        raise ZeroNormSample(int(small[0]))
    return DataMatrix((A / norms[:, None]).T, source=f"csv({path})", seed=seed)


def write_csv(data: DataMatrix, path) -> None:
    """Write samples as rows, 17 significant digits, no header."""
    with open(path, "w", newline="") as fh:
        for col in data.X.T:
            fh.write(",".join(f"{v:.17g}" for v in col))
            fh.write("\n")


@dataclass(frozen=True)
class OrthogonalityProfile:
    eps_n: float
    deltas: tuple
    n: int
    chosen_ell: Optional[int] = None
    angle_ok: bool = True
    cond13_ok: Optional[bool] = None
    thresholds: Optional[tuple] = None

    @property
    def max_ell(self):
        return len(self.deltas) - 1

    def check(self, hp: HermiteProfile) -> "OrthogonalityProfile":
        """Attach the per-ell thresholds sigma^2_{>l} / (4 ||sigma||_4^2) and the selection."""
        top = min(self.max_ell, hp.k_max)
        thresholds = tuple(tail_mass(hp, ell) / (4.0 * hp.l4_norm_sq) for ell in range(top + 1))
        chosen = None
        for ell, thr in enumerate(thresholds):
            if tail_mass(hp, ell) > 0.0 and self.deltas[ell] <= thr:
                chosen = ell
                break
        return replace(self, thresholds=thresholds, chosen_ell=chosen,
                       cond13_ok=chosen is not None and self.angle_ok)


def orthogonality_profile(X: DataMatrix, max_ell: int = DEFAULT_MAX_ELL) -> OrthogonalityProfile:
    """eps_n and Delta_l = ||(X^T X)^{.(l+1)} - Id||_F for l = 0..max_ell."""
    if max_ell < 0:
        raise ValueError("max_ell must be >= 0")
    G = X.gram()
    if X.n > 1:
        off = np.abs(G[~np.eye(X.n, dtype=bool)])
        eps = float(min(off.max(), 1.0))
    else:
        eps = 0.0
    deltas = np.sqrt(_backend.hadamard_power_sums(G, max_ell))
    # |rho| <= 1 forces monotone deltas; clip rounding from |rho| = 1 + O(ulp)
    deltas = np.minimum.accumulate(deltas)
    return OrthogonalityProfile(eps, tuple(float(v) for v in deltas), X.n, angle_ok=eps <= MAX_ANGLE)


def select_ell(profile: OrthogonalityProfile, hp: HermiteProfile) -> int:
    """Smallest ell with Delta_l <= sigma^2_{>l} / (4 ||sigma||_4^2) and sigma^2_{>l} > 0."""
    if not profile.angle_ok:
        raise AngleTooLarge(f"max off-diagonal |<x_i, x_j>| = {profile.eps_n:.4g} exceeds 1/sqrt(2)")
    checked = profile.check(hp)
    if checked.chosen_ell is None:
        raise NoAdmissibleEll(
            "no ell <= %d satisfies the orthogonality condition (deltas %s vs thresholds %s)"
            % (len(checked.thresholds) - 1,
               ", ".join(f"{v:.3g}" for v in checked.deltas[: len(checked.thresholds)]),
               ", ".join(f"{v:.3g}" for v in checked.thresholds))
        )
    return checked.chosen_ell


@dataclass(frozen=True)
class TestPointProfile:
    tail_norm: float
    angle_ok: bool
    cond34_ok: bool
    hp: HermiteProfile

    __test__ = False  # not a pytest class


def test_point_profile(X: DataMatrix, x, ell: int, hp: HermiteProfile) -> TestPointProfile:
    """Orthogonality of a test point against the training columns."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != X.d:
        raise ValueError(f"test point has dimension {x.shape[0]}, data has {X.d}")
    if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
        raise NotUnitNorm(f"test point has norm {np.linalg.norm(x)!r}")
    inner = X.X.T @ x
    tail_norm = float(np.linalg.norm(inner ** (ell + 1)))
    angle_ok = bool(np.max(np.abs(inner)) <= MAX_ANGLE)
    threshold = tail_mass(hp, ell) / (4.0 * hp.l4_norm_sq)
    return TestPointProfile(tail_norm, angle_ok, angle_ok and tail_norm <= threshold, hp)


test_point_profile.__test__ = False
