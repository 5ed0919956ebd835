"""Seeded width sweeps comparing random-feature ridge regression to its kernel limit.

A sweep fixes one design ``X`` and, for every trial and width ``N``, draws a
fresh random feature map, then records the random-feature value and the
kernel-baseline value of each requested metric at each ridge parameter.
Every random draw is keyed by its coordinates, so the result does not depend
on the number of worker threads or their scheduling.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional, Union

import numpy as np
import tomli

from . import ridge
from .dataset import DataMatrix, load_csv, orthogonality_profile, sample_cube, sample_unit, select_ell
from .errors import ConfigError, InsufficientData, NonPositiveDiff, RFConcError
from .hermite import ActivationSpec, expand_activation, parse_activation
from .kernel import (
    KernelMatrix,
    Provenance,
    RandomFeatureMap,
    cross_kernel_expected,
    empirical_kernels,
    expected_kernel,
    normalized_concentration,
    polynomial_kernel,
)
from .rng import derive_seed
from .teacher import check_compatibility, draw_replicates, replicate_error

METRICS = ("train", "loocv", "gcv", "test", "concentration")
CSV_HEADER = ("metric", "lambda", "N", "trial", "rf_value", "kernel_value", "abs_diff")
PRESET_DIR = Path(__file__).with_name("presets")
LOO_CHECK_POINTS = 32
LOO_CHECK_RTOL = 1e-6


@dataclass(frozen=True)
class ExperimentConfig:
    activation: ActivationSpec
    tau: ActivationSpec
    sigma_eps: float
    lambda_grid: tuple
    N_grid: tuple
    dist: str = "sphere"
    d: Optional[int] = None
    n: Optional[int] = None
    path: Optional[str] = None
    feature_subsample: Optional[int] = None
    ell: Union[int, str] = "auto"
    baseline: str = "expected"
    trials: int = 5
    B: int = 8
    M: int = 250
    root_seed: int = 0
    metrics: tuple = ("train", "loocv", "gcv", "test")
    k_max: int = 16

    def to_dict(self):
        out = asdict(self)
        out["activation"] = self.activation.label()
        out["tau"] = self.tau.label()
        out["lambda_grid"] = list(self.lambda_grid)
        out["N_grid"] = list(self.N_grid)
        out["metrics"] = list(self.metrics)
        return out

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class Row(NamedTuple):
    metric: str
    lam: float
    N: int
    trial: int
    rf_value: float
    kernel_value: float
    abs_diff: float


@dataclass
class SweepResult:
    rows: list
    kernel_baseline: str = "expected"
    provenance: dict = field(default_factory=dict)

    def sorted_rows(self):
        return sorted(self.rows, key=lambda r: (r.metric, r.lam, r.N, r.trial))


def make_row(metric, lam, N, trial, rf_value, kernel_value):
    rf_value = float(rf_value)
    kernel_value = float(kernel_value)
    return Row(metric, float(lam), int(N), int(trial), rf_value, kernel_value, abs(rf_value - kernel_value))


# --- configuration -----------------------------------------------------------------

def _locate(text, section, key):
    """1-based line of ``key = ...`` inside ``[section]`` (top level if section is None)."""
    if text is None:
        return None
    current = None
    pattern = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
    for lineno, line in enumerate(text.splitlines(), start=1):
        head = re.match(r"^\s*\[([^\]]+)\]\s*$", line)
        if head:
            current = head.group(1).strip()
            continue
        if current == section and pattern.match(line):
            return lineno
    return None


def _deep_merge(base, over):
    out = dict(base)
    for k, v in over.items():
        out[k] = _deep_merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


_TOP_KEYS = {"activation", "ell", "baseline", "lambda_grid", "N_grid", "trials", "B", "M",
             "root_seed", "metrics", "k_max", "data", "teacher", "scale"}
_DATA_KEYS = {"dist", "d", "n", "path", "feature_subsample"}
_TEACHER_KEYS = {"tau", "sigma_eps"}


def config_from_dict(raw: dict, text: Optional[str] = None, path=None, scale: Optional[str] = None):
    """Build and validate an :class:`ExperimentConfig`; all problems are reported at once."""
    errors = []

    def err(msg, section=None, key=None):
        line = _locate(text, section, key) if key else None
        errors.append(f"line {line}: {msg}" if line else msg)

    scales = raw.get("scale", {}) or {}
    if scale is not None and scale != "desk":
        if scale not in scales:
            raise ConfigError([f"no [scale.{scale}] section"], path)
        raw = _deep_merge(raw, scales[scale])

    for key in raw:
        if key not in _TOP_KEYS:
            err(f"unknown key {key!r}", None, key)
    data = raw.get("data", {}) or {}
    teacher = raw.get("teacher", {}) or {}
    for key in data:
        if key not in _DATA_KEYS:
            err(f"unknown key data.{key}", "data", key)
    for key in teacher:
        if key not in _TEACHER_KEYS:
            err(f"unknown key teacher.{key}", "teacher", key)

    def activation(value, section, key, default=None):
        if value is None:
            if default is None:
                err(f"missing {key}", section, key)
            return default
        try:
            return parse_activation(str(value))
        except ValueError as exc:
            err(str(exc), section, key)
            return default

    act = activation(raw.get("activation"), None, "activation")
    tau = activation(teacher.get("tau"), "teacher", "tau", ActivationSpec("softplus"))

    sigma_eps = teacher.get("sigma_eps", 0.0)
    if not isinstance(sigma_eps, (int, float)) or sigma_eps < 0:
        err("teacher.sigma_eps must be a non-negative number", "teacher", "sigma_eps")
        sigma_eps = 0.0

    dist = data.get("dist", "sphere")
    if dist not in ("sphere", "cube", "csv"):
        err(f"data.dist must be sphere, cube or csv, got {dist!r}", "data", "dist")
    d, n = data.get("d"), data.get("n")
    if dist in ("sphere", "cube"):
        for key, value in (("d", d), ("n", n)):
            if not isinstance(value, int) or value < 1:
                err(f"data.{key} must be a positive integer", "data", key)
    elif dist == "csv" and not data.get("path"):
        err("data.path is required for dist = 'csv'", "data", "path")

    lambdas = raw.get("lambda_grid")
    if not isinstance(lambdas, list) or not lambdas:
        err("lambda_grid must be a non-empty list", None, "lambda_grid")
        lambdas = []
    elif any(not isinstance(v, (int, float)) or v < 0 for v in lambdas):
        err("lambda_grid values must be >= 0", None, "lambda_grid")

    widths = raw.get("N_grid")
    if not isinstance(widths, list) or not widths or any(not isinstance(v, int) or v < 1 for v in widths):
        err("N_grid must be a non-empty list of positive integers", None, "N_grid")
        widths = []
    elif any(b <= a for a, b in zip(widths, widths[1:])):
        err("N_grid must be strictly increasing", None, "N_grid")

    metrics = raw.get("metrics", ["train", "loocv", "gcv", "test"])
    if not isinstance(metrics, list) or not metrics or any(m not in METRICS for m in metrics):
        err(f"metrics must be a non-empty subset of {list(METRICS)}", None, "metrics")
        metrics = []
    if "gcv" in metrics and any(isinstance(v, (int, float)) and v == 0 for v in lambdas):
        err("metric 'gcv' requires every lambda > 0 (GCV is undefined at lambda = 0)", None, "lambda_grid")

    ints = {}
    for key, default, low in (("trials", 5, 1), ("B", 8, 2), ("M", 250, 1), ("root_seed", 0, 0), ("k_max", 16, 0)):
        value = raw.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool) or value < low:
            err(f"{key} must be an integer >= {low}", None, key)
            value = default
        ints[key] = value

    ell = raw.get("ell", "auto")
    if not (ell == "auto" or (isinstance(ell, int) and not isinstance(ell, bool) and ell >= 0)):
        err("ell must be a non-negative integer or 'auto'", None, "ell")
    elif isinstance(ell, int) and ell > ints["k_max"]:
        err(f"ell={ell} exceeds k_max={ints['k_max']}", None, "ell")

    baseline = raw.get("baseline", "expected")
    if baseline not in ("expected", "polynomial"):
        err("baseline must be 'expected' or 'polynomial'", None, "baseline")

    if errors:
        raise ConfigError(errors, path)
    return ExperimentConfig(
        activation=act, tau=tau, sigma_eps=float(sigma_eps),
        lambda_grid=tuple(float(v) for v in lambdas), N_grid=tuple(widths),
        dist=dist, d=d, n=n, path=data.get("path"), feature_subsample=data.get("feature_subsample"),
        ell=ell, baseline=baseline, metrics=tuple(metrics), **ints,
    )


def resolve_config_path(path) -> Path:
    """Return ``path`` if it exists, else the bundled preset of the same file name."""
    p = Path(path)
    if p.exists():
        return p
    for candidate in (PRESET_DIR / p.name, PRESET_DIR / f"{p.name}.toml"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(str(path))


def validate_config(path, scale: Optional[str] = None) -> ExperimentConfig:
    """Load a TOML config; raises ConfigError listing every problem with line numbers."""
    p = resolve_config_path(path)
    text = p.read_text()
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError([str(exc)], str(path)) from None
    return config_from_dict(raw, text, str(path), scale)


# --- sweep -------------------------------------------------------------------------

class SweepCellError(RFConcError):
    pass


@dataclass
class _Setup:
    cfg: ExperimentConfig
    X: DataMatrix
    hp: object
    ell: Optional[int]
    baseline: KernelMatrix
    expected: Optional[KernelMatrix]
    trials: list  # per trial: list of Replicate


def _prepare(cfg: ExperimentConfig) -> _Setup:
    if cfg.dist == "csv":
        X = load_csv(cfg.path, cfg.feature_subsample, derive_seed(cfg.root_seed, "features"))
    else:
        X = sample_unit(cfg.dist, cfg.d, cfg.n, derive_seed(cfg.root_seed, "data"))
    hp = expand_activation(cfg.activation, cfg.k_max)
    ell = None
    if cfg.baseline == "polynomial" or cfg.ell != "auto":
        ell = select_ell(orthogonality_profile(X, cfg.k_max), hp) if cfg.ell == "auto" else cfg.ell
    if cfg.baseline == "polynomial":
        baseline = polynomial_kernel(X, hp, ell)
    else:
        baseline = expected_kernel(X, hp)
    expected = None
    if "concentration" in cfg.metrics:
        expected = baseline if cfg.baseline == "expected" else expected_kernel(X, hp)
    tau_hp = expand_activation(cfg.tau, cfg.k_max)
    if ell is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            check_compatibility(hp, tau_hp, ell)
    B = cfg.B if "test" in cfg.metrics else 1
    M = cfg.M if "test" in cfg.metrics else 1
    # test points follow the data distribution; CSV data is tested on the sphere
    sampler = (lambda d, m, seed: sample_cube(d, m, seed).X) if cfg.dist == "cube" else None
    trials = [draw_replicates(X, cfg.tau, cfg.sigma_eps, B, M, derive_seed(cfg.root_seed, "replicates", t),
                              sampler, tau_hp)
              for t in range(cfg.trials)]
    return _Setup(cfg, X, hp, ell, baseline, expected, trials)


def _metric_values(K, cross, reps, lam, metrics, expected=None):
    """Value of each requested metric for kernel ``K`` at ridge ``lam``.

    ``cross`` is K(X, Z) for the test points of all replicates, concatenated.
    """
    out = {}
    f = ridge.fit(K, reps[0].y, lam)
    if "train" in metrics:
        out["train"] = ridge.training_error(f)
    if "loocv" in metrics:
        out["loocv"] = ridge.loocv_shortcut(f)
    if "gcv" in metrics:
        out["gcv"] = ridge.gcv(f)
    if "test" in metrics:
        ys = np.column_stack([r.y for r in reps])
        alphas = f.solve(ys)
        m = reps[0].Z.shape[1]
        errs = []
        for b, rep in enumerate(reps):
            pred = cross[:, b * m:(b + 1) * m].T @ alphas[:, b]
            errs.append(replicate_error(pred, rep, control_variate=rep.target_m2 is not None))
        out["test"] = float(np.mean(errs))
    if "concentration" in metrics:
        out["concentration"] = normalized_concentration(expected, K, lam)
    return out


def _baseline_cell(setup: _Setup, t: int):
    cfg = setup.cfg
    reps = setup.trials[t]
    cross = None
    if "test" in cfg.metrics:
        Z = np.hstack([r.Z for r in reps])
        if cfg.baseline == "polynomial":
            cross = cross_kernel_expected(setup.X, Z, setup.hp, mode="poly", ell=setup.ell)
        else:
            cross = cross_kernel_expected(setup.X, Z, setup.hp, mode="full")
    values = {}
    base_metrics = [m for m in cfg.metrics if m != "concentration"]
    for lam in cfg.lambda_grid:
        try:
            values[lam] = _metric_values(setup.baseline, cross, reps, lam, base_metrics)
        except RFConcError as exc:
            raise SweepCellError(f"baseline at (lambda={lam:g}, trial={t}): {exc}") from exc
        if "concentration" in cfg.metrics:
            values[lam]["concentration"] = 0.0
    return values


def _rf_cell(setup: _Setup, t: int, N: int, check_loo: bool):
    cfg = setup.cfg
    reps = setup.trials[t]
    fm = RandomFeatureMap(N, setup.X.d, derive_seed(cfg.root_seed, "W", t, N), cfg.activation)
    Z = np.hstack([r.Z for r in reps]) if "test" in cfg.metrics else None
    gram, cross = empirical_kernels(fm, setup.X, Z)
    K_N = KernelMatrix(gram, Provenance("empirical", N=N, seed=fm.seed))
    values = {}
    for lam in cfg.lambda_grid:
        try:
            values[lam] = _metric_values(K_N, cross, reps, lam, cfg.metrics, setup.expected)
        except RFConcError as exc:
            raise SweepCellError(f"random features at (lambda={lam:g}, N={N}, trial={t}): {exc}") from exc
    if check_loo and "loocv" in cfg.metrics:
        lam = cfg.lambda_grid[0]
        for K in (K_N, setup.baseline):
            _check_loo(K, reps[0].y, lam)
    return values


def _check_loo(K, y, lam):
    f = ridge.fit(K, y, lam)
    idx = np.arange(min(LOO_CHECK_POINTS, K.n))
    fast = ridge.loo_residuals(f)[idx]
    slow = ridge.loo_residuals_naive(K, y, lam, idx)
    scale = max(np.abs(slow).max(), 1e-300)
    if np.abs(fast - slow).max() > LOO_CHECK_RTOL * scale:
        raise RFConcError(f"LOOCV shortcut disagrees with explicit refits at lambda={lam:g}")


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> SweepResult:
    """Run every (trial, N) cell; ``threads`` only changes wall time, never the rows."""
    setup = _prepare(cfg)
    threads = max(1, int(threads))
    smallest = cfg.N_grid[0]
    cells = [(t, N) for t in range(cfg.trials) for N in cfg.N_grid]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        base = list(pool.map(lambda t: _baseline_cell(setup, t), range(cfg.trials)))
        rf = list(pool.map(lambda c: _rf_cell(setup, c[0], c[1], c == (0, smallest)), cells))
    rows = []
    for (t, N), values in zip(cells, rf):
        for lam in cfg.lambda_grid:
            for metric in cfg.metrics:
                rows.append(make_row(metric, lam, N, t, values[lam][metric], base[t][lam][metric]))
    label = "expected" if cfg.baseline == "expected" else f"polynomial({setup.ell})"
    prov = {"config_hash": cfg.config_hash(), "root_seed": cfg.root_seed, "ell": setup.ell}
    result = SweepResult(rows, label, prov)
    result.rows = result.sorted_rows()
    return result


# --- output and analysis -------------------------------------------------------------

def _fmt(v):
    return f"{v:.17g}"


def emit_csv(result: SweepResult, path) -> None:
    """Header plus rows sorted by (metric, lambda, N, trial), 17 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_HEADER) + "\n")
        for r in result.sorted_rows():
            fh.write(",".join([r.metric, _fmt(r.lam), str(r.N), str(r.trial),
                               _fmt(r.rf_value), _fmt(r.kernel_value), _fmt(r.abs_diff)]) + "\n")


def read_csv(path) -> SweepResult:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for rec in reader:
            if not rec:
                continue
            m, lam, N, t, rf, kv, diff = rec
            rows.append(Row(m, float(lam), int(N), int(t), float(rf), float(kv), float(diff)))
    return SweepResult(rows, "unknown")


def mean_abs_diff(result: SweepResult, metric: str, lam: float):
    """{N: mean over trials of abs_diff} for one (metric, lambda)."""
    groups = {}
    for r in result.rows:
        if r.metric == metric and r.lam == lam:
            groups.setdefault(r.N, []).append(r.abs_diff)
    return {N: float(np.mean(v)) for N, v in sorted(groups.items())}


def fit_slope(result: SweepResult, metric: str, lam: float):
    """OLS of log(mean abs_diff) on log N; returns (slope, intercept)."""
    means = mean_abs_diff(result, metric, lam)
    if len(means) < 3:
        raise InsufficientData(f"{metric} at lambda={lam:g}: need >= 3 widths, have {len(means)}")
    kept = {N: v for N, v in means.items() if v > 0}
    if len(kept) < len(means):
        dropped = sorted(set(means) - set(kept))
        if len(kept) < 3:
            raise NonPositiveDiff(f"{metric} at lambda={lam:g}: zero mean difference at N={dropped}")
        warnings.warn(f"{metric} at lambda={lam:g}: dropping N={dropped} with zero mean difference")
    logN = np.log(np.array(list(kept), dtype=np.float64))
    logv = np.log(np.array(list(kept.values())))
    slope, intercept = np.polyfit(logN, logv, 1)
    return float(slope), float(intercept)


class SlopeReport(NamedTuple):
    metric: str
    lam: float
    slope: float
    intercept: float
    passed: bool


def slope_report(result: SweepResult, threshold: float = -0.4, concentration_band=(-0.65, -0.35)):
    """Slope per (metric, lambda) with a pass flag.

    Differences must decay at least as fast as ``N**threshold``; the
    concentration statistic must fall inside ``concentration_band``.
    """
    out = []
    keys = sorted({(r.metric, r.lam) for r in result.rows})
    for metric, lam in keys:
        slope, intercept = fit_slope(result, metric, lam)
        if metric == "concentration":
            ok = concentration_band[0] <= slope <= concentration_band[1]
        else:
            ok = slope <= threshold
        out.append(SlopeReport(metric, lam, slope, intercept, bool(ok)))
    return out

