"""Command-line entry point: ``rfconc <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 runtime or numerical error.
Data goes to stdout or files, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

import numpy as np

from .errors import ConfigError, RFConcError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v):
    return f"{v:.17g}"


def _print_table(header, rows, out):
    cells = [[str(c) for c in header]] + [[c if isinstance(c, str) else f"{c:.10g}" for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for r in cells:
        out.write("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip() + "\n")


# --- subcommands ---------------------------------------------------------------------

def cmd_gen(args, out):
    from .dataset import sample_unit, write_csv

    data = sample_unit(args.dist, args.d, args.n, args.seed)
    write_csv(data, args.out)
    print(f"wrote {data.n} samples of dimension {data.d} to {args.out}", file=sys.stderr)


def cmd_profile(args, out):
    from .dataset import load_csv, orthogonality_profile
    from .hermite import expand_activation, parse_activation

    data = load_csv(args.data)
    prof = orthogonality_profile(data, args.max_ell)
    out.write(f"n\t{data.n}\nd\t{data.d}\neps_n\t{prof.eps_n:.10g}\n")
    out.write(f"angle_ok\t{str(prof.angle_ok).lower()}\n")
    if args.activation:
        hp = expand_activation(parse_activation(args.activation), max(args.max_ell, 16))
        prof = prof.check(hp)
        rows = [(str(ell), prof.deltas[ell], thr, "yes" if prof.deltas[ell] <= thr else "no")
                for ell, thr in enumerate(prof.thresholds)]
        _print_table(("ell", "delta", "threshold", "admissible"), rows, out)
        chosen = "none" if prof.chosen_ell is None else str(prof.chosen_ell)
        out.write(f"chosen_ell\t{chosen}\ncondition_ok\t{str(bool(prof.cond13_ok)).lower()}\n")
    else:
        _print_table(("ell", "delta"), [(str(ell), v) for ell, v in enumerate(prof.deltas)], out)


def cmd_hermite(args, out):
    from .hermite import expand_activation, parse_activation, tail_mass

    hp = expand_activation(parse_activation(args.activation), args.max_degree, args.tol)
    header = ("k", "zeta", "cumulative_sq", "tail_mass", "l2_norm_sq", "l4_norm")
    rows = []
    cum = 0.0
    for k in range(args.max_degree + 1):
        z = float(hp.coeffs[k])
        cum += z * z
        rows.append((str(k), z, cum, tail_mass(hp, k), hp.l2_norm_sq, hp.l4_norm))
    if args.format == "csv":
        out.write(",".join(header) + "\n")
        for r in rows:
            out.write(",".join([r[0]] + [_fmt(v) for v in r[1:]]) + "\n")
    else:
        out.write(f"activation  {hp.activation.label() if hp.activation else args.activation}\n")
        out.write(f"l2_norm_sq  {hp.l2_norm_sq:.12g}\nl4_norm     {hp.l4_norm:.12g}\n")
        _print_table(header[:4], [r[:4] for r in rows], out)


def cmd_compare(args, out):
    from .dataset import sample_unit
    from .experiment import _metric_values
    from .hermite import expand_activation, parse_activation
    from .kernel import (KernelMatrix, Provenance, RandomFeatureMap, cross_kernel_expected, empirical_kernels,
                         expected_kernel, polynomial_kernel)
    from .rng import derive_seed
    from .teacher import draw_replicates

    act = parse_activation(args.activation)
    tau = parse_activation(args.tau)
    X = sample_unit(args.dist, args.d, args.n, derive_seed(args.seed, "data"))
    hp = expand_activation(act)
    reps = draw_replicates(X, tau, args.sigma_eps, args.B, args.M, derive_seed(args.seed, "replicates", 0))
    Z = np.hstack([r.Z for r in reps])
    metrics = ["train", "loocv", "test"] + (["gcv"] if args.lam > 0 else [])
    fm = RandomFeatureMap(args.N, X.d, derive_seed(args.seed, "W", 0, args.N), act)
    gram, cross_rf = empirical_kernels(fm, X, Z)
    models = {
        "RFRR": (KernelMatrix(gram, Provenance("empirical", N=args.N, seed=fm.seed)), cross_rf),
        "KRR": (expected_kernel(X, hp), cross_kernel_expected(X, Z, hp, mode="full")),
        "PKRR": (polynomial_kernel(X, hp, args.ell), cross_kernel_expected(X, Z, hp, mode="poly", ell=args.ell)),
    }
    vals = {name: _metric_values(K, cross, reps, args.lam, metrics) for name, (K, cross) in models.items()}
    order = [m for m in ("train", "loocv", "gcv", "test") if m in metrics]
    rows = [(m, vals["RFRR"][m], vals["KRR"][m], vals["PKRR"][m],
             abs(vals["RFRR"][m] - vals["KRR"][m]), abs(vals["KRR"][m] - vals["PKRR"][m])) for m in order]
    _print_table(("metric", "RFRR", "KRR", "PKRR", "|RFRR-KRR|", "|KRR-PKRR|"), rows, out)
    if args.lam == 0:
        print("gcv skipped: undefined at lambda = 0", file=sys.stderr)


def cmd_sweep(args, out):
    from .experiment import emit_csv, run_sweep, validate_config

    cfg = validate_config(args.config, args.scale)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run_sweep(cfg, threads=args.threads)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    emit_csv(result, args.out)
    print(f"wrote {len(result.rows)} rows to {args.out} (baseline {result.kernel_baseline})", file=sys.stderr)


def cmd_report(args, out):
    from .experiment import read_csv, slope_report

    result = read_csv(args.inp)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = slope_report(result, args.threshold)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    rows = [(r.metric, r.lam, r.slope, r.intercept, "PASS" if r.passed else "FAIL") for r in report]
    _print_table(("metric", "lambda", "slope", "intercept", "result"), rows, out)
    return EXIT_OK if all(r.passed for r in report) else EXIT_RUNTIME


# --- parser --------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _default_threads():
    raw = os.environ.get("RFCONC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser():
    p = _Parser(prog="rfconc", description="Random-feature ridge regression versus its kernel limit.")
    sub = p.add_subparsers(dest="command", metavar="<command>", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="sample unit-norm data and write it as CSV (one sample per row)")
    g.add_argument("--dist", choices=["sphere", "cube"], required=True, help="input distribution")
    g.add_argument("--d", type=_positive_int, required=True, help="dimension")
    g.add_argument("--n", type=_positive_int, required=True, help="number of samples")
    g.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    g.add_argument("--out", required=True, help="output CSV path")
    g.set_defaults(func=cmd_gen)

    pr = sub.add_parser("profile", help="orthogonality diagnostics of a data CSV")
    pr.add_argument("--data", required=True, help="CSV with one sample per row")
    pr.add_argument("--activation", help="activation for thresholds and ell selection (e.g. relu, poly5)")
    pr.add_argument("--max-ell", type=int, default=10, help="largest ell to tabulate (default 10)")
    pr.set_defaults(func=cmd_profile)

    h = sub.add_parser("hermite", help="normalized Hermite coefficients of an activation")
    h.add_argument("--activation", required=True,
                   help="relu, leaky_relu:a, tanh, sigmoid, softplus, identity, constant:c, poly5, hermite:c0,c1,...")
    h.add_argument("--max-degree", type=int, default=10, help="largest degree K (default 10)")
    h.add_argument("--tol", type=float, default=1e-10, help="absolute quadrature tolerance (default 1e-10)")
    h.add_argument("--format", choices=["table", "csv"], default="table", help="output format")
    h.set_defaults(func=cmd_hermite)

    c = sub.add_parser("compare", help="one-shot RFRR / KRR / PKRR comparison")
    c.add_argument("--dist", choices=["sphere", "cube"], default="sphere", help="input distribution")
    c.add_argument("--d", type=_positive_int, required=True, help="dimension")
    c.add_argument("--n", type=_positive_int, required=True, help="number of training samples")
    c.add_argument("--activation", default="poly5", help="network activation (default poly5)")
    c.add_argument("--tau", default="softplus", help="teacher activation (default softplus)")
    c.add_argument("--N", type=_positive_int, required=True, help="number of random features")
    c.add_argument("--lambda", dest="lam", type=_nonneg_float, required=True, help="ridge parameter")
    c.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    c.add_argument("--ell", type=int, default=2, help="degree of the polynomial kernel (default 2)")
    c.add_argument("--sigma-eps", type=_nonneg_float, default=0.0, help="label noise level (default 0)")
    c.add_argument("--B", type=_positive_int, default=8, help="teacher replicates for the test error (default 8)")
    c.add_argument("--M", type=_positive_int, default=500, help="test points per replicate (default 500)")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("sweep", help="run a width sweep from a TOML config and write CSV")
    s.add_argument("--config", required=True, help="TOML config or bundled preset name (fig1.toml, fig3.toml)")
    s.add_argument("--out", required=True, help="output CSV path")
    s.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default $RFCONC_THREADS or 1); never changes the output")
    s.add_argument("--scale", choices=["desk", "paper"], default="desk", help="preset scale (default desk)")
    s.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="fit log-log slopes of a sweep CSV and print pass/fail")
    r.add_argument("--in", dest="inp", required=True, help="sweep CSV")
    r.add_argument("--threshold", type=float, default=-0.4, help="largest passing slope (default -0.4)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "threads", "unset") is None:
        args.threads = _default_threads()
    if args.command == "sweep":
        from .experiment import resolve_config_path

        try:
            resolve_config_path(args.config)
        except FileNotFoundError:
            print(f"rfconc sweep: config file not found: {args.config}", file=sys.stderr)
            return EXIT_USAGE
    try:
        code = args.func(args, out)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (RFConcError, OSError, ValueError) as exc:
        print(f"rfconc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
