"""Command-line entry point binding the modules into reproducible experiments.

Exit codes: 0 all checks passed, 1 check failure, 2 usage/config error,
3 runtime/numerical error.  All randomness flows from the config seed; with
--workers 1 (the default) outputs are byte-identical run to run.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from pathlib import Path

import numpy as np

from .core import ConfigError, DecaySeries, parse_config_file, validate_config
from .kinetic import decay_fit, read_history, run_simulation, write_history
from .linear import initial_data, linear_density_on_grid
from .verify import SUITES, VerifyContext, run_suites

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_RUNTIME = 3

COMMANDS = (
    "linear-decay",
    "verify-algebra",
    "kernel-check",
    "simulate",
    "trapped-set",
    "modified-coeffs",
    "full-verify",
)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vptrap",
        description="Desk-scale experiments for collisionless dynamics in the "
        "trapping potential -|x|^2/2.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None,
                       help="key=value config file (defaults apply if omitted)")
        p.add_argument("--out", type=Path, default=Path("vptrap_out"),
                       help="output directory (created if absent)")
        p.add_argument("--override", action="append", default=[], metavar="K=V",
                       help="override a config key; repeatable")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel workers where supported; 1 is bitwise deterministic")
        p.add_argument("--force", action="store_true",
                       help="overwrite existing output files")
        if name == "trapped-set":
            p.add_argument("--history", type=Path, default=None,
                           help="recorded history file (default OUT/history.vptrap)")
    return parser


def load_config(args):
    raw = {}
    if args.config is not None:
        raw.update(parse_config_file(args.config))
    for item in args.override:
        if "=" not in item:
            raise UsageError(f"--override needs K=V, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()
    return validate_config(raw)


def default_f0(cfg):
    from .core import PhasePoint

    return initial_data(
        "product", cfg.eps, PhasePoint([0.0] * cfg.dim, [0.0] * cfg.dim), 0.5
    )


def prepare_out(args, *names):
    args.out.mkdir(parents=True, exist_ok=True)
    paths = [args.out / name for name in names]
    if not args.force:
        clashes = [p for p in paths if p.exists()]
        if clashes:
            raise UsageError(
                f"refusing to overwrite {clashes[0]} (use --force)"
            )
    return paths


def cmd_linear_decay(args) -> int:
    cfg = load_config(args)
    (csv_path,) = prepare_out(args, "linear_decay.csv")
    f0 = default_f0(cfg)
    times = np.arange(1.5, 4.0 + 1e-9, 0.25)
    sups, weighted = [], []
    from .kinetic import weighted_sup_density

    for t in times:
        rho = linear_density_on_grid(f0, float(t), cfg)
        sups.append(float(rho.values.max()))
        weighted.append(weighted_sup_density(rho, float(t), cfg.dim))
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,sup_rho,weighted_sup_rho\n")
        for t, a, b in zip(times, sups, weighted):
            fh.write(f"{t:.17g},{a:.17g},{b:.17g}\n")
    fit = decay_fit(DecaySeries(times, np.asarray(sups)), (1.5, 4.0))
    tol = 0.1 if cfg.dim == 2 else 0.3
    ok = abs(fit.slope + cfg.dim) <= tol
    print(f"sup_rho slope on [1.5, 4]: {fit.slope:.4f} "
          f"(reference -{cfg.dim}, tolerance {tol})")
    print(f"wrote {csv_path}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_verify_algebra(args) -> int:
    load_config(args)  # validates the config even though the suite pins its own
    ctx = VerifyContext(workers=args.workers)
    results, ok = run_suites(ctx, names=["algebra"])
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_kernel_check(args) -> int:
    load_config(args)
    from .poisson import kernel_bound_quadrature

    print("kernel bound table: n, |x|, value")
    for n in (2, 3):
        for r in (0.0, 1.0, 5.0, 20.0):
            x = np.zeros(n)
            x[0] = r
            print(f"  {n}  {r:5.1f}  {kernel_bound_quadrature(n, x):.6f}")
    ctx = VerifyContext(workers=args.workers)
    results, ok = run_suites(ctx, names=["kernel"])
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    hist_path, diag_path = prepare_out(args, "history.vptrap", "diagnostics.csv")
    hist, report, _ = run_simulation(cfg, default_f0(cfg))
    write_history(hist_path, hist)
    report.to_csv(diag_path)
    for warning in report.warnings:
        print(f"warning: {warning}")
    for name, fit in report.fits.items():
        print(f"{name}: fitted slope {fit.slope:.4f} +- {fit.stderr:.4f}")
    print(f"wrote {hist_path} and {diag_path}")
    return EXIT_OK


def cmd_trapped_set(args) -> int:
    cfg = load_config(args)
    history_path = args.history or (args.out / "history.vptrap")
    if not history_path.exists():
        raise UsageError(
            f"trapped-set needs a recorded history file ({history_path} not found); "
            "run `vptrap simulate` first"
        )
    (manifold_path, report_path) = prepare_out(args, "manifold.csv", "trapped_report.txt")
    hist = read_history(history_path)
    if hist.dim != cfg.dim:
        raise UsageError("history dimension does not match the config")
    from .trapped import (
        escape_test,
        invariance_check,
        sample_manifold,
        solve_trapped_velocity,
        write_manifold_csv,
    )

    ax = np.linspace(-1.0, 1.0, 9)
    xs = [np.array(list(pair)) for pair in itertools.product(ax, repeat=cfg.dim)]
    points = sample_manifold(xs, hist, cfg.mu, cfg, workers=args.workers)
    write_manifold_csv(points, manifold_path)
    ok_points = [p for p in points if p.converged]
    lines = [
        f"converged {len(ok_points)}/{len(points)} points",
        f"max iterations {max((p.iterations for p in ok_points), default=0)}",
        f"max contraction ratio {max((p.contraction for p in ok_points), default=0):.3e}",
    ]
    passed = len(ok_points) == len(points)
    if ok_points:
        sup = max(float(np.linalg.norm(p.x + p.v)) for p in ok_points)
        lines.append(
            f"sup|x+v| = {sup:.3e} = {sup / cfg.eps:.3f}*eps "
            f"= {sup / math.sqrt(cfg.eps):.4f}*sqrt(eps)"
        )
        m = solve_trapped_velocity(np.full(cfg.dim, 0.5), hist, cfg.mu, cfg)
        inv = invariance_check(m, hist, cfg.mu, cfg, min(1.0, hist.t_end / 4.0))
        lines.append(f"invariance defect {inv:.3e}")
        res = escape_test(m, 1e-3, hist, cfg.mu, cfg)
        lines.append(
            f"escape time {res.escape_time:.2f}, growth slope {res.growth_slope:.3f}"
        )
        passed = passed and inv <= 1e-6 and abs(res.growth_slope - 1.0) <= 0.05
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    print(f"wrote {manifold_path} and {report_path}")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def cmd_modified_coeffs(args) -> int:
    cfg = load_config(args)
    if cfg.dim != 2:
        raise UsageError("modified-coeffs is a 2D construction (dim must be 2)")
    coeff_path, margins_path = prepare_out(args, "coefficients.csv", "margins.csv")
    from .modfields import (
        bootstrap_check,
        coefficient_growth_slopes,
        transport_coefficients,
        write_coefficients_csv,
    )

    hist, report, _ = run_simulation(cfg, default_f0(cfg), record_extras=True)
    coeffs = transport_coefficients(hist, cfg.mu, cfg)
    write_coefficients_csv(coeffs, coeff_path)
    margins = bootstrap_check(coeffs, report, cfg.eps)
    with open(margins_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("name,value\n")
        fh.write(f"b2,{margins.b2:.17g}\n")
        fh.write(f"b3,{margins.b3:.17g}\n")
        fh.write(f"b4,{margins.b4:.17g}\n")
        fh.write(f"eps,{cfg.eps:.17g}\n")
    slopes = coefficient_growth_slopes(coeffs)
    print(f"bootstrap margins: B2={margins.b2:.4f} B3={margins.b3:.4f} "
          f"B4={margins.b4:.4f} (pass when < 1)")
    print(f"max coefficient growth slope: {max(slopes.values()):.5f}")
    print(f"wrote {coeff_path} and {margins_path}")
    return EXIT_OK if margins.all_pass() else EXIT_CHECK_FAILED


def cmd_full_verify(args) -> int:
    cfg = load_config(args)
    if cfg.dim != 2:
        raise UsageError("full-verify takes the 2D reference config")
    ctx = VerifyContext(cfg2d=cfg, workers=args.workers)
    results, ok = run_suites(ctx)
    n_pass = sum(r.passed for r in results)
    print(f"\n{n_pass}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


_DISPATCH = {
    "linear-decay": cmd_linear_decay,
    "verify-algebra": cmd_verify_algebra,
    "kernel-check": cmd_kernel_check,
    "simulate": cmd_simulate,
    "trapped-set": cmd_trapped_set,
    "modified-coeffs": cmd_modified_coeffs,
    "full-verify": cmd_full_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return _DISPATCH[args.command](args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - the exit-code contract wants 3 here
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
