"""Command-line entry point: ``stopbound <subcommand> ...``.

Exit status: 0 on success, 1 on domain errors (bad parameters, failed
numerics, malformed files), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import closed_form
from .boundary import Boundary, solve, psi_on_batch
from .io import (BoundaryCsvError, RunManifest, compare_boundaries, fmt, read_boundary_csv,
                 write_boundary_csv, write_json)
from .model import PRESET_DIR, ModelParams, ParameterError, load_config, preset
from .pde import PdeConfig, PdeConvergenceError, TruncationError, solve_vi
from .quadrature import QuadConfig, QuadratureAccuracyError, psi_quadrature
from .sampler import SamplerConfig, draw_unit_batch
from .statics import SolverSettings, SweepSpec, run_sweep
from .value import estimate_value

log = logging.getLogger("stopbound")

DOMAIN_ERRORS = (ParameterError, BoundaryCsvError, QuadratureAccuracyError, PdeConvergenceError,
                 TruncationError, ValueError, OSError)


def _params(spec: str) -> ModelParams:
    path = Path(spec)
    if not path.exists() and (PRESET_DIR / f"{spec}.cfg").exists():
        return preset(spec)
    return load_config(path)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _sampler(args) -> SamplerConfig:
    return SamplerConfig(args.samples, args.seed, getattr(args, "antithetic", False))


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _manifest(args, p: ModelParams, seed) -> RunManifest:
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
             if k not in ("func", "verbose")}
    return RunManifest(args.command, p.as_dict(), flags, seed)


def cmd_benchmark(args) -> int:
    p = _params(args.config)
    sx, sy = closed_form.benchmark_x(p), closed_form.benchmark_y(p)
    _emit({
        "x_axis": {"beta1": sx.beta1, "x_star": sx.threshold, "A": sx.coeff},
        "y_axis": {"eta1": sy.beta1, "y_star": sy.threshold, "D": sy.coeff},
    })
    return 0


def cmd_solve(args) -> int:
    p = _params(args.config)
    tol = args.tol if args.tol is not None else 0.005 * closed_form.y_star(p)
    t0 = time.perf_counter()
    b, report = solve(p, args.grid, _sampler(args), tol, args.max_iter, args.relaxation)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    write_boundary_csv(out, b)
    report_path = write_json(out.with_name(out.stem + ".report.json"), report.as_dict())
    manifest = _manifest(args, p, args.seed)
    manifest.add_artifact(out)
    manifest.add_artifact(report_path)
    manifest.timings["solve"] = elapsed
    manifest.write(out.parent)
    if not report.converged:
        log.warning("no convergence within %d iterations (last change %.4g)",
                    args.max_iter, report.sup_change_history[-1])
    return 0


def cmd_value(args) -> int:
    p = _params(args.config)
    b = read_boundary_csv(args.boundary)
    est = estimate_value(p, args.x, args.y, b, _sampler(args))
    _emit(est.as_dict())
    return 0


def _read_points(path) -> list[tuple[float, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
        raise BoundaryCsvError(f"{path}:1: expected header 'x,y'")
    pts = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            x, y = (float(v) for v in row)
        except ValueError:
            raise BoundaryCsvError(f"{path}:{lineno}: expected two numbers, got {row!r}") from None
        pts.append((x, y))
    return pts


def cmd_check_psi(args) -> int:
    p = _params(args.config)
    b = read_boundary_csv(args.boundary)
    pts = _read_points(args.points)
    cfg = _sampler(args)
    batch = draw_unit_batch(p, cfg)
    xs = np.array([pt[0] for pt in pts])
    ys = np.array([pt[1] for pt in pts])
    mc, se = psi_on_batch(p, xs, ys, b, batch, antithetic=cfg.antithetic)
    q = QuadConfig(rel_tol=args.rel_tol)
    rows = [["x", "y", "mc_estimate", "mc_se", "quadrature", "z_score"]]
    for x, y, m, s in zip(xs, ys, mc, se):
        quad = psi_quadrature(p, x, y, b, q)
        z = (m - quad) / s if s > 0 else (0.0 if m == quad else float("inf"))
        rows.append([fmt(x), fmt(y), fmt(m), fmt(s), fmt(quad), fmt(z)])
    if args.out is None:
        csv.writer(sys.stdout, lineterminator="\n").writerows(rows)
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh, lineterminator="\n").writerows(rows)
    return 0


def cmd_oracle(args) -> int:
    p = _params(args.config)
    cfg = PdeConfig(args.xmax, args.ymax, args.nx, args.ny, args.omega, args.psor_tol, args.max_sweeps)
    t0 = time.perf_counter()
    sol = solve_vi(p, cfg)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    write_boundary_csv(out, sol.boundary)
    report_path = write_json(out.with_name(out.stem + ".report.json"),
                             {"sweeps": sol.sweeps, "max_residual": sol.max_residual})
    manifest = _manifest(args, p, None)
    manifest.add_artifact(out)
    manifest.add_artifact(report_path)
    manifest.timings["oracle"] = elapsed
    manifest.write(out.parent)
    return 0


def cmd_sweep(args) -> int:
    base = _params(args.config)
    settings = SolverSettings(args.grid, _sampler(args), args.tol, args.max_iter)
    spec = SweepSpec(args.param, tuple(args.values), base, settings)
    t0 = time.perf_counter()
    report = run_sweep(spec)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _manifest(args, base, args.seed)
    long_rows = []
    for entry in report.entries:
        if entry.boundary is None:
            continue
        path = write_boundary_csv(out / f"boundary_{fmt(entry.value)}.csv", entry.boundary)
        manifest.add_artifact(path)
        long_rows.extend((entry.value, x, v) for x, v in zip(entry.boundary.xs, entry.boundary.bs))
    manifest.add_artifact(write_json(out / "sweep_report.json", report.as_dict()))
    if args.plot_data:
        path = out / "plot_data.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            fh.write("param_value,x,b\n")
            for value, x, v in long_rows:
                fh.write(f"{fmt(value)},{fmt(x)},{fmt(v)}\n")
        manifest.add_artifact(path)
    manifest.timings["sweep"] = elapsed
    manifest.write(out)
    return 0 if all(not e.failed for e in report.entries) else 1


def cmd_compare(args) -> int:
    a = read_boundary_csv(args.boundary_a)
    b = read_boundary_csv(args.boundary_b)
    result = compare_boundaries(a, b, args.rel_tol, args.abs_tol, args.x_fraction)
    _emit(result.as_dict())
    return 0 if result.passed or not args.strict else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stopbound", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(sp):
        sp.add_argument("--config", required=True, help="key = value file, or a preset name (fig1, fig2, fig3)")

    def with_sampling(sp, samples=100_000):
        sp.add_argument("--samples", type=_positive_int, default=samples)
        sp.add_argument("--seed", type=int, default=1)
        sp.add_argument("--antithetic", action="store_true")

    sp = sub.add_parser("benchmark", help="one-dimensional thresholds and coefficients")
    with_config(sp)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("solve", help="Monte-Carlo fixed-point solve for the boundary")
    with_config(sp)
    with_sampling(sp)
    sp.add_argument("--grid", type=int, default=40)
    sp.add_argument("--tol", type=float, default=None, help="default 0.005 y*")
    sp.add_argument("--max-iter", type=_positive_int, default=50)
    sp.add_argument("--relaxation", type=float, default=1.0)
    sp.add_argument("--out", default="boundary.csv")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("value", help="Monte-Carlo value at one point")
    with_config(sp)
    with_sampling(sp, 200_000)
    sp.add_argument("--boundary", required=True)
    sp.add_argument("--x", type=float, required=True)
    sp.add_argument("--y", type=float, required=True)
    sp.set_defaults(func=cmd_value)

    sp = sub.add_parser("check-psi", help="Monte-Carlo operator against nested quadrature")
    with_config(sp)
    with_sampling(sp)
    sp.add_argument("--boundary", required=True)
    sp.add_argument("--points", required=True, help="CSV with header x,y")
    sp.add_argument("--rel-tol", type=float, default=1e-8)
    sp.add_argument("--out", default=None, help="CSV destination (default stdout)")
    sp.set_defaults(func=cmd_check_psi)

    sp = sub.add_parser("oracle", help="finite-difference obstacle-problem boundary")
    with_config(sp)
    sp.add_argument("--xmax", type=float, default=250.0)
    sp.add_argument("--ymax", type=float, default=150.0)
    sp.add_argument("--nx", type=int, default=200)
    sp.add_argument("--ny", type=int, default=200)
    sp.add_argument("--omega", type=float, default=1.9)
    sp.add_argument("--psor-tol", type=float, default=1e-9)
    sp.add_argument("--max-sweeps", type=_positive_int, default=100_000)
    sp.add_argument("--out", default="pde_boundary.csv")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("sweep", help="comparative statics over one parameter")
    with_config(sp)
    with_sampling(sp)
    sp.add_argument("--param", required=True, choices=["sigma1", "sigma2", "alpha1", "alpha2", "r"])
    sp.add_argument("--values", required=True, type=_floats)
    sp.add_argument("--grid", type=int, default=40)
    sp.add_argument("--tol", type=float, default=None)
    sp.add_argument("--max-iter", type=_positive_int, default=50)
    sp.add_argument("--out", default="sweep")
    sp.add_argument("--plot-data", action="store_true", help="also write plot_data.csv (param_value,x,b)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="compare two boundary CSV files")
    sp.add_argument("boundary_a")
    sp.add_argument("boundary_b", help="reference for relative differences")
    sp.add_argument("--rel-tol", type=float, default=0.05)
    sp.add_argument("--abs-tol", type=float, default=0.0)
    sp.add_argument("--x-fraction", type=float, default=0.8)
    sp.add_argument("--strict", action="store_true", help="exit 1 when the comparison fails")
    sp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        print(f"stopbound: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
