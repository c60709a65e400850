"""Command-line interface: ``fracreg <command> ...``.

Commands::

    mlf eval       --theta1 T1 --theta2 T2 --z Z [--precision P]
    filters report --theta T [--lambda-max L] --out report.json
    filters sweep  --theta-list 0.5,1,1.5 --csv out.csv
    problem make   --example ex1 --n 100 --noise 0.001 --seed 42 --out problem.json
    solve          --method far --theta 1.5 --dt 19.485 --example ex1 --noise 0.001 --seed 42 --tau 3.1 --out run.json
    bench run      --config bench.json --out results/
    bench rate     --example ex2 --method spectral --theta 1 --p-ref 0.5 --deltas 1e-1,1e-2,1e-3,1e-4
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import BenchConfig, emit_plots, parse_method, rate_experiment, run_benchmark, run_method
from .far_iter import DEFAULT_DT, DEFAULT_MAX_ITER
from .mittag_leffler import DEFAULT_PRECISION, MLConvergenceError, MLParams, ml_eval_with_error
from .problems import add_noise, assemble_operator, make_example
from .spectral import filter_sweep_rows, standard_grids, verify_generator
from .stopping import DEFAULT_TAU, StoppingRule

log = logging.getLogger("fracreg")


class ConfigError(Exception):
    """Invalid command-line or configuration input (exit code 2)."""


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _write(path: str | None, text: str):
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# command handlers


def cmd_mlf_eval(args) -> int:
    params = MLParams(args.theta1, args.theta2, args.precision)
    try:
        value, err = ml_eval_with_error(params, args.z)
    except MLConvergenceError as exc:
        print(f"{exc.partial!r} {exc.error_estimate:.3e}")
        log.error("%s", exc)
        return 1
    print(f"{value!r} {err:.3e}")
    return 0


def cmd_filters_report(args) -> int:
    lambda_max = args.lambda_max
    if lambda_max is None:
        lambda_max = assemble_operator(args.n).operator_norm ** 2
    report = verify_generator(args.theta, lambda_max)
    _write(args.out, json.dumps(report.to_dict(), indent=1))
    return 0 if report.ok else 1


def cmd_filters_sweep(args) -> int:
    alpha_grid, lambda_grid = standard_grids(args.lambda_max)
    alpha_grid = alpha_grid[:: max(1, alpha_grid.size // args.points)]
    lambda_grid = lambda_grid[:: max(1, lambda_grid.size // args.points)]
    rows = filter_sweep_rows(args.theta_list, alpha_grid, lambda_grid)
    out = open(args.csv, "w", newline="") if args.csv and args.csv != "-" else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["theta", "alpha", "lambda", "g", "r"])
        for row in rows:
            writer.writerow([repr(v) for v in row])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _instance(args):
    instance = make_example(args.example, args.n)
    return add_noise(instance, args.noise, args.seed)


def cmd_problem_make(args) -> int:
    inst = _instance(args)
    n = inst.n
    payload = {
        "example": inst.example,
        "n": n,
        "noise_magnitude": inst.noise_magnitude,
        "seed": inst.seed,
        "delta": inst.delta,
        "operator_norm": inst.op.operator_norm,
        "coordinates": "L2-orthonormal (sqrt of the mass matrix applied to nodal values)",
        "galerkin_matrix": {"shape": [n, n], "data": inst.op.matrix.ravel().tolist()},
        "mass_matrix": {"shape": [n, n], "data": inst.op.mass_matrix.ravel().tolist()},
        "x_dagger_nodal": inst.x_dagger.tolist(),
        "y_exact": inst.y_exact.tolist(),
        "y_noisy": inst.y_noisy.tolist(),
    }
    _write(args.out, json.dumps(payload))
    return 0


def cmd_solve(args) -> int:
    spec = args.method if args.method != "far" else f"far:{args.theta}"
    method, theta = parse_method(spec)
    inst = _instance(args)
    stop = StoppingRule.discrepancy(args.tau)
    record = run_method(inst, method, theta, args.dt, stop, args.max_iter, args.nu)
    payload = record.to_dict()
    payload.update({"example": inst.example, "noise_magnitude": inst.noise_magnitude, "seed": inst.seed})
    _write(args.out, json.dumps(payload))
    if args.residual_csv:
        np.savetxt(args.residual_csv, np.column_stack([np.arange(record.residual_norms.size), record.residual_norms]),
                   delimiter=",", header="k,residual_norm", comments="", fmt=["%d", "%.17g"])
    print(f"k*={record.k_star} l2err={record.l2err:.6f} stop={record.stop_reason} delta={inst.delta:.6e}", file=sys.stderr)
    return 0


def cmd_bench_run(args) -> int:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    overrides = {
        "examples": args.examples, "methods": args.methods, "noise_magnitudes": args.noise,
        "seeds": args.seeds, "n": args.n, "dt": args.dt, "tau": args.tau, "max_iter": args.max_iter,
        "noise_mode": args.noise_mode, "workers": args.workers,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    data["out_dir"] = args.out
    try:
        config = BenchConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    records = run_benchmark(config)
    failed = sum(bool(r.error) for r in records)
    print(f"{len(records)} runs ({failed} failed) -> {args.out}", file=sys.stderr)
    return 0


def cmd_bench_rate(args) -> int:
    report = rate_experiment(args.example, args.method, args.theta, args.p_ref, args.deltas, seeds=args.seeds,
                             n=args.n, dt=args.dt, tau=args.tau, c=args.c, noise_mode=args.noise_mode)
    _write(args.out, json.dumps(report.to_dict(), indent=1))
    if args.plot_dir:
        emit_plots([report], "rate_loglog", args.plot_dir)
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_problem_args(p, noise_default=0.0):
    p.add_argument("--example", choices=["ex1", "ex2"], default="ex1")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--noise", type=float, default=noise_default, help="multiplicative noise magnitude")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracreg", description="Fractional asymptotical regularization toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    mlf = sub.add_parser("mlf", help="Mittag-Leffler function").add_subparsers(dest="action", required=True)
    p = mlf.add_parser("eval", help="evaluate E_{theta1,theta2}(z)")
    p.add_argument("--theta1", type=float, required=True)
    p.add_argument("--theta2", type=float, default=1.0)
    p.add_argument("--z", type=float, required=True)
    p.add_argument("--precision", type=float, default=DEFAULT_PRECISION)
    p.set_defaults(func=cmd_mlf_eval)

    filters = sub.add_parser("filters", help="spectral filters").add_subparsers(dest="action", required=True)
    p = filters.add_parser("report", help="check the generator conditions on standard grids")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--lambda-max", type=float, default=None, help="default: ||A||**2 of the test operator")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_filters_report)
    p = filters.add_parser("sweep", help="tabulate g and r over an (alpha, lambda) grid")
    p.add_argument("--theta-list", type=_floats, required=True)
    p.add_argument("--lambda-max", type=float, default=1.0)
    p.add_argument("--points", type=int, default=50, help="approximate points per axis")
    p.add_argument("--csv", default=None)
    p.set_defaults(func=cmd_filters_sweep)

    problem = sub.add_parser("problem", help="test problems").add_subparsers(dest="action", required=True)
    p = problem.add_parser("make", help="assemble an example and write it as JSON")
    _add_problem_args(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_problem_make)

    p = sub.add_parser("solve", help="run one solver on one example")
    p.add_argument("--method", choices=["far", "landweber", "nesterov", "chebyshev", "cgne"], default="far")
    p.add_argument("--theta", type=float, default=1.5)
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--nu", type=float, default=1.0)
    _add_problem_args(p, noise_default=0.001)
    p.add_argument("--out", default=None)
    p.add_argument("--residual-csv", default=None)
    p.set_defaults(func=cmd_solve)

    bench = sub.add_parser("bench", help="benchmarks").add_subparsers(dest="action", required=True)
    p = bench.add_parser("run", help="run a benchmark grid")
    p.add_argument("--config", default=None, help="JSON file with BenchConfig fields")
    p.add_argument("--out", required=True)
    p.add_argument("--examples", type=lambda s: s.split(","), default=None)
    p.add_argument("--methods", type=lambda s: s.split(","), default=None)
    p.add_argument("--noise", type=_floats, default=None)
    p.add_argument("--seeds", type=lambda s: [int(v) for v in s.split(",")], default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--noise-mode", choices=["magnitude", "level"], default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_bench_run)
    p = bench.add_parser("rate", help="log-log rate experiment")
    p.add_argument("--example", choices=["ex1", "ex2"], default="ex2")
    p.add_argument("--method", default="spectral", help="spectral, far or a baseline name")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--p-ref", type=float, default=0.5)
    p.add_argument("--deltas", type=_floats, required=True)
    p.add_argument("--seeds", type=lambda s: [int(v) for v in s.split(",")], default=[0, 1, 2, 3, 4])
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--dt", type=float, default=DEFAULT_DT)
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--noise-mode", choices=["magnitude", "level"], default="magnitude")
    p.add_argument("--out", default=None)
    p.add_argument("--plot-dir", default=None)
    p.set_defaults(func=cmd_bench_rate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
