"""Benchmark grids, rate experiments and plot-data emission.

A benchmark is the cross product ``examples x methods x noise magnitudes x seeds``.
Every cell is an independent job; failures are recorded per row and never
abort the grid.  Rows are sorted before they are written, so identical
configurations give byte-identical ``records.csv`` files (wall times are kept
out of the CSV for that reason).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .baselines import BaselineConfig, run_baseline
from .far_iter import DEFAULT_DT, DEFAULT_MAX_ITER, far_run, trapezoid_reference_run
from .problems import ProblemInstance, add_noise, calibrate_noise_magnitude, l2_relative_error, make_example
from .runs import DivergenceError, RunRecord
from .spectral import FractionalOrder, filter_sweep_rows, spectral_residual_norm, spectral_solve
from .stopping import DEFAULT_TAU, StoppingRule, apriori_time_holder

__all__ = [
    "BenchConfig",
    "BenchRecord",
    "CSV_SCHEMA_VERSION",
    "RateReport",
    "aggregate",
    "bias_surface_rows",
    "discrepancy_curve",
    "emit_plots",
    "format_table1",
    "parse_method",
    "rate_experiment",
    "run_benchmark",
    "run_method",
]

log = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
RUN_WARN_LIMIT = 10_000
BASELINES = ("landweber", "nesterov", "chebyshev", "cgne")


def parse_method(spec: str) -> tuple[str, float | None]:
    """``"far:1.5"`` -> ``("far", 1.5)``; ``"landweber"`` -> ``("landweber", None)``."""
    name, _, arg = str(spec).partition(":")
    name = name.strip().lower()
    if name == "far":
        if not arg:
            raise ValueError("FAR method spec needs an order, e.g. 'far:1.5'")
        return "far", FractionalOrder(float(arg)).theta
    if name in BASELINES:
        if arg:
            raise ValueError(f"method {name!r} takes no argument")
        return name, None
    raise ValueError(f"unknown method {spec!r}")


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark grid.

    ``noise_mode="magnitude"`` injects each entry of ``noise_magnitudes`` as the
    multiplicative amplitude directly; ``"level"`` treats the entries as target
    noise levels and picks the amplitude whose expected realized level matches.
    ``dt`` is shared by FAR, Landweber, Nesterov and (as normalization) the
    nu-method.
    """

    examples: tuple[str, ...] = ("ex1", "ex2")
    methods: tuple[str, ...] = ("far:0.5", "far:0.8", "far:1.2", "far:1.5", "far:1.8",
                                "landweber", "nesterov", "chebyshev", "cgne")
    noise_magnitudes: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    n: int = 100
    dt: float = DEFAULT_DT
    tau: float = DEFAULT_TAU
    max_iter: int = DEFAULT_MAX_ITER
    nu: float = 1.0
    noise_mode: str = "magnitude"
    workers: int = 1
    out_dir: str | None = None

    def __post_init__(self):
        for name in ("examples", "methods", "noise_magnitudes", "seeds"):
            value = tuple(getattr(self, name))
            if not value:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, value)
        for m in self.methods:
            parse_method(m)
        if self.noise_mode not in ("magnitude", "level"):
            raise ValueError(f"noise_mode must be 'magnitude' or 'level', got {self.noise_mode!r}")
        if any(d < 0 for d in self.noise_magnitudes):
            raise ValueError("noise magnitudes must be nonnegative")
        if not (self.dt > 0 and self.tau > 1 and self.max_iter >= 0 and self.n >= 3 and self.workers >= 1):
            raise ValueError("invalid dt, tau, max_iter, n or workers")
        if self.size > RUN_WARN_LIMIT:
            log.warning("benchmark grid has %d runs", self.size)

    @property
    def size(self) -> int:
        return len(self.examples) * len(self.methods) * len(self.noise_magnitudes) * len(self.seeds)

    @classmethod
    def from_dict(cls, data: dict) -> "BenchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "BenchConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class BenchRecord:
    """One row of a benchmark: a single (example, method, noise, seed) run."""

    example: str
    method: str
    theta: float | None
    delta_prime: float
    delta_realized: float
    seed: int
    k_star: int | None
    l2err: float | None
    stop_reason: str
    residual_initial: float | None = None
    residual_final: float | None = None
    tau: float | None = None
    error: str = ""
    wall_time: float = 0.0

    @property
    def chi_initial(self) -> float:
        return self.residual_initial - self.tau * self.delta_realized

    @property
    def chi_final(self) -> float:
        return self.residual_final - self.tau * self.delta_realized

    def sort_key(self):
        return (self.example, self.method, self.delta_prime, self.seed)


CSV_FIELDS = ["schema_version", "example", "method", "theta", "delta_prime", "delta_realized", "seed",
              "k_star", "l2err", "stop_reason", "residual_initial", "residual_final", "tau", "error"]


@lru_cache(maxsize=16)
def _base_instance(example: str, n: int) -> ProblemInstance:
    return make_example(example, n)


def run_method(instance: ProblemInstance, method: str, theta: float | None, dt: float, stop: StoppingRule,
               max_iter: int, nu: float = 1.0, keep_iterates: bool = False) -> RunRecord:
    """Run one method on one instance with a shared stopping rule.

    FAR at ``theta = 1`` uses the O(1)-memory trapezoid form, which produces
    the same iterates as the full-memory scheme (the weights are constant).
    """
    if method == "far":
        if theta == 1.0:
            record = trapezoid_reference_run(instance, dt, stop, max_iter, keep_iterates)
            record.method = "far"
            return record
        return far_run(instance, theta, dt, stop, max_iter, keep_iterates)
    config = BaselineConfig(method, dt=None if method == "cgne" else dt, nu=nu, max_iter=max_iter)
    return run_baseline(instance, config, stop, keep_iterates)


def _noisy_instance(config: BenchConfig, example: str, level: float, seed: int) -> ProblemInstance:
    base = _base_instance(example, config.n)
    magnitude = level if config.noise_mode == "magnitude" else calibrate_noise_magnitude(base, level)
    return add_noise(base, magnitude, seed)


def _run_cell(config: BenchConfig, example: str, method_spec: str, level: float, seed: int) -> BenchRecord:
    method, theta = parse_method(method_spec)
    started = time.perf_counter()
    instance = _noisy_instance(config, example, level, seed)
    label = method_spec if method != "far" else f"far:{theta:g}"
    row = BenchRecord(example, label, theta, float(level), instance.delta, int(seed), None, None, "error", tau=config.tau)
    try:
        stop = StoppingRule.discrepancy(config.tau)
        record = run_method(instance, method, theta, config.dt, stop, config.max_iter, config.nu)
        row.k_star, row.l2err, row.stop_reason = record.k_star, record.l2err, record.stop_reason
        row.residual_initial = float(record.residual_norms[0])
        row.residual_final = float(record.residual_norms[-1])
    except DivergenceError as exc:
        row.stop_reason, row.error = "diverged", str(exc)
        row.k_star = exc.record.k_star
    except Exception as exc:  # one bad cell must not abort the grid
        row.error = f"{type(exc).__name__}: {exc}"
    row.wall_time = time.perf_counter() - started
    return row


def _cells(config: BenchConfig):
    for example in config.examples:
        for method in config.methods:
            for level in config.noise_magnitudes:
                for seed in config.seeds:
                    yield example, method, level, seed


def run_benchmark(config: BenchConfig) -> list[BenchRecord]:
    """Execute the full grid; write ``records.csv``, ``records.json`` and ``table1.md`` when ``out_dir`` is set."""
    cells = list(_cells(config))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_cell, *zip(*[(config, *c) for c in cells])))
    else:
        records = [_run_cell(config, *c) for c in cells]
    records.sort(key=BenchRecord.sort_key)
    if config.out_dir is not None:
        write_outputs(records, config, config.out_dir)
    return records


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def write_outputs(records: list[BenchRecord], config: BenchConfig, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "records.csv", "json": out / "records.json", "table": out / "table1.md"}
    with paths["csv"].open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in records:
            values = asdict(r)
            writer.writerow([CSV_SCHEMA_VERSION] + [_fmt(values[k]) for k in CSV_FIELDS[1:]])
    payload = {
        "schema_version": CSV_SCHEMA_VERSION,
        "config": config.to_dict(),
        "records": [asdict(r) for r in records],
        "summary": aggregate(records),
    }
    paths["json"].write_text(json.dumps(payload, indent=1))
    paths["table"].write_text(format_table1(records))
    return paths


def aggregate(records: list[BenchRecord]) -> list[dict]:
    """Median ``k_star``, ``l2err`` and realized noise per (example, method, noise) cell."""
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.example, r.method, r.delta_prime), []).append(r)
    out = []
    for (example, method, level), rows in sorted(groups.items()):
        good = [r for r in rows if r.k_star is not None and r.l2err is not None and not r.error]
        out.append({
            "example": example,
            "method": method,
            "delta_prime": level,
            "runs": len(rows),
            "failed": len(rows) - len(good),
            "delta_realized": statistics.median(r.delta_realized for r in rows),
            "k_star": statistics.median(r.k_star for r in good) if good else None,
            "l2err": statistics.median(r.l2err for r in good) if good else None,
            "max_iter_hits": sum(r.stop_reason == "max_iter" for r in rows),
        })
    return out


def format_table1(records: list[BenchRecord]) -> str:
    """Markdown table with one block per example, rows by noise level and ``k*`` / L2Err per method."""
    summary = aggregate(records)
    methods = list(dict.fromkeys(s["method"] for s in summary))
    lines = []
    for example in dict.fromkeys(s["example"] for s in summary):
        rows = [s for s in summary if s["example"] == example]
        lines.append(f"### {example}")
        lines.append("")
        lines.append("| noise | delta | " + " | ".join(f"{m} k* | {m} L2Err" for m in methods) + " |")
        lines.append("|---" * (2 + 2 * len(methods)) + "|")
        for level in sorted({s["delta_prime"] for s in rows}, reverse=True):
            cells = {s["method"]: s for s in rows if s["delta_prime"] == level}
            parts = [f"{level:g}", f"{statistics.median(s['delta_realized'] for s in cells.values()):.3e}"]
            for m in methods:
                s = cells.get(m)
                if s is None or s["k_star"] is None:
                    parts += ["-", "-"]
                    continue
                k = f"{s['k_star']:g}" + ("*" if s["max_iter_hits"] else "")
                parts += [k, f"{s['l2err']:.4f}"]
            lines.append("| " + " | ".join(parts) + " |")
        lines.append("")
    lines.append("Medians over seeds; `*` marks cells where some run hit the iteration cap.")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# rate experiments


@dataclass
class RateReport:
    """Log-log slopes of error and stopping index against the noise level."""

    example: str
    method: str
    theta: float
    p_ref: float
    deltas: np.ndarray  # median realized noise level per magnitude
    errors: np.ndarray  # median L2Err per magnitude
    kstars: np.ndarray  # median stopping index per magnitude
    error_slope: float
    error_halfwidth: float
    kstar_slope: float
    kstar_halfwidth: float
    error_fit_residual: float
    kstar_fit_residual: float
    error_target: float = field(init=False)
    kstar_target: float = field(init=False)

    def __post_init__(self):
        self.error_target = 2.0 * self.p_ref / (2.0 * self.p_ref + 1.0)
        self.kstar_target = 2.0 / (self.theta * (2.0 * self.p_ref + 1.0))

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("deltas", "errors", "kstars"):
            out[key] = np.asarray(out[key]).tolist()
        return out


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Slope and RMS residual of a least-squares line."""
    coef, res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(float(res[0]) / x.size) if res.size else 0.0
    return float(coef[0]), rms


def _halfwidth(slopes: list[float]) -> float:
    if len(slopes) < 2:
        return math.nan
    return 1.96 * statistics.stdev(slopes) / math.sqrt(len(slopes))


def rate_experiment(example: str, method: str, theta: float, p_ref: float, delta_list, seeds=(0, 1, 2, 3, 4),
                    n: int = 100, dt: float = DEFAULT_DT, tau: float = DEFAULT_TAU, c: float = 1.0,
                    max_iter: int = DEFAULT_MAX_ITER, noise_mode: str = "magnitude") -> RateReport:
    """Fit ``log L2Err ~ log delta`` and ``log k* ~ log(1/delta)``.

    ``method="spectral"`` evaluates the continuous trajectory at the a-priori
    time ``T = c delta**(-2/(theta(2 p_ref + 1)))`` and reports ``ceil(T/dt)`` as
    the stopping index.  Iterative methods (``"far"`` or a baseline) stop by the
    discrepancy principle.  ``delta_list`` is interpreted per ``noise_mode`` as in
    :class:`BenchConfig`.  Slopes are fitted to per-level medians over seeds;
    half-widths are 95% normal intervals of the per-seed slopes.
    """
    levels = np.asarray(sorted(delta_list, reverse=True), dtype=float)
    if levels.size < 4 or levels.max() / levels.min() < 100.0 * (1 - 1e-9):
        raise ValueError("need at least 4 noise levels spanning at least two decades")
    th = FractionalOrder.coerce(theta).theta
    base = make_example(example, n)
    stop = StoppingRule.discrepancy(tau)
    deltas = np.empty((levels.size, len(seeds)))
    errors = np.empty_like(deltas)
    kstars = np.empty_like(deltas)
    for i, level in enumerate(levels):
        magnitude = level if noise_mode == "magnitude" else calibrate_noise_magnitude(base, level)
        for j, seed in enumerate(seeds):
            inst = add_noise(base, magnitude, seed)
            deltas[i, j] = inst.delta
            if method == "spectral":
                t_star = apriori_time_holder(th, p_ref, inst.delta, c)
                errors[i, j] = l2_relative_error(spectral_solve(inst.op, inst.y_noisy, th, t_star), inst)
                kstars[i, j] = math.ceil(t_star / dt)
            else:
                record = run_method(inst, method, th if method == "far" else None, dt, stop, max_iter)
                errors[i, j] = record.l2err
                kstars[i, j] = max(record.k_star, 1)
    log_d = np.log(np.median(deltas, axis=1))
    err_slope, err_res = _fit(log_d, np.log(np.median(errors, axis=1)))
    k_slope, k_res = _fit(-log_d, np.log(np.median(kstars, axis=1)))
    seed_err = [_fit(np.log(deltas[:, j]), np.log(errors[:, j]))[0] for j in range(len(seeds))]
    seed_k = [_fit(-np.log(deltas[:, j]), np.log(kstars[:, j]))[0] for j in range(len(seeds))]
    return RateReport(
        example=example,
        method=method,
        theta=th,
        p_ref=float(p_ref),
        deltas=np.exp(log_d),
        errors=np.median(errors, axis=1),
        kstars=np.median(kstars, axis=1),
        error_slope=err_slope,
        error_halfwidth=_halfwidth(seed_err),
        kstar_slope=k_slope,
        kstar_halfwidth=_halfwidth(seed_k),
        error_fit_residual=err_res,
        kstar_fit_residual=k_res,
    )


# ---------------------------------------------------------------------------
# plot data


def discrepancy_curve(instance: ProblemInstance, theta, times, tau: float = DEFAULT_TAU) -> np.ndarray:
    """``chi(t) = ||A x(t) - y_delta|| - tau delta`` along the continuous trajectory; rows ``(t, chi)``."""
    times = np.asarray(times, dtype=float)
    chi = [spectral_residual_norm(instance.op, instance.y_noisy, theta, t) - tau * instance.delta for t in times]
    return np.column_stack([times, chi])


def _write_columns(path: Path, header: str, data: np.ndarray):
    data = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"non-finite values in plot data for {path.name}")
    np.savetxt(path, data, header=header, fmt="%.12e")


def emit_plots(records, kind: str, out_dir, name: str | None = None) -> list[Path]:
    """Write plain-text plot data plus a gnuplot script.

    ``kind`` and the expected ``records``:

    * ``"discrepancy_curve"``: :class:`RunRecord` objects (``chi`` against
      ``t = k dt``) or ``(label, array)`` pairs from :func:`discrepancy_curve`;
    * ``"bias_surface"``: rows ``(theta, alpha, lam, g, r)`` from
      :func:`~fracreg.spectral.filter_sweep_rows`, one gridded file per ``theta``;
    * ``"rate_loglog"``: :class:`RateReport` objects.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = name or kind
    records = list(records)
    if not records:
        raise ValueError("no records to plot")
    written: list[Path] = []
    plots: list[str] = []

    if kind == "discrepancy_curve":
        for i, rec in enumerate(records):
            if isinstance(rec, RunRecord):
                step = rec.dt if rec.dt is not None else 1.0
                t = step * np.arange(rec.residual_norms.size)
                data = np.column_stack([t, rec.discrepancy_values()])
                label = f"{rec.method} theta={rec.theta}"
            else:
                label, data = rec
            path = out / f"{name}_{i}.dat"
            _write_columns(path, "t chi", data)
            written.append(path)
            plots.append(f"'{path.name}' using 1:2 with lines title '{label}'")
        script = ["set xlabel 't'", "set ylabel 'chi(t)'", "set xzeroaxis", "plot " + ", \\\n     ".join(plots)]
    elif kind == "bias_surface":
        by_theta: dict[float, list] = {}
        for row in records:
            by_theta.setdefault(float(row[0]), []).append(row[1:])
        for theta, rows in sorted(by_theta.items()):
            arr = np.array(rows, dtype=float)
            path = out / f"{name}_theta{theta:g}.dat"
            # blank line between alpha blocks for gnuplot's grid format
            with path.open("w") as fh:
                fh.write("# alpha lambda g r\n")
                for alpha in np.unique(arr[:, 0]):
                    block = arr[arr[:, 0] == alpha]
                    if not np.all(np.isfinite(block)):
                        raise ValueError("non-finite values in bias surface")
                    np.savetxt(fh, block, fmt="%.12e")
                    fh.write("\n")
            written.append(path)
            plots.append(f"'{path.name}' using (log10($1)):(log10($2)):4 with pm3d title 'theta={theta:g}'")
        script = ["set xlabel 'log10 alpha'", "set ylabel 'log10 lambda'", "set zlabel 'r'", "splot " + ", \\\n      ".join(plots)]
    elif kind == "rate_loglog":
        for i, rep in enumerate(records):
            data = np.column_stack([rep.deltas, rep.errors, rep.kstars])
            path = out / f"{name}_{i}.dat"
            _write_columns(path, f"delta l2err kstar  error_slope={rep.error_slope:.6f} fit_rms={rep.error_fit_residual:.3e}", data)
            written.append(path)
            plots.append(f"'{path.name}' using 1:2 with linespoints title '{rep.example} {rep.method} theta={rep.theta:g} slope={rep.error_slope:.3f}'")
        script = ["set logscale xy", "set xlabel 'delta'", "set ylabel 'L2Err'", "plot " + ", \\\n     ".join(plots)]
    else:
        raise ValueError(f"unknown plot kind {kind!r}")

    gp = out / f"{name}.gp"
    gp.write_text("\n".join(script) + "\n")
    written.append(gp)
    return written


def bias_surface_rows(thetas, alpha_grid, lambda_grid):
    """Rows ``(theta, alpha, lam, g, r)`` for :func:`emit_plots` (kind ``bias_surface``)."""
    return list(filter_sweep_rows(thetas, alpha_grid, lambda_grid))

