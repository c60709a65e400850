import json
import math
import statistics

import numpy as np
import pytest

from fracreg import StoppingRule, far_run
from fracreg.bench import (
    CSV_FIELDS,
    BenchConfig,
    aggregate,
    bias_surface_rows,
    discrepancy_curve,
    emit_plots,
    format_table1,
    parse_method,
    rate_experiment,
    run_benchmark,
    run_method,
)
from fracreg.problems import add_noise

SMALL = dict(examples=("ex1",), methods=("far:1.5", "landweber", "cgne"), noise_magnitudes=(1e-2,), seeds=(0, 1))


def test_parse_method():
    assert parse_method("far:1.5") == ("far", 1.5)
    assert parse_method(" CGNE ") == ("cgne", None)
    for bad in ("far", "far:2.5", "landweber:1", "gmres"):
        with pytest.raises(ValueError):
            parse_method(bad)


def test_config_validation_and_roundtrip(tmp_path):
    cfg = BenchConfig(**SMALL)
    assert cfg.size == 6
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert BenchConfig.from_json(path) == cfg
    with pytest.raises(ValueError):
        BenchConfig.from_dict({"bogus": 1})
    for bad in (dict(seeds=()), dict(methods=("far:3",)), dict(noise_mode="x"), dict(noise_magnitudes=(-1.0,)),
                dict(tau=1.0), dict(workers=0)):
        with pytest.raises(ValueError):
            BenchConfig(**{**SMALL, **bad})


def test_benchmark_is_byte_reproducible(tmp_path):
    run_benchmark(BenchConfig(**SMALL, out_dir=str(tmp_path / "a")))
    run_benchmark(BenchConfig(**SMALL, out_dir=str(tmp_path / "b"), workers=2))
    a = (tmp_path / "a" / "records.csv").read_bytes()
    assert a == (tmp_path / "b" / "records.csv").read_bytes()
    header = a.decode().splitlines()[0].split(",")
    assert header == CSV_FIELDS
    payload = json.loads((tmp_path / "a" / "records.json").read_text())
    assert payload["schema_version"] == 1 and len(payload["records"]) == 6
    assert "### ex1" in (tmp_path / "a" / "table1.md").read_text()


def test_records_and_aggregate():
    records = run_benchmark(BenchConfig(**SMALL))
    assert [r.sort_key() for r in records] == sorted(r.sort_key() for r in records)
    for r in records:
        assert r.stop_reason == "discrepancy" and not r.error
        assert r.chi_initial > 0 >= r.chi_final
    summary = aggregate(records)
    assert {s["method"] for s in summary} == {"far:1.5", "landweber", "cgne"}
    far = next(s for s in summary if s["method"] == "far:1.5")
    assert far["k_star"] == statistics.median(r.k_star for r in records if r.method == "far:1.5")
    table = format_table1(records)
    assert "far:1.5 k*" in table and "cgne L2Err" in table


def test_noise_free_edge():
    cfg = BenchConfig(examples=("ex2",), methods=("far:1.2",), noise_magnitudes=(0.0,), seeds=(0,), max_iter=40)
    (row,) = run_benchmark(cfg)
    assert row.delta_realized == 0.0
    assert row.stop_reason == "max_iter" and row.k_star == 40
    assert math.isfinite(row.l2err)
    assert "40*" in format_table1([row])


def test_diverging_cell_is_recorded_not_raised():
    # a step far beyond the stability limit blows up within a few dozen steps
    cfg = BenchConfig(examples=("ex1",), methods=("far:1.5",), noise_magnitudes=(1e-2,), seeds=(0,), dt=5e4)
    with np.errstate(all="ignore"):
        (row,) = run_benchmark(cfg)
    assert row.stop_reason == "diverged" and "non-finite" in row.error
    assert row.k_star > 0


def test_level_mode_targets_realized_noise():
    cfg = BenchConfig(examples=("ex1",), methods=("cgne",), noise_magnitudes=(1e-3,), noise_mode="level")
    rows = run_benchmark(cfg)
    assert statistics.median(r.delta_realized for r in rows) == pytest.approx(1e-3, rel=0.1)


def test_classical_far_routes_through_trapezoid(ex1_noisy):
    stop = StoppingRule.discrepancy()
    fast = run_method(ex1_noisy, "far", 1.0, 19.485, stop, 10**5)
    full = far_run(ex1_noisy, 1.0, 19.485, stop)
    assert fast.method == "far" and fast.k_star == full.k_star
    np.testing.assert_allclose(fast.x_final, full.x_final, rtol=1e-10, atol=1e-12)


def test_rate_experiment_spectral():
    levels = np.logspace(-1, -4, 7)
    rough = rate_experiment("ex1", "spectral", 1.0, 0.5, levels, seeds=(0, 1))
    smooth = rate_experiment("ex2", "spectral", 1.0, 0.5, levels, seeds=(0, 1))
    assert smooth.error_slope > rough.error_slope
    assert smooth.error_slope == pytest.approx(0.5, abs=0.15)
    assert smooth.error_target == 0.5 and smooth.kstar_target == 1.0
    d = smooth.to_dict()
    assert len(d["deltas"]) == 7 and d["error_fit_residual"] >= 0
    with pytest.raises(ValueError):
        rate_experiment("ex2", "spectral", 1.0, 0.5, [1e-2, 1e-3])


def test_kstar_grows_with_smaller_noise():
    report = rate_experiment("ex2", "far", 1.5, 0.5, [1e-1, 1e-2, 1e-3, 1e-4], seeds=(0,))
    assert np.all(np.diff(report.kstars) >= 0)
    assert report.kstar_slope > 0


def test_discrepancy_curve_changes_sign(ex1):
    inst = add_noise(ex1, 1e-2, seed=0)
    curve = discrepancy_curve(inst, 1.8, np.logspace(0, 4, 200))
    assert curve[0, 1] > 0 and np.any(curve[:, 1] < 0)


def test_emit_plots(tmp_path, ex1_noisy):
    rec = far_run(ex1_noisy, 1.8)
    files = emit_plots([rec, ("spectral", discrepancy_curve(ex1_noisy, 1.8, [1.0, 10.0, 100.0]))],
                       "discrepancy_curve", tmp_path)
    assert [f.suffix for f in files] == [".dat", ".dat", ".gp"]
    data = np.loadtxt(files[0])
    assert np.all(np.isfinite(data)) and data.shape == (rec.k_star + 1, 2)

    rows = bias_surface_rows([1.0], [1e-2, 1e-1], [1e-3, 1e-2, 0.1])
    files = emit_plots(rows, "bias_surface", tmp_path)
    data = np.loadtxt(files[0])
    np.testing.assert_allclose(data[:, 3], np.exp(-data[:, 1] / data[:, 0]), atol=1e-12)

    report = rate_experiment("ex2", "spectral", 1.0, 0.5, np.logspace(-1, -4, 4), seeds=(0,))
    files = emit_plots([report], "rate_loglog", tmp_path)
    assert "error_slope=" in files[0].read_text().splitlines()[0]
    assert np.all(np.isfinite(np.loadtxt(files[0])))

    with pytest.raises(ValueError):
        emit_plots(rows, "histogram", tmp_path)
    with pytest.raises(ValueError):
        emit_plots([], "bias_surface", tmp_path)
    with pytest.raises(ValueError):
        emit_plots([("bad", np.array([[1.0, math.nan]]))], "discrepancy_curve", tmp_path)


def _median_cell(example, theta, level):
    cfg = BenchConfig(examples=(example,), methods=(f"far:{theta}",), noise_magnitudes=(level,), noise_mode="level")
    (summary,) = aggregate(run_benchmark(cfg))
    return summary


def test_smooth_example_high_order_stops_early():
    cell = _median_cell("ex2", 1.8, 1e-5)
    assert cell["k_star"] < 1e3


@pytest.mark.xfail(strict=True, reason="error level below 0.05 not reached under the L2 noise convention")
def test_smooth_example_high_order_error_level():
    assert _median_cell("ex2", 1.8, 1e-5)["l2err"] < 0.05


@pytest.mark.xfail(strict=True, reason="reference k* and error bands not reached under the L2 noise convention")
def test_reference_cell_magnitudes():
    cell = _median_cell("ex1", 1.5, 1e-3)
    assert 30 <= cell["k_star"] <= 300
    assert 0.06 <= cell["l2err"] <= 0.27
