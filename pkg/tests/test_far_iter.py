import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracreg import DivergenceError, ProblemInstance, StoppingRule, add_noise
from fracreg.far_iter import (
    am_weights,
    empirical_order,
    far_run,
    far_vs_spectral,
    trapezoid_reference_run,
)
from fracreg.mittag_leffler import MLParams, ml_eval


def _mp_weights(theta, dt, k):
    """Closed-form weights evaluated directly at 50 digits."""
    with mpmath.workdps(50):
        th, h = mpmath.mpf(theta), mpmath.mpf(dt)
        sb = h**th / th
        sa = h**th / (th * (th + 1))
        b = [sb * ((k - j + 1) ** th - mpmath.mpf(k - j) ** th) for j in range(k + 1)]
        d = [mpmath.mpf(k) ** (th + 1) - (k - th) * mpmath.mpf(k + 1) ** th]
        for j in range(1, k + 1):
            m = k - j
            d.append(mpmath.mpf(m + 2) ** (th + 1) + mpmath.mpf(m) ** (th + 1) - 2 * mpmath.mpf(m + 1) ** (th + 1))
        d.append(mpmath.mpf(1))
        return np.array([float(v) for v in b]), np.array([float(sa * v) for v in d])


@pytest.mark.parametrize("theta", [0.3, 0.8, 1.2, 1.5, 1.9])
@pytest.mark.parametrize("k", [0, 1, 7, 8, 60, 3000])
def test_weights_match_high_precision(theta, k):
    w = am_weights(theta, 0.7, k)
    b_ref, a_ref = _mp_weights(theta, 0.7, k)
    np.testing.assert_allclose(w.b, b_ref, rtol=1e-12, atol=0)
    np.testing.assert_allclose(w.a, a_ref, rtol=1e-11, atol=0)


def test_classical_weights_are_trapezoid():
    w = am_weights(1.0, 0.5, 3)
    assert w.b.tolist() == [0.5] * 4
    assert w.a.tolist() == (0.25 * np.array([1, 2, 2, 2, 1])).tolist()
    for k in (0, 1, 10, 999):
        w = am_weights(1.0, 0.25, k)
        assert np.all(w.b == 0.25)
        expected = np.full(k + 2, 0.25)
        expected[[0, -1]] = 0.125
        assert np.array_equal(w.a, expected)


def test_first_step_weights_by_hand():
    w = am_weights(1.5, 1.0, 0)
    assert w.b[0] == pytest.approx(1 / 1.5, rel=1e-15)
    assert w.a[0] == pytest.approx(1.5 / 3.75, rel=1e-15)
    assert w.a[1] == pytest.approx(1 / 3.75, rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(theta=st.floats(0.05, 1.99), dt=st.floats(1e-3, 50.0), k=st.integers(0, 400))
def test_predictor_weights_telescope(theta, dt, k):
    w = am_weights(theta, dt, k)
    assert np.all(w.b > 0)
    assert w.b.sum() == pytest.approx(dt**theta / theta * (k + 1) ** theta, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(theta=st.floats(0.05, 1.99), k=st.integers(1, 400))
def test_corrector_weights_integrate_constants(theta, k):
    # the product-trapezoid rule is exact for constants: sum a_j = (k+1)^theta dt^theta / theta
    dt = 0.3
    w = am_weights(theta, dt, k)
    assert w.a.sum() == pytest.approx(dt**theta / theta * (k + 1) ** theta, rel=1e-10)


def test_weight_validation():
    with pytest.raises(ValueError):
        am_weights(1.0, 0.0, 1)
    with pytest.raises(ValueError):
        am_weights(1.0, 1.0, -1)
    with pytest.raises(ValueError):
        am_weights(2.0, 1.0, 1)


def _scalar(y=1.0):
    return ProblemInstance.from_matrix(np.array([[1.0]]), [y])


@pytest.mark.parametrize("dt", [0.1, 0.05, 0.025])
def test_scalar_classical_flow(dt):
    t_end = 2.0
    steps = round(t_end / dt)
    rec = far_run(_scalar(), 1.0, dt, stop=StoppingRule.fixed_time(t_end), max_iter=steps, keep_iterates=True)
    t = dt * np.arange(steps + 1)
    err = np.abs(rec.iterates[:, 0] - (1.0 - np.exp(-t))).max()
    # Heun local error gives a global constant close to 1/16 here
    assert err <= 0.08 * dt**2
    assert rec.stop_reason == "apriori" and rec.k_star == steps


def test_scalar_fractional_flow_converges():
    theta, t_end = 1.5, 3.0
    exact = t_end**theta * ml_eval(MLParams(theta, theta + 1.0), -(t_end**theta))
    errors = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        rec = far_run(_scalar(), theta, dt, stop=StoppingRule.fixed_time(t_end), max_iter=10**6)
        errors.append(abs(rec.x_final[0] - exact))
    rates = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(rates > 1.0)
    assert rates[-1] > 1.6


def test_zero_data_stops_immediately():
    inst = ProblemInstance.from_matrix(np.eye(2), [0.0, 0.0])
    rec = far_run(inst, 1.5)
    assert rec.k_star == 0 and rec.stop_reason == "discrepancy"
    assert {"noise_free", "immediate"} <= set(rec.flags)
    assert np.all(rec.x_final == 0)


def test_zero_data_with_apriori_rule_stays_at_zero():
    inst = ProblemInstance.from_matrix(np.eye(2), [0.0, 0.0])
    rec = far_run(inst, 0.8, 0.5, stop=StoppingRule.fixed_time(5.0), keep_iterates=True)
    assert rec.k_star == 10
    assert np.all(rec.iterates == 0)


def test_classical_run_matches_trapezoid_reference(ex1_noisy):
    rule = StoppingRule.fixed_time(200 * 19.485)
    a = far_run(ex1_noisy, 1.0, 19.485, stop=rule, keep_iterates=True)
    b = trapezoid_reference_run(ex1_noisy, 19.485, stop=rule, keep_iterates=True)
    assert a.k_star == b.k_star == 200
    assert np.abs(a.iterates - b.iterates).max() <= 1e-12 * np.abs(b.iterates).max()
    assert b.method == "far_trapezoid"


def test_discrepancy_stop_and_record(ex1_noisy):
    rec = far_run(ex1_noisy, 1.5)
    assert rec.stop_reason == "discrepancy"
    chi = rec.discrepancy_values()
    assert chi[0] > 0 and chi[-1] <= 0 and np.all(chi[:-1] > 0)
    assert rec.residual_norms.size == rec.k_star + 1
    payload = json.loads(rec.to_json())
    assert payload["k_star"] == rec.k_star and len(payload["residual_norms"]) == rec.k_star + 1
    assert rec.to_dict(include_history=False).keys() == payload.keys() - {"residual_norms"}


def test_deterministic(ex1_noisy):
    a = far_run(ex1_noisy, 1.2)
    b = far_run(ex1_noisy, 1.2)
    assert a.k_star == b.k_star
    assert np.array_equal(a.x_final, b.x_final)


def test_max_iter_cap(ex1):
    inst = add_noise(ex1, 1e-6, seed=0)
    rec = far_run(inst, 1.5, max_iter=5)
    assert rec.stop_reason == "max_iter" and rec.k_star == 5


def test_history_growth_beyond_initial_buffer(ex1_noisy):
    rule = StoppingRule.fixed_time(600 * 2.0)
    rec = far_run(ex1_noisy, 0.8, 2.0, stop=rule)
    assert rec.k_star == 600 and np.all(np.isfinite(rec.x_final))


def test_divergence_guard():
    inst = _scalar()
    with np.errstate(all="ignore"), pytest.raises(DivergenceError) as info:
        far_run(inst, 1.0, 50.0, stop=StoppingRule.fixed_time(1e6))
    rec = info.value.record
    assert np.all(np.isfinite(rec.x_final)) and rec.k_star > 0


def test_invalid_step():
    with pytest.raises(ValueError):
        far_run(_scalar(), 1.0, -1.0)
    with pytest.raises(ValueError):
        trapezoid_reference_run(_scalar(), math.inf)


def test_far_vs_spectral(ex1):
    dt0 = 2 * 19.485
    rows = far_vs_spectral(ex1, 1.0, [dt0 / 2**i for i in range(4)], 8 * dt0)
    errors = [r["error"] for r in rows]
    assert errors == sorted(errors, reverse=True)
    assert [r["steps"] for r in rows] == [8, 16, 32, 64]
    assert empirical_order(rows) >= 1.8
    with pytest.raises(ValueError):
        far_vs_spectral(ex1, 1.0, [3.0], 10.0)


def test_empirical_order_needs_data():
    with pytest.raises(ValueError):
        empirical_order([{"dt": 1.0, "error": 1.0}])
