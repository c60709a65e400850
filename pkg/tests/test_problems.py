import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracreg.problems import (
    ProblemInstance,
    add_noise,
    assemble_operator,
    calibrate_noise_magnitude,
    l2_relative_error,
    make_example,
    operator_from_matrix,
)
from fracreg.problems import _galerkin_matrix, _mass_matrix


def _rational(rows):
    return np.array([[float(Fraction(v)) for v in row] for row in rows])


@pytest.mark.parametrize("n", ["3", "4", "6"])
def test_galerkin_matrix_matches_exact_rationals(galerkin_exact, n):
    ref = galerkin_exact[n]
    np.testing.assert_allclose(_galerkin_matrix(int(n)), _rational(ref["galerkin"]), rtol=0, atol=1e-16)
    np.testing.assert_allclose(_mass_matrix(int(n)), _rational(ref["mass"]), rtol=0, atol=1e-16)


def test_operator_structure(op100):
    a = op100.coords_matrix
    assert op100.n == 100
    np.testing.assert_allclose(a, a.T, atol=0)
    assert np.all(op100.eigenvalues > 0)
    assert np.all(np.diff(op100.eigenvalues) <= 0)
    assert op100.operator_norm == pytest.approx(op100.eigenvalues[0])
    np.testing.assert_allclose(op100.reconstruct(), a, atol=1e-15)
    v = op100.eigenvectors
    np.testing.assert_allclose(v.T @ v, np.eye(100), atol=1e-12)
    np.testing.assert_allclose(op100.nodes, np.linspace(0, 1, 100))


def test_coordinates_roundtrip(op100):
    x = np.random.default_rng(0).standard_normal(100)
    np.testing.assert_allclose(op100.from_coords(op100.to_coords(x)), x, rtol=1e-12, atol=1e-12)
    # coordinate norms are L2 norms: the constant 1 has unit norm on [0, 1]
    assert np.linalg.norm(op100.to_coords(np.ones(100))) == pytest.approx(1.0, rel=1e-13)


def test_eigenvalues_converge_to_continuous_spectrum():
    errors = []
    for n in (25, 50, 100):
        ev = assemble_operator(n).eigenvalues[:3]
        exact = (np.arange(1, 4) * np.pi) ** -2.0
        errors.append(np.max(np.abs(ev - exact) / exact))
    assert errors[0] > errors[1] > errors[2]
    # at least second order in h
    assert errors[1] / errors[2] > 3.5


@pytest.mark.parametrize("bad", [2, 3.5, -1])
def test_assemble_rejects_bad_sizes(bad):
    with pytest.raises(ValueError):
        assemble_operator(bad)


def test_example_one_is_consistent(ex1):
    # the constant solution is reproduced exactly by the Galerkin system
    residual = ex1.op.apply(ex1.x_dagger_coords) - ex1.y_exact
    assert np.linalg.norm(residual) <= 1e-15
    assert np.all(ex1.x_dagger == 2.0)
    assert ex1.delta == 0.0


def test_example_two_residual_is_small(ex2):
    residual = ex2.op.apply(ex2.x_dagger_coords) - ex2.y_exact
    assert np.linalg.norm(residual) / np.linalg.norm(ex2.y_exact) < 1e-3
    # x = -y'' = -6 t^2 (1 - t)(2 - 8 t + 7 t^2)
    t = 0.3
    expected = -6 * t**2 * (1 - t) * (2 - 8 * t + 7 * t**2)
    assert np.interp(t, ex2.op.nodes, ex2.x_dagger) == pytest.approx(expected, abs=2e-3)


def test_unknown_example():
    with pytest.raises(ValueError):
        make_example("ex3", n=10)


def test_noise_is_deterministic(ex1):
    a = add_noise(ex1, 1e-2, seed=7)
    b = add_noise(ex1, 1e-2, seed=7)
    c = add_noise(ex1, 1e-2, seed=8)
    assert np.array_equal(a.y_noisy, b.y_noisy)
    assert not np.array_equal(a.y_noisy, c.y_noisy)
    assert a.delta == pytest.approx(np.linalg.norm(a.y_noisy - a.y_exact), rel=0)
    assert (a.seed, a.noise_magnitude) == (7, 1e-2)
    assert np.array_equal(add_noise(ex1, 0.0).y_noisy, ex1.y_exact)
    with pytest.raises(ValueError):
        add_noise(ex1, -1.0)


@settings(max_examples=30, deadline=None)
@given(mag=st.floats(1e-6, 0.5), seed=st.integers(0, 2**32 - 1))
def test_noise_is_bounded_by_magnitude(ex1, mag, seed):
    noisy = add_noise(ex1, mag, seed)
    assert np.all(np.abs(noisy.y_noisy - ex1.y_exact) <= mag * np.abs(ex1.y_exact) * (1 + 1e-12))
    assert noisy.delta <= mag * np.linalg.norm(ex1.y_exact) * (1 + 1e-12)


def test_calibrated_magnitude_hits_target_on_average(ex1):
    target = 1e-3
    mag = calibrate_noise_magnitude(ex1, target)
    deltas = [add_noise(ex1, mag, s).delta for s in range(40)]
    assert np.median(deltas) == pytest.approx(target, rel=0.05)


def test_delta_must_match_realized_noise(ex1):
    with pytest.raises(ValueError):
        ProblemInstance(ex1.op, ex1.x_dagger, ex1.y_exact, ex1.y_exact * 1.01, delta=0.0)


def test_l2_relative_error(ex1):
    # x = 1.9 everywhere against x_dagger = 2
    assert l2_relative_error(np.full(100, 1.9), ex1, coords=False) == pytest.approx(0.05, rel=1e-12)
    assert l2_relative_error(ex1.op.to_coords(np.full(100, 1.9)), ex1) == pytest.approx(0.05, rel=1e-12)
    assert l2_relative_error(ex1.x_dagger_coords, ex1) == 0.0
    with pytest.raises(ValueError):
        l2_relative_error(np.ones(5), ex1)


def test_from_matrix_and_plain_operator():
    a = np.array([[2.0, 0.0], [0.0, 0.5]])
    inst = ProblemInstance.from_matrix(a, [2.0, 1.0])
    np.testing.assert_allclose(inst.x_dagger, [1.0, 2.0])
    assert inst.delta == 0.0
    op = operator_from_matrix(a)
    np.testing.assert_allclose(op.eigenvalues, [2.0, 0.5])
    np.testing.assert_allclose(op.to_coords(np.array([3.0, 4.0])), [3.0, 4.0])
    assert math.isclose(op.operator_norm, 2.0)
