import math

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from jacobidet.errors import DimensionError, LegendreConditionError, SymmetryError
from jacobidet.model import (CoefficientPath, Problem, build_lti, build_magnetic,
                             build_oscillator, normalize, sampled_problem)

from conftest import random_sampled


def at(p, t):
    H, Y, X = p.path.at(np.atleast_1d(t))
    return H[0], Y[0], X[0]


def test_oscillator_values():
    H, Y, X = at(build_oscillator(1.0), 0.5)
    assert (H[0, 0], Y[0, 0], X[0, 0]) == (-1.0, 0.5, 1.0)
    assert at(build_oscillator(-1.0), 1.0)[1][0, 0] == -1.0
    t = np.linspace(0, 1, 11)
    assert np.all(build_oscillator(0.0).path.at(t)[1] == 0)


def test_magnetic_values():
    H, Y, X = at(build_magnetic(1.0), 0.3)
    np.testing.assert_array_equal(Y, [[0, 1], [-1, 0]])
    np.testing.assert_array_equal(X, np.eye(2))
    np.testing.assert_array_equal(H, -np.eye(2))
    assert np.all(at(build_magnetic(0.0), 0.7)[1] == 0)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_magnetic_symplectic_form(r):
    _, Y, X = at(build_magnetic(r), 0.1)
    np.testing.assert_allclose(X.T @ Y - Y.T @ X, [[0, 2 * r], [-2 * r, 0]])


def test_lti_reduces_to_oscillator():
    t = np.linspace(0, 1, 257)
    a = build_lti([[0.0]], [[3.0]]).path.at(t)
    b = build_oscillator(3.0).path.at(t)
    for u, v in zip(a, b):
        assert np.max(np.abs(u - v)) <= 1e-12


def test_lti_zero_cost():
    _, Y, X = at(build_lti([[0.7]], [[0.0]]), 0.4)
    assert Y[0, 0] == 0.0
    assert X[0, 0] == pytest.approx(math.exp(-0.28), rel=1e-15)


def test_lti_scalar_value():
    # (int_0^1 e^{2s} ds) e^{-1} = sinh(1)
    _, Y, _ = at(build_lti([[1.0]], [[1.0]]), 1.0)
    assert Y[0, 0] == pytest.approx(math.sinh(1.0), rel=1e-14)


def test_lti_matrix_against_quadrature():
    A = np.array([[1.0, 0.4], [0.4, -0.5]])
    R = np.array([[2.0, 1.0], [1.0, 3.0]])
    t = 0.8
    f = lambda s: scipy.linalg.expm(s * A) @ R @ scipy.linalg.expm(s * A)
    integral, _ = scipy.integrate.quad_vec(f, 0.0, t, epsabs=1e-14)
    _, Y, X = at(build_lti(A, R), t)
    np.testing.assert_allclose(X, scipy.linalg.expm(-t * A), atol=1e-14)
    np.testing.assert_allclose(Y, integral @ scipy.linalg.expm(-t * A), atol=1e-12)


def test_lti_rejects_bad_input():
    with pytest.raises(SymmetryError):
        build_lti([[0.0, 1.0], [0.0, 0.0]], np.eye(2))
    with pytest.raises(DimensionError):
        build_lti(np.eye(2), np.eye(3))


def test_normalize_fixed_point():
    p = build_oscillator(1.0)
    assert normalize(p) is p
    q = normalize(random_sampled())
    assert normalize(q) is q


def test_normalize_scalar():
    p = sampled_problem(np.full((3, 1, 1), -4.0), np.zeros((3, 1, 1)), np.ones((3, 1, 1)))
    assert not p.normalized
    q = normalize(p)
    assert q.normalized
    np.testing.assert_allclose(q.path.H, -1.0)
    np.testing.assert_allclose(q.path.X, 0.5)


def test_normalize_random_sampled():
    p = random_sampled()
    q = normalize(p)
    assert np.max(np.abs(q.path.H + np.eye(p.m))) <= 1e-10
    # same quadratic form on the control side: Z G Z^T is preserved
    G = np.linalg.inv(-p.path.H)
    np.testing.assert_allclose(q.path.X @ np.swapaxes(q.path.X, 1, 2),
                               p.path.X @ G @ np.swapaxes(p.path.X, 1, 2), atol=1e-12)


def test_normalize_closed_form():
    def ev(t):
        k = t.shape[0]
        H = -(2.0 + t)[:, None, None] * np.ones((k, 1, 1))
        return H, t.reshape(k, 1, 1), np.ones((k, 1, 1))

    p = Problem(CoefficientPath.closed_form(1, 1, ev), False, "scaled")
    q = normalize(p)
    H, Y, X = q.path.at(np.array([0.0, 1.0]))
    np.testing.assert_allclose(H[:, 0, 0], -1.0)
    np.testing.assert_allclose(X[:, 0, 0], [1 / math.sqrt(2), 1 / math.sqrt(3)])


def test_sampled_validation():
    H = np.full((4, 1, 1), -1.0)
    H[2] = 0.5
    with pytest.raises(LegendreConditionError, match="cell 2: Legendre condition"):
        sampled_problem(H, np.zeros((4, 1, 1)), np.ones((4, 1, 1)))
    with pytest.raises(DimensionError):
        sampled_problem(np.zeros((0, 1, 1)), np.zeros((0, 1, 1)), np.zeros((0, 1, 1)))
    with pytest.raises(DimensionError):
        sampled_problem(-np.ones((2, 1, 1)), np.zeros((2, 2, 2)), np.ones((2, 1, 1)))
    with pytest.raises(SymmetryError):
        sampled_problem(np.array([[[-1.0, 0.5], [0.0, -1.0]]]), np.zeros((1, 1, 2)), np.ones((1, 1, 2)))


def test_legendre_margin():
    H = np.full((2, 1, 1), -1e-9)
    with pytest.raises(LegendreConditionError):
        sampled_problem(H, np.zeros((2, 1, 1)), np.ones((2, 1, 1)))
    sampled_problem(H, np.zeros((2, 1, 1)), np.ones((2, 1, 1)), eps_H=1e-10)


def test_closed_form_probe_catches_legendre_violation():
    def ev(t):
        k = t.shape[0]
        return (t - 0.5).reshape(k, 1, 1), np.zeros((k, 1, 1)), np.ones((k, 1, 1))

    with pytest.raises(LegendreConditionError):
        CoefficientPath.closed_form(1, 1, ev)


def test_sampled_cells_are_piecewise_constant():
    p = random_sampled(nt=4)
    t = np.array([0.0, 0.24, 0.25, 0.74, 0.99, 1.0])
    H, _, _ = p.path.at(t)
    idx = [0, 0, 1, 2, 3, 3]
    np.testing.assert_array_equal(H, p.path.H[idx])
    assert p.path.aligned_steps(4096) % 4 == 0
    assert p.path.aligned_steps(10) == 12
