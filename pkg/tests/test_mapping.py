import math

import numpy as np
import pytest

from cavimod.errors import DomainError, EvaluationError, ParameterError
from cavimod.mapping import (
    MappingSpec,
    catalog_get,
    cavity_profile,
    conjugate_rotation,
    evaluate,
    fd_jacobian,
    jacobian,
    scaled_jacobian,
)


def random_points(n, count, seed, lo=0.05, hi=0.95):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((count, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u * rng.uniform(lo, hi, count)[:, None]


def random_rotation(n, rng):
    A, R = np.linalg.qr(rng.standard_normal((n, n)))
    A = A * np.sign(np.diag(R))
    if np.linalg.det(A) < 0:
        A[:, 0] = -A[:, 0]
    return A


@pytest.mark.parametrize(
    "name, params, x, expected",
    [
        ("identity", {}, [0.3, 0.0, 0.0], [0.3, 0.0, 0.0]),
        ("f1", {"alpha": 0.5}, [0.25, 0.0, 0.0], [0.75, 0.0, 0.0]),
        ("f2", {}, [0.5, 0.0, 0.0], [0.5 * math.exp(-1.0), 0.0, 0.0]),
        ("scaling", {"c": 3.0}, [0.1, -0.2, 0.3], [0.3, -0.6, 0.9]),
    ],
)
def test_evaluate_known_values(name, params, x, expected):
    y = evaluate(catalog_get(name, 3, params), x)
    np.testing.assert_allclose(y, expected, rtol=1e-15, atol=1e-16)


@pytest.mark.parametrize("r, x3", [(0.3, 0.1), (0.05, -0.4), (0.7, 0.0)])
def test_f3_on_real_axis(r, x3):
    y = evaluate(catalog_get("f3", 3), [r, 0.0, x3])
    np.testing.assert_allclose(y, [r * math.cos(2 * math.log(r)), r * math.sin(2 * math.log(r)), x3],
                               rtol=1e-14, atol=1e-16)


def test_f3_preserves_norm():
    x = random_points(4, 50, 1)
    np.testing.assert_allclose(np.linalg.norm(evaluate(catalog_get("f3", 4), x), axis=1),
                               np.linalg.norm(x, axis=1), rtol=1e-14)


@pytest.mark.parametrize("x", [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.6, 0.8, 0.1], [np.nan, 0.1, 0.1]])
def test_domain_errors(x):
    with pytest.raises(DomainError):
        evaluate(catalog_get("identity", 3), x)
    with pytest.raises(DomainError):
        jacobian(catalog_get("identity", 3), x)


def test_nonfinite_evaluation_raises():
    f = MappingSpec(dimension=2, rule=lambda x: x / 0.0)
    with pytest.raises(EvaluationError):
        evaluate(f, [0.1, 0.2])


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.2])
def test_f1_alpha_range(alpha):
    with pytest.raises(ParameterError):
        catalog_get("f1", 3, {"alpha": alpha})


def test_catalog_rejects_unknown():
    with pytest.raises(ParameterError):
        catalog_get("nope", 3)
    with pytest.raises(ParameterError):
        catalog_get("f2", 3, {"alpha": 0.5})
    with pytest.raises(ParameterError):
        catalog_get("identity", 1)


def test_jacobian_examples():
    np.testing.assert_array_equal(jacobian(catalog_get("identity", 2), [0.1, 0.2]), np.eye(2))
    np.testing.assert_allclose(jacobian(catalog_get("scaling", 3, {"c": 2.5}), [0.1, 0.2, 0.3]),
                               2.5 * np.eye(3))
    # f1 at t e1: Phi'(t) = alpha t^(alpha-1)/2 = 0.5, Phi(t)/t = 3
    np.testing.assert_allclose(jacobian(catalog_get("f1", 3), [0.25, 0.0, 0.0]),
                               np.diag([0.5, 3.0, 3.0]), rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("name", ["identity", "scaling", "f1", "f2", "f3", "radial"])
@pytest.mark.parametrize("n", [2, 3, 4])
def test_analytic_jacobian_matches_fd(name, n):
    params = {"beta": 1.7} if name == "radial" else {}
    f = catalog_get(name, n, params)
    x = random_points(n, 200, 11 * n, lo=0.1)
    Ja = jacobian(f, x)
    Jf = fd_jacobian(f.rule, x, n)
    scale = np.max(np.abs(Ja), axis=(1, 2))[:, None, None]
    assert np.max(np.abs(Ja - Jf) / scale) < 1e-8


@pytest.mark.parametrize("name", ["f1", "f2", "scaling", "radial"])
def test_scaled_jacobian_is_positive_multiple(name):
    f = catalog_get(name, 3)
    x = random_points(3, 100, 5, lo=0.1)
    J, S = jacobian(f, x), scaled_jacobian(f, x)
    c = J[:, 0, 0] / S[:, 0, 0]
    assert np.all(c > 0)
    np.testing.assert_allclose(J, c[:, None, None] * S, rtol=1e-12, atol=1e-14)


def test_f2_scaled_jacobian_survives_underflow():
    f = catalog_get("f2", 3)
    x = np.array([1e-3, 0.0, 0.0])
    assert np.all(jacobian(f, x) == 0.0)
    S = scaled_jacobian(f, x)
    np.testing.assert_allclose(np.diag(S), [1.0 + 1e3, 1.0, 1.0])


def test_fd_jacobian_relative_step_small_radius():
    # the step scales with |x|, so a map with curvature on the scale |x| is still resolved
    f = catalog_get("f3", 3)
    x = np.array([3e-4, 1e-4, 2e-4])
    np.testing.assert_allclose(fd_jacobian(f.rule, x, 3), jacobian(f, x), rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("alpha, r, R", [(0.5, 0.1, 1.0), (0.3, 0.02, 0.5)])
def test_ring_modulus_rule_radial(alpha, r, R):
    f = catalog_get("f1", 3, {"alpha": alpha})
    expected = math.log((1 + R**alpha) / (1 + r**alpha))
    assert f.ring_modulus_rule(r, R) == pytest.approx(expected, rel=1e-14)


def test_cavity_profile_increasing():
    assert cavity_profile(0.5).check_increasing()


@pytest.mark.parametrize("name", ["identity", "f1", "f2", "f3"])
def test_conjugate_rotation_identity_matrix(name):
    f = catalog_get(name, 3)
    g = conjugate_rotation(f, np.eye(3))
    x = random_points(3, 20, 2)
    np.testing.assert_array_equal(evaluate(g, x), evaluate(f, x))


@pytest.mark.parametrize("name", ["f1", "f3"])
def test_conjugate_rotation_definition(name):
    rng = np.random.default_rng(4)
    A = random_rotation(3, rng)
    f = catalog_get(name, 3)
    g = conjugate_rotation(f, A)
    y = random_points(3, 30, 3)
    expected = evaluate(f, y @ A) @ A.T  # A f(A^T y)
    np.testing.assert_allclose(evaluate(g, y), expected, rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(jacobian(g, y), fd_jacobian(g.rule, y, 3), rtol=1e-6, atol=1e-7)


def test_conjugate_rotation_rejects_bad_matrices():
    f = catalog_get("identity", 3)
    with pytest.raises(ParameterError):
        conjugate_rotation(f, np.diag([1.0, 1.0, 1.001]))
    with pytest.raises(ParameterError):
        conjugate_rotation(f, np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ParameterError):
        conjugate_rotation(f, np.eye(2))
