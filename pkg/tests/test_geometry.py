import math

import numpy as np
import pytest

from morseindex.errors import (DegenerateTangentMetric, DomainError, NotNormal, NotTangent,
                               SignatureMismatch)
from morseindex.geometry import (CurvatureQuery, Manifold, Submanifold, christoffel_at, euclidean,
                                 metric_at, minkowski, riemann_apply, second_fundamental_form,
                                 second_fundamental_matrix, shape_operator, sphere)


def test_metric_examples():
    assert np.array_equal(metric_at(euclidean(2), [3.0, 5.0]), np.eye(2))
    np.testing.assert_allclose(metric_at(sphere(2), [math.pi / 2, 0.0]), np.eye(2), atol=1e-15)
    assert np.array_equal(metric_at(minkowski(2), [0.0, 0.0]), np.diag([1.0, -1.0]))


def test_metric_errors():
    with pytest.raises(DomainError):
        metric_at(sphere(2), [0.0, 0.0])
    wrong = Manifold(2, lambda x: np.broadcast_to(np.eye(2), np.shape(x)[:-1] + (2, 2)), "lorentzian")
    with pytest.raises(SignatureMismatch):
        metric_at(wrong, [0.0, 0.0])


def test_sphere_christoffels():
    gam = christoffel_at(sphere(2), [math.pi / 3, 0.0])
    assert gam[0, 1, 1] == pytest.approx(-math.sqrt(3) / 4, abs=1e-6)
    assert gam[1, 0, 1] == pytest.approx(1 / math.sqrt(3), abs=1e-6)
    np.testing.assert_allclose(gam, np.swapaxes(gam, 1, 2), atol=1e-8)


def test_flat_builtins_are_exactly_flat():
    for M in (euclidean(3), minkowski(3)):
        x = np.array([0.3, -1.2, 2.0])
        assert not np.any(M.christoffel(x))
        assert np.abs(M.riemann(x)).max() == 0.0


def test_finite_difference_path_is_flat_on_flat_metric():
    M = Manifold(3, lambda x: np.broadcast_to(np.diag([1.0, 1.0, -1.0]), np.shape(x)[:-1] + (3, 3)),
                 "lorentzian")
    x = np.array([0.5, 0.1, -0.4])
    assert np.abs(M.christoffel(x)).max() < 1e-9
    assert np.abs(M.riemann(x)).max() < 1e-9


def test_sphere_curvature_sign():
    x = np.array([1.1, 0.4])
    X = np.array([1.0, 0.0])
    Y = np.array([0.0, 1.0 / math.sin(1.1)])
    out = riemann_apply(sphere(2), CurvatureQuery(x, X, Y, X))
    np.testing.assert_allclose(out, -Y, atol=1e-6)
    assert np.allclose(riemann_apply(sphere(2), CurvatureQuery(x, X, X, Y)), 0.0)


def test_curvature_antisymmetries(rng):
    for M in (sphere(2), sphere(3)):
        for _ in range(20):
            x = np.concatenate([rng.uniform(0.3, 2.8, M.dim - 1), rng.uniform(-3, 3, 1)])
            X, Y, Z, W = rng.standard_normal((4, M.dim))
            g = M.metric(x)
            rxy = riemann_apply(M, CurvatureQuery(x, X, Y, Z))
            ryx = riemann_apply(M, CurvatureQuery(x, Y, X, Z))
            scale = max(1.0, np.linalg.norm(rxy))
            assert np.linalg.norm(rxy + ryx) < 1e-6 * scale
            a = rxy @ g @ W
            b = riemann_apply(M, CurvatureQuery(x, X, Y, W)) @ g @ Z
            assert abs(a + b) < 1e-6 * max(1.0, abs(a))


def test_builtin_invariants_at_random_points(rng):
    for M in (euclidean(3), minkowski(3), sphere(3)):
        for _ in range(100):
            x = np.concatenate([rng.uniform(0.2, 2.9, 2), rng.uniform(-3, 3, 1)])
            g = metric_at(M, x)
            assert np.array_equal(g, g.T)
            gam = M.christoffel(x)
            assert np.abs(gam - np.swapaxes(gam, 1, 2)).max() < 1e-8


def test_circle_second_fundamental_form():
    C = Submanifold.circle(euclidean(2), (0.0, 0.0), 1.0)
    v = np.array([0.0, 1.0])
    assert second_fundamental_form(C, None, [-1.0, 0.0], v, v) == pytest.approx(1.0, abs=1e-8)
    assert second_fundamental_form(C, None, [1.0, 0.0], v, v) == pytest.approx(-1.0, abs=1e-8)
    big = Submanifold.circle(euclidean(2), (0.0, 0.0), 2.5)
    np.testing.assert_allclose(shape_operator(big, None, [-1.0, 0.0]), [[1 / 2.5]], atol=1e-8)


def test_hyperplane_has_no_second_fundamental_form():
    H = Submanifold.affine(euclidean(3), [0, 0, 0], np.array([[1.0, 0, 0], [0, 1.0, 0]]).T)
    assert second_fundamental_form(H, None, [0, 0, 1.0], [1.0, 2.0, 0], [3.0, -1.0, 0]) == 0.0
    assert np.array_equal(shape_operator(H, None, [0, 0, 1.0]), np.zeros((2, 2)))


def test_sphere_of_radius_rho_in_space(rng):
    rho = 1.7

    def embed(u):
        return rho * np.array([np.sin(u[0]) * np.cos(u[1]), np.sin(u[0]) * np.sin(u[1]), np.cos(u[0])])

    S = Submanifold(euclidean(3), 2, embed, [1.0, 0.5])
    x = S.embedding()
    n = x / rho
    T = S.tangent_basis()
    for _ in range(10):
        v1, v2 = T @ rng.standard_normal(2), T @ rng.standard_normal(2)
        value = second_fundamental_form(S, None, n, v1, v2)
        assert value == pytest.approx(-(v1 @ v2) / rho, abs=1e-6)
        assert value == pytest.approx(second_fundamental_form(S, None, n, v2, v1), abs=1e-8)


def test_tangency_and_normality_errors():
    C = Submanifold.circle(euclidean(2), (0.0, 0.0), 1.0)
    with pytest.raises(NotNormal):
        second_fundamental_form(C, None, [0.0, 1.0], [0.0, 1.0], [0.0, 1.0])
    with pytest.raises(NotTangent):
        second_fundamental_form(C, None, [1.0, 0.0], [1.0, 0.0], [0.0, 1.0])


def test_null_line_shape_operator_is_degenerate():
    D = Submanifold.affine(minkowski(2), [0.0, 0.0], np.array([[1.0], [1.0]]))
    assert second_fundamental_matrix(D, None, [1.0, 1.0]).shape == (1, 1)
    with pytest.raises(DegenerateTangentMetric):
        shape_operator(D, None, [1.0, 1.0])
