import math

import numpy as np
import pytest

from morseindex.errors import (DegenerateInitialCondition, DependentSeed, DomainError,
                               EnergyDriftError, NotOrthogonal, OffSubmanifold,
                               PreconditionError, UnsupportedCausalCharacter)
from morseindex.geodesics import (CausalCharacter, adapted_seed, causal_character,
                                  integrate_geodesic, parallel_frame, require_index_setting)
from morseindex.geometry import Manifold, Submanifold, euclidean, minkowski, sphere



def embed(x):
    theta, phi = x
    return np.array([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def oblique_error(steps, length=2.0):
    """Endpoint error of an oblique great circle, whose chart coordinates are not linear in t."""
    geo = integrate_geodesic(sphere(2), [math.pi / 2, 0.0], [0.6, 0.8], [0.0, length], steps)
    exact = math.cos(length) * np.array([1.0, 0, 0]) + math.sin(length) * np.array([0, 0.8, -0.6])
    return np.linalg.norm(embed(geo.x[-1]) - exact)


def equator_error(steps):
    geo = integrate_geodesic(sphere(2), [math.pi / 2, 0.0], [0.0, 1.0], [0.0, math.pi], steps)
    return np.linalg.norm(geo.x[-1] - [math.pi / 2, math.pi])


def test_straight_line(line):
    np.testing.assert_allclose(line.x[:, 0], line.t, atol=1e-14)
    assert np.all(line.x[:, 1] == 0.0)


def test_great_circle_reaches_antipode():
    assert equator_error(None) < 1e-6


def test_null_line_stays_null(null_line):
    np.testing.assert_allclose(null_line.x, np.column_stack([null_line.t, null_line.t]), atol=1e-14)
    assert np.abs(null_line.energy()).max() == 0.0


def test_rk4_order():
    coarse, fine = oblique_error(64), oblique_error(128)
    assert coarse / fine >= 15.0
    assert oblique_error(None) < 1e-8


def test_energy_drift_small(s2_25):
    assert s2_25.energy_drift < 1e-7


def test_energy_drift_error_on_coarse_steps():
    with pytest.raises(EnergyDriftError):
        integrate_geodesic(sphere(2), [0.3, 0.0], [0.2, 1.0], [0.0, 6.0], steps=64, drift_tol=1e-12)


def test_preconditions():
    with pytest.raises(PreconditionError):
        integrate_geodesic(euclidean(2), [0, 0], [0, 0], [0, 1])
    with pytest.raises(PreconditionError):
        integrate_geodesic(euclidean(2), [0, 0], [1, 0], [0, 1], steps=10)
    with pytest.raises(DomainError):
        integrate_geodesic(sphere(2), [0.5, 0.0], [-1.0, 0.0], [0.0, 1.0])


def test_reversal():
    geo = integrate_geodesic(sphere(2), [1.0, 0.2], [0.3, 0.8], [0.0, 2.0])
    back = integrate_geodesic(sphere(2), geo.x[-1], -geo.v[-1], [0.0, 2.0])
    assert np.linalg.norm(back.x[-1] - geo.x[0]) < 1e-6


@pytest.mark.parametrize("M, v0, expected", [
    (euclidean(2), [1.0, 0.0], CausalCharacter.SPACELIKE),
    (minkowski(2), [0.0, 1.0], CausalCharacter.TIMELIKE),
    (minkowski(2), [1.0, 1.0], CausalCharacter.LIGHTLIKE),
])
def test_causal_character(M, v0, expected):
    assert causal_character(integrate_geodesic(M, [0.0, 0.0], v0, [0.0, 1.0])) is expected


def test_parallel_frames(line, null_line):
    E = parallel_frame(line, [[0.0], [1.0]])
    np.testing.assert_allclose(E.vectors[:, :, 0], np.tile([0.0, 1.0], (len(line.t), 1)), atol=1e-15)
    N = parallel_frame(null_line, [[1.0], [1.0]])
    np.testing.assert_allclose(N.vectors[:, :, 0], 1.0, atol=1e-15)
    assert np.abs(N.gram()).max() < 1e-14


def test_transport_preserves_products():
    geo = integrate_geodesic(sphere(3), [1.0, 1.2, 0.0], [0.4, -0.3, 0.9], [0.0, 1.0])
    seed = np.array([[1.0, 0.2, 0.0], [0.0, 1.0, 0.3], [0.5, 0.0, 1.0]])
    frame = parallel_frame(geo, seed)
    gram = frame.gram()
    assert np.abs(gram - gram[0]).max() < 1e-7
    np.testing.assert_array_equal(frame.vectors[0], seed)
    assert frame.covariant_residual() < 1e-5


def test_great_circle_normal_frame(s2_15):
    frame = parallel_frame(s2_15, [[1.0], [0.0]])
    g = s2_15.manifold.metric(s2_15.x)
    E = frame.vectors[:, :, 0]
    assert np.abs(np.einsum("ni,nij,nj->n", E, g, E) - 1).max() < 1e-7
    assert np.abs(np.einsum("ni,nij,nj->n", E, g, s2_15.v)).max() < 1e-7


def test_dependent_seed(line):
    with pytest.raises(DependentSeed):
        parallel_frame(line, [[1.0, 2.0], [0.0, 0.0]])


def test_adapted_seed_spacelike(s3_15):
    seed = adapted_seed(s3_15)
    assert seed.n_tangent == 0 and seed.character is CausalCharacter.SPACELIKE
    np.testing.assert_allclose(seed.perp_gram, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(seed.perp.T @ s3_15.metric0 @ s3_15.v[0], 0.0, atol=1e-12)


def test_adapted_seed_lightlike(null_line):
    seed = adapted_seed(null_line)
    assert seed.lightlike and seed.null_index == 0
    np.testing.assert_allclose(seed.perp[:, seed.null_index], [1.0, 1.0])


def test_seed_errors():
    M = minkowski(2)
    geo = integrate_geodesic(M, [0.0, 0.0], [1.0, 1.0], [0.0, 1.0])
    diagonal = Submanifold.affine(M, [0.0, 0.0], np.array([[1.0], [1.0]]))
    with pytest.raises(DegenerateInitialCondition):
        adapted_seed(geo, diagonal)
    flat = integrate_geodesic(euclidean(2), [1.0, 0.0], [1.0, 1.0], [0.0, 1.0])
    circle = Submanifold.circle(euclidean(2), (0.0, 0.0), 1.0)
    with pytest.raises(NotOrthogonal):
        adapted_seed(flat, circle)
    with pytest.raises(OffSubmanifold):
        adapted_seed(flat, Submanifold.point(euclidean(2), [5.0, 5.0]))


def test_spacelike_lorentzian_rejected():
    geo = integrate_geodesic(minkowski(2), [0.0, 0.0], [1.0, 0.0], [0.0, 1.0])
    with pytest.raises(UnsupportedCausalCharacter):
        require_index_setting(geo)


def test_state_interpolation(s2_15):
    t = np.array([0.123, 2.0, 4.5])
    x, v, _ = s2_15.state_at(t)
    np.testing.assert_allclose(x[:, 1], t, atol=1e-8)
    np.testing.assert_allclose(v[:, 1], 1.0, atol=1e-8)


def test_custom_manifold_with_domain():
    M = Manifold(2, lambda x: np.stack(np.broadcast_arrays(*[np.ones(np.shape(x)[:-1])]
                                                           * 1), -1)[..., None] * np.eye(2),
                 "riemannian", domain=lambda x: x[..., 0] < 1.0)
    with pytest.raises(DomainError):
        integrate_geodesic(M, [0.0, 0.0], [1.0, 0.0], [0.0, 2.0])
