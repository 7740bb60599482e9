import math

import numpy as np
import pytest

from morseindex.errors import (BoundaryNotTangent, ConfigError, ConjugateEndpoints,
                               PartitionFailure, SpanDeficiency, UnsupportedCausalCharacter)
from morseindex.fields import PiecewiseField, Segment
from morseindex.geodesics import adapted_seed, integrate_geodesic
from morseindex.geometry import Submanifold, euclidean, minkowski
from morseindex.indexform import (NormalPartition, discrete_index_form, form_A, index_form_value,
                                  index_form_two_endpoint_value, index_function, inertia,
                                  kernel_nullity, morse_index, normal_partition,
                                  two_endpoint_index)
from morseindex.jacobi import focal_points, jacobi_bvp, p_jacobi_basis

from conftest import great_circle, inward_from_circle, unit_circle_P

E2 = euclidean(2)


def scalar_field(geo, direction, f, df, breakpoints=None):
    direction = np.asarray(direction, dtype=float)
    return PiecewiseField.from_function(
        geo, lambda t: (np.outer(f(t), direction), np.outer(df(t), direction)), breakpoints)


# ---------------------------------------------------------------- quadrature values

def test_flat_bump(line):
    V = scalar_field(line, [0, 1], lambda t: t * (1 - t), lambda t: 1 - 2 * t)
    assert index_form_value(line, None, V, V) == pytest.approx(1 / 3, abs=1e-10)


@pytest.mark.parametrize("L", [2.0, 4.0])
def test_sphere_sine_field(L):
    geo = great_circle(L)
    V = scalar_field(geo, [1, 0], lambda t: np.sin(math.pi * t / L),
                     lambda t: math.pi / L * np.cos(math.pi * t / L))
    expected = (math.pi ** 2 / L ** 2 - 1) * L / 2
    assert index_form_value(geo, None, V, V) == pytest.approx(expected, abs=1e-7)
    assert (expected < 0) == (L > math.pi)


@pytest.mark.parametrize("L", [0.5, 1.5])
def test_circle_boundary_term(L):
    geo = inward_from_circle(L)
    V = scalar_field(geo, [0, 1], lambda t: 1 - t / L, lambda t: -np.ones_like(t) / L)
    assert index_form_value(geo, unit_circle_P(), V, V) == pytest.approx(1 / L - 1, abs=1e-6)


def test_symmetry_and_grid_mismatch(s2_15, rng):
    c1, c2 = rng.standard_normal((2, 3))
    V = scalar_field(s2_15, [1, 0], lambda t: c1[0] + c1[1] * t + c1[2] * t**2, lambda t: c1[1] + 2 * c1[2] * t,
                     [1.0, 2.0])
    W = scalar_field(s2_15, [1, 0], lambda t: np.cos(c2[0] * t), lambda t: -c2[0] * np.sin(c2[0] * t), [1.0, 2.0])
    assert abs(index_form_value(s2_15, None, V, W) - index_form_value(s2_15, None, W, V)) < 1e-9
    other = scalar_field(s2_15, [1, 0], np.sin, np.cos)
    with pytest.raises(Exception):
        (V + other)


def test_discontinuous_field_rejected(line):
    segs = [Segment(np.array([0.0, 0.5]), np.zeros((2, 2)), np.zeros((2, 2))),
            Segment(np.array([0.5, 1.0]), np.ones((2, 2)), np.zeros((2, 2)))]
    with pytest.raises(ConfigError):
        PiecewiseField(line, segs)


def test_two_endpoint_values():
    geo = integrate_geodesic(E2, [0, 0], [1, 0], [0, 3])
    Q = Submanifold.circle(E2, (2, 0), 1.0, 0.0)
    J = scalar_field(geo, [0, 1], lambda t: t, np.ones_like)
    assert index_form_two_endpoint_value(geo, None, Q, J, J) == pytest.approx(-6.0, abs=1e-6)
    bad = scalar_field(geo, [1, 1], lambda t: t, np.ones_like)
    with pytest.raises(BoundaryNotTangent):
        index_form_two_endpoint_value(geo, None, Q, bad, bad)

    radial = integrate_geodesic(E2, [1, 0], [1, 0], [0, 1])
    outer = Submanifold.circle(E2, (0, 0), 2.0)
    J = scalar_field(radial, [0, 1], lambda t: 1 + t, np.ones_like)
    assert index_form_two_endpoint_value(radial, unit_circle_P(), outer, J, J) == pytest.approx(0.0, abs=1e-6)


def test_point_Q_reduces_to_fixed_endpoint(line):
    V = scalar_field(line, [0, 1], lambda t: t * (1 - t), lambda t: 1 - 2 * t)
    assert index_form_two_endpoint_value(line, None, None, V, V) == pytest.approx(1 / 3, abs=1e-10)


# ---------------------------------------------------------------- partitions and discrete forms

def test_partition_examples(line, s2_25):
    part = normal_partition(line)
    assert part.certified and len(part) == 16
    part = normal_partition(s2_25)
    assert part.certified and np.diff(part.points).max() < math.pi
    geo = inward_from_circle(2.0)
    part = normal_partition(geo, unit_circle_P())
    assert part.points[1] < 1.0


def test_partition_failure(s2_25):
    with pytest.raises(PartitionFailure):
        normal_partition(s2_25, n_start=1, n_max=2)


def test_flat_discrete_form(line):
    form = discrete_index_form(line, None, NormalPartition(np.array([0.0, 0.5, 1.0]), True))
    np.testing.assert_allclose(form.matrix, [[4.0]], atol=1e-10)
    assert inertia(form) == (1, 0, 0)


def test_sphere_discrete_form(s2_15):
    form = discrete_index_form(s2_15, None, normal_partition(s2_15))
    assert np.abs(form.matrix - form.matrix.T).max() < 1e-10
    assert inertia(form).n_minus == 1


def test_non_normal_partition_raises(s2_15):
    with pytest.raises(ConjugateEndpoints):
        discrete_index_form(s2_15, None, NormalPartition(np.array([0.0, 0.5, 0.5 + math.pi, 1.5 * math.pi]), False))


def test_null_discrete_form(null_line):
    part = NormalPartition(np.linspace(0.0, 1.0, 5), True)
    form = discrete_index_form(null_line, None, part)
    assert inertia(form) == (0, 3, 0)
    assert len(form.lightlike_null_indices) == 3
    np.testing.assert_allclose(form.matrix, 0.0, atol=1e-12)


@pytest.mark.parametrize("matrix, expected", [
    ([[4.0]], (1, 0, 0)),
    (np.zeros((3, 3)), (0, 3, 0)),
    (np.diag([1.0, -2.0, 0.0]), (1, 1, 1)),
])
def test_inertia_examples(matrix, expected):
    assert inertia(np.asarray(matrix)) == expected


def test_inertia_rejects_asymmetric():
    with pytest.raises(ConfigError):
        inertia(np.array([[0.0, 1.0], [0.0, 0.0]]))


def perp_coordinates(geo, seed, t, c):
    return geo.coordinates(t, seed.perp @ c)


def piecewise_jacobi(geo, P, points, values):
    """Field that is P-Jacobi on the first piece, Jacobi on the others, with the given perp values."""
    basis = p_jacobi_basis(geo, P)
    seed = basis.seed
    m = geo.dim
    t1 = points[1]
    zt1 = basis.transported(np.array([t1]))[0, :m]
    coef = np.linalg.lstsq(zt1, seed.perp @ values[0], rcond=None)[0]
    ref = PiecewiseField.from_function(geo, lambda t: (np.zeros((len(t), m)),) * 2, points[1:-1])
    first_t = ref.segments[0].t
    state = basis.transported(first_t) @ coef
    segs = [Segment(first_t, state[:, :m], state[:, m:])]
    ends = list(values) + [np.zeros(m - 1)]
    for j in range(1, len(points) - 1):
        s, u = points[j], points[j + 1]
        piece = jacobi_bvp(geo, s, u, perp_coordinates(geo, seed, s, ends[j - 1]),
                           perp_coordinates(geo, seed, u, ends[j]))
        segs.append(piece.segments[0])
    return PiecewiseField(geo, segs, continuity_tol=1e-7)


def bumps(geo, seed, points, rng):
    coef = rng.standard_normal((len(points) - 1, geo.dim - 1))

    def func(t):
        j = np.clip(np.searchsorted(points, t[len(t) // 2]) - 1, 0, len(points) - 2)
        lo, hi = points[j], points[j + 1]
        w = math.pi / (hi - lo)
        c = coef[j] @ seed.perp.T
        return np.outer(np.sin(w * (t - lo)), c), np.outer(w * np.cos(w * (t - lo)), c)

    return PiecewiseField.from_function(geo, func, points[1:-1])


@pytest.mark.parametrize("case", ["sphere", "circle"])
def test_discrete_form_matches_quadrature_and_splitting(case, s2_15, rng):
    geo, P = (s2_15, None) if case == "sphere" else (inward_from_circle(1.5), unit_circle_P())
    part = normal_partition(geo, P)
    points = part.points[::2] if case == "sphere" else part.points
    seed = adapted_seed(geo, P)
    form = discrete_index_form(geo, P, NormalPartition(points, True))
    P_used = P
    for _ in range(3):
        values = rng.standard_normal((len(points) - 2, geo.dim - 1))
        VJ = piecewise_jacobi(geo, P, points, values)
        v = values.ravel()
        quad = index_form_value(geo, P_used, VJ, VJ)
        assert quad == pytest.approx(v @ form.matrix @ v, rel=1e-5, abs=1e-6)
        V0 = bumps(geo, seed, points, rng)
        cross = index_form_value(geo, P_used, V0, VJ)
        assert abs(cross) < 1e-6 * max(1.0, math.sqrt(abs(quad) * index_form_value(geo, P_used, V0, V0)))
        assert index_form_value(geo, P_used, V0, V0) >= -1e-7


# ---------------------------------------------------------------- indices

def test_index_function_sphere(s2_25):
    values = dict(index_function(s2_25))
    ts = np.array(sorted(values))
    idx = np.array([values[t] for t in ts])
    assert np.all(np.diff(idx) >= 0)
    expected = np.where(ts <= math.pi + 1e-9, 0, np.where(ts <= 2 * math.pi + 1e-9, 1, 2))
    assert np.array_equal(idx, expected)


def test_index_function_circle():
    geo = inward_from_circle(2.0)
    out = index_function(geo, unit_circle_P(), grid=[0.25, 0.5, 0.999, 1.0, 1.001, 1.5, 2.0])
    assert [i for _, i in out] == [0, 0, 0, 0, 1, 1, 1]


def test_index_function_flat(line):
    assert all(i == 0 for _, i in index_function(line, grid=np.linspace(0.1, 1.0, 10)))


def test_morse_index_examples(line, s2_15, s3_15):
    assert tuple(morse_index(line)) == (0, 0, True)
    assert tuple(morse_index(s2_15)) == (1, 1, True)
    assert tuple(morse_index(s3_15)) == (2, 2, True)


def test_morse_index_spacelike_lorentzian():
    geo = integrate_geodesic(minkowski(2), [0, 0], [1.0, 0.0], [0, 1.0])
    with pytest.raises(UnsupportedCausalCharacter):
        morse_index(geo)


def test_kernel_nullity_examples(line, null_line):
    assert tuple(kernel_nullity(line)) == (0, 0, True)
    geo = great_circle(math.pi)
    assert tuple(kernel_nullity(geo)) == (1, 1, True)
    part = NormalPartition(np.linspace(0.0, 1.0, 5), True)
    assert tuple(kernel_nullity(null_line, partition=part)) == (3, 3, True)


def test_form_A_examples():
    geo = integrate_geodesic(E2, [0, 0], [1, 0], [0, 3])
    far = form_A(geo, None, Submanifold.circle(E2, (2, 0), 1.0, 0.0))
    np.testing.assert_allclose(far.matrix, [[-6.0]], atol=1e-8)
    assert tuple(far.inertia) == (0, 0, 1)
    radial = integrate_geodesic(E2, [1, 0], [1, 0], [0, 1])
    conc = form_A(radial, unit_circle_P(), Submanifold.circle(E2, (0, 0), 2.0))
    np.testing.assert_allclose(conc.matrix, [[0.0]], atol=1e-8)
    assert tuple(conc.inertia) == (0, 1, 0)
    assert form_A(geo).matrix.shape == (0, 0)


def test_form_A_span_deficiency():
    geo = great_circle(math.pi, dim=3)
    Q = Submanifold.affine(geo.manifold, geo.x[-1], np.array([[1.0], [0.0], [0.0]]))
    with pytest.raises(SpanDeficiency):
        form_A(geo, None, Q)


def test_form_A_kernel_contains_fields_vanishing_at_b():
    E3 = euclidean(3)
    ring = Submanifold(E3, 1, lambda u: np.array([np.cos(u[0]), np.sin(u[0]), 0.0]), [0.0])
    geo = integrate_geodesic(E3, [1, 0, 0], [-1, 0, 0], [0, 1])
    axis = Submanifold.affine(E3, [0, 0, 0], np.array([[0.0], [0.0], [1.0]]))
    A = form_A(geo, ring, axis)
    assert A.matrix.shape == (2, 2)
    assert tuple(A.inertia) == (1, 1, 0)
    vanishing = np.linalg.norm(A.values_at_end, axis=0) < 1e-8
    assert vanishing.sum() == 1
    np.testing.assert_allclose(A.matrix @ vanishing, 0.0, atol=1e-8)


def test_two_endpoint_examples(line):
    geo = integrate_geodesic(E2, [0, 0], [1, 0], [0, 3])
    assert tuple(two_endpoint_index(geo, None, Submanifold.circle(E2, (2, 0), 1.0, 0.0))) == (1, 0, 1)
    near = integrate_geodesic(E2, [0, 0], [1, 0], [0, 1])
    assert tuple(two_endpoint_index(near, None, Submanifold.circle(E2, (2, 0), 1.0, math.pi))) == (0, 0, 0)
    assert tuple(two_endpoint_index(line)) == (0, 0, 0)


def test_focal_data_reuse(s2_15):
    focal = focal_points(p_jacobi_basis(s2_15))
    assert morse_index(s2_15, focal_data=focal) == morse_index(s2_15)
