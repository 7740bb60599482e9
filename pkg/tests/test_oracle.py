
import numpy as np
import pytest

from morseindex.errors import FocalPresent
from morseindex.geodesics import integrate_geodesic
from morseindex.geometry import Submanifold, euclidean
from morseindex.oracle import (assemble_dense_form, dense_index_levels, dense_index_oracle,
                               boundary_identity_trial, minimality_check)

from conftest import inward_from_circle, unit_circle_P

E2 = euclidean(2)


def test_dense_examples(line, s2_15):
    assert dense_index_oracle(line, M=64).n_minus == 0
    assert dense_index_oracle(s2_15, M=64).n_minus == 1
    geo = integrate_geodesic(E2, [0, 0], [1, 0], [0, 3])
    assert dense_index_oracle(geo, None, Submanifold.circle(E2, (2, 0), 1.0, 0.0), M=64).n_minus == 1


def test_dense_matrix_symmetric_and_sized(s3_15):
    dense = assemble_dense_form(s3_15, M=40)
    assert np.abs(dense.matrix - dense.matrix.T).max() < 1e-10
    assert dense.size == 39 * 2


def test_mesh_monotonicity(s2_25):
    counts = [dense_index_oracle(s2_25, M=M).n_minus for M in (32, 64, 128)]
    assert counts == sorted(counts) and counts[-1] == 2


def test_adaptive_levels_stop_when_stable(s2_15):
    levels = dense_index_levels(s2_15)
    assert levels[0][0] == 32
    assert levels[-1][1].n_minus == levels[-2][1].n_minus == 1


def test_lightlike_zero_count_grows(null_line):
    small, large = dense_index_oracle(null_line, M=32), dense_index_oracle(null_line, M=64)
    assert small.n_minus == large.n_minus == 0
    assert large.n_zero > small.n_zero


def test_minimality_flat_and_sphere(line, s2_09):
    flat = minimality_check(line, trials=30, seed=1)
    assert flat.min_gap >= -1e-7 and np.all(flat.gaps > 0)
    assert flat.self_gap == 0.0
    sphere = minimality_check(s2_09, trials=10, seed=2)
    assert sphere.min_gap >= -1e-7


def test_minimality_needs_focal_free(s2_15):
    with pytest.raises(FocalPresent):
        minimality_check(s2_15, trials=1)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_boundary_identity(seed, s2_15):
    assert boundary_identity_trial(s2_15, None, seed) < 1e-5
    assert boundary_identity_trial(inward_from_circle(1.5), unit_circle_P(), seed) < 1e-5
