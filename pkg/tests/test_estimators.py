import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from morseindex.errors import ConfigError
from morseindex.estimators import DenseIndexOracle, MorseIndex, TwoEndpointIndex
from morseindex.geodesics import integrate_geodesic
from morseindex.geometry import Submanifold, euclidean


def test_morse_index_estimator(s2_25):
    est = MorseIndex().fit(s2_25)
    assert (est.index_, est.focal_sum_, est.match_) == (2, 2, True)
    assert [f.multiplicity for f in est.focal_points_] == [1, 1]
    t = np.array([1.0, math.pi, math.pi + 1e-6, 7.0])
    np.testing.assert_array_equal(est.predict(t), [0, 0, 1, 2])
    inert = est.transform([1.0])
    assert inert.shape == (1, 3) and inert[0, 2] == 0
    with pytest.raises(ConfigError):
        est.predict([100.0])


def test_params_and_clone():
    P = Submanifold.point(euclidean(2), [0.0, 0.0])
    est = MorseIndex(P=P, tol_inertia=1e-9)
    assert est.get_params()["tol_inertia"] == 1e-9
    copy = clone(est)
    assert copy.get_params()["tol_inertia"] == 1e-9
    assert copy.set_params(tol_rank=1e-7).tol_rank == 1e-7


def test_unfitted_and_bad_input(line):
    with pytest.raises(NotFittedError):
        MorseIndex().predict([0.5])
    with pytest.raises(ConfigError):
        MorseIndex().fit(np.zeros((3, 2)))


def test_two_endpoint_and_oracle_estimators():
    E2 = euclidean(2)
    geo = integrate_geodesic(E2, [0, 0], [1, 0], [0, 3])
    Q = Submanifold.circle(E2, (2, 0), 1.0, 0.0)
    est = TwoEndpointIndex(Q=Q).fit(geo)
    assert (est.total_, est.fixed_part_, est.boundary_part_) == (1, 0, 1)
    assert est.predict() == 1
    oracle = DenseIndexOracle(Q=Q, mesh=64).fit(geo)
    assert oracle.predict() == 1 and oracle.mesh_ == 64
