"""Estimator-style wrappers around the functional API.

Each estimator is configured with the submanifolds and tolerances, fitted
on a :class:`~morseindex.geodesics.Geodesic`, and exposes its results as
trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation
from .errors import ConfigError
from .geodesics import Geodesic
from .indexform import (INERTIA_TOL, form_A, index_at, kernel_nullity, morse_index,
                        _point_if_none)
from .jacobi import RANK_TOL, focal_points, p_jacobi_basis
from .oracle import dense_index_levels


def _check_geodesic(X):
    if not isinstance(X, Geodesic):
        raise ConfigError(f"fit expects a Geodesic, got {type(X).__name__}")
    return X


class MorseIndex(BaseEstimator):
    """Fixed-endpoint index along a geodesic starting orthogonally on ``P``.

    ``predict(t)`` returns the index ``i(t)`` of the form restricted to
    ``[a, t]``; ``transform(t)`` returns its full inertia triples.
    """

    def __init__(self, P=None, tol_rank=RANK_TOL, tol_inertia=INERTIA_TOL):
        self.P = P
        self.tol_rank = tol_rank
        self.tol_inertia = tol_inertia

    def fit(self, X, y=None):
        geo = _check_geodesic(X)
        P = _point_if_none(geo, self.P)
        self.focal_points_ = focal_points(p_jacobi_basis(geo, P), tol_rank=self.tol_rank)
        result = morse_index(geo, P, self.focal_points_, self.tol_inertia)
        self.index_, self.focal_sum_, self.match_ = result
        self.nullity_ = kernel_nullity(geo, P, focal_data=self.focal_points_, tol=self.tol_inertia)
        self.geodesic_, self.submanifold_ = geo, P
        return self

    def _parameters(self, t):
        check_is_fitted(self)
        geo = self.geodesic_
        return _validation.check_parameters(t, geo.a, geo.b, "t")

    def transform(self, t):
        ts = self._parameters(t)
        return np.array([tuple(index_at(self.geodesic_, self.submanifold_, s, self.focal_points_,
                                        self.tol_inertia)[1]) for s in ts], dtype=int).reshape(-1, 3)

    def predict(self, t):
        return self.transform(t)[:, 2]


class TwoEndpointIndex(BaseEstimator):
    """Index with both endpoints free on ``P`` and ``Q``, split into fixed and boundary parts."""

    def __init__(self, P=None, Q=None, tol_rank=RANK_TOL, tol_inertia=INERTIA_TOL):
        self.P = P
        self.Q = Q
        self.tol_rank = tol_rank
        self.tol_inertia = tol_inertia

    def fit(self, X, y=None):
        geo = _check_geodesic(X)
        P = _point_if_none(geo, self.P)
        focal = focal_points(p_jacobi_basis(geo, P), tol_rank=self.tol_rank)
        self.fixed_part_ = morse_index(geo, P, focal, self.tol_inertia).index
        self.form_A_ = form_A(geo, P, self.Q, self.tol_inertia)
        self.boundary_part_ = self.form_A_.inertia.n_minus
        self.total_ = self.fixed_part_ + self.boundary_part_
        self.focal_points_ = focal
        return self

    def predict(self, X=None):
        check_is_fitted(self)
        return self.total_


class DenseIndexOracle(BaseEstimator):
    """Inertia of a dense finite-element discretization of the index form.

    ``mesh=None`` doubles the mesh until the negative count stabilizes.
    """

    def __init__(self, P=None, Q=None, mesh=None, tol_inertia=INERTIA_TOL):
        self.P = P
        self.Q = Q
        self.mesh = mesh
        self.tol_inertia = tol_inertia

    def fit(self, X, y=None):
        geo = _check_geodesic(X)
        self.levels_ = dense_index_levels(geo, self.P, self.Q, self.mesh, self.tol_inertia)
        self.mesh_, self.inertia_ = self.levels_[-1]
        return self

    def predict(self, X=None):
        check_is_fitted(self)
        return self.inertia_.n_minus
