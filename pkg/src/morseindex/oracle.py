"""Brute-force checks of the index computations.

:func:`dense_index_oracle` discretizes the index form with continuous
piecewise-linear fields on a uniform mesh and counts negative eigenvalues.
It uses only the geodesic samples, the curvature operator and the second
fundamental forms, never Jacobi fields or normal partitions, so agreement
with :mod:`morseindex.indexform` is an independent check.  The randomized
property checks below do use Jacobi fields.
"""

from dataclasses import dataclass

import numpy as np
import scipy.integrate

from .errors import ConfigError, FocalPresent, OffSubmanifold
from .fields import PiecewiseField
from .geodesics import adapted_seed
from .geometry import Submanifold, second_fundamental_matrix
from .indexform import INERTIA_TOL, FormInertia, index_form_value, inertia
from .jacobi import focal_points, p_jacobi_basis

MESH_START = 32
MESH_MAX = 512

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(3)
_GAUSS_X = 0.5 * (_GAUSS_X + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


@dataclass(frozen=True)
class DenseDiscretization:
    """Index form restricted to hat fields along a uniform mesh.

    ``dofs[c] = (node, direction)``; at the first node the directions are
    the tangent directions of ``P``, at the last node the tangent directions
    of ``Q`` (direction indices count from ``m - 1`` there).
    """

    mesh: np.ndarray
    matrix: np.ndarray
    dofs: np.ndarray

    @property
    def size(self):
        return self.matrix.shape[0]


def _perp_curvature(geo, seed, t):
    """``g(R(gdot, E_i) gdot, E_j)`` for the perp seed columns, shape (n, r, r)."""
    E = seed.perp
    GK = geo.metric0 @ geo.curvature_operator(t)
    out = np.einsum("ai,nab,bj->nij", E, GK, E)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _end_directions(geo, Q, seed):
    """Tangent vectors of ``Q`` at ``gamma(b)`` in perp components of ``seed`` and the form of ``Q`` on them."""
    r = geo.dim - 1
    xb, vb = geo.x[-1], geo.v[-1]
    if np.linalg.norm(Q.embedding() - xb) > 1e-8 * max(1.0, np.linalg.norm(xb)):
        raise OffSubmanifold(f"gamma(b) = {xb.tolist()} does not lie on {Q.name}")
    Q.check_normal(vb)
    if Q.dim == 0:
        return np.zeros((r, 0)), np.zeros((0, 0))
    TQ = np.linalg.solve(seed.matrix, geo.transported(geo.b, Q.tangent_basis().T).T)
    return TQ[:r], second_fundamental_matrix(Q, None, vb)


def assemble_dense_form(geo, P=None, Q=None, M=128):
    """Dense matrix of the index form on hat fields over ``M`` uniform elements.

    With ``Q`` None the fields vanish at ``b``; otherwise they end tangent
    to ``Q`` and the second fundamental form of ``Q`` is added.
    """
    M = int(M)
    if M < 2:
        raise ConfigError("the dense oracle needs at least 2 elements")
    if P is None:
        P = Submanifold.point(geo.manifold, geo.x[0])
    seed = adapted_seed(geo, P)
    m, k = geo.dim, seed.n_tangent
    r = m - 1
    G = seed.perp_gram
    mesh = np.linspace(geo.a, geo.b, M + 1)
    h = mesh[1] - mesh[0]

    # element matrices over (left node, right node) x perp directions
    quad_t = mesh[:-1, None] + h * _GAUSS_X[None, :]
    K = _perp_curvature(geo, seed, quad_t.ravel()).reshape(M, 3, r, r)
    phi = np.stack([1.0 - _GAUSS_X, _GAUSS_X])                       # (2, 3)
    curvature = h * np.einsum("q,aq,bq,eqij->eaibj", _GAUSS_W, phi, phi, K)
    stiffness = np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    elem = curvature + np.einsum("ab,ij->aibj", stiffness, G)[None]
    elem = elem.reshape(M, 2 * r, 2 * r)

    full = np.zeros(((M + 1) * r, (M + 1) * r))
    for e in range(M):
        s = slice(e * r, (e + 2) * r)
        full[s, s] += elem[e]

    # degrees of freedom: tangent directions at a, all at interior nodes, Q directions at b
    q_dirs, IIQ = (np.zeros((r, 0)), np.zeros((0, 0))) if Q is None else _end_directions(geo, Q, seed)
    kq = q_dirs.shape[1]
    n_int = (M - 1) * r
    basis = np.zeros(((M + 1) * r, k + n_int + kq))
    basis[:k, :k] = np.eye(k)
    basis[r:M * r, k:k + n_int] = np.eye(n_int)
    basis[M * r:, k + n_int:] = q_dirs
    dofs = ([(0, i) for i in range(k)] + [(n, i) for n in range(1, M) for i in range(r)]
            + [(M, r + i) for i in range(kq)])

    A = basis.T @ full @ basis
    if k:
        tangent = seed.matrix[:, :k]
        coef = np.linalg.lstsq(P.tangent_basis(), tangent, rcond=None)[0]
        IIP = coef.T @ second_fundamental_matrix(P, None, geo.v[0]) @ coef
        A[:k, :k] -= IIP
    if kq:
        A[-kq:, -kq:] += IIQ
    A = 0.5 * (A + A.T)
    return DenseDiscretization(mesh, A, np.array(dofs, dtype=int).reshape(-1, 2))


def dense_index_oracle(geo, P=None, Q=None, M=None, tol=INERTIA_TOL):
    """Inertia of the dense discretization.

    With ``M`` None the mesh doubles from 32 until the negative count agrees
    on two consecutive levels, or 512 elements are reached.
    """
    return dense_index_levels(geo, P, Q, M, tol)[-1][1]


def dense_index_levels(geo, P=None, Q=None, M=None, tol=INERTIA_TOL):
    """``[(M, FormInertia), ...]`` for each mesh tried."""
    if M is not None:
        return [(int(M), inertia(assemble_dense_form(geo, P, Q, M).matrix, tol))]
    levels = []
    M = MESH_START
    while M <= MESH_MAX:
        levels.append((M, inertia(assemble_dense_form(geo, P, Q, M).matrix, tol)))
        if len(levels) >= 2 and levels[-1][1].n_minus == levels[-2][1].n_minus:
            break
        M *= 2
    return levels


# ---------------------------------------------------------------- randomized property checks

def _jacobi_values(basis, t):
    """Transported ``(z, z')`` of every basis field, shapes (n, m, r)."""
    m = basis.geodesic.dim
    state = basis.transported(t)
    return state[:, :m, :], state[:, m:, :]


def _random_piecewise_linear(rng, geo, n_breaks, r, start_dims, end_zero=True):
    """Continuous piecewise-linear coefficient functions; returns breakpoints and node values."""
    inner = np.sort(rng.uniform(geo.a, geo.b, n_breaks))
    nodes = np.concatenate([[geo.a], inner, [geo.b]])
    values = rng.standard_normal((len(nodes), r))
    values[0, start_dims:] = 0.0
    if end_zero:
        values[-1] = 0.0
    return nodes, values


def _linear_interp(nodes, values, t):
    """Values and slopes of the interpolant; the slope on ``t`` uses the piece containing all of ``t``."""
    c = np.stack([np.interp(t, nodes, values[:, i]) for i in range(values.shape[1])], axis=1)
    mid = 0.5 * (t[0] + t[-1])
    j = int(np.clip(np.searchsorted(nodes, mid) - 1, 0, len(nodes) - 2))
    slope = (values[j + 1] - values[j]) / (nodes[j + 1] - nodes[j])
    return c, np.broadcast_to(slope, c.shape)


@dataclass(frozen=True)
class MinimalityReport:
    trials: int
    min_gap: float
    gaps: np.ndarray
    self_gap: float


def minimality_check(geo, P=None, trials=100, seed=0, amplitude=1.0):
    """Compare ``I(V, V)`` with ``I(J, J)`` for random ``V`` sharing the end value of a P-Jacobi ``J``.

    ``V = J + eta`` with ``eta`` a random continuous piecewise-linear field
    orthogonal to the geodesic, tangent to ``P`` at ``a`` and zero at ``b``.
    """
    basis = p_jacobi_basis(geo, P)
    found = focal_points(basis)
    if found:
        raise FocalPresent(f"focal points at {[round(f.t0, 9) for f in found]}; minimality needs a focal-free geodesic")
    rng = np.random.default_rng(seed)
    r, k = geo.dim - 1, basis.seed.n_tangent
    perp = basis.seed.perp
    P_used = basis.submanifold

    def jacobi_field(c, breaks):
        def func(t):
            z, dz = _jacobi_values(basis, t)
            return z @ c, dz @ c
        return PiecewiseField.from_function(geo, func, breaks)

    gaps = []
    c0 = rng.standard_normal(r)
    J = jacobi_field(c0, None)
    base = index_form_value(geo, P_used, J, J)
    for _ in range(int(trials)):
        c = rng.standard_normal(r)
        nodes, values = _random_piecewise_linear(rng, geo, int(rng.integers(2, 8)), r, k)
        values = amplitude * values

        def eta(t, nodes=nodes, values=values):
            coef, slope = _linear_interp(nodes, values, t)
            return coef @ perp.T, slope @ perp.T

        J = jacobi_field(c, nodes[1:-1])
        V = J + PiecewiseField.from_function(geo, eta, nodes[1:-1])
        gaps.append(index_form_value(geo, P_used, V, V) - index_form_value(geo, P_used, J, J))
    J = jacobi_field(c0, None)
    self_gap = index_form_value(geo, P_used, J, J) - base
    gaps = np.asarray(gaps)
    return MinimalityReport(int(trials), float(gaps.min()) if gaps.size else 0.0, gaps, float(self_gap))


def _random_coefficients(rng, geo, n_fields):
    """Continuous coefficient functions: a random cubic plus a random piecewise-linear part."""
    cubic = rng.standard_normal((4, n_fields))
    inner = np.sort(rng.uniform(geo.a, geo.b, int(rng.integers(1, 5))))
    nodes = np.concatenate([[geo.a], inner, [geo.b]])
    values = rng.standard_normal((len(nodes), n_fields))
    span = geo.b - geo.a

    def coeffs(t):
        s = (t - geo.a) / span
        powers = np.stack([np.ones_like(s), s, s**2, s**3], axis=1)
        dpowers = np.stack([np.zeros_like(s), np.ones_like(s), 2 * s, 3 * s**2], axis=1) / span
        lin, slope = _linear_interp(nodes, values, t)
        return powers @ cubic + lin, dpowers @ cubic + slope

    return coeffs, inner


def boundary_identity_trial(geo, P=None, seed=0):
    """One random check of the boundary-term identity for combinations of P-Jacobi fields.

    For ``V = sum phi_i J_i`` and ``W = sum psi_j J_j`` the index form equals
    ``int g(sum phi_i' J_i, sum psi_j' J_j) + g(sum phi_i(b) J_i'(b), sum psi_j(b) J_j(b))``.
    Returns the deviation relative to the magnitude of the terms involved.
    """
    basis = p_jacobi_basis(geo, P)
    rng = np.random.default_rng(seed)
    n = basis.size
    G = geo.metric0
    memo = {}

    def jacobi_values(t):
        # both combinations and the right-hand side sample the same segment times
        key = t.tobytes()
        if key not in memo:
            memo[key] = _jacobi_values(basis, t)
        return memo[key]
    phi, breaks_v = _random_coefficients(rng, geo, n)
    psi, breaks_w = _random_coefficients(rng, geo, n)
    breaks = np.concatenate([breaks_v, breaks_w])

    def combination(coeffs):
        def func(t):
            z, dz = jacobi_values(t)
            c, dc = coeffs(t)
            return (np.einsum("nir,nr->ni", z, c),
                    np.einsum("nir,nr->ni", dz, c) + np.einsum("nir,nr->ni", z, dc))
        return PiecewiseField.from_function(geo, func, breaks)

    V, W = combination(phi), combination(psi)
    lhs = index_form_value(geo, basis.submanifold, V, W)

    # right-hand side on the same segments
    integral, magnitude = 0.0, 0.0
    for seg in V.segments:
        z, _ = jacobi_values(seg.t)
        _, dphi = phi(seg.t)
        _, dpsi = psi(seg.t)
        a = np.einsum("nir,nr->ni", z, dphi)
        b = np.einsum("nir,nr->ni", z, dpsi)
        vals = np.einsum("ni,ij,nj->n", a, G, b)
        integral += _simpson(vals, seg.t)
        magnitude += _simpson(np.abs(vals), seg.t)
    tb = np.array([geo.b])
    zb, dzb = _jacobi_values(basis, tb)
    cb, _ = phi(tb)
    db, _ = psi(tb)
    boundary = float((dzb[0] @ cb[0]) @ G @ (zb[0] @ db[0]))
    rhs = integral + boundary
    scale = max(abs(lhs), magnitude + abs(boundary), 1e-300)
    return float(abs(lhs - rhs) / scale)


def _simpson(values, t):
    return float(scipy.integrate.simpson(values, x=t))


__all__ = ["DenseDiscretization", "assemble_dense_form", "dense_index_oracle", "dense_index_levels",
           "minimality_check", "MinimalityReport", "boundary_identity_trial", "FormInertia"]
