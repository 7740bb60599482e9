"""Index forms, their finite-dimensional reduction and the index theorems.

The reduction works on a normal partition ``a = t_0 < ... < t_N``: a field
that is Jacobi on every subinterval (and P-Jacobi on the first) is fixed by
its values at the interior points, and the index form of two such fields is
the finite sum of derivative jumps ``g(V'(t_j-) - V'(t_j+), W(t_j))``.
Vectors orthogonal to the geodesic are coordinatised by the perp columns of
the adapted basis, parallel-transported; in those coordinates the metric is
the constant matrix ``seed.perp_gram``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.integrate
import scipy.linalg

from . import _validation
from .errors import (BoundaryNotTangent, ConfigError, ConjugateEndpoints,
                     NotTangent, OffSubmanifold, PartitionFailure,
                     SpanDeficiency)
from .geodesics import CausalCharacter, require_index_setting
from .geometry import Submanifold, second_fundamental_form, second_fundamental_matrix
from .jacobi import (BVP_COND_LIMIT, RANK_TOL, JacobiFlow, focal_points, nearly_singular,
                     p_jacobi_basis)

INERTIA_TOL = 1e-8
PARTITION_START = 16
PARTITION_MAX = 4096
PARTITION_RATIO_TOL = 1e-3   # sigma_min(B) / (t - t_i) on a conjugate-free piece
FOCAL_MARGIN = 1e-2         # t_1 stays this fraction of the way short of the first focal point
INDEX_GRID_POINTS = 200
JUMP_OFFSET = 1e-6
BOUNDARY_TOL = 1e-6
SPAN_TOL = 1e-6


def _point_if_none(geo, P, end=False):
    if P is None:
        return Submanifold.point(geo.manifold, geo.x[-1] if end else geo.x[0])
    return P


# ---------------------------------------------------------------- quadrature

def _curvature_on(geo, t):
    key = ("curvature", float(t[0]), float(t[-1]), len(t))
    K = geo._cache.get(key)
    if K is None:
        G = geo.metric0
        GK = G @ geo.curvature_operator(t)
        K = geo._cache[key] = 0.5 * (GK + np.swapaxes(GK, -1, -2))
    return K


def _integral(geo, V, W):
    V.restrict_grid_to(W)
    G = geo.metric0
    total = 0.0
    for sv, sw in zip(V.segments, W.segments):
        GK = _curvature_on(geo, sv.t)
        integrand = (np.einsum("ni,ij,nj->n", sv.dz, G, sw.dz)
                     + np.einsum("ni,nij,nj->n", sv.z, GK, sw.z))
        total += scipy.integrate.simpson(integrand, x=sv.t)
    return float(total)


def _boundary_term(geo, S, V_end, W_end, at_end):
    """``S_{gdot}(V, W)`` at ``gamma(a)`` or ``gamma(b)``."""
    if S.dim == 0:
        return 0.0
    velocity = geo.v[-1] if at_end else geo.v[0]
    return second_fundamental_form(S, None, velocity, V_end, W_end)


def _check_tangent(S, vec, error, where):
    try:
        S.tangent_coefficients(vec, tol=BOUNDARY_TOL)
    except NotTangent as exc:
        raise error(f"field value at {where} is not tangent to {S.name}") from exc


def index_form_value(geo, P, V, W):
    """Index form of the fields ``V`` and ``W`` with initial submanifold ``P``.

    The integral of ``g(V', W') + g(R(gdot, V) gdot, W)`` uses composite
    Simpson on each smooth piece; the second fundamental form of ``P`` at
    ``gamma(a)`` is subtracted unless ``P`` is a point (or None).
    """
    if V.geodesic is not geo or W.geodesic is not geo:
        raise ConfigError("fields must be sampled along the given geodesic")
    value = _integral(geo, V, W)
    if P is not None and P.dim > 0:
        Va, Wa = V.coordinates_at_start(), W.coordinates_at_start()
        value -= _boundary_term(geo, P, Va, Wa, at_end=False)
    return value


def index_form_two_endpoint_value(geo, P, Q, V, W):
    """Index form with both endpoints free: adds the second fundamental form of ``Q`` at ``gamma(b)``."""
    Q = _point_if_none(geo, Q, end=True)
    Vb, Wb = V.coordinates_at_end(), W.coordinates_at_end()
    for vec in (Vb, Wb):
        _check_tangent(Q, vec, BoundaryNotTangent, "b")
    return index_form_value(geo, P, V, W) + _boundary_term(geo, Q, Vb, Wb, at_end=True)


# ---------------------------------------------------------------- normal partitions

@dataclass(frozen=True)
class NormalPartition:
    """Parameters ``a = t_0 < ... < t_N`` with no conjugate or focal obstruction on any piece."""

    points: np.ndarray
    certified: bool

    @property
    def interior(self):
        return self.points[1:-1]

    def __len__(self):
        return len(self.points) - 1


class _PerpFlow:
    """Jacobi propagation restricted to the velocity's orthogonal complement (adapted components)."""

    def __init__(self, geo, seed):
        self.flow = JacobiFlow.of(geo)
        self.seed = seed
        m = geo.dim
        r = m - 1
        D = np.zeros((2 * m, 2 * m))
        D[:m, :m] = D[m:, m:] = seed.matrix
        self.D = D
        self.select = np.r_[0:r, m:m + r]

    def at(self, t):
        """Adapted fundamental matrices restricted to perp rows and columns."""
        phi = self.flow.fundamental(t)
        full = np.linalg.solve(self.D, phi @ self.D)
        return full[..., self.select[:, None], self.select]

    def nodes(self):
        full = np.linalg.solve(self.D, self.flow.nodes @ self.D)
        return full[..., self.select[:, None], self.select]


def _first_focal(focal_data, a):
    ts = [f.t0 for f in focal_data if f.t0 > a]
    return min(ts) if ts else np.inf


def _conjugate_free(geo, perp, points, node_phi):
    """Condition (a): no point of ``]t_i, t_{i+1}]`` is conjugate to ``t_i`` for ``i >= 1``."""
    r = perp.seed.perp.shape[1]
    if r == 0 or len(points) < 3:
        return True
    phi_pts = perp.at(points)
    for i in range(1, len(points) - 1):
        lo, hi = points[i], points[i + 1]
        inv = np.linalg.inv(phi_pts[i])[:, r:]          # J = 0, J' = identity at t_i
        mask = (geo.t > lo + 0.5 * geo.h) & (geo.t < hi)
        blocks = np.concatenate([node_phi[mask], phi_pts[i + 1:i + 2]]) @ inv
        B = blocks[:, :r, :]
        dt = np.concatenate([geo.t[mask], [hi]]) - lo
        det = np.linalg.det(B)
        if np.any(det * det[0] <= 0):
            return False
        smin = np.linalg.svd(B, compute_uv=False)[:, -1]
        if np.any(smin < PARTITION_RATIO_TOL * dt):
            return False
    return True


def normal_partition(geo, P=None, focal_data=None, t_final=None,
                     n_start=PARTITION_START, n_max=PARTITION_MAX):
    """Certified uniform partition of ``[a, t_final]`` (default ``[a, b]``).

    Starts with ``n_start`` intervals and doubles until the first interval
    stays clear of the focal points of ``P`` and no later interval contains a
    point conjugate to its left end.  Both checks keep a margin so that the
    boundary maps used by the discrete form are well conditioned.
    """
    P = _point_if_none(geo, P)
    seed = require_index_setting(geo, P)
    if focal_data is None:
        focal_data = focal_points(p_jacobi_basis(geo, P))
    end = geo.b if t_final is None else float(
        _validation.check_parameters([t_final], geo.a, geo.b, "t_final")[0])
    first_focal = _first_focal(focal_data, geo.a)
    perp = _PerpFlow(geo, seed)
    key = ("perp_nodes", seed.matrix.tobytes())
    node_phi = geo._cache.get(key)
    if node_phi is None:
        node_phi = geo._cache[key] = perp.nodes()
    n = int(n_start)
    while n <= n_max:
        points = np.linspace(geo.a, end, n + 1)
        clear = points[1] - geo.a < (1.0 - FOCAL_MARGIN) * (first_focal - geo.a)
        if clear and _conjugate_free(geo, perp, points, node_phi):
            return NormalPartition(points, True)
        n *= 2
    raise PartitionFailure(f"no normal partition of [{geo.a}, {end}] with at most {n_max} intervals")


# ---------------------------------------------------------------- discrete form

@dataclass(frozen=True)
class DiscreteForm:
    """Matrix of the index form on piecewise Jacobi fields.

    Coordinates are grouped per interior partition point ``t_j``:
    ``basis_tags[c] = (j, k)`` says coordinate ``c`` is the ``k``-th perp
    direction at the ``j``-th interior point.  ``lightlike_null_indices``
    lists the coordinates along the (parallel) velocity of a lightlike
    geodesic.  ``scale`` is the largest norm among the per-segment blocks
    that were summed into ``matrix``; it sets the zero threshold for inertia
    when those blocks cancel (at a focal end point, say).
    """

    partition: NormalPartition
    t_final: float
    matrix: np.ndarray
    basis_tags: np.ndarray
    lightlike_null_indices: np.ndarray
    scale: float = 0.0

    @property
    def interior_points(self):
        pts = self.partition.points
        return pts[(pts > pts[0]) & (pts < self.t_final)]

    @property
    def dim(self):
        return self.matrix.shape[0]


def _split(block, r):
    return block[:r, :r], block[:r, r:], block[r:, :r], block[r:, r:]


def _segment_blocks(G, prop, r, cond_limit, lo, hi):
    A, B, C, D = _split(prop, r)
    if nearly_singular(B, prop, cond_limit):
        raise ConjugateEndpoints(f"gamma({lo:.6g}) and gamma({hi:.6g}) are conjugate; the partition is not normal")
    BiA = np.linalg.solve(B, A)
    Bi = np.linalg.inv(B)
    left = (G @ BiA, -G @ Bi)                       # pairs with W(lo): -g(V'(lo+), .)
    right = (G @ (C - D @ BiA), G @ D @ Bi)         # pairs with W(hi): +g(V'(hi-), .)
    return left, right


def discrete_index_form(geo, P, partition, t=None, cond_limit=BVP_COND_LIMIT):
    """Matrix of the index form on ``[a, t]`` over the interior points of ``partition`` before ``t``."""
    P = _point_if_none(geo, P)
    seed = require_index_setting(geo, P)
    t = geo.b if t is None else float(_validation.check_parameters([t], geo.a, geo.b, "t")[0])
    pts = np.asarray(partition.points, dtype=float)
    interior = pts[(pts > geo.a) & (pts < t)]
    m = geo.dim
    r = m - 1
    d = len(interior) * r
    tags = np.array([(j, k) for j in range(len(interior)) for k in range(r)], dtype=int).reshape(-1, 2)
    null = (np.array([j * r + seed.null_index for j in range(len(interior))], dtype=int)
            if seed.lightlike else np.zeros(0, dtype=int))
    if d == 0:
        return DiscreteForm(partition, t, np.zeros((0, 0)), tags, null)

    G = seed.perp_gram
    perp = _PerpFlow(geo, seed)
    nodes = np.concatenate([[geo.a], interior, [t]])
    phi = perp.at(nodes)
    M = np.zeros((d, d))

    # first piece: P-Jacobi fields, V'(t_1-) = Y'(t_1) Y(t_1)^{-1} V(t_1)
    basis = p_jacobi_basis(geo, P)
    start = basis.initial[np.r_[0:r, m:m + r]]
    Y = phi[1] @ start
    if nearly_singular(Y[:r], Y, cond_limit):
        raise ConjugateEndpoints(f"gamma({nodes[1]:.6g}) is focal; the partition is not normal")
    first = G @ np.linalg.solve(Y[:r].T, Y[r:].T).T
    M[:r, :r] += first
    scale = np.linalg.norm(first, 2)

    for j in range(1, len(nodes) - 1):
        prop = np.linalg.solve(phi[j].T, phi[j + 1].T).T
        left, right = _segment_blocks(G, prop, r, cond_limit, nodes[j], nodes[j + 1])
        scale = max(scale, *(np.linalg.norm(blk, 2) for blk in left + right))
        p = slice((j - 1) * r, j * r)
        M[p, p] += left[0]
        if j < len(nodes) - 2:
            q = slice(j * r, (j + 1) * r)
            M[p, q] += left[1]
            M[q, p] += right[0]
            M[q, q] += right[1]
    M = 0.5 * (M + M.T)
    return DiscreteForm(partition, t, M, tags, null, float(scale))


# ---------------------------------------------------------------- inertia and indices

class FormInertia(NamedTuple):
    n_plus: int
    n_zero: int
    n_minus: int


def _matrix_of(form):
    return form.matrix if isinstance(form, DiscreteForm) else np.asarray(form, dtype=float)


def inertia(form, tol=INERTIA_TOL, scale=None):
    """Sylvester inertia of a symmetric matrix or :class:`DiscreteForm`.

    Eigenvalues with magnitude at most ``tol`` times the largest one count as
    zero.  ``scale`` (taken from a DiscreteForm when not given) raises that
    reference magnitude when the matrix is a sum of cancelling terms.
    """
    M = _matrix_of(form)
    if scale is None:
        scale = getattr(form, "scale", 0.0)
    if M.size == 0:
        return FormInertia(0, 0, 0)
    if not np.allclose(M, M.T, rtol=0, atol=1e-10 * max(1.0, np.abs(M).max())):
        raise ConfigError("inertia needs a symmetric matrix")
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    cutoff = tol * max(np.abs(w).max(), scale)
    zero = np.abs(w) <= cutoff
    return FormInertia(int(np.sum(~zero & (w > 0))), int(np.sum(zero)), int(np.sum(~zero & (w < 0))))


def _focal_setup(geo, P, focal_data=None):
    P = _point_if_none(geo, P)
    require_index_setting(geo, P)
    if focal_data is None:
        focal_data = focal_points(p_jacobi_basis(geo, P))
    return P, focal_data


def default_index_grid(geo, focal_data, n=INDEX_GRID_POINTS, offset=JUMP_OFFSET):
    grid = geo.a + (geo.b - geo.a) * np.arange(1, n + 1) / n
    extra = [f.t0 + s * offset for f in focal_data for s in (-1.0, 1.0)]
    grid = np.concatenate([grid, [f.t0 for f in focal_data], extra])
    grid = grid[(grid > geo.a) & (grid <= geo.b)]
    return np.unique(grid)


def index_at(geo, P, t, focal_data, tol=INERTIA_TOL):
    """``i(t)``: index of the form on ``[a, t]``.

    Uses the coarsest certified uniform partition of ``[a, t]``: the largest
    eigenvalue grows with the number of pieces, and a small one (just past a
    focal point) must stay above the relative zero threshold.
    """
    partition = normal_partition(geo, P, focal_data, t_final=t, n_start=1)
    form = discrete_index_form(geo, P, partition, t)
    return form, inertia(form, tol)


def index_function(geo, P=None, grid=None, focal_data=None, tol=INERTIA_TOL):
    """List of ``(t, i(t))`` over ``grid`` (default: 200 uniform points plus points around focal points)."""
    P, focal_data = _focal_setup(geo, P, focal_data)
    if grid is None:
        grid = default_index_grid(geo, focal_data)
    else:
        grid = np.sort(_validation.check_parameters(grid, geo.a, geo.b, "grid"))
    return [(float(t), index_at(geo, P, t, focal_data, tol)[1].n_minus) for t in grid]


def _at_end(geo, t0):
    return abs(t0 - geo.b) <= 1e-8 * (geo.b - geo.a)


class MorseIndexResult(NamedTuple):
    index: int
    focal_sum: int
    match: bool


def morse_index(geo, P=None, focal_data=None, tol=INERTIA_TOL):
    """Index of the form on ``[a, b]`` against the focal points in ``]a, b[`` counted with multiplicity."""
    P, focal_data = _focal_setup(geo, P, focal_data)
    _, inert = index_at(geo, P, geo.b, focal_data, tol)
    focal_sum = sum(f.multiplicity for f in focal_data if not _at_end(geo, f.t0))
    return MorseIndexResult(inert.n_minus, focal_sum, inert.n_minus == focal_sum)


class NullityResult(NamedTuple):
    n_zero: int
    expected: int
    match: bool


def kernel_nullity(geo, P=None, at_b=True, t=None, focal_data=None, partition=None,
                   tol=INERTIA_TOL):
    """Nullity of the discrete form at ``b`` (or ``t``) against the kernel dimension it should have.

    The kernel consists of the fields vanishing at the end point, plus,
    for a lightlike geodesic, the multiples of the velocity, which add one
    dimension per interior partition point.  ``partition`` defaults to the
    certified normal partition of ``[a, end]``.
    """
    P, focal_data = _focal_setup(geo, P, focal_data)
    end = geo.b if at_b or t is None else float(_validation.check_parameters([t], geo.a, geo.b, "t")[0])
    if partition is None:
        partition = normal_partition(geo, P, focal_data, t_final=end)
    form = discrete_index_form(geo, P, partition, end)
    inert = inertia(form, tol)
    mult = sum(f.multiplicity for f in focal_data
               if abs(f.t0 - end) <= 1e-8 * (geo.b - geo.a))
    seed = require_index_setting(geo, P)
    expected = mult + (len(form.interior_points) if seed.character is CausalCharacter.LIGHTLIKE else 0)
    return NullityResult(inert.n_zero, expected, inert.n_zero == expected)


# ---------------------------------------------------------------- two free endpoints

@dataclass(frozen=True)
class BoundaryForm:
    """Matrix of the boundary form on P-Jacobi fields ending tangent to ``Q``.

    ``coefficients`` (columns) express the fields in the orthogonal P-Jacobi
    basis; ``values_at_end`` gives their values at ``b`` in adapted perp
    components.
    """

    matrix: np.ndarray
    inertia: FormInertia
    coefficients: np.ndarray
    values_at_end: np.ndarray


def form_A(geo, P=None, Q=None, tol=INERTIA_TOL):
    """Boundary form ``S^Q(J1(b), J2(b)) + g(J1'(b), J2(b))`` on P-Jacobi fields with ``J(b)`` tangent to ``Q``."""
    P = _point_if_none(geo, P)
    Q = _point_if_none(geo, Q, end=True)
    seed = require_index_setting(geo, P)
    xb, vb = geo.x[-1], geo.v[-1]
    if np.linalg.norm(Q.embedding() - xb) > 1e-8 * max(1.0, np.linalg.norm(xb)):
        raise OffSubmanifold(f"gamma(b) = {xb.tolist()} does not lie on {Q.name}")
    Q.check_normal(vb)
    m, r = geo.dim, geo.dim - 1
    basis = p_jacobi_basis(geo, P)
    state = basis.adapted(np.array([geo.b]))[0]
    Yb, dYb = state[:r], state[m:m + r]
    # tangent vectors of Q at gamma(b) in adapted components
    TQ = np.linalg.solve(seed.matrix, geo.transported(geo.b, Q.tangent_basis().T).T)
    q = TQ[:r]
    # magnitudes are judged against the whole state so that fields vanishing at b drop out
    scale = max(np.abs(state).max(), 1e-300)
    if Q.dim:
        U, sv, _ = np.linalg.svd(Yb)
        span = U[:, : int(np.sum(sv > RANK_TOL * scale))]
        resid = np.linalg.norm(q - span @ (span.T @ q), axis=0) / np.maximum(np.linalg.norm(q, axis=0), 1e-300)
        if np.any(resid > SPAN_TOL) or np.linalg.norm(TQ[r:]) > SPAN_TOL * np.linalg.norm(q):
            raise SpanDeficiency(f"tangent space of {Q.name} at gamma(b) is not spanned by P-Jacobi fields")
    # c with Yb c in span(q): null space of [Yb, -q], orthonormalised in c
    kernel = scipy.linalg.null_space(np.column_stack([Yb / scale, -q / scale]),
                                     rcond=RANK_TOL)
    C = kernel[:r]
    if C.shape[1]:
        U, s, _ = np.linalg.svd(C, full_matrices=False)
        C = U[:, s > RANK_TOL]
    alpha = np.linalg.lstsq(q, Yb @ C, rcond=None)[0] if Q.dim else np.zeros((0, C.shape[1]))
    IIQ = second_fundamental_matrix(Q, None, vb) if Q.dim else np.zeros((0, 0))
    G = seed.perp_gram
    Jb, dJb = Yb @ C, dYb @ C
    shape_part = alpha.T @ IIQ @ alpha
    derivative_part = dJb.T @ G @ Jb
    A = 0.5 * ((shape_part + derivative_part) + (shape_part + derivative_part).T)
    scale = max(np.linalg.norm(shape_part, 2), np.linalg.norm(derivative_part, 2)) if A.size else 0.0
    return BoundaryForm(A, inertia(A, tol, scale), C, Jb)


class TwoEndpointResult(NamedTuple):
    total: int
    fixed_part: int
    boundary_part: int


def two_endpoint_index(geo, P=None, Q=None, focal_data=None, tol=INERTIA_TOL):
    """Index with both endpoints free: fixed-endpoint index plus the index of the boundary form."""
    fixed = morse_index(geo, P, focal_data, tol).index
    boundary = form_A(geo, P, Q, tol).inertia.n_minus
    return TwoEndpointResult(fixed + boundary, fixed, boundary)
