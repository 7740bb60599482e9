"""Jacobi fields: fundamental solutions, P-Jacobi bases, focal points, boundary problems.

The Jacobi equation ``J'' = R(gdot, J) gdot`` is linear, so in transported
components it reads ``y' = [[0, I], [K(t), 0]] y`` with ``K`` the matrix of
the curvature operator.  One RK4 step of a linear system is a matrix, and all
step matrices are formed at once from ``K`` at the grid nodes and midpoints;
only the cumulative product is sequential.
"""

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from . import _validation
from .errors import (AccumulationSuspected, ConfigError, ConjugateEndpoints,
                     NotOrthogonal, PreconditionError)
from .fields import PiecewiseField, Segment, segment_times
from .geodesics import adapted_seed
from .geometry import Submanifold, second_fundamental_matrix

RANK_TOL = 1e-8
BVP_COND_LIMIT = 1.0 / RANK_TOL
CANDIDATE_LEVEL = 0.1     # sigma_min / sigma_scale below which a local minimum is refined
ACCUMULATION_WINDOWS = 100


def _system(K):
    m = K.shape[-1]
    A = np.zeros(K.shape[:-2] + (2 * m, 2 * m))
    A[..., :m, m:] = np.eye(m)
    A[..., m:, :m] = K
    return A


def _rk4_step(A0, Am, A1, h):
    """RK4 transfer matrix for ``y' = A(t) y`` over one step; arrays broadcast, ``h`` too."""
    h = np.asarray(h, dtype=float)[..., None, None]
    eye = np.eye(A0.shape[-1])
    k1 = A0
    k2 = Am @ (eye + 0.5 * h * k1)
    k3 = Am @ (eye + 0.5 * h * k2)
    k4 = A1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


class JacobiFlow:
    """Fundamental matrix of the Jacobi equation in transported components."""

    def __init__(self, geo):
        self.geo = geo
        t, h = geo.t, geo.h
        self.A_nodes = _system(geo.curvature_operator(t))
        A_mid = _system(geo.curvature_operator(t[:-1] + 0.5 * h))
        steps = _rk4_step(self.A_nodes[:-1], A_mid, self.A_nodes[1:], h)
        phi = np.empty((geo.steps + 1, 2 * geo.dim, 2 * geo.dim))
        phi[0] = np.eye(2 * geo.dim)
        for n in range(geo.steps):
            phi[n + 1] = steps[n] @ phi[n]
        self.nodes = phi

    @classmethod
    def of(cls, geo):
        flow = geo._cache.get("jacobi_flow")
        if flow is None:
            flow = geo._cache["jacobi_flow"] = cls(geo)
        return flow

    def fundamental(self, t):
        """``Phi(t)`` for an array of parameters (one partial RK4 step from the node below)."""
        geo = self.geo
        t = np.asarray(t, dtype=float)
        k, theta = geo._locate(t)
        delta = theta * geo.h
        out = self.nodes[k].copy()
        off = np.abs(delta) > 1e-14 * max(1.0, geo.h)
        if np.any(off):
            kk, dd, tt = k[off], delta[off], t[off]
            A_mid = _system(geo.curvature_operator(geo.t[kk] + 0.5 * dd))
            A_end = _system(geo.curvature_operator(tt))
            out[off] = _rk4_step(self.A_nodes[kk], A_mid, A_end, dd) @ self.nodes[kk]
        return out

    def propagator(self, s, u):
        """Transported-component transition matrix from ``s`` to ``u``."""
        phi = self.fundamental(np.array([s, u], dtype=float))
        return np.linalg.solve(phi[0].T, phi[1].T).T


def _adapter(seed_matrix):
    m = seed_matrix.shape[0]
    D = np.zeros((2 * m, 2 * m))
    D[:m, :m] = seed_matrix
    D[m:, m:] = seed_matrix
    return D


def jacobi_propagate(geo, t_from, t_to):
    """Matrix sending ``(J(t_from), J'(t_from))`` to ``(J(t_to), J'(t_to))``.

    Both pairs are in coordinate components; ``J'`` is the covariant derivative.
    """
    s, u = _validation.check_parameters([t_from, t_to], geo.a, geo.b, "parameters", closed_left=True)
    m = geo.dim
    if s == u:
        return np.eye(2 * m)
    prop = JacobiFlow.of(geo).propagator(s, u)
    _, _, T = geo.state_at(np.array([s, u]))
    Ds, Du = _adapter(T[0]), _adapter(T[1])
    return Du @ prop @ np.linalg.inv(Ds)


# ---------------------------------------------------------------- P-Jacobi bases

@dataclass(frozen=True)
class JacobiBasis:
    """Jacobi fields along a geodesic with P-Jacobi initial data.

    Attributes
    ----------
    geodesic, submanifold
    seed : AdaptedSeed
    initial : ndarray, shape (2m, n)
        Initial values and derivatives in adapted components.
    fields : ndarray, shape (N+1, 2, m, n)
        ``fields[k, 0, :, i]`` is ``J_i(t_k)`` and ``fields[k, 1, :, i]`` is
        ``J_i'(t_k)``, both in coordinate components.
    orthogonal : bool
        Whether every field is orthogonal to the geodesic.
    """

    geodesic: object
    submanifold: object
    seed: object
    initial: np.ndarray
    fields: np.ndarray
    orthogonal: bool

    @property
    def size(self):
        return self.initial.shape[1]

    def adapted(self, t):
        """Adapted components ``(y, y')`` stacked, shape (..., 2m, n)."""
        flow = JacobiFlow.of(self.geodesic)
        D = _adapter(self.seed.matrix)
        return np.linalg.solve(D, flow.fundamental(t) @ (D @ self.initial))

    def transported(self, t):
        """Transported components ``(z, z')`` stacked, shape (..., 2m, n)."""
        flow = JacobiFlow.of(self.geodesic)
        return flow.fundamental(t) @ (_adapter(self.seed.matrix) @ self.initial)

    def perp_matrix(self, t):
        """Components of the fields along the perp columns of the adapted basis."""
        m = self.geodesic.dim
        return self.adapted(t)[..., : m - 1, :]

    def at(self, t):
        """Coordinate components of ``(J_i(t), J_i'(t))``, shape (..., 2, m, n)."""
        geo = self.geodesic
        m = geo.dim
        t = np.asarray(t, dtype=float)
        z = JacobiFlow.of(geo).fundamental(t) @ (_adapter(self.seed.matrix) @ self.initial)
        _, _, T = geo.state_at(t)
        return np.stack([T @ z[..., :m, :], T @ z[..., m:, :]], axis=-3)


def _tangent_shape_matrix(geo, P, seed):
    """``-S(E_i)`` in the orthonormal tangent columns ``E_i`` of the adapted seed."""
    k = seed.n_tangent
    if k == 0:
        return np.zeros((0, 0))
    T = P.tangent_basis()
    tangent = seed.matrix[:, :k]
    coef = np.linalg.lstsq(T, tangent, rcond=None)[0]
    form = coef.T @ second_fundamental_matrix(P, None, geo.v[0]) @ coef
    signs = np.sign(np.diag(seed.perp_gram)[:k])
    # g(S E_i, E_b) = form_ib and g(E_b, E_b) = signs_b
    return -(form * signs[None, :]).T


def p_jacobi_basis(geo, P=None, orthogonal=True):
    """Basis of the P-Jacobi fields along ``geo`` (``P`` defaults to the point ``gamma(a)``).

    With ``orthogonal=True`` (the default) this is the ``m-1`` dimensional
    space of P-Jacobi fields orthogonal to the geodesic.  The fields follow
    the perp columns of the adapted seed: first those starting tangent to
    ``P``, then those vanishing at ``a``; for a lightlike geodesic the last one
    has ``J'(a) = gdot(a)``.  ``orthogonal=False`` appends the field with
    ``J(a) = 0`` whose derivative is the transversal seed column.
    """
    if P is None:
        P = Submanifold.point(geo.manifold, geo.x[0])
    seed = adapted_seed(geo, P)
    m, k = geo.dim, seed.n_tangent
    n = m - 1 if orthogonal else m
    initial = np.zeros((2 * m, n))
    initial[:k, :k] = np.eye(k)
    initial[m:m + k, :k] = _tangent_shape_matrix(geo, P, seed)
    for i in range(k, n):
        initial[m + i, i] = 1.0
    flow = JacobiFlow.of(geo)
    z = flow.nodes @ (_adapter(seed.matrix) @ initial)
    T = geo.transport
    fields = np.stack([T @ z[:, :m, :], T @ z[:, m:, :]], axis=1)
    return JacobiBasis(geo, P, seed, initial, fields, orthogonal)


# ---------------------------------------------------------------- focal points

@dataclass(frozen=True, order=True)
class FocalPoint:
    """Parameter ``t0`` where some nonzero field of the basis vanishes, with the dimension of those fields."""

    t0: float
    multiplicity: int


def _scan(t_nodes, Y_nodes, evaluate, span, tol_rank, dim):
    """Find parameters where the square matrices ``Y`` become singular.

    ``Y_nodes`` holds ``Y`` at ``t_nodes``; ``evaluate(t)`` returns it at
    arbitrary parameters.  Candidates are sign changes of ``det Y`` and local
    minima of the smallest singular value, both refined; multiplicity is the
    number of singular values below ``tol_rank`` times the largest singular
    value seen along the scan.
    """
    r = Y_nodes.shape[-1]
    if r == 0 or len(t_nodes) < 2:
        return []
    sv = np.linalg.svd(Y_nodes, compute_uv=False)
    scale = float(sv[:, 0].max())
    if scale == 0.0:
        raise ConfigError("Jacobi basis vanishes identically")
    smin = sv[:, -1] / scale
    det = np.linalg.det(Y_nodes / scale)
    xtol = 1e-12 * span

    def det_at(s):
        return float(np.linalg.det(evaluate(np.array([s]))[0] / scale))

    def svd_at(s):
        return np.linalg.svd(evaluate(np.array([s]))[0])

    def sharpen(lo, hi):
        # minimize sigma_min, then locate the zero of the signed probe u^T Y v,
        # which crosses linearly where the bounded minimizer only gets ~sqrt(eps)
        res = scipy.optimize.minimize_scalar(lambda s: svd_at(s)[1][-1], bounds=(lo, hi),
                                             method="bounded", options={"xatol": xtol})
        tc = float(res.x)
        U, _, Vt = svd_at(tc)
        u0, v0 = U[:, -1], Vt[-1]

        def probe(s):
            return float(u0 @ evaluate(np.array([s]))[0] @ v0) / scale

        f_lo, f_hi = probe(lo), probe(hi)
        if f_lo * f_hi < 0:
            return scipy.optimize.brentq(probe, lo, hi, xtol=xtol)
        return tc

    candidates = []
    for n in np.flatnonzero(det[:-1] * det[1:] < 0):
        candidates.append(scipy.optimize.brentq(det_at, t_nodes[n], t_nodes[n + 1], xtol=xtol))
    inner = np.arange(1, len(t_nodes) - 1)
    minima = inner[(smin[inner] <= smin[inner - 1]) & (smin[inner] <= smin[inner + 1])
                   & (smin[inner] < CANDIDATE_LEVEL)]
    for n in minima:
        candidates.append(sharpen(t_nodes[n - 1], t_nodes[n + 1]))
    if smin[-1] < CANDIDATE_LEVEL and smin[-1] <= smin[-2]:
        candidates.append(float(t_nodes[-1]))

    candidates = np.sort(np.asarray(candidates, dtype=float))
    window = span / ACCUMULATION_WINDOWS
    if len(candidates) > 10 * dim:
        counts = np.searchsorted(candidates, candidates + window, side="right") - np.arange(len(candidates))
        if counts.max() > 10 * dim:
            raise AccumulationSuspected(
                f"{int(counts.max())} focal candidates within a window of length {window:.3g}")

    clusters = []
    merge = 2.0 * (t_nodes[1] - t_nodes[0])
    for c in candidates:
        if clusters and c - clusters[-1][-1] < merge:
            clusters[-1].append(c)
        else:
            clusters.append([c])
    out = []
    for cluster in clusters:
        values = [np.linalg.svd(evaluate(np.array([c]))[0], compute_uv=False) for c in cluster]
        best = int(np.argmin([v[-1] for v in values]))
        mult = int(np.sum(values[best] < tol_rank * scale))
        if mult:
            out.append(FocalPoint(float(cluster[best]), mult))
    return out


def _check_frame(basis, frame):
    """The frame must span the orthogonal complement of the velocity."""
    if frame is None:
        return
    seed = np.asarray(frame.seed, dtype=float)
    perp = basis.seed.perp
    if seed.shape[1] != perp.shape[1]:
        raise PreconditionError(f"frame must have {perp.shape[1]} vectors, got {seed.shape[1]}")
    coef = np.linalg.lstsq(perp, seed, rcond=None)[0]
    if np.linalg.norm(perp @ coef - seed) > 1e-8 * max(1.0, np.linalg.norm(seed)):
        raise NotOrthogonal("frame does not lie in the orthogonal complement of the velocity")
    if np.linalg.matrix_rank(coef) < perp.shape[1]:
        raise PreconditionError("frame does not span the orthogonal complement of the velocity")


def focal_points(basis, frame=None, tol_rank=RANK_TOL):
    """Focal points of ``basis.submanifold`` along the geodesic, in ``]a, b]``.

    ``frame`` (optional) is a parallel frame of the velocity's orthogonal
    complement; the matrix ``g(J_i, E_j)`` differs from the adapted
    components used here by a constant invertible factor, so it only gets
    validated.
    """
    if not basis.orthogonal:
        raise PreconditionError("focal points are computed from the orthogonal P-Jacobi basis")
    _check_frame(basis, frame)
    geo = basis.geodesic
    m = geo.dim
    D = _adapter(basis.seed.matrix)
    flow = JacobiFlow.of(geo)
    start = D @ basis.initial
    Y_nodes = np.linalg.solve(basis.seed.matrix, flow.nodes[1:, :m, :] @ start)[:, : m - 1, :]
    return _scan(geo.t[1:], Y_nodes, basis.perp_matrix, geo.b - geo.a, tol_rank, m)


def conjugate_points(geo, t_from=None, tol_rank=RANK_TOL):
    """Points conjugate to ``gamma(t_from)`` in ``]t_from, b]``."""
    t_from = geo.a if t_from is None else float(t_from)
    if not geo.a <= t_from < geo.b:
        raise ConfigError(f"t_from must lie in [{geo.a}, {geo.b}[")
    m = geo.dim
    flow = JacobiFlow.of(geo)
    seed = adapted_seed(geo).matrix
    # parallel transport preserves the velocity's orthogonal complement, so the
    # perp seed columns also span it at t_from
    state = np.zeros((2 * m, m - 1))
    state[m:] = seed[:, : m - 1]
    start = np.linalg.solve(flow.fundamental(np.array([t_from]))[0], state)

    def perp_block(phi):
        return np.linalg.solve(seed, phi[..., :m, :] @ start)[..., : m - 1, :]

    first = int(np.searchsorted(geo.t, t_from, side="right"))
    return _scan(geo.t[first:], perp_block(flow.nodes[first:]),
                 lambda t: perp_block(flow.fundamental(t)), geo.b - t_from, tol_rank, m)


# ---------------------------------------------------------------- boundary problems

def _check_perp(geo, t, vec, name):
    x, v, _ = geo.state_at(np.array([t]))
    g = geo.manifold.metric(x[0])
    vec = _validation.check_vector(vec, geo.dim, name)
    product = float(vec @ g @ v[0])
    scale = np.linalg.norm(vec) * np.linalg.norm(v[0]) * max(1.0, np.linalg.norm(g, 2))
    if abs(product) > 1e-8 * max(scale, 1e-300):
        raise NotOrthogonal(f"{name} is not orthogonal to the velocity at t={t:.6g}: g = {product:.3e}")
    return vec


def nearly_singular(block, reference, cond_limit=BVP_COND_LIMIT):
    """Whether ``block`` is singular relative to itself and to the larger matrix ``reference``.

    A plain condition number cannot flag a 1x1 block, so the smallest
    singular value is compared with the norm of the whole propagator too.
    """
    s = np.linalg.svd(block, compute_uv=False)
    if s.size == 0:
        return False
    return s[-1] * cond_limit < max(s[0], np.linalg.norm(reference, 2))


def jacobi_bvp(geo, s, u, v_s, v_u, cond_limit=BVP_COND_LIMIT):
    """Jacobi field on ``[s, u]`` with ``J(s) = v_s`` and ``J(u) = v_u`` (coordinate components)."""
    s, u = (float(x) for x in _validation.check_parameters([s, u], geo.a, geo.b, "parameters",
                                                            closed_left=True))
    if not u > s:
        raise ConfigError("jacobi_bvp needs s < u")
    v_s = _check_perp(geo, s, v_s, "v_s")
    v_u = _check_perp(geo, u, v_u, "v_u")
    m = geo.dim
    flow = JacobiFlow.of(geo)
    prop = flow.propagator(s, u)
    seed = adapted_seed(geo).matrix
    D = _adapter(seed)
    if nearly_singular(np.linalg.solve(seed, prop[:m, m:] @ seed), np.linalg.solve(D, prop @ D), cond_limit):
        raise ConjugateEndpoints(f"gamma({s:.6g}) and gamma({u:.6g}) are conjugate (boundary map is singular)")
    zs = geo.transported(s, v_s)
    zu = geo.transported(u, v_u)
    dzs = np.linalg.solve(prop[:m, m:], zu - prop[:m, :m] @ zs)
    t = segment_times(geo, s, u)
    phi = flow.fundamental(t)
    y = np.linalg.solve(flow.fundamental(np.array([s]))[0], np.concatenate([zs, dzs]))
    states = phi @ y
    return PiecewiseField(geo, [Segment(t, states[:, :m], states[:, m:])])
