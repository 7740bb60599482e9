"""Geodesic integration, causal character and parallel frames.

Vector fields along a geodesic are represented throughout by their
components in the *transported basis*: the coordinate basis at ``gamma(a)``
parallel-transported along the curve.  If ``T(t)`` is the transport matrix
(columns are the transported basis vectors) a field with coordinate
components ``V(t)`` has transported components ``z = T(t)^{-1} V(t)``, and
its covariant derivative has transported components ``z'``.  The metric in
transported components is the constant matrix ``g(gamma(a))``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from . import _validation
from .errors import (DegenerateInitialCondition, DependentSeed, DomainError,
                     EnergyDriftError, InconsistentCharacter, NotOrthogonal,
                     OffSubmanifold, PreconditionError,
                     UnsupportedCausalCharacter)
from .geometry import Signature, Submanifold

STEPS_PER_UNIT = 2000
MIN_STEPS = 64
ENERGY_DRIFT_TOL = 1e-7
LIGHTLIKE_TOL = 1e-9


class CausalCharacter(str, Enum):
    SPACELIKE = "spacelike"
    TIMELIKE = "timelike"
    LIGHTLIKE = "lightlike"


def _classify(energy, speed2, tol=LIGHTLIKE_TOL):
    if abs(energy) < tol * speed2:
        return CausalCharacter.LIGHTLIKE
    return CausalCharacter.SPACELIKE if energy > 0 else CausalCharacter.TIMELIKE


def _hermite(y0, m0, y1, m1, theta, h):
    """Cubic Hermite interpolation; ``theta`` broadcasts against leading axes."""
    t2 = theta * theta
    t3 = t2 * theta
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + theta
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1


class Geodesic:
    """A geodesic sampled on a uniform grid.

    Attributes
    ----------
    manifold : Manifold
    interval : tuple of float
    t : ndarray, shape (N+1,)
    x, v : ndarray, shape (N+1, m)
        Positions and velocities.
    transport : ndarray, shape (N+1, m, m)
        Parallel transport of the coordinate basis at ``gamma(a)``.
    steps : int
    """

    def __init__(self, manifold, t, x, v, transport, christoffel):
        self.manifold = manifold
        self.t = t
        self.x = x
        self.v = v
        self.transport = transport
        self.steps = len(t) - 1
        self.interval = (float(t[0]), float(t[-1]))
        self.h = (self.interval[1] - self.interval[0]) / self.steps
        gv = (christoffel @ v[:, None, :, None])[..., 0]   # Gamma^l_ij v^j
        self._acc = -(gv @ v[:, :, None])[..., 0]
        self._dtransport = -(gv @ transport)
        self.metric0 = manifold.metric(x[0])
        self._cache = {}

    def __repr__(self):
        return (f"Geodesic(manifold={self.manifold.name!r}, interval={self.interval}, "
                f"steps={self.steps})")

    @property
    def a(self):
        return self.interval[0]

    @property
    def b(self):
        return self.interval[1]

    @property
    def dim(self):
        return self.manifold.dim

    def energy(self):
        """``g(gdot, gdot)`` at every sample."""
        return self.manifold.inner(self.x, self.v, self.v)

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.steps - 1)
        theta = (t - self.t[k]) / self.h
        return k, theta

    def state_at(self, t):
        """Position, velocity and transport matrix at arbitrary parameters."""
        t = np.asarray(t, dtype=float)
        k, theta = self._locate(t)
        th = theta[..., None]
        x = _hermite(self.x[k], self.v[k], self.x[k + 1], self.v[k + 1], th, self.h)
        v = _hermite(self.v[k], self._acc[k], self.v[k + 1], self._acc[k + 1], th, self.h)
        T = _hermite(self.transport[k], self._dtransport[k], self.transport[k + 1],
                     self._dtransport[k + 1], th[..., None], self.h)
        return x, v, T

    def curvature_operator(self, t):
        """Matrix of ``X -> R(gdot, X) gdot`` in transported components."""
        x, v, T = self.state_at(t)
        R = self.manifold.riemann(x)
        Kc = np.einsum("...lkij,...k,...i->...lj", R, v, v)
        return np.linalg.solve(T, Kc @ T)

    def coordinates(self, t, z):
        """Coordinate components of vectors given in transported components."""
        _, _, T = self.state_at(t)
        return np.einsum("...ij,...j->...i", T, z)

    def transported(self, t, V):
        """Transported components of vectors given in coordinate components."""
        _, _, T = self.state_at(t)
        return np.linalg.solve(T, np.asarray(V, dtype=float)[..., None])[..., 0]

    def causal_character(self):
        return causal_character(self)


def integrate_geodesic(M, p0, v0, interval, steps=None, drift_tol=ENERGY_DRIFT_TOL):
    """Integrate the geodesic equation with fixed-step classical RK4.

    The transport matrix of the coordinate basis at ``p0`` is integrated
    alongside, on the same stages.  ``steps`` defaults to 2000 per unit of
    parameter length.
    """
    m = M.dim
    p0 = _validation.check_vector(p0, m, "p0")
    v0 = _validation.check_vector(v0, m, "v0")
    a, b = _validation.check_interval(interval)
    if not np.any(v0):
        raise PreconditionError("initial velocity must be nonzero")
    if steps is None:
        steps = max(MIN_STEPS, int(np.ceil(STEPS_PER_UNIT * (b - a))))
    steps = int(steps)
    if steps < MIN_STEPS:
        raise PreconditionError(f"at least {MIN_STEPS} steps are required, got {steps}")
    M.check_domain(p0)

    h = (b - a) / steps
    t = a + h * np.arange(steps + 1)
    t[-1] = b
    xs = np.empty((steps + 1, m))
    vs = np.empty((steps + 1, m))
    Ts = np.empty((steps + 1, m, m))
    xs[0], vs[0], Ts[0] = p0, v0, np.eye(m)

    def rhs(x, v, T):
        gv = M.christoffel(x) @ v
        return v, -(gv @ v), -(gv @ T)

    x, v, T = p0.copy(), v0.copy(), np.eye(m)
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            for n in range(steps):
                k1 = rhs(x, v, T)
                k2 = rhs(x + 0.5 * h * k1[0], v + 0.5 * h * k1[1], T + 0.5 * h * k1[2])
                k3 = rhs(x + 0.5 * h * k2[0], v + 0.5 * h * k2[1], T + 0.5 * h * k2[2])
                k4 = rhs(x + h * k3[0], v + h * k3[1], T + h * k3[2])
                x = x + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
                v = v + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
                T = T + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
                xs[n + 1], vs[n + 1], Ts[n + 1] = x, v, T
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            raise DomainError(f"geodesic left the chart of {M.name} near t={t[n]:.6g}: {exc}") from exc
    M.check_domain(xs)

    geo = Geodesic(M, t, xs, vs, Ts, M.christoffel(xs))
    energy = geo.energy()
    speed2 = float(v0 @ v0)
    scale = abs(energy[0]) if abs(energy[0]) > LIGHTLIKE_TOL * speed2 else speed2
    drift = float(np.max(np.abs(energy - energy[0]))) / scale
    geo.energy_drift = drift
    if drift > drift_tol:
        raise EnergyDriftError(f"g(gdot, gdot) drifted by {drift:.3e} (relative) along the geodesic")
    if np.any(np.linalg.norm(vs, axis=1) == 0.0):
        raise PreconditionError("geodesic velocity vanishes")
    return geo


def causal_character(geo, tol=LIGHTLIKE_TOL):
    """Spacelike, timelike or lightlike according to the sign of ``g(gdot, gdot)``.

    Riemannian geodesics are always spacelike.
    """
    energy = geo.energy()
    speed2 = np.sum(geo.v * geo.v, axis=1)
    kinds = {_classify(e, s, tol) for e, s in zip(energy, speed2)}
    if len(kinds) != 1:
        raise InconsistentCharacter(
            f"causal character changes along the geodesic: {sorted(k.value for k in kinds)}")
    return kinds.pop()


@dataclass(frozen=True)
class ParallelFrame:
    """Parallel vector fields ``E_i`` along a geodesic.

    ``vectors[n, :, i]`` holds the coordinate components of ``E_i(t_n)``.
    """

    geodesic: Geodesic
    seed: np.ndarray
    vectors: np.ndarray

    def at(self, t):
        _, _, T = self.geodesic.state_at(t)
        return T @ self.seed

    def gram(self):
        g = self.geodesic.manifold.metric(self.geodesic.x)
        return np.einsum("nai,nab,nbj->nij", self.vectors, g, self.vectors)

    def covariant_residual(self):
        """Max norm of ``dE/dt + Gamma(gdot, E)`` estimated by central differences."""
        geo = self.geodesic
        E = self.vectors
        dE = (E[2:] - E[:-2]) / (2 * geo.h)
        gv = (geo.manifold.christoffel(geo.x[1:-1]) @ geo.v[1:-1, None, :, None])[..., 0]
        return float(np.max(np.abs(dE + gv @ E[1:-1])))


def parallel_frame(geo, seed):
    """Parallel-transport the column vectors ``seed`` (given at ``gamma(a)``)."""
    seed = _validation.check_matrix_stack(seed, geo.dim)
    if seed.shape[1] and np.linalg.matrix_rank(seed, tol=1e-10 * max(1.0, np.abs(seed).max())) < seed.shape[1]:
        raise DependentSeed("seed vectors are linearly dependent")
    return ParallelFrame(geo, seed.copy(), geo.transport @ seed)


# ---------------------------------------------------------------- adapted frames

@dataclass(frozen=True)
class AdaptedSeed:
    """Basis of ``T_{gamma(a)} M`` adapted to a submanifold ``P``.

    Columns ``0..k-1`` are a g-orthonormal basis of ``T P``; columns
    ``k..m-2`` complete them to a basis of ``gdot(a)^perp`` (for a lightlike
    geodesic column ``m-2`` is ``gdot(a)`` itself); column ``m-1`` is
    transversal to ``gdot(a)^perp``.
    """

    matrix: np.ndarray
    n_tangent: int
    character: CausalCharacter
    perp_gram: np.ndarray

    @property
    def perp(self):
        return self.matrix[:, :-1]

    @property
    def lightlike(self):
        return self.character is CausalCharacter.LIGHTLIKE

    @property
    def null_index(self):
        """Index of the ``gdot`` direction among the perp columns, or None."""
        return self.matrix.shape[0] - 2 if self.lightlike else None


def g_orthonormalize(B, g, tol=1e-12):
    """Return ``B U |w|^{-1/2}`` with ``B^T g B = U diag(w) U^T`` (nondegenerate)."""
    if B.shape[1] == 0:
        return B.copy(), np.zeros(0)
    gram = B.T @ g @ B
    w, U = np.linalg.eigh(0.5 * (gram + gram.T))
    if np.any(np.abs(w) <= tol * max(np.abs(w).max(), 1e-300)):
        raise DegenerateInitialCondition("metric restricted to the subspace is degenerate")
    return B @ U / np.sqrt(np.abs(w)), np.sign(w)


def adapted_seed(geo, P=None, tol=1e-8):
    """Build the adapted basis at ``gamma(a)`` for submanifold ``P`` (default: the point)."""
    M = geo.manifold
    m = M.dim
    x0, v0 = geo.x[0], geo.v[0]
    g = geo.metric0
    if P is None:
        P = Submanifold.point(M, x0)
    scale = max(1.0, np.linalg.norm(x0))
    if np.linalg.norm(P.embedding() - x0) > tol * scale:
        raise OffSubmanifold(f"gamma(a) = {x0.tolist()} does not lie on {P.name}")
    T = P.tangent_basis()
    k = P.dim
    speed = np.linalg.norm(v0)
    if k:
        coef = np.linalg.lstsq(T, v0, rcond=None)[0]
        if np.linalg.norm(v0 - T @ coef) < tol * speed:
            raise DegenerateInitialCondition(
                "initial velocity is tangent to P: every point of the geodesic is P-focal")
        products = v0 @ g @ T
        if np.any(np.abs(products) > tol * speed * np.linalg.norm(T, axis=0) * max(1.0, np.linalg.norm(g, 2))):
            raise NotOrthogonal(f"initial velocity is not normal to {P.name}: g(v0, T) = {products.tolist()}")
    energy = float(v0 @ g @ v0)
    character = _classify(energy, speed * speed)

    try:
        tangent, _ = g_orthonormalize(T, g)
    except DegenerateInitialCondition as exc:
        raise DegenerateInitialCondition(f"metric is degenerate on the tangent space of {P.name}") from exc
    normal_space = scipy.linalg.null_space(np.column_stack([T, v0]).T @ g)
    if character is CausalCharacter.LIGHTLIKE:
        gram = normal_space.T @ g @ normal_space
        w, U = np.linalg.eigh(0.5 * (gram + gram.T))
        keep = w > 1e-10 * max(np.abs(w).max(), 1e-300)
        normal = normal_space @ U[:, keep] / np.sqrt(w[keep])
        normal = np.column_stack([normal, v0])
        perp = np.column_stack([tangent, normal])
        # transversal: largest g-pairing with gdot, then made orthogonal to the spacelike columns
        pairing = g @ v0
        n = np.zeros(m)
        n[int(np.argmax(np.abs(pairing)))] = 1.0
        space = perp[:, :-1]
        n = n - space @ (space.T @ g @ n)
        complement = n
    else:
        normal, _ = g_orthonormalize(normal_space, g)
        perp = np.column_stack([tangent, normal])
        complement = v0 / np.sqrt(abs(energy))
    if perp.shape[1] != m - 1:
        raise DegenerateInitialCondition(
            f"could not build a basis of gdot(a)^perp adapted to {P.name}")
    matrix = np.column_stack([perp, complement])
    if np.linalg.matrix_rank(matrix) < m:
        raise DegenerateInitialCondition("adapted basis is rank deficient")
    perp_gram = perp.T @ g @ perp
    perp_gram[np.abs(perp_gram) < 1e-12] = 0.0
    return AdaptedSeed(matrix, k, character, perp_gram)


def require_index_setting(geo, P=None):
    """Check the hypotheses of the index theorems and return the adapted seed."""
    character = causal_character(geo)
    if geo.manifold.signature is Signature.LORENTZIAN and character is CausalCharacter.SPACELIKE:
        raise UnsupportedCausalCharacter(
            "index computations need a Riemannian or causal Lorentzian geodesic; "
            "conjugate points may accumulate along spacelike Lorentzian geodesics")
    return adapted_seed(geo, P)
