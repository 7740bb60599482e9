"""Chart-based semi-Riemannian manifolds and embedded submanifolds.

All point-valued callables are vectorised over leading axes: a metric maps
points of shape ``(..., m)`` to matrices of shape ``(..., m, m)``.

Index conventions (coordinate components)::

    dg[..., k, i, j]        = d_k g_ij
    gamma[..., l, i, j]     = Gamma^l_ij
    riemann[..., l, k, i, j] = R^l_kij,   R(d_i, d_j) d_k = R^l_kij d_l

with ``R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X,Y]``.  Under
this convention the Jacobi equation reads ``J'' - R(gdot, J) gdot = 0`` and
the unit sphere has ``R(X, Y) X = -Y`` for orthonormal ``X, Y``.
"""

from dataclasses import dataclass
from enum import Enum
import numpy as np

from .errors import (ConfigError, DegenerateTangentMetric, DomainError,
                     NotNormal, NotTangent, SignatureMismatch)

# 4th-order central difference weights for offsets (+2h, +h, -h, -2h)
_FD_OFFSETS = np.array([2.0, 1.0, -1.0, -2.0])
_FD_WEIGHTS = np.array([-1.0, 8.0, -8.0, 1.0]) / 12.0
# second derivative, offsets (+2h, +h, 0, -h, -2h)
_FD2_OFFSETS = np.array([2.0, 1.0, 0.0, -1.0, -2.0])
_FD2_WEIGHTS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0

METRIC_FD_STEP = 1e-5
CHRISTOFFEL_FD_STEP = 1e-3
EMBEDDING_FD_STEP = 1e-5
EMBEDDING_FD2_STEP = 1e-3


class Signature(str, Enum):
    RIEMANNIAN = "riemannian"
    LORENTZIAN = "lorentzian"


def _step(x, base):
    return base * np.maximum(1.0, np.linalg.norm(x, axis=-1))


def central_difference(func, x, base_step):
    """Gradient of ``func`` at ``x`` along every coordinate direction.

    ``func`` maps ``(..., m)`` to ``(..., *shape)``; the result has shape
    ``(..., m, *shape)`` with the derivative direction first.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[-1]
    h = _step(x, base_step)
    eye = np.eye(m)
    # stencil points: (..., m, 4, m)
    shifts = _FD_OFFSETS[None, :, None] * eye[:, None, :]
    pts = x[..., None, None, :] + h[..., None, None, None] * shifts
    vals = np.asarray(func(pts))
    extra = vals.ndim - (x.ndim - 1) - 2
    w = _FD_WEIGHTS.reshape((4,) + (1,) * extra)
    deriv = np.sum(w * vals, axis=x.ndim)
    return deriv / h.reshape(h.shape + (1,) * (extra + 1))


class Manifold:
    """A semi-Riemannian manifold given on a single coordinate chart.

    Parameters
    ----------
    dim : int
        Dimension ``m``.
    metric : callable
        Maps points ``(..., m)`` to symmetric matrices ``(..., m, m)``.
    signature : Signature
        Riemannian (all eigenvalues positive) or Lorentzian (exactly one
        negative eigenvalue).
    metric_derivatives : callable, optional
        Maps points to ``d_k g_ij`` with shape ``(..., m, m, m)``.  When
        omitted, 4th-order central differences with step
        ``1e-5 * max(1, |x|)`` are used.
    domain : callable, optional
        Maps points ``(..., m)`` to a boolean array, True inside the chart.
    name : str
    """

    def __init__(self, dim, metric, signature=Signature.RIEMANNIAN,
                 metric_derivatives=None, domain=None, name="custom"):
        if int(dim) < 1:
            raise ConfigError("manifold dimension must be positive")
        self.dim = int(dim)
        self.signature = Signature(signature)
        self._metric = metric
        self._metric_derivatives = metric_derivatives
        self._domain = domain
        self.name = name

    def __repr__(self):
        return f"Manifold(name={self.name!r}, dim={self.dim}, signature={self.signature.value})"

    @property
    def analytic_derivatives(self):
        return self._metric_derivatives is not None

    def in_domain(self, x):
        x = np.asarray(x, dtype=float)
        if self._domain is None:
            return np.ones(x.shape[:-1], dtype=bool)
        return np.broadcast_to(np.asarray(self._domain(x), dtype=bool), x.shape[:-1])

    def check_domain(self, x):
        inside = self.in_domain(x)
        if not np.all(inside):
            bad = np.asarray(x)[~inside]
            raise DomainError(f"point {bad.reshape(-1, self.dim)[0].tolist()} lies outside the chart of {self.name}")

    def metric(self, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(self._metric(x), dtype=float)

    def metric_derivatives(self, x):
        x = np.asarray(x, dtype=float)
        if self._metric_derivatives is not None:
            return np.asarray(self._metric_derivatives(x), dtype=float)
        if self._domain is not None:
            h = _step(x, METRIC_FD_STEP)
            for d in range(self.dim):
                for s in (-2.0, 2.0):
                    self.check_domain(x + s * h[..., None] * np.eye(self.dim)[d])
        return central_difference(self.metric, x, METRIC_FD_STEP)

    def christoffel(self, x):
        """Christoffel symbols ``Gamma^l_ij`` of the Levi-Civita connection."""
        x = np.asarray(x, dtype=float)
        g = self.metric(x)
        dg = self.metric_derivatives(x)
        ginv = np.linalg.inv(g)
        # lower-index symbols Gamma_kij = (d_i g_jk + d_j g_ik - d_k g_ij) / 2
        low = 0.5 * (np.einsum("...ijk->...kij", dg)
                     + np.einsum("...jik->...kij", dg)
                     - dg)
        return np.einsum("...lk,...kij->...lij", ginv, low)

    def christoffel_derivatives(self, x):
        """``d_p Gamma^l_ij`` with shape ``(..., p, l, i, j)``."""
        x = np.asarray(x, dtype=float)
        return central_difference(self.christoffel, x, CHRISTOFFEL_FD_STEP)

    def riemann(self, x):
        """Riemann tensor ``R^l_kij``; see the module docstring."""
        x = np.asarray(x, dtype=float)
        gam = self.christoffel(x)
        dgam = self.christoffel_derivatives(x)
        r = (np.einsum("...iljk->...lkij", dgam)
             - np.einsum("...jlik->...lkij", dgam)
             + np.einsum("...lip,...pjk->...lkij", gam, gam)
             - np.einsum("...ljp,...pik->...lkij", gam, gam))
        return r

    def inner(self, x, u, v):
        return np.einsum("...i,...ij,...j->...", u, self.metric(x), v)


def _check_point(M, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (M.dim,):
        raise ConfigError(f"point must have shape ({M.dim},), got {x.shape}")
    M.check_domain(x)
    return x


def _check_signature(M, g):
    eig = np.linalg.eigvalsh(g)
    scale = max(np.max(np.abs(eig)), 1e-300)
    if np.any(np.abs(eig) < 1e-14 * scale):
        raise SignatureMismatch(f"metric of {M.name} is degenerate: eigenvalues {eig.tolist()}")
    n_neg = int(np.sum(eig < 0))
    expected = 0 if M.signature is Signature.RIEMANNIAN else 1
    if n_neg != expected:
        raise SignatureMismatch(
            f"metric of {M.name} has {n_neg} negative eigenvalues; "
            f"{M.signature.value} signature requires {expected}")


def metric_at(M, x):
    """Evaluate and validate the metric matrix at a single point."""
    x = _check_point(M, x)
    g = M.metric(x)
    scale = max(np.max(np.abs(g)), 1e-300)
    if np.max(np.abs(g - g.T)) > 1e-12 * scale:
        raise SignatureMismatch(f"metric of {M.name} is not symmetric at {x.tolist()}")
    _check_signature(M, g)
    return 0.5 * (g + g.T)


def christoffel_at(M, x):
    """Christoffel symbols ``Gamma[k, i, j] = Gamma^k_ij`` at a point."""
    x = _check_point(M, x)
    return M.christoffel(x)


@dataclass(frozen=True)
class CurvatureQuery:
    point: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray


def riemann_apply(M, q):
    """Return ``R(X, Y) Z`` at ``q.point``."""
    x = _check_point(M, q.point)
    vecs = [np.asarray(v, dtype=float) for v in (q.X, q.Y, q.Z)]
    if any(v.shape != (M.dim,) for v in vecs):
        raise ConfigError("curvature query vectors must match the manifold dimension")
    X, Y, Z = vecs
    return np.einsum("lkij,k,i,j->l", M.riemann(x), Z, X, Y)


# ---------------------------------------------------------------- built-ins

def euclidean(n):
    """Flat ``R^n`` with the identity metric."""
    def metric(x):
        return np.broadcast_to(np.eye(n), np.shape(x)[:-1] + (n, n)).copy()

    def dmetric(x):
        return np.zeros(np.shape(x)[:-1] + (n, n, n))

    return Manifold(n, metric, Signature.RIEMANNIAN, dmetric, name=f"euclidean{n}")


def minkowski(n):
    """Flat Lorentzian ``R^n``; the last coordinate is time, ``g = diag(1, ..., 1, -1)``."""
    if n < 2:
        raise ConfigError("Minkowski space needs dimension >= 2")
    eta = np.diag([1.0] * (n - 1) + [-1.0])

    def metric(x):
        return np.broadcast_to(eta, np.shape(x)[:-1] + (n, n)).copy()

    def dmetric(x):
        return np.zeros(np.shape(x)[:-1] + (n, n, n))

    return Manifold(n, metric, Signature.LORENTZIAN, dmetric, name=f"minkowski{n}")


def sphere(n, radius=1.0):
    """Round sphere ``S^n`` in hyperspherical coordinates.

    Coordinates ``(chi_1, ..., chi_{n-1}, phi)`` with metric
    ``r^2 diag(1, sin^2 chi_1, sin^2 chi_1 sin^2 chi_2, ...)``.  The chart
    requires ``0 < chi_i < pi``; ``phi`` is unrestricted.
    """
    if n < 1:
        raise ConfigError("sphere dimension must be positive")
    r2 = float(radius) ** 2

    def diag(x):
        s2 = np.sin(x[..., :-1]) ** 2
        ones = np.ones(x.shape[:-1] + (1,))
        return r2 * np.concatenate([ones, np.cumprod(s2, axis=-1)], axis=-1)

    def metric(x):
        x = np.asarray(x, dtype=float)
        d = diag(x)
        return d[..., :, None] * np.eye(n)

    def dmetric(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (n, n, n))
        s = np.sin(x[..., :-1])
        c = np.cos(x[..., :-1])
        for j in range(1, n):
            for k in range(j):
                prod = r2 * 2.0 * s[..., k] * c[..., k]
                for i in range(j):
                    if i != k:
                        prod = prod * s[..., i] ** 2
                out[..., k, j, j] = prod
        return out

    def domain(x):
        chis = np.asarray(x)[..., :-1]
        return np.all((chis > 0.0) & (chis < np.pi), axis=-1)

    return Manifold(n, metric, Signature.RIEMANNIAN, dmetric, domain, name=f"sphere{n}")


BUILTIN_MANIFOLDS = {"euclidean": euclidean, "minkowski": minkowski, "sphere": sphere}


# ------------------------------------------------------------- submanifolds

class Submanifold:
    """An embedded submanifold ``P`` given by an explicit parametrisation.

    Parameters
    ----------
    ambient : Manifold
    dim : int
        Dimension ``k`` with ``0 <= k < m``.
    embedding : callable
        Maps a parameter ``u`` of shape ``(k,)`` to a point of shape ``(m,)``.
    anchor : array_like
        Parameter value of the point where the geodesic meets ``P``.
    tangent_basis : callable, optional
        ``u -> (m, k)`` matrix of partial derivatives of the embedding.
    hessian : callable, optional
        ``u -> (k, k, m)`` second partial derivatives of the embedding.
    """

    def __init__(self, ambient, dim, embedding, anchor=None, tangent_basis=None,
                 hessian=None, name="submanifold"):
        dim = int(dim)
        if not 0 <= dim < ambient.dim:
            raise ConfigError(f"submanifold dimension must be in [0, {ambient.dim}), got {dim}")
        self.ambient = ambient
        self.dim = dim
        self._embedding = embedding
        self._tangent_basis = tangent_basis
        self._hessian = hessian
        self.anchor = np.zeros(dim) if anchor is None else np.asarray(anchor, dtype=float).reshape(dim)
        self.name = name

    def __repr__(self):
        return f"Submanifold(name={self.name!r}, dim={self.dim}, ambient={self.ambient.name!r})"

    @classmethod
    def point(cls, ambient, x, name="point"):
        x = np.array(x, dtype=float).reshape(ambient.dim)
        return cls(ambient, 0, lambda u: x.copy(),
                   tangent_basis=lambda u: np.zeros((ambient.dim, 0)),
                   hessian=lambda u: np.zeros((0, 0, ambient.dim)), name=name)

    @classmethod
    def affine(cls, ambient, origin, directions, name="affine"):
        """The affine subspace ``origin + span(directions)`` (directions as columns)."""
        origin = np.array(origin, dtype=float).reshape(ambient.dim)
        D = np.array(directions, dtype=float).reshape(ambient.dim, -1)
        k = D.shape[1]
        return cls(ambient, k, lambda u: origin + D @ np.asarray(u, dtype=float),
                   tangent_basis=lambda u: D.copy(),
                   hessian=lambda u: np.zeros((k, k, ambient.dim)), name=name)

    @classmethod
    def circle(cls, ambient, center, radius, anchor_angle=0.0, name="circle"):
        """Circle ``center + radius (cos u, sin u)`` in a 2-dimensional chart."""
        if ambient.dim != 2:
            raise ConfigError("circle submanifolds need a 2-dimensional ambient chart")
        c = np.array(center, dtype=float).reshape(2)
        rho = float(radius)

        def emb(u):
            u = float(np.asarray(u).reshape(-1)[0])
            return c + rho * np.array([np.cos(u), np.sin(u)])

        def tan(u):
            u = float(np.asarray(u).reshape(-1)[0])
            return rho * np.array([[-np.sin(u)], [np.cos(u)]])

        def hess(u):
            u = float(np.asarray(u).reshape(-1)[0])
            return -rho * np.array([np.cos(u), np.sin(u)]).reshape(1, 1, 2)

        return cls(ambient, 1, emb, anchor=[anchor_angle], tangent_basis=tan,
                   hessian=hess, name=name)

    def embedding(self, u=None):
        u = self.anchor if u is None else np.asarray(u, dtype=float).reshape(self.dim)
        return np.asarray(self._embedding(u), dtype=float).reshape(self.ambient.dim)

    def tangent_basis(self, u=None):
        u = self.anchor if u is None else np.asarray(u, dtype=float).reshape(self.dim)
        m, k = self.ambient.dim, self.dim
        if k == 0:
            return np.zeros((m, 0))
        if self._tangent_basis is not None:
            return np.asarray(self._tangent_basis(u), dtype=float).reshape(m, k)
        h = EMBEDDING_FD_STEP * max(1.0, float(np.linalg.norm(u)))
        cols = []
        for a in range(k):
            e = np.zeros(k)
            e[a] = h
            vals = [self.embedding(u + s * e) for s in _FD_OFFSETS]
            cols.append(np.tensordot(_FD_WEIGHTS, vals, axes=1) / h)
        return np.stack(cols, axis=1)

    def hessian(self, u=None):
        """Second derivatives ``d_a d_b embedding`` with shape ``(k, k, m)``."""
        u = self.anchor if u is None else np.asarray(u, dtype=float).reshape(self.dim)
        m, k = self.ambient.dim, self.dim
        if k == 0:
            return np.zeros((0, 0, m))
        if self._hessian is not None:
            return np.asarray(self._hessian(u), dtype=float).reshape(k, k, m)
        h = EMBEDDING_FD2_STEP * max(1.0, float(np.linalg.norm(u)))
        out = np.zeros((k, k, m))
        for a in range(k):
            ea = np.zeros(k)
            ea[a] = h
            vals = [self.embedding(u + s * ea) for s in _FD2_OFFSETS]
            out[a, a] = np.tensordot(_FD2_WEIGHTS, vals, axes=1) / h**2
            for b in range(a + 1, k):
                eb = np.zeros(k)
                eb[b] = h
                # mixed partials from the tangent basis, 4th order
                vals = [self.tangent_basis(u + s * eb)[:, a] for s in _FD_OFFSETS]
                mixed = np.tensordot(_FD_WEIGHTS, vals, axes=1) / h
                out[a, b] = out[b, a] = mixed
        return out

    def gram(self, u=None):
        T = self.tangent_basis(u)
        g = self.ambient.metric(self.embedding(u))
        return T.T @ g @ T

    def tangent_coefficients(self, v, u=None, tol=1e-8):
        """Coefficients ``alpha`` with ``v = T alpha``; raises NotTangent otherwise."""
        T = self.tangent_basis(u)
        v = np.asarray(v, dtype=float).reshape(self.ambient.dim)
        if self.dim == 0:
            alpha = np.zeros(0)
        else:
            alpha = np.linalg.lstsq(T, v, rcond=None)[0]
        resid = np.linalg.norm(v - T @ alpha)
        if resid > tol * max(1.0, np.linalg.norm(v)):
            raise NotTangent(f"vector {v.tolist()} is not tangent to {self.name} (residual {resid:.3e})")
        return alpha

    def check_normal(self, n, u=None, tol=1e-8):
        T = self.tangent_basis(u)
        n = np.asarray(n, dtype=float).reshape(self.ambient.dim)
        g = self.ambient.metric(self.embedding(u))
        products = n @ g @ T
        scale = np.linalg.norm(n) * np.linalg.norm(T, axis=0) * max(np.linalg.norm(g, 2), 1.0)
        if np.any(np.abs(products) > tol * np.maximum(scale, 1e-300)):
            raise NotNormal(f"vector {n.tolist()} is not normal to {self.name}: g(n, T) = {products.tolist()}")
        return n


def second_fundamental_form(S, u, n, v1, v2):
    """``S_n(v1, v2) = g(n, nabla_{v1} V2)`` for tangent ``v1, v2`` and normal ``n``."""
    u = S.anchor if u is None else u
    n = S.check_normal(n, u)
    a1 = S.tangent_coefficients(v1, u)
    a2 = S.tangent_coefficients(v2, u)
    if S.dim == 0:
        return 0.0
    x = S.embedding(u)
    T = S.tangent_basis(u)
    H = S.hessian(u)
    gam = S.ambient.christoffel(x)
    # covariant second derivative of the embedding, (k, k, m)
    cov = H + np.einsum("lij,ia,jb->abl", gam, T, T)
    g = S.ambient.metric(x)
    form = np.einsum("l,lp,abp->ab", n, g, cov)
    form = 0.5 * (form + form.T)
    return float(a1 @ form @ a2)


def second_fundamental_matrix(S, u, n):
    """Matrix of ``S_n`` in the parameter basis ``d_a embedding``."""
    u = S.anchor if u is None else u
    S.check_normal(n, u)
    k = S.dim
    if k == 0:
        return np.zeros((0, 0))
    x = S.embedding(u)
    T = S.tangent_basis(u)
    cov = S.hessian(u) + np.einsum("lij,ia,jb->abl", S.ambient.christoffel(x), T, T)
    form = np.einsum("l,lp,abp->ab", np.asarray(n, dtype=float), S.ambient.metric(x), cov)
    return 0.5 * (form + form.T)


def shape_operator(S, u, n):
    """Matrix ``A`` (parameter basis) with ``g(A v1, v2) = S_n(v1, v2)``."""
    u = S.anchor if u is None else u
    form = second_fundamental_matrix(S, u, n)
    if S.dim == 0:
        return form
    gram = S.gram(u)
    if np.linalg.cond(gram) > 1e12:
        raise DegenerateTangentMetric(
            f"metric restricted to the tangent space of {S.name} is degenerate")
    # g(A e_a, e_b) = sum_c A_ca gram_cb = form_ab  ->  A = gram^{-1} form
    return np.linalg.solve(gram, form)
