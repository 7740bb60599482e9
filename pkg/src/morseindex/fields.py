"""Piecewise smooth vector fields along a geodesic."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridMismatch


@dataclass(frozen=True)
class Segment:
    """Samples of a field on one smooth piece, in transported components."""

    t: np.ndarray
    z: np.ndarray
    dz: np.ndarray


def segment_times(geo, lo, hi):
    """Uniform sample times on ``[lo, hi]`` with an odd count and spacing <= the geodesic step."""
    n = 2 * max(1, int(np.ceil((hi - lo) / (2 * geo.h) - 1e-9))) + 1
    t = np.linspace(lo, hi, n)
    t[0], t[-1] = lo, hi
    return t


def _breakpoints(geo, breakpoints):
    if breakpoints is None:
        return np.array([geo.a, geo.b])
    bp = np.unique(np.concatenate([[geo.a, geo.b], np.asarray(breakpoints, dtype=float)]))
    bp = bp[(bp >= geo.a) & (bp <= geo.b)]
    keep = np.concatenate([[True], np.diff(bp) > 1e-12 * (geo.b - geo.a)])
    return bp[keep]


class PiecewiseField:
    """A continuous vector field along ``geodesic``, smooth between breakpoints.

    Values ``z`` and covariant derivatives ``dz`` are stored in transported
    components (see :mod:`morseindex.geodesics`).  The derivative may jump at
    breakpoints; the field itself may not.
    """

    def __init__(self, geodesic, segments, continuity_tol=1e-10):
        if not segments:
            raise ConfigError("a piecewise field needs at least one segment")
        self.geodesic = geodesic
        self.segments = tuple(segments)
        for left, right in zip(self.segments[:-1], self.segments[1:]):
            if abs(left.t[-1] - right.t[0]) > 1e-12 * max(1.0, abs(right.t[0])):
                raise ConfigError("segments must be contiguous")
            jump = np.linalg.norm(left.z[-1] - right.z[0])
            if jump > continuity_tol * max(1.0, np.linalg.norm(right.z[0])):
                raise ConfigError(f"field is discontinuous at t={right.t[0]:.6g} (jump {jump:.3e})")

    def __repr__(self):
        return f"PiecewiseField(segments={len(self.segments)}, span=[{self.start_time}, {self.end_time}])"

    @classmethod
    def from_function(cls, geo, func, breakpoints=None):
        """Sample ``func(t) -> (z, dz)`` (transported components) piece by piece.

        ``func`` receives the sample times of one piece at a time, so it may
        use one-sided formulas for its derivative.
        """
        bp = _breakpoints(geo, breakpoints)
        segs = []
        for lo, hi in zip(bp[:-1], bp[1:]):
            t = segment_times(geo, lo, hi)
            z, dz = func(t)
            segs.append(Segment(t, np.asarray(z, dtype=float), np.asarray(dz, dtype=float)))
        return cls(geo, segs)

    @classmethod
    def from_frame(cls, geo, seed, coefficients, breakpoints=None):
        """Field ``sum_i c_i(t) E_i(t)`` for parallel fields ``E_i`` seeded by the columns of ``seed``.

        ``coefficients(t) -> (c, dc)`` with shapes ``(n, r)``.
        """
        seed = np.asarray(seed, dtype=float).reshape(geo.dim, -1)

        def func(t):
            c, dc = coefficients(t)
            return np.asarray(c) @ seed.T, np.asarray(dc) @ seed.T

        return cls.from_function(geo, func, breakpoints)

    @property
    def breakpoints(self):
        return np.array([s.t[0] for s in self.segments] + [self.segments[-1].t[-1]])

    @property
    def start_time(self):
        return float(self.segments[0].t[0])

    @property
    def end_time(self):
        return float(self.segments[-1].t[-1])

    @property
    def start(self):
        """Transported components at the first sample."""
        return self.segments[0].z[0]

    @property
    def end(self):
        return self.segments[-1].z[-1]

    def coordinates_at_start(self):
        return self.geodesic.coordinates(self.start_time, self.start)

    def coordinates_at_end(self):
        return self.geodesic.coordinates(self.end_time, self.end)

    def samples(self):
        """Concatenated ``(t, z, dz)`` over all segments (breakpoints appear twice)."""
        return (np.concatenate([s.t for s in self.segments]),
                np.concatenate([s.z for s in self.segments]),
                np.concatenate([s.dz for s in self.segments]))

    def same_grid(self, other):
        if other.geodesic is not self.geodesic or len(other.segments) != len(self.segments):
            return False
        return all(a.t.shape == b.t.shape and np.allclose(a.t, b.t, rtol=0, atol=1e-12)
                   for a, b in zip(self.segments, other.segments))

    def _check_grid(self, other):
        if not self.same_grid(other):
            raise GridMismatch("fields are sampled on different grids")

    def __add__(self, other):
        self._check_grid(other)
        return PiecewiseField(self.geodesic, [Segment(a.t, a.z + b.z, a.dz + b.dz)
                                              for a, b in zip(self.segments, other.segments)])

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rmul__(self, c):
        c = float(c)
        return PiecewiseField(self.geodesic, [Segment(s.t, c * s.z, c * s.dz) for s in self.segments])

    def max_norm(self):
        return float(max(np.abs(s.z).max() for s in self.segments))

    def restrict_grid_to(self, other):
        """Raise GridMismatch unless ``other`` shares this field's sampling."""
        self._check_grid(other)
