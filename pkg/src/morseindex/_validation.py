"""Input validation helpers shared by the functional API and the estimators."""

import numpy as np
from sklearn.utils import check_array

from .errors import ConfigError


def check_vector(x, dim=None, name="vector"):
    """Return ``x`` as a finite 1-D float array, optionally of length ``dim``."""
    arr = check_array(np.atleast_1d(np.asarray(x, dtype=float)), ensure_2d=False,
                      ensure_min_samples=0 if dim == 0 else 1)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ConfigError(f"{name} must have length {dim}, got {arr.shape[0]}")
    return arr


def check_interval(interval):
    a, b = (float(v) for v in check_vector(interval, 2, "interval"))
    if not b > a:
        raise ConfigError(f"interval must satisfy a < b, got [{a}, {b}]")
    return a, b


def check_parameters(t, lo, hi, name="parameters", closed_left=False):
    """Validate a 1-D array of curve parameters lying in ``]lo, hi]``."""
    arr = check_array(np.atleast_1d(np.asarray(t, dtype=float)), ensure_2d=False)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be one-dimensional")
    slack = 1e-12 * max(1.0, abs(hi - lo))
    low_ok = arr >= lo - slack if closed_left else arr > lo
    if not np.all(low_ok & (arr <= hi + slack)):
        bracket = "[" if closed_left else "]"
        raise ConfigError(f"{name} must lie in {bracket}{lo}, {hi}]")
    return np.clip(arr, lo, hi)


def check_matrix_stack(seed, dim, name="seed"):
    """Return column vectors as an ``(dim, n)`` array."""
    arr = np.asarray(seed, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != dim:
        raise ConfigError(f"{name} must be a ({dim}, n) array of column vectors")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite values")
    return arr
