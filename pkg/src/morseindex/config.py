"""JSON run configuration: validation, normalization and construction of the objects it describes.

A configuration is a JSON object with the keys ``manifold``, ``geodesic``
and optionally ``P``, ``Q``, ``tolerances``, ``oracle`` and ``name``.
Numbers may be written as expression strings without variables
(``"pi/2"``).  See the README for the full schema.
"""

import json
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry
from .errors import ConfigError
from .expr import (RESERVED, compile_expression, constant_value, names,
                   parse_expression)

DEFAULT_TOLERANCES = {"rank": 1e-8, "inertia": 1e-8, "energy_drift": 1e-7}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z_0-9]*\Z")
_TOP_KEYS = {"name", "manifold", "geodesic", "P", "Q", "tolerances", "oracle"}


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _check_keys(mapping, allowed, where):
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(mapping) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _numbers(values, length, where):
    if not isinstance(values, list) or (length is not None and len(values) != length):
        size = "a list" if length is None else f"a list of {length} entries"
        raise ConfigError(f"{where} must be {size}")
    return [constant_value(v, where) for v in values]


def _positive_int(value, where, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{where} must be an integer >= {minimum}")
    return value


def _expression(src, variables, where):
    node = parse_expression(src) if isinstance(src, str) else None
    if node is None:
        raise ConfigError(f"{where} must be an expression string")
    unknown = names(node) - set(variables) - set(RESERVED)
    if unknown:
        raise ConfigError(f"{where}: unknown names {sorted(unknown)} (variables: {list(variables)})")
    return node


def _identifiers(values, where):
    if not isinstance(values, list) or not all(isinstance(v, str) for v in values):
        raise ConfigError(f"{where} must be a list of names")
    for v in values:
        if not _IDENT.match(v) or v in RESERVED:
            raise ConfigError(f"{where}: {v!r} is not a usable variable name")
    if len(set(values)) != len(values):
        raise ConfigError(f"{where}: names must be distinct")
    return list(values)


# ---------------------------------------------------------------- manifolds

def _normalize_manifold(section):
    where = "manifold"
    if not isinstance(section, dict):
        raise ConfigError("manifold must be a JSON object")
    if "builtin" in section:
        _check_keys(section, {"builtin", "dim", "radius"}, where)
        kind = section["builtin"]
        if kind not in geometry.BUILTIN_MANIFOLDS:
            raise ConfigError(f"unknown builtin manifold {kind!r}; choose from {sorted(geometry.BUILTIN_MANIFOLDS)}")
        out = {"builtin": kind, "dim": _positive_int(_require(section, "dim", where), "manifold.dim")}
        if kind == "sphere":
            radius = constant_value(section.get("radius", 1.0), "manifold.radius")
            if radius <= 0:
                raise ConfigError("manifold.radius must be positive")
            out["radius"] = radius
        elif "radius" in section:
            raise ConfigError(f"manifold.radius only applies to spheres, not {kind}")
        return out
    _check_keys(section, {"metric", "coordinates", "signature", "domain"}, where)
    rows = _require(section, "metric", where)
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) and len(r) == len(rows) for r in rows):
        raise ConfigError("manifold.metric must be a square array of expression strings")
    m = len(rows)
    coords = _identifiers(section.get("coordinates", [f"x{i}" for i in range(m)]), "manifold.coordinates")
    if len(coords) != m:
        raise ConfigError(f"manifold.coordinates must name {m} coordinates")
    nodes = [[_expression(e, coords, f"manifold.metric[{i}][{j}]") for j, e in enumerate(r)]
             for i, r in enumerate(rows)]
    for i in range(m):
        for j in range(i):
            if nodes[i][j] != nodes[j][i]:
                raise ConfigError(f"manifold.metric is not symmetric at ({i}, {j})")
    signature = section.get("signature", "riemannian")
    if signature not in ("riemannian", "lorentzian"):
        raise ConfigError("manifold.signature must be 'riemannian' or 'lorentzian'")
    domain = section.get("domain", [])
    if not isinstance(domain, list):
        raise ConfigError("manifold.domain must be a list of expressions that are positive inside the chart")
    for k, e in enumerate(domain):
        _expression(e, coords, f"manifold.domain[{k}]")
    return {"metric": [list(r) for r in rows], "coordinates": coords,
            "signature": signature, "domain": list(domain)}


def _manifold_dim(section):
    return section["dim"] if "builtin" in section else len(section["metric"])


def build_manifold(section):
    if "builtin" in section:
        maker = geometry.BUILTIN_MANIFOLDS[section["builtin"]]
        return maker(section["dim"], section["radius"]) if section["builtin"] == "sphere" else maker(section["dim"])
    coords = section["coordinates"]
    m = len(coords)
    entries = [[compile_expression(parse_expression(e), coords) for e in row] for row in section["metric"]]
    domain = [compile_expression(parse_expression(e), coords) for e in section["domain"]]

    def env_of(x):
        return {c: x[..., i] for i, c in enumerate(coords)}

    def metric(x):
        x = np.asarray(x, dtype=float)
        env = env_of(x)
        out = np.empty(x.shape[:-1] + (m, m))
        for i in range(m):
            for j in range(i, m):
                out[..., i, j] = out[..., j, i] = np.broadcast_to(entries[i][j](env), x.shape[:-1])
        return out

    def inside(x):
        x = np.asarray(x, dtype=float)
        env = env_of(x)
        ok = np.ones(x.shape[:-1], dtype=bool)
        with np.errstate(invalid="ignore"):
            for f in domain:
                ok &= np.broadcast_to(f(env) > 0, x.shape[:-1])
        return ok

    return geometry.Manifold(m, metric, section["signature"], domain=inside if domain else None,
                             name="custom")


# ---------------------------------------------------------------- submanifolds

def _normalize_submanifold(section, m, where):
    if section is None:
        return None
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a JSON object or null")
    kind = section.get("type", "point")
    if kind == "point":
        _check_keys(section, {"type", "coordinates"}, where)
        out = {"type": "point"}
        if section.get("coordinates") is not None:
            out["coordinates"] = _numbers(section["coordinates"], m, f"{where}.coordinates")
        return out
    if kind == "affine":
        _check_keys(section, {"type", "origin", "directions"}, where)
        dirs = _require(section, "directions", where)
        if not isinstance(dirs, list) or not dirs or len(dirs) >= m:
            raise ConfigError(f"{where}.directions must list between 1 and {m - 1} vectors")
        return {"type": "affine", "origin": _numbers(_require(section, "origin", where), m, f"{where}.origin"),
                "directions": [_numbers(d, m, f"{where}.directions[{i}]") for i, d in enumerate(dirs)]}
    if kind == "circle":
        _check_keys(section, {"type", "center", "radius", "anchor"}, where)
        if m != 2:
            raise ConfigError(f"{where}: circles need a 2-dimensional manifold")
        radius = constant_value(_require(section, "radius", where), f"{where}.radius")
        if radius <= 0:
            raise ConfigError(f"{where}.radius must be positive")
        return {"type": "circle", "center": _numbers(_require(section, "center", where), 2, f"{where}.center"),
                "radius": radius, "anchor": constant_value(section.get("anchor", 0.0), f"{where}.anchor")}
    if kind == "embedding":
        _check_keys(section, {"type", "parameters", "embedding", "anchor"}, where)
        params = _identifiers(_require(section, "parameters", where), f"{where}.parameters")
        if not 1 <= len(params) < m:
            raise ConfigError(f"{where}.parameters must name between 1 and {m - 1} parameters")
        emb = _require(section, "embedding", where)
        if not isinstance(emb, list) or len(emb) != m:
            raise ConfigError(f"{where}.embedding must list {m} expression strings")
        for i, e in enumerate(emb):
            _expression(e, params, f"{where}.embedding[{i}]")
        return {"type": "embedding", "parameters": params, "embedding": list(emb),
                "anchor": _numbers(_require(section, "anchor", where), len(params), f"{where}.anchor")}
    raise ConfigError(f"{where}.type must be one of point, affine, circle, embedding")


def build_submanifold(section, manifold, default_point, label):
    if section is None:
        return None
    kind = section["type"]
    if kind == "point":
        return geometry.Submanifold.point(manifold, section.get("coordinates", default_point), name=label)
    if kind == "affine":
        return geometry.Submanifold.affine(manifold, section["origin"], np.array(section["directions"]).T, name=label)
    if kind == "circle":
        return geometry.Submanifold.circle(manifold, section["center"], section["radius"], section["anchor"], name=label)
    params = section["parameters"]
    funcs = [compile_expression(parse_expression(e), params) for e in section["embedding"]]

    def embedding(u):
        env = {p: float(u[i]) for i, p in enumerate(params)}
        return np.array([float(f(env)) for f in funcs])

    return geometry.Submanifold(manifold, len(params), embedding, section["anchor"], name=label)


# ---------------------------------------------------------------- configuration

def _normalize_geodesic(section, m):
    _check_keys(section, {"p0", "v0", "interval", "steps"}, "geodesic")
    out = {"p0": _numbers(_require(section, "p0", "geodesic"), m, "geodesic.p0"),
           "v0": _numbers(_require(section, "v0", "geodesic"), m, "geodesic.v0"),
           "interval": _numbers(_require(section, "interval", "geodesic"), 2, "geodesic.interval"),
           "steps": None}
    a, b = out["interval"]
    if not b > a:
        raise ConfigError("geodesic.interval must satisfy a < b")
    if not any(out["v0"]):
        raise ConfigError("geodesic.v0 must be nonzero")
    if section.get("steps") is not None:
        out["steps"] = _positive_int(section["steps"], "geodesic.steps", 64)
    return out


def _normalize_tolerances(section):
    section = {} if section is None else section
    _check_keys(section, set(DEFAULT_TOLERANCES), "tolerances")
    out = dict(DEFAULT_TOLERANCES)
    for key, value in section.items():
        v = constant_value(value, f"tolerances.{key}")
        if not 0 < v < 1:
            raise ConfigError(f"tolerances.{key} must lie in ]0, 1[")
        out[key] = v
    return out


def _normalize_oracle(section):
    section = {} if section is None else section
    _check_keys(section, {"mesh"}, "oracle")
    mesh = section.get("mesh")
    return {"mesh": None if mesh is None else _positive_int(mesh, "oracle.mesh", 32)}


@dataclass(frozen=True)
class Config:
    """A validated configuration in normalized form (defaults filled in, numbers evaluated)."""

    manifold: dict
    geodesic: dict
    P: Optional[dict] = None
    Q: Optional[dict] = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    oracle: dict = field(default_factory=lambda: {"mesh": None})
    name: str = ""

    @classmethod
    def from_dict(cls, data):
        _check_keys(data, _TOP_KEYS, "configuration")
        manifold = _normalize_manifold(_require(data, "manifold", "configuration"))
        m = _manifold_dim(manifold)
        if m < 2:
            raise ConfigError("index computations need a manifold of dimension >= 2")
        name = data.get("name", "")
        if not isinstance(name, str):
            raise ConfigError("name must be a string")
        geo = _require(data, "geodesic", "configuration")
        if not isinstance(geo, dict):
            raise ConfigError("geodesic must be a JSON object")
        return cls(manifold=manifold, geodesic=_normalize_geodesic(geo, m),
                   P=_normalize_submanifold(data.get("P"), m, "P"),
                   Q=_normalize_submanifold(data.get("Q"), m, "Q"),
                   tolerances=_normalize_tolerances(data.get("tolerances")),
                   oracle=_normalize_oracle(data.get("oracle")), name=name)

    def to_dict(self):
        return json.loads(json.dumps({
            "name": self.name, "manifold": self.manifold, "geodesic": self.geodesic,
            "P": self.P, "Q": self.Q, "tolerances": self.tolerances, "oracle": self.oracle,
        }))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def dim(self):
        return _manifold_dim(self.manifold)

    def replace(self, **changes):
        data = self.to_dict()
        for key, value in changes.items():
            section, _, item = key.partition(".")
            if item:
                data[section] = dict(data[section] or {}, **{item: value})
            else:
                data[section] = value
        return Config.from_dict(data)


def parse_config(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return Config.from_dict(data)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"configuration {path} is not UTF-8: {exc}") from exc
    return parse_config(text)


@dataclass(frozen=True)
class Problem:
    """Objects built from a configuration."""

    config: Config
    manifold: object
    geodesic: object
    P: object
    Q: object


def build_problem(config):
    """Integrate the geodesic and build ``P`` and ``Q`` (``P`` defaults to the point ``gamma(a)``)."""
    from .geodesics import integrate_geodesic

    manifold = build_manifold(config.manifold)
    g = config.geodesic
    geo = integrate_geodesic(manifold, g["p0"], g["v0"], g["interval"], g["steps"],
                             drift_tol=config.tolerances["energy_drift"])
    P = build_submanifold(config.P, manifold, geo.x[0], "P")
    if P is None:
        P = geometry.Submanifold.point(manifold, geo.x[0], name="P")
    Q = build_submanifold(config.Q, manifold, geo.x[-1], "Q")
    return Problem(config, manifold, geo, P, Q)

