"""JSON scene documents: validation with JSON-pointer errors, round-tripping."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import SchemaError, UCVError
from .sites import Configuration, site_from_dict
from .space import NormedSpace
from .world import world_from_dict

_INF = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}


@dataclass
class Scene:
    norm: dict
    world: dict
    sites: list
    rho: float | None = None
    render: dict | None = None
    _config: Configuration | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def space(self) -> NormedSpace:
        return _space(self.norm, _world_dim(self.world))

    def configuration(self) -> Configuration:
        if self._config is None:
            space = self.space
            self._config = Configuration(space, world_from_dict(self.world, space),
                                         [site_from_dict(s) for s in self.sites], self.rho)
        return self._config

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"norm": self.norm, "world": self.world, "sites": self.sites}
        if self.rho is not None:
            d["rho"] = self.rho
        if self.render is not None:
            d["render"] = self.render
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_scene(path: str) -> Scene:
    with open(path, encoding="utf-8") as fh:
        return parse_scene(fh.read())


def parse_scene(text: str) -> Scene:
    """Validate a scene document; errors carry the JSON pointer of the
    offending value."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise SchemaError("", "scene must be a JSON object")
    unknown = set(doc) - {"norm", "world", "sites", "rho", "render"}
    if unknown:
        raise SchemaError("/" + sorted(unknown)[0], "unknown key")
    norm = _norm(doc.get("norm"), "/norm")
    world = _world(doc.get("world"), "/world")
    dim = _world_dim(world)
    space = _space(norm, dim)
    raw_sites = doc.get("sites")
    if not isinstance(raw_sites, list):
        raise SchemaError("/sites", "required list of sites")
    if len(raw_sites) < 2:
        raise SchemaError("/sites", "need at least two sites")
    sites = [_site(s, f"/sites/{i}", dim) for i, s in enumerate(raw_sites)]
    rho = doc.get("rho")
    if rho is not None and not (_is_number(rho) and rho > 0):
        raise SchemaError("/rho", "rho must be a positive number")
    render = doc.get("render")
    if render is not None:
        render = _render(render)
    scene = Scene(norm, world, sites, None if rho is None else float(rho), render)
    try:
        config = scene.configuration()
    except UCVError as exc:
        raise SchemaError("/world", str(exc)) from None
    for i, inside in enumerate(config.sites_inside()):
        if not inside:
            raise SchemaError(f"/sites/{i}", "site lies outside the world")
    return scene


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _vector(v, path, dim=None, allow_inf=False) -> list:
    if not isinstance(v, list) or not v:
        raise SchemaError(path, "expected a nonempty list of numbers")
    out = []
    for i, c in enumerate(v):
        if allow_inf and isinstance(c, str) and c in _INF:
            out.append(c if c != "+inf" else "inf")
        elif _is_number(c):
            out.append(float(c))
        else:
            raise SchemaError(f"{path}/{i}", "expected a number")
    if dim is not None and len(out) != dim:
        raise SchemaError(path, f"expected {dim} coordinates, got {len(out)}")
    return out


def _norm(v, path) -> dict:
    if not isinstance(v, dict):
        raise SchemaError(path, "required object")
    kind = v.get("kind")
    if kind in ("l1", "linf"):
        return {"kind": kind}
    if kind == "euclidean":
        return {"kind": "lp", "p": 2.0}
    if kind == "lp":
        p = v.get("p")
        if isinstance(p, str) and p in ("inf", "+inf"):
            return {"kind": "linf"}
        if not _is_number(p) or p < 1:
            raise SchemaError(path + "/p", "p must be a number >= 1")
        return {"kind": "l1"} if p == 1 else {"kind": "lp", "p": float(p)}
    raise SchemaError(path + "/kind", "expected one of lp, l1, linf, euclidean")


def _space(norm: dict, dim: int) -> NormedSpace:
    return NormedSpace(norm["kind"], dim, norm.get("p", 2.0))


def _world(v, path) -> dict:
    if not isinstance(v, dict):
        raise SchemaError(path, "required object")
    kind = v.get("kind")
    if kind == "box":
        lo = _vector(v.get("min"), path + "/min", allow_inf=True)
        hi = _vector(v.get("max"), path + "/max", len(lo), allow_inf=True)
        if any(_num(h) <= _num(l) for l, h in zip(lo, hi)):
            raise SchemaError(path, "box needs min < max in every coordinate")
        return {"kind": "box", "min": lo, "max": hi}
    if kind == "ball":
        c = _vector(v.get("center"), path + "/center")
        r = v.get("radius")
        if not _is_number(r) or r <= 0:
            raise SchemaError(path + "/radius", "radius must be a positive number")
        return {"kind": "ball", "center": c, "radius": float(r)}
    if kind == "halfspaces":
        normals = v.get("normals")
        if not isinstance(normals, list) or len(normals) < 2:
            raise SchemaError(path + "/normals", "expected a list of normal vectors")
        first = _vector(normals[0], path + "/normals/0")
        ns = [first] + [_vector(n, f"{path}/normals/{i}", len(first)) for i, n in enumerate(normals[1:], 1)]
        offs = _vector(v.get("offsets"), path + "/offsets", len(ns))
        return {"kind": "halfspaces", "normals": ns, "offsets": offs}
    raise SchemaError(path + "/kind", "expected one of box, ball, halfspaces")


def _num(c) -> float:
    return _INF[c] if isinstance(c, str) else c


def _world_dim(world: dict) -> int:
    if world["kind"] == "box":
        return len(world["min"])
    if world["kind"] == "ball":
        return len(world["center"])
    return len(world["normals"][0])


def _site(v, path, dim) -> dict:
    if not isinstance(v, dict):
        raise SchemaError(path, "site must be an object")
    kind = v.get("kind")
    if kind == "points":
        coords = v.get("coords")
        if not isinstance(coords, list) or not coords:
            raise SchemaError(path + "/coords", "expected a nonempty list of points")
        return {"kind": "points", "coords": [_vector(c, f"{path}/coords/{i}", dim) for i, c in enumerate(coords)]}
    if kind == "segment":
        return {"kind": "segment", "a": _vector(v.get("a"), path + "/a", dim),
                "b": _vector(v.get("b"), path + "/b", dim)}
    if kind == "disc":
        r = v.get("radius")
        if not _is_number(r) or r < 0:
            raise SchemaError(path + "/radius", "radius must be a nonnegative number")
        if dim != 2 and r > 0:
            raise SchemaError(path, "discs are supported in the plane only")
        return {"kind": "disc", "center": _vector(v.get("center"), path + "/center", dim), "radius": float(r)}
    if kind == "box":
        lo = _vector(v.get("min"), path + "/min", dim)
        hi = _vector(v.get("max"), path + "/max", dim)
        if any(h < l for l, h in zip(lo, hi)):
            raise SchemaError(path, "box site needs min <= max")
        return {"kind": "box", "min": lo, "max": hi}
    if kind == "union":
        members = v.get("members")
        if not isinstance(members, list) or not members:
            raise SchemaError(path + "/members", "expected a nonempty list of sites")
        return {"kind": "union", "members": [_site(m, f"{path}/members/{i}", dim) for i, m in enumerate(members)]}
    raise SchemaError(path + "/kind", "expected one of points, segment, disc, box, union")


def _render(v) -> dict:
    if not isinstance(v, dict):
        raise SchemaError("/render", "expected an object")
    out: dict[str, Any] = {}
    for key in ("width", "height"):
        if key in v:
            if not _is_number(v[key]) or v[key] <= 0:
                raise SchemaError(f"/render/{key}", "expected a positive number")
            out[key] = float(v[key])
    if "colors" in v:
        cols = v["colors"]
        if not isinstance(cols, list) or not all(isinstance(c, str) for c in cols):
            raise SchemaError("/render/colors", "expected a list of colour strings")
        out["colors"] = list(cols)
    if "viewport" in v:
        vp = _vector(v["viewport"], "/render/viewport", 4)
        if vp[2] <= vp[0] or vp[3] <= vp[1]:
            raise SchemaError("/render/viewport", "expected [xmin, ymin, xmax, ymax]")
        out["viewport"] = vp
    return out


def scene_from_configuration(config: Configuration, render: dict | None = None) -> Scene:
    space = config.space
    norm = {"kind": space.kind} if space.kind != "lp" else {"kind": "lp", "p": float(space.p)}
    sites = [s.to_dict() for s in config.sites]
    sites = json.loads(json.dumps(sites))  # plain floats
    return Scene(norm, config.world.to_dict(), sites, config.rho_override, render)


def json_ready(obj):
    """Replace non-finite floats and numpy scalars so ``json.dumps`` emits
    strict JSON."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return json_ready(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj
