"""Convex worlds X: membership, ray clipping and boundary distances."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatch, DomainError, PointOutsideWorld, UnboundedWorld
from .space import NormedSpace

# membership slack, relative to the world's coordinate scale
CONTAINS_RTOL = 1e-12


class World:
    """Common interface; concrete worlds are :class:`Box`, :class:`Ball`
    and :class:`Polytope`."""

    dim: int
    bounded: bool = True

    def _pts(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"world has dimension {self.dim}, got shape {x.shape}")
        return x

    def contains(self, x, atol: float | None = None):
        raise NotImplementedError

    def ray_exit(self, p, theta):
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def scale(self) -> float:
        lo, hi = self.bounds()
        ext = np.concatenate([np.abs(lo), np.abs(hi)])
        ext = ext[np.isfinite(ext)]
        return float(max(1.0, ext.max())) if ext.size else 1.0

    def _atol(self, atol):
        return CONTAINS_RTOL * self.scale if atol is None else atol

    def _require_inside(self, p):
        if not np.all(self.contains(p)):
            raise PointOutsideWorld(f"point {np.asarray(p).tolist()} is not in the world")

    def _require_bounded(self):
        if not self.bounded:
            raise UnboundedWorld("operation requires a bounded world")

    def diameter(self, space: NormedSpace) -> float:
        self._require_bounded()
        lo, hi = self.bounds()
        return float(space.norm(hi - lo))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Uniform samples by rejection from the bounding box."""
        self._require_bounded()
        lo, hi = self.bounds()
        out = []
        have = 0
        while have < n:
            cand = rng.uniform(lo, hi, size=(max(2 * (n - have), 64), self.dim))
            cand = cand[self.contains(cand, atol=0.0)]
            out.append(cand)
            have += len(cand)
        return np.concatenate(out)[:n]

    def to_dict(self) -> dict:
        raise NotImplementedError


class Box(World):
    """Axis-aligned box ``[lo, hi]``; infinite bounds give unbounded worlds."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise DimensionMismatch("box corners must be vectors of equal length")
        if np.any(self.hi <= self.lo):
            raise DomainError("box must be full-dimensional (hi > lo)")
        self.dim = self.lo.size
        self.bounded = bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    @classmethod
    def plane(cls, dim: int = 2) -> "Box":
        return cls(np.full(dim, -np.inf), np.full(dim, np.inf))

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"

    def bounds(self):
        return self.lo.copy(), self.hi.copy()

    def contains(self, x, atol=None):
        x = self._pts(x)
        a = self._atol(atol)
        return np.all((x >= self.lo - a) & (x <= self.hi + a), axis=-1)

    def ray_exit(self, p, theta):
        """Largest ``t`` with ``p + t theta`` in the box (row-wise in theta)."""
        p = self._pts(p)
        theta = self._pts(theta)
        self._require_inside(p)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            up = np.where(theta > 0, (self.hi - p) / theta, np.inf)
            down = np.where(theta < 0, (self.lo - p) / theta, np.inf)
        t = np.minimum(up, down).min(axis=-1)
        return np.maximum(t, 0.0)

    def facets(self) -> tuple[np.ndarray, np.ndarray]:
        eye = np.eye(self.dim)
        normals = np.concatenate([eye, -eye])
        offsets = np.concatenate([self.hi, -self.lo])
        keep = np.isfinite(offsets)
        return normals[keep], offsets[keep]

    def boundary_distance(self, space: NormedSpace, site) -> float:
        self._require_bounded()
        return _facet_boundary_distance(space, *self.facets(), site)

    def point_boundary_distance(self, space: NormedSpace, x) -> np.ndarray:
        x = self._pts(x)
        return np.minimum(x - self.lo, self.hi - x).min(axis=-1)

    @property
    def volume(self) -> float:
        self._require_bounded()
        return float(np.prod(self.hi - self.lo))

    def to_dict(self):
        enc = lambda v: [float(c) if np.isfinite(c) else ("inf" if c > 0 else "-inf") for c in v]
        return {"kind": "box", "min": enc(self.lo), "max": enc(self.hi)}


class Ball(World):
    """Closed ball of the scene norm."""

    def __init__(self, space: NormedSpace, center, radius: float):
        self.space = space
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = space.dim
        if self.center.shape != (self.dim,):
            raise DimensionMismatch("ball center has the wrong dimension")
        if not self.radius > 0:
            raise DomainError("ball radius must be positive")

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius})"

    def bounds(self):
        # |x_i| <= |x|_p for every lp norm
        return self.center - self.radius, self.center + self.radius

    def contains(self, x, atol=None):
        x = self._pts(x)
        return self.space.norm(x - self.center) <= self.radius + self._atol(atol)

    def ray_exit(self, p, theta):
        p = self._pts(p)
        theta = self._pts(theta)
        self._require_inside(p)
        v = p - self.center
        if self.space.is_euclidean:
            th = np.atleast_2d(theta)
            tt = np.sum(th * th, axis=-1)
            b = th @ v / tt
            c = (v @ v - self.radius ** 2) / tt
            t = -b + np.sqrt(np.maximum(b * b - c, 0.0))
            t = np.maximum(t, 0.0)
            return t if np.ndim(theta) > 1 else float(t[0])
        # |v + t theta| is convex in t and <= R at t = 0: bisect the upper end
        th = np.atleast_2d(theta)
        lo = np.zeros(len(th))
        hi = np.full(len(th), (self.radius + float(self.space.norm(v))) / np.min(self.space.norm(th)) + 1.0)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            inside = self.space.norm(v + mid[:, None] * th) <= self.radius
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
            if np.all(hi - lo <= 1e-15 * self.radius):
                break
        return lo if np.ndim(theta) > 1 else float(lo[0])

    def diameter(self, space):
        return 2.0 * self.radius

    def boundary_distance(self, space: NormedSpace, site) -> float:
        return float(self.radius - site.max_distance_from(space, self.center))

    def point_boundary_distance(self, space, x):
        return self.radius - space.norm(self._pts(x) - self.center)

    @property
    def volume(self) -> float:
        p, d = self.space.p, self.dim
        if np.isinf(p):
            unit = 2.0 ** d
        else:
            unit = math.exp(d * (math.log(2.0) + gammaln(1.0 + 1.0 / p)) - gammaln(1.0 + d / p))
        return unit * self.radius ** d

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


class Polytope(World):
    """Intersection of halfspaces ``normals @ x <= offsets``.

    ``vertices`` are optional but needed for bounds, volume and sampling.
    """

    def __init__(self, normals, offsets, vertices=None):
        self.normals = np.atleast_2d(np.asarray(normals, dtype=float))
        self.offsets = np.asarray(offsets, dtype=float).ravel()
        if len(self.normals) != len(self.offsets):
            raise DimensionMismatch("one offset per normal")
        self.dim = self.normals.shape[1]
        self.vertices = None if vertices is None else np.asarray(vertices, dtype=float)
        self.bounded = True
        if self.vertices is None:
            self.vertices = _polytope_vertices(self.normals, self.offsets)

    def __repr__(self):
        return f"Polytope({len(self.offsets)} facets, dim={self.dim})"

    @classmethod
    def from_vertices(cls, points) -> "Polytope":
        """Convex hull of ``points``.  ``d + 1`` affinely independent points
        are handled exactly via barycentric coordinates; other inputs go
        through qhull."""
        pts = np.asarray(points, dtype=float)
        n, d = pts.shape
        if n == d + 1:
            m = np.vstack([pts.T, np.ones(n)])
            inv = np.linalg.inv(m)
            # barycentric lambda(x) = inv @ [x; 1] >= 0
            return cls(-inv[:, :d], inv[:, d], vertices=pts)
        from scipy.spatial import ConvexHull

        hull = ConvexHull(pts)
        eq = hull.equations
        return cls(eq[:, :-1], -eq[:, -1], vertices=pts[hull.vertices])

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def contains(self, x, atol=None):
        x = self._pts(x)
        scale = np.linalg.norm(self.normals, axis=1)
        return np.all(x @ self.normals.T <= self.offsets + self._atol(atol) * scale, axis=-1)

    def ray_exit(self, p, theta):
        p = self._pts(p)
        theta = self._pts(theta)
        self._require_inside(p)
        scale = np.linalg.norm(self.normals, axis=1)
        slack = np.maximum(self.offsets - self.normals @ p, 0.0)
        slope = np.atleast_2d(theta) @ self.normals.T
        # rows that are numerically tangent to the ray do not cut it
        moving = slope > 1e-14 * scale
        with np.errstate(divide="ignore"):
            t = np.where(moving, slack / np.where(moving, slope, 1.0), np.inf).min(axis=-1)
        return t if np.ndim(theta) > 1 else float(t[0])

    def diameter(self, space):
        v = self.vertices
        return float(np.max(space.norm(v[:, None, :] - v[None, :, :])))

    def boundary_distance(self, space: NormedSpace, site) -> float:
        return _facet_boundary_distance(space, self.normals, self.offsets, site)

    def point_boundary_distance(self, space, x):
        x = self._pts(x)
        dual = space.dual_norm(self.normals)
        return ((self.offsets - x @ self.normals.T) / dual).min(axis=-1)

    @property
    def volume(self) -> float:
        from scipy.spatial import ConvexHull

        if len(self.vertices) == self.dim + 1:
            m = np.vstack([self.vertices.T, np.ones(self.dim + 1)])
            return abs(np.linalg.det(m)) / math.factorial(self.dim)
        return float(ConvexHull(self.vertices).volume)

    def to_dict(self):
        return {
            "kind": "halfspaces",
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
        }


def _facet_boundary_distance(space, normals, offsets, site) -> float:
    # distance from an interior point to {n.x = b} in the scene norm is
    # (b - n.x) / |n|_dual; over a site this is governed by its support function
    dual = space.dual_norm(normals)
    support = site.support(space, normals)
    return float(np.min((offsets - support) / dual))


def _polytope_vertices(normals, offsets) -> np.ndarray:
    from scipy.optimize import linprog
    from scipy.spatial import HalfspaceIntersection

    d = normals.shape[1]
    # Chebyshev centre gives a strictly interior point
    norms = np.linalg.norm(normals, axis=1)
    res = linprog(
        np.r_[np.zeros(d), -1.0],
        A_ub=np.hstack([normals, norms[:, None]]),
        b_ub=offsets,
        bounds=[(None, None)] * d + [(0, None)],
    )
    if res.status != 0 or res.x[-1] <= 0:
        raise DomainError("halfspaces do not bound a full-dimensional polytope")
    hs = HalfspaceIntersection(np.hstack([normals, -offsets[:, None]]), res.x[:d])
    return hs.intersections


def boundary_distance(world: World, space: NormedSpace, site) -> float:
    """Scene-norm distance from a site to the boundary of a bounded world."""
    world._require_bounded()
    return world.boundary_distance(space, site)


def world_from_dict(d: dict, space: NormedSpace) -> World:
    kind = d.get("kind")
    if kind == "box":
        dec = lambda v: [float(c) for c in v]
        return Box(dec(d["min"]), dec(d["max"]))
    if kind == "ball":
        return Ball(space, d["center"], d["radius"])
    if kind == "halfspaces":
        return Polytope(d["normals"], d["offsets"], d.get("vertices"))
    raise DomainError(f"unknown world kind {kind!r}")
