"""Sites as distance oracles, configurations of sites, Hausdorff distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, DomainError, UnboundedWorld
from .space import NormedSpace, segment_distance
from .world import World

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _rows(x, dim) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got shape {x.shape}")
    single = x.ndim == 1
    return np.atleast_2d(x), single


class Site:
    """A closed nonempty subset of R^d that can report nearest points."""

    kind: str
    dim: int

    def distance(self, space: NormedSpace, x):
        """``(dist, nearest)`` for a point or a stack of points."""
        X, single = _rows(x, self.dim)
        d, q = self._distance(space, X)
        return (float(d[0]), q[0]) if single else (d, q)

    def dist(self, space: NormedSpace, X) -> np.ndarray:
        """Distances only, for an ``(n, d)`` stack."""
        return self._distance(space, np.atleast_2d(np.asarray(X, dtype=float)))[0]

    def _distance(self, space, X):
        raise NotImplementedError

    def extreme_points(self, space: NormedSpace) -> np.ndarray:
        """Points whose convex hull contains the site (exact for polyhedral
        sites; discs override the functions that need this)."""
        raise NotImplementedError

    def support(self, space: NormedSpace, normals) -> np.ndarray:
        normals = np.atleast_2d(normals)
        return (self.extreme_points(space) @ normals.T).max(axis=0)

    def max_distance_from(self, space: NormedSpace, c) -> float:
        return float(np.max(space.norm(self.extreme_points(space) - c)))

    def anchors(self, space: NormedSpace, count: int) -> np.ndarray:
        """Anchor points used to grow cell fans."""
        raise NotImplementedError

    def samples(self, space: NormedSpace, spacing: float) -> tuple[np.ndarray, float]:
        """Dense samples and their covering radius (every site point lies
        within that scene distance of a sample)."""
        raise NotImplementedError

    def measure(self, space: NormedSpace) -> float:
        """Length / perimeter scale used to size anchor sets."""
        return 0.0

    @property
    def is_finite(self) -> bool:
        return False

    def to_dict(self) -> dict:
        raise NotImplementedError


class Points(Site):
    kind = "points"

    def __init__(self, coords):
        c = np.atleast_2d(np.asarray(coords, dtype=float))
        if c.size == 0:
            raise DomainError("a points site needs at least one point")
        self.coords = c
        self.dim = c.shape[1]

    def __repr__(self):
        return f"Points({self.coords.tolist()})"

    @property
    def is_finite(self):
        return True

    def _distance(self, space, X):
        best = np.full(len(X), np.inf)
        arg = np.zeros(len(X), dtype=int)
        for j, c in enumerate(self.coords):
            d = space.norm(X - c)
            better = d < best  # strict: ties go to the earlier point
            best = np.where(better, d, best)
            arg = np.where(better, j, arg)
        return best, self.coords[arg]

    def extreme_points(self, space):
        return self.coords

    def anchors(self, space, count):
        return self.coords.copy()

    def samples(self, space, spacing):
        return self.coords.copy(), 0.0

    def to_dict(self):
        return {"kind": "points", "coords": self.coords.tolist()}


class Segment(Site):
    kind = "segment"

    def __init__(self, a, b):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise DimensionMismatch("segment endpoints must be vectors of equal length")
        self.dim = self.a.size

    def __repr__(self):
        return f"Segment({self.a.tolist()}, {self.b.tolist()})"

    def _distance(self, space, X):
        d, t = segment_distance(space, X, self.a, self.b)
        return d, self.a + t[:, None] * (self.b - self.a)

    def extreme_points(self, space):
        return np.stack([self.a, self.b])

    def measure(self, space):
        return float(space.norm(self.b - self.a))

    def anchors(self, space, count):
        t = np.linspace(0.0, 1.0, max(int(count), 2))
        return self.a + t[:, None] * (self.b - self.a)

    def samples(self, space, spacing):
        n = max(2, int(math.ceil(self.measure(space) / spacing)) + 1)
        pts = self.anchors(space, n)
        return pts, self.measure(space) / (n - 1) / 2.0

    def to_dict(self):
        return {"kind": "segment", "a": self.a.tolist(), "b": self.b.tolist()}


class Disc(Site):
    """Closed ball of the scene norm, used as a site."""

    kind = "disc"

    def __init__(self, center, radius):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        if self.center.ndim != 1:
            raise DimensionMismatch("disc center must be a vector")
        if self.radius < 0:
            raise DomainError("disc radius must be nonnegative")
        self.dim = self.center.size

    def __repr__(self):
        return f"Disc({self.center.tolist()}, {self.radius})"

    def _distance(self, space, X):
        v = X - self.center
        n = space.norm(v)
        d = np.maximum(n - self.radius, 0.0)
        outside = n > self.radius
        safe = np.where(n > 0, n, 1.0)
        q = np.where(outside[:, None], self.center + self.radius * v / safe[:, None], X)
        return d, q

    def support(self, space, normals):
        normals = np.atleast_2d(normals)
        return normals @ self.center + self.radius * space.dual_norm(normals)

    def max_distance_from(self, space, c):
        return float(space.norm(self.center - c)) + self.radius

    def extreme_points(self, space):
        return self.boundary_points(space, 4096)

    def boundary_points(self, space, count) -> np.ndarray:
        if self.dim != 2:
            raise DimensionMismatch("disc sampling is implemented in the plane only")
        ang = 2.0 * np.pi * np.arange(max(int(count), 4)) / max(int(count), 4)
        u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return self.center + self.radius * space.unit(u)

    def measure(self, space):
        if self.radius == 0:
            return 0.0
        b = self.boundary_points(space, 512)
        return float(np.sum(space.norm(np.roll(b, -1, axis=0) - b)))

    def anchors(self, space, count):
        # boundary anchors suffice: rays from them sweep the interior too
        if self.radius == 0:
            return self.center[None, :].copy()
        return self.boundary_points(space, count)

    def samples(self, space, spacing):
        if self.radius == 0:
            return self.center[None, :].copy(), 0.0
        rings = max(1, int(math.ceil(self.radius / spacing)))
        pts = [self.center[None, :]]
        for i in range(1, rings + 1):
            r = self.radius * i / rings
            n = max(8, int(math.ceil(2 * math.pi * r / spacing * 2)))
            pts.append(self.center + r * space.unit(_circle(n)))
        pts = np.concatenate(pts)
        return pts, spacing

    def to_dict(self):
        return {"kind": "disc", "center": self.center.tolist(), "radius": self.radius}


class BoxSite(Site):
    """Filled axis-aligned box ``[lo, hi]`` used as a site."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise DimensionMismatch("box corners must be vectors of equal length")
        if np.any(self.hi < self.lo):
            raise DomainError("box site needs lo <= hi")
        self.dim = self.lo.size

    def __repr__(self):
        return f"BoxSite({self.lo.tolist()}, {self.hi.tolist()})"

    def _distance(self, space, X):
        # lp norms are coordinate-monotone, so clamping is a nearest point
        q = np.clip(X, self.lo, self.hi)
        return space.norm(X - q), q

    def extreme_points(self, space):
        corners = np.array(np.meshgrid(*zip(self.lo, self.hi), indexing="ij"))
        return corners.reshape(self.dim, -1).T

    def measure(self, space):
        e = self.hi - self.lo
        return float(2 * e.sum()) if self.dim == 2 else float(e.sum())

    def anchors(self, space, count):
        if self.dim != 2:
            raise DimensionMismatch("box-site anchors are implemented in the plane only")
        (x0, y0), (x1, y1) = self.lo, self.hi
        loop = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]])
        seg = np.linalg.norm(np.diff(loop, axis=0), axis=1)
        total = seg.sum()
        if total == 0:
            return self.lo[None, :].copy()
        s = np.linspace(0.0, total, max(int(count), 4), endpoint=False)
        cum = np.r_[0.0, np.cumsum(seg)]
        i = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, 3)
        f = np.where(seg[i] > 0, (s - cum[i]) / np.where(seg[i] > 0, seg[i], 1.0), 0.0)
        return loop[i] + f[:, None] * (loop[i + 1] - loop[i])

    def samples(self, space, spacing):
        axes = [np.linspace(l, h, max(2, int(math.ceil((h - l) / spacing)) + 1)) for l, h in zip(self.lo, self.hi)]
        grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(self.dim, -1).T
        half = np.array([(a[1] - a[0]) / 2 if len(a) > 1 else 0.0 for a in axes])
        return grid, float(space.norm(half))

    def to_dict(self):
        return {"kind": "box", "min": self.lo.tolist(), "max": self.hi.tolist()}


class Union(Site):
    """Union of member sites; nearest-point ties go to the earlier member."""

    kind = "union"

    def __init__(self, members: Sequence[Site]):
        flat: list[Site] = []
        for m in members:
            flat.extend(m.members if isinstance(m, Union) else [m])
        if not flat:
            raise DomainError("a union needs at least one member")
        dims = {m.dim for m in flat}
        if len(dims) != 1:
            raise DimensionMismatch("union members disagree on dimension")
        self.members = flat
        self.dim = dims.pop()

    def __repr__(self):
        return f"Union({self.members!r})"

    @property
    def is_finite(self):
        return all(m.is_finite for m in self.members)

    def _distance(self, space, X):
        best = np.full(len(X), np.inf)
        q = np.zeros_like(X)
        for m in self.members:
            d, qm = m._distance(space, X)
            better = d < best
            best = np.where(better, d, best)
            q = np.where(better[:, None], qm, q)
        return best, q

    def extreme_points(self, space):
        return np.concatenate([m.extreme_points(space) for m in self.members])

    def support(self, space, normals):
        return np.max([m.support(space, normals) for m in self.members], axis=0)

    def max_distance_from(self, space, c):
        return max(m.max_distance_from(space, c) for m in self.members)

    def measure(self, space):
        return sum(m.measure(space) for m in self.members)

    def anchors(self, space, count):
        total = self.measure(space)
        out = []
        for m in self.members:
            share = count if total == 0 else max(2, int(round(count * m.measure(space) / total)))
            out.append(m.anchors(space, share))
        return np.concatenate(out)

    def samples(self, space, spacing):
        parts = [m.samples(space, spacing) for m in self.members]
        return np.concatenate([p for p, _ in parts]), max(r for _, r in parts)

    def to_dict(self):
        return {"kind": "union", "members": [m.to_dict() for m in self.members]}


def _circle(n: int) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def site_from_dict(d: dict) -> Site:
    kind = d.get("kind")
    if kind == "points":
        return Points(d["coords"])
    if kind == "segment":
        return Segment(d["a"], d["b"])
    if kind == "disc":
        return Disc(d["center"], d["radius"])
    if kind == "box":
        return BoxSite(d["min"], d["max"])
    if kind == "union":
        return Union([site_from_dict(m) for m in d["members"]])
    raise DomainError(f"unknown site kind {kind!r}")


def site_distance(space: NormedSpace, site: Site, x):
    return site.distance(space, x)


# ---------------------------------------------------------------------------
# distances between sets


def _golden_min(f, lo=0.0, hi=1.0, iterations=90):
    a, b = lo, hi
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iterations):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return min(f(0.5 * (a + b)), f(lo), f(hi))


def set_distance(space: NormedSpace, A: Site, B: Site) -> float:
    """``inf {d(a, b)}`` over the two sites.

    Exact up to 1-d convex minimization: unions split, discs shrink to their
    centres, finite sets reduce to point queries, and for convex pairs the
    distance along a segment parameter is convex.
    """
    if isinstance(A, Union):
        return min(set_distance(space, m, B) for m in A.members)
    if isinstance(B, Union):
        return min(set_distance(space, A, m) for m in B.members)
    if isinstance(A, Disc):
        return max(0.0, set_distance(space, Points(A.center), B) - A.radius)
    if isinstance(B, Disc):
        return max(0.0, set_distance(space, A, Points(B.center)) - B.radius)
    if isinstance(A, Points):
        return float(np.min(B.dist(space, A.coords)))
    if isinstance(B, Points):
        return float(np.min(A.dist(space, B.coords)))
    if isinstance(A, BoxSite) and isinstance(B, BoxSite):
        gap = np.maximum(0.0, np.maximum(B.lo - A.hi, A.lo - B.hi))
        return float(space.norm(gap))
    if isinstance(B, Segment):
        A, B = B, A
    if isinstance(A, Segment):
        u = A.b - A.a
        return float(_golden_min(lambda t: float(B.dist(space, (A.a + t * u)[None, :])[0])))
    raise DomainError(f"no distance rule for {A.kind} / {B.kind}")


class HausdorffResult(NamedTuple):
    value: float
    error: float  # one-sided sampling bound; 0 for finite sets


def hausdorff(space: NormedSpace, A: Site, B: Site, spacing: float | None = None) -> HausdorffResult:
    """Hausdorff distance between two sites.

    Exact for finite point sets.  Continuous sites are sampled with the given
    spacing (default: 1/1000 of the larger site extent); each sample is
    compared against the other site's exact distance oracle, so the result
    is off by at most the reported sampling error.
    """
    if A.is_finite and B.is_finite:
        pa, pb = A.extreme_points(space), B.extreme_points(space)
        return HausdorffResult(max(float(B.dist(space, pa).max()), float(A.dist(space, pb).max())), 0.0)
    if spacing is None:
        ext = max(_extent(space, A), _extent(space, B))
        spacing = ext / 1000.0 if ext > 0 else 1e-3
    sa, ra = A.samples(space, spacing)
    sb, rb = B.samples(space, spacing)
    value = max(float(B.dist(space, sa).max()), float(A.dist(space, sb).max()))
    return HausdorffResult(value, max(ra, rb))


def _extent(space, site) -> float:
    pts = site.extreme_points(space) if not isinstance(site, Disc) else site.boundary_points(space, 64)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return float(space.norm(hi - lo))


# ---------------------------------------------------------------------------
# configurations


class RhoInfo(NamedTuple):
    value: float
    margin: float
    source: str  # "estimate" or "override"


@dataclass
class Configuration:
    """A world, a norm and K >= 2 sites; ``rho`` optionally overrides the
    sampled estimate of the boundedness radius."""

    space: NormedSpace
    world: World
    sites: list
    rho_override: float | None = None
    _rho_cache: RhoInfo | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.sites = list(self.sites)
        if len(self.sites) < 2:
            raise DomainError("a configuration needs at least two sites")
        for s in self.sites:
            if s.dim != self.space.dim or self.world.dim != self.space.dim:
                raise DimensionMismatch("sites, world and norm must share a dimension")

    @property
    def K(self) -> int:
        return len(self.sites)

    def others(self, k: int) -> Union:
        return Union([s for j, s in enumerate(self.sites) if j != k])

    def with_sites(self, sites) -> "Configuration":
        return Configuration(self.space, self.world, list(sites), self.rho_override)

    def eta(self) -> float:
        return eta(self)

    def rho_info(self, samples: int = 40000) -> RhoInfo:
        if self.rho_override is not None:
            return RhoInfo(float(self.rho_override), 0.0, "override")
        if self._rho_cache is None:
            self._rho_cache = rho_estimate(self, samples)
        return self._rho_cache

    @property
    def rho(self) -> float:
        return self.rho_info().value

    def sites_inside(self) -> list[bool]:
        out = []
        for s in self.sites:
            if isinstance(s, Disc):
                if self.world.bounded:
                    out.append(self.world.boundary_distance(self.space, s) >= -1e-12 * self.world.scale)
                else:
                    out.append(bool(self.world.contains(s.center)))
            else:
                out.append(bool(np.all(self.world.contains(s.extreme_points(self.space)))))
        return out


def eta(config: Configuration) -> float:
    """Smallest distance between two different sites (0 if any touch)."""
    return min(set_distance(config.space, a, b) for a, b in combinations(config.sites, 2))


def rho_estimate(config: Configuration, samples: int = 40000) -> RhoInfo:
    """Upper estimate of ``sup_x max_k d(x, A_k)`` over the world.

    The supremum is taken over a regular grid on the world's bounding box;
    since every ``d(., A_k)`` is 1-Lipschitz, adding the grid's covering
    radius (plus a relative 1e-9 to make the bound strict) gives a radius
    whose open balls around any point of X meet every ``A_k``.
    """
    world = config.world
    if not world.bounded:
        raise UnboundedWorld("rho can only be estimated for bounded worlds; supply an override")
    space = config.space
    d = space.dim
    lo, hi = world.bounds()
    per_axis = max(2, int(round(samples ** (1.0 / d))))
    axes = [np.linspace(l, h, per_axis) for l, h in zip(lo, hi)]
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(d, -1).T
    step = (hi - lo) / (per_axis - 1)
    margin = float(space.norm(step / 2.0))
    best = 0.0
    for k in range(config.K):
        best = max(best, float(config.others(k).dist(space, grid).max()))
    value = (best + margin) * (1.0 + 1e-9)
    return RhoInfo(value, value - best, "estimate")
