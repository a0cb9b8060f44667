"""Voronoi cells as fans of maximal segments ``[p, p + T(theta, p) theta]``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import AnchorOnOtherSite, DomainError, PointOutsideWorld, ResolutionMismatch, UnboundedWorld
from .sites import Configuration, Disc, Site
from .space import NormedSpace, segment_distance
from .world import World

# t <= d(x, A) is accepted up to this relative slack so that exact ties
# (bisectors, linf diagonals) survive rounding
TIE_RTOL = 1e-13
BISECT_RTOL = 1e-10
MAX_BISECT = 200
_DOUBLING_LIMIT = 2.0 ** 60
_EUCLID = {2: NormedSpace.euclidean(2)}


def _admissible(space: NormedSpace, A: Site, X: np.ndarray, t: np.ndarray) -> np.ndarray:
    dA = A.dist(space, X)
    return t <= dA + TIE_RTOL * np.maximum(t, dA)


def default_tol(world: World, space: NormedSpace) -> float:
    if world.bounded:
        return BISECT_RTOL * world.diameter(space)
    return BISECT_RTOL * world.scale


def ray_lengths(space: NormedSpace, world: World, A: Site, p, thetas, cap: float | None = None,
                tol: float | None = None) -> np.ndarray:
    """``T(theta, p)`` against the competitor set ``A`` for a stack of
    scene-unit directions.

    The admissible ``t`` form an interval ``[0, T]``, so bisection on
    ``t <= d(p + t theta, A)`` is exact up to ``tol``.  The search is capped
    at ``min(ray_exit, cap)``; with no finite cap the bracket is grown by
    doubling and rays that never leave the dominance region get ``inf``.
    Does not check ``d(p, A) > 0``.
    """
    p = np.asarray(p, dtype=float)
    th = np.atleast_2d(np.asarray(thetas, dtype=float))
    tol = default_tol(world, space) if tol is None else tol
    upper = np.atleast_1d(np.asarray(world.ray_exit(p, th), dtype=float)).copy()
    if cap is not None:
        upper = np.minimum(upper, cap)
    return _bisect(space, A, np.broadcast_to(p, th.shape), th, upper, tol)


def _bisect(space: NormedSpace, A: Site, P: np.ndarray, th: np.ndarray, upper: np.ndarray,
            tol: float) -> np.ndarray:
    """Row-wise bisection of the admissible interval along ``P + t th``
    within ``[0, upper]`` (``upper`` may be infinite)."""
    out = np.empty(len(th))
    upper = upper.copy()
    unbounded = ~np.isfinite(upper)
    if np.any(unbounded):
        idx = np.flatnonzero(unbounded)
        hi = np.ones(idx.size)
        alive = np.ones(idx.size, dtype=bool)
        while np.any(alive) and not np.all(hi[alive] > _DOUBLING_LIMIT):
            ok = _admissible(space, A, P[idx] + hi[:, None] * th[idx], hi)
            alive &= ok
            hi = np.where(alive, 2.0 * hi, hi)
        out[idx[alive]] = np.inf
        upper[idx[~alive]] = hi[~alive]
        unbounded[idx[~alive]] = False

    rows = np.flatnonzero(~unbounded)
    if rows.size:
        hi = upper[rows]
        top = _admissible(space, A, P[rows] + hi[:, None] * th[rows], hi)
        out[rows[top]] = hi[top]
        rows = rows[~top]
        lo = np.zeros(rows.size)
        hi = upper[rows]
        Pr, thr = P[rows], th[rows]
        for _ in range(MAX_BISECT):
            if not rows.size or np.all(hi - lo <= tol):
                break
            mid = 0.5 * (lo + hi)
            ok = _admissible(space, A, Pr + mid[:, None] * thr, mid)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        out[rows] = 0.5 * (lo + hi)
    return out


def fan_lengths(space: NormedSpace, world: World, A: Site, anchors: np.ndarray, thetas: np.ndarray,
                cap: float | None, tol: float, chunk: int = 262_144) -> np.ndarray:
    """``T`` for every (anchor, direction) pair, bisected jointly."""
    M, N = len(anchors), len(thetas)
    upper = np.stack([np.atleast_1d(np.asarray(world.ray_exit(a, thetas), dtype=float)) for a in anchors])
    if cap is not None:
        upper = np.minimum(upper, cap)
    P = np.repeat(anchors, N, axis=0)
    TH = np.tile(thetas, (M, 1))
    U = upper.ravel()
    out = np.empty(M * N)
    for s in range(0, M * N, chunk):
        out[s:s + chunk] = _bisect(space, A, P[s:s + chunk], TH[s:s + chunk], U[s:s + chunk], tol)
    return out.reshape(M, N)


def dominance_gap(config: Configuration, k: int, x):
    """``d(x, P_k) - d(x, A_k)``; nonpositive exactly on the cell of site k."""
    X = np.asarray(x, dtype=float)
    if not np.all(config.world.contains(X)):
        raise PointOutsideWorld("dominance is only defined inside the world")
    X2 = np.atleast_2d(X)
    gap = config.sites[k].dist(config.space, X2) - config.others(k).dist(config.space, X2)
    return float(gap[0]) if X.ndim == 1 else gap


def _cap(config: Configuration) -> float | None:
    if config.world.bounded:
        return config.rho
    return None if config.rho_override is None else float(config.rho_override)


def compute_T(config: Configuration, k: int, p, theta, tol: float | None = None) -> float:
    """Length of the maximal segment from anchor ``p`` of site k in
    direction ``theta`` (a scene-norm unit vector) that stays in the cell."""
    space = config.space
    p = np.asarray(p, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if abs(float(space.norm(theta)) - 1.0) > 1e-9:
        raise DomainError("theta must be a unit vector of the scene norm")
    config.world._require_inside(p)
    if config.sites[k].dist(space, p[None, :])[0] > 1e-9 * config.world.scale:
        raise DomainError("anchor does not lie on the site")
    A = config.others(k)
    if A.dist(space, p[None, :])[0] <= 0.0:
        raise AnchorOnOtherSite("anchor lies on another site")
    T = float(ray_lengths(space, config.world, A, p, theta[None, :], _cap(config), tol)[0])
    if not math.isfinite(T):
        raise UnboundedWorld("T is infinite; this ray never leaves the cell")
    return T


# ---------------------------------------------------------------------------
# direction sets


def direction_set(space: NormedSpace, n: int, seed: int = 0) -> np.ndarray:
    """``n`` directions, uniform on the Euclidean sphere, scaled to scene
    norm one.

    In the plane they are ordered by angle.  When ``n`` is a multiple of 4
    the set is exactly invariant under quarter turns, and for multiples of
    8 also under the diagonal reflection, so axis and diagonal directions
    are represented exactly.
    """
    d = space.dim
    if n < 2:
        raise DomainError("need at least two directions")
    if d == 1:
        u = np.array([[1.0], [-1.0]])
    elif d == 2:
        u = _planar_directions(n)
    elif d == 3:
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        r = np.sqrt(1.0 - z * z)
        phi = math.pi * (3.0 - math.sqrt(5.0)) * i
        u = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        g = np.random.default_rng(seed).standard_normal((n, d))
        u = g / np.linalg.norm(g, axis=1, keepdims=True)
    return space.unit(u)


def _planar_directions(n: int) -> np.ndarray:
    if n % 4:
        a = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    q = n // 4
    a = 2.0 * np.pi * np.arange(q) / n
    base = np.stack([np.cos(a), np.sin(a)], axis=1)
    if n % 8 == 0:
        h = q // 2
        base[h] = math.sqrt(0.5)
        base[h + 1:] = base[1:h][::-1, ::-1]
    quads = [base]
    for _ in range(3):
        b = quads[-1]
        quads.append(np.stack([-b[:, 1], b[:, 0]], axis=1))
    return np.concatenate(quads)


# ---------------------------------------------------------------------------
# cells


def default_anchor_count(space: NormedSpace, site: Site) -> int:
    if site.is_finite:
        return 0
    return int(min(4096, max(8, math.ceil(256 * site.measure(space)))))


def _anchors(space: NormedSpace, site: Site, count: int | None, shares=None):
    """Anchor points, the covering radius of the site by them, and the
    per-member anchor counts (reusable to lay out a perturbed site alike)."""
    if site.is_finite:
        return site.anchors(space, 0), 0.0, None
    count = default_anchor_count(space, site) if count is None else int(count)
    members = getattr(site, "members", [site])
    if shares is not None and len(shares) < len(members):
        # members added by a reshape get their own default share
        shares = tuple(shares) + (None,) * (len(members) - len(shares))
    elif shares is not None and len(shares) != len(members):
        shares = None
    total = sum(m.measure(space) for m in members) or 1.0
    pts, spacing, used = [], 0.0, []
    for i, m in enumerate(members):
        if m.is_finite:
            pts.append(m.anchors(space, 0))
            used.append(0)
            continue
        share = shares[i] if shares is not None and shares[i] is not None else \
            max(4, int(round(count * m.measure(space) / total)))
        used.append(share)
        a = m.anchors(space, share)
        if isinstance(m, Disc) or m.kind == "box":
            centre = m.center if isinstance(m, Disc) else 0.5 * (m.lo + m.hi)
            # the centre's rays sweep the interior; the boundary handles the rest
            a = np.vstack([a, centre])
            gaps = space.norm(np.roll(a[:-1], -1, axis=0) - a[:-1])
        else:
            gaps = space.norm(np.diff(a, axis=0))
        pts.append(a)
        if gaps.size:
            spacing = max(spacing, 0.5 * float(gaps.max()))
    return np.concatenate(pts), spacing, tuple(used)


class HausdorffEstimate(NamedTuple):
    value: float
    resolution: float


@dataclass
class CellApprox:
    """Fan representation of one Voronoi cell.

    ``lengths[i, j]`` is ``T`` for anchor ``anchors[i]`` and direction
    ``thetas[j]``.
    """

    config: Configuration
    k: int
    anchors: np.ndarray
    thetas: np.ndarray
    lengths: np.ndarray
    anchor_spacing: float = 0.0
    tol: float = 0.0
    anchor_shares: tuple | None = None
    _gap: float | None = field(default=None, repr=False)

    @property
    def space(self) -> NormedSpace:
        return self.config.space

    @property
    def n_directions(self) -> int:
        return len(self.thetas)

    def endpoints(self) -> np.ndarray:
        return self.anchors[:, None, :] + self.lengths[:, :, None] * self.thetas[None, :, :]

    def ray_gap(self) -> float:
        """Largest distance between the far ends of neighbouring rays of
        one anchor, measured at the longer of the two lengths."""
        if self._gap is None:
            sp = self.space
            if sp.dim == 2:
                nb = np.roll(np.arange(self.n_directions), -1)
                step = sp.norm(self.thetas - self.thetas[nb])
                longer = np.maximum(self.lengths, self.lengths[:, nb])
                self._gap = float((longer * step).max())
            else:
                d, j = cKDTree(self.thetas).query(self.thetas, k=2)
                step = sp.norm(self.thetas - self.thetas[j[:, 1]])
                # nearest-neighbour spacing under-estimates the covering
                # radius of scattered directions; doubled as a margin
                self._gap = float((2.0 * self.lengths * step).max())
        return self._gap

    @property
    def resolution(self) -> float:
        """Radius within which every cell point is expected to lie near the fan."""
        return 0.5 * 1.05 * self.ray_gap() + self.anchor_spacing + self.tol

    @property
    def hausdorff_resolution(self) -> float:
        return self.ray_gap() + self.anchor_spacing + self.tol

    def to_dict(self) -> dict:
        fans = []
        for a, row in zip(self.anchors, self.lengths):
            rays = [{"theta": th.tolist(), "T": float(t)} for th, t in zip(self.thetas, row)]
            fans.append({"p": a.tolist(), "rays": rays})
        return {"k": self.k, "fans": fans}


def build_cell(config: Configuration, k: int, directions: int | None = None, anchors: int | None = None,
               tol: float | None = None, seed: int = 0, anchor_shares=None) -> CellApprox:
    """Fan approximation of the cell of site ``k``."""
    space = config.space
    if directions is None:
        directions = 720 if space.dim == 2 else 4096
    if directions < 4:
        raise DomainError("need at least 4 directions")
    tol = default_tol(config.world, space) if tol is None else tol
    thetas = direction_set(space, directions, seed)
    anchor_pts, spacing, shares = _anchors(space, config.sites[k], anchors, anchor_shares)
    A = config.others(k)
    if np.any(A.dist(space, anchor_pts) <= 0.0):
        raise AnchorOnOtherSite(f"site {k} touches another site")
    cap = _cap(config)
    lengths = fan_lengths(space, config.world, A, anchor_pts, thetas, cap, tol)
    if not np.all(np.isfinite(lengths)):
        raise UnboundedWorld("the cell is unbounded in some direction")
    return CellApprox(config, k, anchor_pts, thetas, lengths, spacing, tol, shares)


def build_cells(config: Configuration, directions: int | None = None, anchors: int | None = None,
                tol: float | None = None, seed: int = 0) -> list[CellApprox]:
    return [build_cell(config, k, directions, anchors, tol, seed) for k in range(config.K)]


def fan_distance(cell: CellApprox, x) -> np.ndarray:
    """Scene distance from points to the union of the cell's segments."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    best = np.full(len(X), np.inf)
    ends = cell.endpoints()
    chunk = max(1, 2_000_000 // max(1, cell.n_directions))
    for a, e in zip(cell.anchors, ends):
        for s in range(0, len(X), chunk):
            xs = X[s:s + chunk]
            d, _ = segment_distance(cell.space, xs[:, None, :], a, e[None, :, :])
            best[s:s + chunk] = np.minimum(best[s:s + chunk], d.min(axis=1))
    return best


def cell_membership(cell: CellApprox, x, radius: float | None = None):
    """Whether ``x`` lies within ``radius`` (default: the cell resolution)
    of the fan.

    In the plane only rays whose angle is close to the direction of ``x``
    from the anchor can come within ``radius``; those are found with an
    angular window before any norm minimization.
    """
    X = np.asarray(x, dtype=float)
    X2 = np.atleast_2d(X)
    r = cell.resolution if radius is None else float(radius)
    sp = cell.space
    inside = np.zeros(len(X2), dtype=bool)
    if sp.dim != 2:
        inside = fan_distance(cell, X2) <= r
        return bool(inside[0]) if X.ndim == 1 else inside
    lo_c, hi_c = sp.equivalence_constants()
    r2 = r / lo_c  # Euclidean radius containing the scene ball of radius r
    ang_th = np.arctan2(cell.thetas[:, 1], cell.thetas[:, 0])
    order = np.argsort(ang_th)
    ang_sorted = ang_th[order]
    n = len(order)
    for a, row in zip(cell.anchors, cell.lengths):
        todo = ~inside
        if not np.any(todo):
            break
        idx = np.flatnonzero(todo)
        v = X2[idx] - a
        near = sp.norm(v) <= r
        inside[idx[near]] = True
        idx, v = idx[~near], v[~near]
        if not idx.size:
            continue
        e = np.linalg.norm(v, axis=1)
        half = np.where(r2 >= e, np.pi, np.arcsin(np.minimum(1.0, r2 / np.maximum(e, 1e-300))))
        phi = np.arctan2(v[:, 1], v[:, 0])
        # directions are uniform in Euclidean angle, so a window of
        # +-half radians is a window of indices around phi
        centre = np.searchsorted(ang_sorted, phi)
        w = np.ceil(half * n / (2 * np.pi)).astype(int) + 2
        w = np.minimum(w, n // 2)
        width = 2 * w + 1
        first = centre - w
        total = int(width.sum())
        if total == 0:
            continue
        owner = np.repeat(np.arange(idx.size), width)
        offs = np.arange(total) - np.repeat(np.cumsum(width) - width, width)
        ray = order[(np.repeat(first, width) + offs) % n]
        xs, ends = X2[idx[owner]], a + row[ray, None] * cell.thetas[ray]
        # Euclidean distance brackets the scene distance; only the
        # ambiguous pairs need the exact minimization
        d2, _ = segment_distance(_EUCLID[2], xs, a, ends)
        close = lo_c * d2 <= r
        sure = close & (hi_c * d2 <= r)
        unsure = np.flatnonzero(close & ~sure)
        if unsure.size:
            d, _ = segment_distance(sp, xs[unsure], a, ends[unsure])
            sure[unsure] = d <= r
        hit = np.zeros(idx.size, dtype=bool)
        np.logical_or.at(hit, owner, sure)
        inside[idx[hit]] = True
    return bool(inside[0]) if X.ndim == 1 else inside


def _check_comparable(a: CellApprox, b: CellApprox) -> None:
    if a.space != b.space:
        raise ResolutionMismatch("cells use different norms")
    if a.config.world.to_dict() != b.config.world.to_dict():
        raise ResolutionMismatch("cells live in different worlds")
    if a.n_directions != b.n_directions or not np.allclose(a.thetas, b.thetas, rtol=0, atol=1e-12):
        raise ResolutionMismatch("cells were built with different direction sets")


def point_set_hausdorff(space: NormedSpace, P: np.ndarray, Q: np.ndarray) -> float:
    """Exact Hausdorff distance between two finite point sets."""
    kp = space.p if np.isfinite(space.p) else np.inf
    d1, _ = cKDTree(Q).query(P, p=kp)
    d2, _ = cKDTree(P).query(Q, p=kp)
    return float(max(d1.max(), d2.max()))


def _direction_windows(thetas: np.ndarray, width: int) -> np.ndarray:
    """Indices of the ``2 width + 1`` directions around each direction."""
    n = len(thetas)
    k = min(n, 2 * width + 1)
    if thetas.shape[1] == 2:
        # planar sets are ordered by angle
        off = np.arange(-(k // 2), k - k // 2)
        return (np.arange(n)[:, None] + off[None, :]) % n
    return cKDTree(thetas).query(thetas, k=k)[1].reshape(n, k)


def _directed_fan_bound(a: CellApprox, b: CellApprox, h: float, near: int = 8, width: int = 4) -> float:
    """Upper bound on ``sup_{x in fan a} d(x, fan b)``.

    Segment ``[p, p + s theta]`` is within ``max(|p - q|, |p + s theta - q - t theta|)``
    of ``[q, q + t theta]``, so pairing every ray of ``a`` with the same
    direction at a few nearby anchors of ``b`` bounds its distance to fan
    ``b``.  Rays whose bound could still raise the maximum are then sampled
    at spacing at most ``h`` and measured against a window of neighbouring
    segments of ``b``; half the sample spacing is added back, so the result
    stays an upper bound.  Rays are refined in decreasing order of their
    bound and the scan stops once no remaining ray can matter.
    """
    sp = a.space
    A, B = a.anchors, b.anchors
    EA, EB = a.endpoints(), b.endpoints()
    nq = min(near, len(B))
    knn = cKDTree(B).query(A, k=nq)[1].reshape(len(A), nq)
    # the anchor with the same index first: perturbed fans keep the layout
    cand = np.column_stack([np.minimum(np.arange(len(A)), len(B) - 1), knn])
    bound = np.full(EA.shape[:2], np.inf)
    for c in range(cand.shape[1]):
        q = cand[:, c]
        da = sp.norm(A - B[q])
        de = sp.norm(EA - EB[q])
        bound = np.minimum(bound, np.maximum(da[:, None], de))
    flat = bound.ravel()
    loose = flat > 0.5 * h
    best = float(flat[~loose].max()) if np.any(~loose) else 0.0
    order = np.flatnonzero(loose)
    order = order[np.argsort(-flat[order], kind="stable")]
    win = _direction_windows(a.thetas, width) if order.size else None
    n = a.n_directions
    for r in order:
        if flat[r] <= best:
            break
        i, j = divmod(int(r), n)
        T = float(a.lengths[i, j])
        m = max(1, int(math.ceil(T / h)))
        pts = A[i] + (np.arange(m + 1) / m)[:, None] * (EA[i, j] - A[i])
        qs, js = np.unique(cand[i]), win[j]
        starts = np.repeat(B[qs], len(js), axis=0)
        ends = EB[qs][:, js].reshape(-1, sp.dim)
        d, _ = segment_distance(sp, pts[:, None, :], starts[None], ends[None])
        best = max(best, min(float(flat[r]), float(d.min(axis=1).max()) + 0.5 * T / m))
    return best


def cell_hausdorff(a: CellApprox, b: CellApprox, spacing: float | None = None) -> HausdorffEstimate:
    """Hausdorff distance between two cells, measured on their fans.

    The value is an upper bound on the Hausdorff distance between the two
    fans (see :func:`_directed_fan_bound`); ``spacing`` is the sampling step
    used where the ray-pairing bound is loose (default: world diameter
    / 1000).  The resolution is the average fan-to-cell resolution.
    """
    _check_comparable(a, b)
    if spacing is None:
        spacing = a.config.world.diameter(a.space) / 1000.0
    value = max(_directed_fan_bound(a, b, spacing), _directed_fan_bound(b, a, spacing))
    res = 0.5 * (a.hausdorff_resolution + b.hausdorff_resolution)
    return HausdorffEstimate(value, res)


# ---------------------------------------------------------------------------
# brute-force oracles


def grid(world: World, n: int) -> np.ndarray:
    """Regular ``n``-per-axis grid over the world's bounding box, clipped to the world."""
    lo, hi = world.bounds()
    axes = [np.linspace(l, h, n) for l, h in zip(lo, hi)]
    pts = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(lo), -1).T
    return pts[world.contains(pts)]


def rasterize_cell(config: Configuration, k: int, n: int = 401, points: np.ndarray | None = None) -> np.ndarray:
    """Grid points of the cell, by the exact dominance predicate."""
    pts = grid(config.world, n) if points is None else points
    gap = config.sites[k].dist(config.space, pts) - config.others(k).dist(config.space, pts)
    return pts[gap <= TIE_RTOL * np.maximum(1.0, np.abs(gap))]


def cell_volume(cell: CellApprox, mc_samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo volume of the cell with its standard error.  Uses the
    exact dominance predicate on world-uniform samples."""
    return cell_volume_mc(cell.config, cell.k, mc_samples, seed)


def cell_volume_mc(config: Configuration, k: int, mc_samples: int = 100_000, seed: int = 0) -> tuple[float, float]:
    world = config.world
    world._require_bounded()
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    P, A = config.sites[k], config.others(k)
    while done < mc_samples:
        m = min(200_000, mc_samples - done)
        x = world.sample(rng, m)
        hits += int(np.count_nonzero(P.dist(config.space, x) <= A.dist(config.space, x)))
        done += m
    f = hits / mc_samples
    vol = world.volume
    return vol * f, vol * math.sqrt(f * (1.0 - f) / mc_samples)
