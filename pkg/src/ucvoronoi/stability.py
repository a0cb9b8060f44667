"""Explicit stability radii, perturbation experiments and the failure cases."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from .cells import (
    CellApprox,
    build_cell,
    build_cells,
    cell_hausdorff,
    point_set_hausdorff,
    rasterize_cell,
)
from .errors import (
    DomainError,
    EpsilonExceedsBoundaryBound,
    EpsilonTooLarge,
    EtaZero,
    NotUniformlyConvex,
    PreconditionViolated,
    SitesTouchBoundary,
    UnboundedWorld,
    UnknownScenario,
)
from .sites import BoxSite, Configuration, Disc, Points, Segment, Site, Union, hausdorff
from .space import NormedSpace
from .world import Box


@dataclass(frozen=True)
class StabilityCertificate:
    epsilon: float
    eta: float
    rho: float
    rho_margin: float
    rho_source: str
    delta_value: float
    C: float
    Delta: float
    lam: float
    regime: str
    boundary_gap: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def certificate_constants(space: NormedSpace, epsilon: float, eta: float, rho: float,
                          boundary_gap: float | None = None) -> dict:
    """Raw constants of the stability radius for given ``eta``, ``rho``.

    Without ``boundary_gap`` the radius is quadratic in ``epsilon``; with a
    positive distance from the sites to the world boundary it is linear.
    No preconditions are checked here.
    """
    delta_value = float(space.delta(eta / (12.0 * rho + 5.0 * eta)))
    lam = 0.5 * epsilon * delta_value
    if boundary_gap is None:
        C = delta_value / (16.0 * (rho + 5.0 * eta / 12.0))
        Delta = min(C * epsilon ** 2, 0.5 * epsilon)
    else:
        C = min(delta_value / 16.0, boundary_gap / (8.0 * (rho + eta / 6.0)))
        Delta = C * epsilon
    return {"delta_value": delta_value, "C": C, "Delta": Delta, "lam": lam}


def _common_checks(config: Configuration, epsilon: float):
    space = config.space
    if not space.is_uniformly_convex():
        raise NotUniformlyConvex(f"{space.kind} is not uniformly convex; no stability radius exists")
    if not epsilon > 0:
        raise DomainError("epsilon must be positive")
    eta = config.eta()
    if eta <= 0:
        raise EtaZero("two sites touch (eta = 0)")
    if not config.world.bounded and config.rho_override is None:
        raise UnboundedWorld("unbounded world: supply rho in the scene")
    return eta, config.rho_info()


def certify(config: Configuration, epsilon: float) -> StabilityCertificate:
    """Stability radius ``Delta`` for cell tolerance ``epsilon`` (quadratic regime)."""
    eta, rho = _common_checks(config, epsilon)
    if not epsilon < eta / 6.0:
        raise EpsilonTooLarge(f"epsilon must be below eta/6 = {eta / 6.0}")
    c = certificate_constants(config.space, epsilon, eta, rho.value)
    return StabilityCertificate(epsilon, eta, rho.value, rho.margin, rho.source, regime="general", **c)


def sites_boundary_gap(config: Configuration) -> float:
    world = config.world
    world._require_bounded()
    return min(world.boundary_distance(config.space, s) for s in config.sites)


def certify_interior(config: Configuration, epsilon: float) -> StabilityCertificate:
    """Linear stability radius for sites kept away from the world boundary."""
    eta, rho = _common_checks(config, epsilon)
    gap = sites_boundary_gap(config)
    if gap <= 0:
        raise SitesTouchBoundary("a site touches the world boundary")
    if epsilon > eta / 6.0:
        raise EpsilonTooLarge(f"epsilon must not exceed eta/6 = {eta / 6.0}")
    if epsilon > 8.0 * gap:
        raise EpsilonExceedsBoundaryBound(f"epsilon must not exceed 8 * boundary gap = {8.0 * gap}")
    c = certificate_constants(config.space, epsilon, eta, rho.value, gap)
    return StabilityCertificate(epsilon, eta, rho.value, rho.margin, rho.source, regime="interior",
                                boundary_gap=gap, **c)


class StrictSegment(NamedTuple):
    r: float
    holds: bool


def strict_segment_bound(space: NormedSpace, A: Site, p, y, x, sigma: float,
                         tol: float = 1e-12) -> StrictSegment:
    """Margin ``r`` by which a point ``x`` of ``[p, y)`` is strictly closer
    to ``p`` than to ``A``, given that ``y`` is no closer to ``A`` than to ``p``.

    ``r = min(sigma, 0.4 d(p,A), d(y,x) delta(d(p,A) / (10 (d(x,A) + sigma + d(y,x)))))``;
    ``holds`` reports whether ``d(x,p) < d(x,A) - r`` is actually true.
    """
    if not space.is_uniformly_convex():
        raise PreconditionViolated("uniform convexity: the norm is not uniformly convex")
    p, y, x = (np.asarray(v, dtype=float) for v in (p, y, x))
    if not sigma > 0:
        raise PreconditionViolated("sigma > 0")
    dpA = float(A.dist(space, p[None, :])[0])
    if dpA <= 0:
        raise PreconditionViolated("d(p, A) > 0")
    dyA = float(A.dist(space, y[None, :])[0])
    dyp = float(space.norm(y - p))
    if dyp > dyA * (1.0 + tol) + tol:
        raise PreconditionViolated("d(y, p) <= d(y, A)")
    u = y - p
    uu = float(u @ u)
    s = float((x - p) @ u / uu) if uu > 0 else 0.0
    scale = max(1.0, float(np.abs(np.concatenate([p, y])).max()))
    if uu == 0 or np.linalg.norm(x - p - s * u) > 1e-9 * scale or s < -1e-12 or s >= 1.0:
        if not (uu > 0 and np.allclose(x, p, rtol=0, atol=1e-15 * scale)):
            raise PreconditionViolated("x lies on the half-open segment [p, y)")
    dxA = float(A.dist(space, x[None, :])[0])
    dyx = float(space.norm(y - x))
    arg = min(2.0, dpA / (10.0 * (dxA + sigma + dyx)))
    r = min(sigma, 0.4 * dpA, dyx * float(space.delta(arg)))
    return StrictSegment(r, bool(float(space.norm(x - p)) < dxA - r))


# ---------------------------------------------------------------------------
# perturbations


def _random_unit(space: NormedSpace, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal(space.dim)
    while not np.any(g):
        g = rng.standard_normal(space.dim)
    return space.unit(g)


def _jitter(space, rng, v, budget):
    return v + rng.uniform(0.0, budget) * _random_unit(space, rng)


def perturb_site(space: NormedSpace, site: Site, Delta: float, rng: np.random.Generator,
                 mode: str = "jitter") -> Site:
    """A random site within Hausdorff distance ``Delta * (1 - 1e-6)`` of ``site``.

    ``mode="jitter"`` moves every point / endpoint / centre independently;
    ``mode="reshape"`` also adds a new point near the site, changing its shape.
    """
    b = Delta * (1.0 - 1e-6)
    if isinstance(site, Union):
        out = Union([perturb_site(space, m, Delta, rng, "jitter") for m in site.members])
    elif isinstance(site, Points):
        out = Points([_jitter(space, rng, c, b) for c in site.coords])
    elif isinstance(site, Segment):
        out = Segment(_jitter(space, rng, site.a, b), _jitter(space, rng, site.b, b))
    elif isinstance(site, Disc):
        # |c - c'| + |r - r'| bounds the Hausdorff distance of two balls
        dr = rng.uniform(-0.5 * b, 0.5 * b)
        out = Disc(_jitter(space, rng, site.center, 0.5 * b), max(0.0, site.radius + dr))
    elif isinstance(site, BoxSite):
        # corners move by at most b/2 in every coordinate
        h = 0.5 * b / space.norm(np.ones(space.dim))
        out = BoxSite(site.lo + rng.uniform(-h, h, site.dim), site.hi + rng.uniform(-h, h, site.dim))
    else:
        raise DomainError(f"cannot perturb site kind {site.kind!r}")
    if mode == "reshape":
        anchor = site.anchors(space, 8)
        extra = _jitter(space, rng, anchor[rng.integers(len(anchor))], b)
        out = Union([out, Points(extra)])
    elif mode != "jitter":
        raise DomainError(f"unknown perturbation mode {mode!r}")
    return out


def perturb_sites(config: Configuration, Delta: float, rng: np.random.Generator, mode: str = "jitter",
                  attempts: int = 20) -> tuple[list[Site], list[float]]:
    """Perturbed sites and their verified Hausdorff distances to the originals.

    Every candidate is measured with :func:`hausdorff` and regenerated
    unless the measurement is below ``Delta`` and, for continuous sites,
    either the measurement plus its sampling error or the analytic bound
    of the jitter is below ``Delta`` too.
    """
    sites, sizes = [], []
    for s in config.sites:
        for _ in range(attempts):
            cand = perturb_site(config.space, s, Delta, rng, mode)
            h = hausdorff(config.space, s, cand)
            if h.value < Delta and (h.value + h.error < Delta or _jitter_bound(config.space, s, cand) < Delta):
                break
        else:
            raise DomainError("could not generate a perturbation below Delta")
        sites.append(cand)
        sizes.append(float(h.value))
    return sites, sizes


def _jitter_bound(space: NormedSpace, s: Site, cand: Site) -> float:
    """Upper bound on the Hausdorff distance between a site and its jittered
    copy of the same kind (inf when no bound applies)."""
    if isinstance(cand, Union) or isinstance(s, Union):
        own = s.members if isinstance(s, Union) else [s]
        got = cand.members if isinstance(cand, Union) else [cand]
        if len(got) == len(own) + 1 and isinstance(got[-1], Points):
            # reshaped: H(s, s' + {e}) <= max(H(s, s'), d(e, s))
            core = max(_jitter_bound(space, a, b) for a, b in zip(own, got))
            return max(core, float(s.dist(space, got[-1].coords).max()))
        if len(got) != len(own):
            return math.inf
        return max(_jitter_bound(space, a, b) for a, b in zip(own, got))
    if isinstance(s, Points):
        return float(space.norm(s.coords - cand.coords).max())
    if isinstance(s, Segment):
        return float(max(space.norm(s.a - cand.a), space.norm(s.b - cand.b)))
    if isinstance(s, Disc):
        return float(space.norm(s.center - cand.center)) + abs(s.radius - cand.radius)
    if isinstance(s, BoxSite):
        return float(max(space.norm(np.abs(s.lo - cand.lo) + np.abs(s.hi - cand.hi)), 0.0))
    return math.inf


# ---------------------------------------------------------------------------
# experiments


@dataclass
class TrialRecord:
    index: int
    seed: int
    site_perturbations: list
    cell_distances: list
    resolutions: list
    passed: bool


@dataclass
class ExperimentReport:
    certificate: StabilityCertificate
    directions: int
    anchors: int | None
    resolution: float
    resolution_target: float
    seed: int
    mode: str
    trials: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.trials)

    @property
    def failures(self) -> int:
        return sum(not t.passed for t in self.trials)

    def to_dict(self) -> dict:
        return {
            "certificate": self.certificate.to_dict(),
            "directions": self.directions,
            "anchors": self.anchors,
            "resolution": self.resolution,
            "resolution_target": self.resolution_target,
            "resolution_ok": self.resolution < self.resolution_target,
            "seed": self.seed,
            "mode": self.mode,
            "passed": self.passed,
            "failures": self.failures,
            "trials": [asdict(t) for t in self.trials],
        }


def _thread_count() -> int:
    n = int(os.environ.get("UCV_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _resolved_cells(config, epsilon, directions, anchors, max_directions, target, tol):
    n = directions or (4096 if config.space.dim == 2 else 8192)
    while True:
        cells = build_cells(config, n, anchors, tol)
        res = max(c.hausdorff_resolution for c in cells)
        if directions is not None or res < target or 2 * n > max_directions:
            return cells, n, res
        n *= 2


def _anchor_count(config: Configuration, epsilon: float) -> int | None:
    if all(s.is_finite for s in config.sites):
        return None
    # anchor covering radius <= eps / 40, a quarter of the resolution target
    need = max(math.ceil(s.measure(config.space) * 20.0 / epsilon) for s in config.sites)
    return int(min(4096, max(need, 8)))


def run_experiment(config: Configuration, epsilon: float, trials: int = 20, seed: int = 0,
                   mode: str = "jitter", interior: bool = False, directions: int | None = None,
                   anchors: int | None = None, max_directions: int = 1 << 17,
                   zero: bool = False) -> ExperimentReport:
    """Perturb every site by less than the certified ``Delta`` and measure how
    far each cell moves.

    A trial passes when every measured cell distance is below ``epsilon``
    plus the measurement resolution.  The direction count is doubled until
    the resolution is below ``epsilon / 10`` (unless ``directions`` is
    fixed).  ``zero=True`` applies the identity perturbation.
    """
    cert = certify_interior(config, epsilon) if interior else certify(config, epsilon)
    target = epsilon / 10.0
    anchors = _anchor_count(config, epsilon) if anchors is None else anchors
    tol = min(1e-10 * config.world.diameter(config.space), 1e-6 * epsilon)
    base, n, res = _resolved_cells(config, epsilon, directions, anchors, max_directions, target, tol)
    report = ExperimentReport(cert, n, anchors, res, target, seed, "zero" if zero else mode)
    seeds = np.random.SeedSequence(seed).spawn(trials)
    # the perturbed sites stay within Delta of the originals, so rho grows by at most Delta
    rho = cert.rho + cert.Delta

    def one(i: int) -> TrialRecord:
        rng = np.random.default_rng(seeds[i])
        if zero:
            sites, sizes = list(config.sites), [0.0] * config.K
        else:
            sites, sizes = perturb_sites(config, cert.Delta, rng, mode)
        moved = Configuration(config.space, config.world, sites, rho)
        dists, ress = [], []
        for k, cell in enumerate(base):
            other = build_cell(moved, k, n, anchors, tol, anchor_shares=cell.anchor_shares)
            h = cell_hausdorff(cell, other)
            dists.append(h.value)
            ress.append(h.resolution)
        ok = all(s < cert.Delta for s in sizes) or zero
        passed = ok and all(d < epsilon + r for d, r in zip(dists, ress))
        return TrialRecord(i, int(seeds[i].generate_state(1)[0]), sizes, dists, ress, bool(passed))

    with ThreadPoolExecutor(max_workers=min(_thread_count(), max(1, trials))) as pool:
        report.trials = list(pool.map(one, range(trials)))
    return report


# ---------------------------------------------------------------------------
# failure cases


FIG5_SITES = [(0.0, 0.0), (2.0, 0.0), (-2.0, 0.0), (0.0, -2.0)]


def linf_square_config(beta: float = 0.0) -> Configuration:
    pts = [(beta, beta)] + FIG5_SITES[1:]
    return Configuration(NormedSpace.linf(2), Box([-10, -10], [10, 10]), [Points(p) for p in pts])


def lower_long_rays(cell: CellApprox, length: float = 5.0) -> int:
    """Rays of the cell pointing downwards whose length exceeds ``length``."""
    return int(np.count_nonzero((cell.thetas[None, :, 1] < 0) & (cell.lengths > length)))


def counterexample(name: str, beta: float | None = None, grid_points: int = 401) -> dict:
    """Run one of the known instability scenarios and measure it."""
    runners = {
        "linf_square": _linf_square,
        "eta_zero": _eta_zero,
        "eta_zero_rectangle": _eta_zero_rectangle,
        "rho_unbounded": _rho_unbounded,
    }
    if name not in runners:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {sorted(runners)}")
    return runners[name](beta, grid_points)


def _grid_cell_distance(a: Configuration, b: Configuration, k: int, n: int) -> float:
    return point_set_hausdorff(a.space, rasterize_cell(a, k, n), rasterize_cell(b, k, n))


def _linf_square(beta, n):
    beta = 0.05 if beta is None else float(beta)
    base, moved = linf_square_config(0.0), linf_square_config(beta)
    D = _grid_cell_distance(base, moved, 0, n)
    site_D = hausdorff(base.space, base.sites[0], moved.sites[0]).value
    fan0, fan1 = build_cell(base, 0, 720), build_cell(moved, 0, 720)
    return {
        "name": "linf_square",
        "beta": beta,
        "site_distance": site_D,
        "cell_distance": D,
        "amplification": D / site_D if site_D > 0 else math.inf,
        "lower_rays_before": lower_long_rays(fan0),
        "lower_rays_after": lower_long_rays(fan1),
        "grid_points": n,
        "unstable": bool(D >= 1.0 and D / site_D >= 20.0),
    }


def _eta_zero(beta, n):
    beta = 0.01 if beta is None else float(beta)
    space, world = NormedSpace.euclidean(2), Box([-10, -10], [10, 10])
    apart = Configuration(space, world, [Points((0, beta)), Points((0, -beta))])
    merged = Configuration(space, world, [Points((0, 0)), Points((0, 0))])
    D = _grid_cell_distance(apart, merged, 0, n)
    return {
        "name": "eta_zero",
        "beta": beta,
        "site_distance": beta,
        "cell_distance": D,
        "expected": 10.0,
        "grid_points": n,
        "unstable": bool(abs(D - 10.0) <= 0.05),
    }


def _eta_zero_rectangle(beta, n, a: float = 0.5):
    beta = 0.01 if beta is None else float(beta)
    space, world = NormedSpace.euclidean(2), Box([-10, -10], [10, 10])
    line = Segment((-10, 0), (10, 0))

    def config(b):
        return Configuration(space, world, [BoxSite((-a, -10), (a, -b)), line])

    xs = np.linspace(-a, a, 41)
    ys = np.linspace(0.0, 10.0, 201)
    rect = np.array(np.meshgrid(xs, ys)).reshape(2, -1).T

    def contained(b):
        return bool(len(rasterize_cell(config(b), 0, points=rect)) == len(rect))

    before, after = contained(beta), contained(0.0)
    return {
        "name": "eta_zero_rectangle",
        "beta": beta,
        "a": a,
        "site_distance": beta,
        "rectangle_in_cell_beta": before,
        "rectangle_in_cell_zero": after,
        "unstable": bool(before != after),
    }


def _rho_unbounded(beta, n):
    beta = 0.1 if beta is None else float(beta)
    space, world = NormedSpace.euclidean(2), Box.plane(2)
    flat = Configuration(space, world, [Points((0, 1)), Points((0, -1))])
    tilted = Configuration(space, world, [Points((beta, 1)), Points((0, -1))])
    try:
        tilted.rho_info()
        rho = "finite"
    except UnboundedWorld:
        rho = "unbounded"
    # points on the tilted bisector far to the right lie in the tilted cell
    # of site 0 but ever farther below the flat cell {y >= 0}
    witnesses = []
    for L in 10.0 ** np.arange(1, 7):
        w = np.array([L, (beta ** 2 / 2.0 - beta * L) / 2.0])
        gap = float(tilted.sites[0].dist(space, w[None])[0] - tilted.others(0).dist(space, w[None])[0])
        flat_gap = float(flat.sites[0].dist(space, w[None])[0] - flat.others(0).dist(space, w[None])[0])
        witnesses.append({"x": w.tolist(), "gap_tilted": gap, "distance_to_flat_cell": abs(float(w[1])),
                          "in_flat_cell": flat_gap <= 0})
    dists = [w["distance_to_flat_cell"] for w in witnesses]
    grows = all(b > a for a, b in zip(dists, dists[1:]))
    in_cell = all(abs(w["gap_tilted"]) <= 1e-9 * max(1.0, abs(w["x"][0])) for w in witnesses)
    return {
        "name": "rho_unbounded",
        "beta": beta,
        "site_distance": beta,
        "rho": rho,
        "cell_distance": "inf",
        "witnesses": witnesses,
        "unstable": bool(grows and in_cell and dists[-1] > 1e4),
    }
