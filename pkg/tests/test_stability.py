import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ucvoronoi.cells import compute_T, direction_set
from ucvoronoi.errors import (
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
from ucvoronoi.sites import BoxSite, Configuration, Disc, Points, Segment, Union, hausdorff
from ucvoronoi.space import NormedSpace
from ucvoronoi.stability import (
    certificate_constants,
    certify,
    certify_interior,
    counterexample,
    perturb_site,
    perturb_sites,
    run_experiment,
    strict_segment_bound,
)
from ucvoronoi.world import Box

E2 = NormedSpace.euclidean()


def pair(world=Box([-10, -10], [10, 10]), space=E2, rho=10.0):
    # eta = 6
    return Configuration(space, world, [Points([[-3, 0]]), Points([[3, 0]])], rho_override=rho)


def mp_delta2(eps):
    mpmath.mp.dps = 40
    return 1 - mpmath.sqrt(1 - (mpmath.mpf(eps) / 2) ** 2)


def test_certificate_example():
    c = certify(pair(), 0.5)
    dv = mp_delta2(mpmath.mpf(6) / 150)
    assert c.delta_value == pytest.approx(float(dv), rel=1e-12)
    assert c.C == pytest.approx(float(dv / 200), rel=1e-12)
    assert c.Delta == pytest.approx(float(dv / 200 * mpmath.mpf("0.25")), rel=1e-12)
    assert c.lam == pytest.approx(float(dv / 4), rel=1e-12)
    assert c.regime == "general" and c.rho_source == "override" and c.rho_margin == 0.0
    assert c.to_dict()["lambda"] == c.lam


def test_interior_certificate_example():
    cfg = pair(Box([-8, -8], [8, 8]))
    c = certify_interior(cfg, 0.5)
    dv = mp_delta2(mpmath.mpf(6) / 150)
    assert c.boundary_gap == 5.0
    assert c.C == pytest.approx(float(dv / 16), rel=1e-12)
    assert c.Delta == pytest.approx(float(dv / 32), rel=1e-12)
    assert c.Delta > certify(cfg, 0.5).Delta


def test_certificate_errors():
    with pytest.raises(EpsilonTooLarge):
        certify(pair(), 1.0)
    certify_interior(pair(Box([-8, -8], [8, 8])), 1.0)  # closed bound is allowed
    with pytest.raises(NotUniformlyConvex):
        certify(pair(space=NormedSpace.linf()), 0.5)
    with pytest.raises(DomainError):
        certify(pair(), 0.0)
    touching = Configuration(E2, Box([-10, -10], [10, 10]), [Segment([-1, 0], [1, 0]), Points([[0, 0]])])
    with pytest.raises(EtaZero):
        certify(touching, 0.1)
    with pytest.raises(UnboundedWorld):
        certify(Configuration(E2, Box.plane(), pair().sites), 0.5)
    edge = Configuration(E2, Box([-3, -3], [3, 3]), pair().sites, rho_override=10.0)
    with pytest.raises(SitesTouchBoundary):
        certify_interior(edge, 0.5)
    near = Configuration(E2, Box([-3.01, -3], [3.01, 3]), pair().sites, rho_override=10.0)
    with pytest.raises(EpsilonExceedsBoundaryBound):
        certify_interior(near, 0.5)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_delta_nondecreasing_in_epsilon(p):
    eps = np.linspace(1e-4, 1 - 1e-9, 400)
    D = [certificate_constants(NormedSpace.lp(p), e, 6.0, 10.0)["Delta"] for e in eps]
    assert np.all(np.diff(D) >= 0) and D[0] > 0
    Di = [certificate_constants(NormedSpace.lp(p), e, 6.0, 10.0, 2.0)["Delta"] for e in eps]
    assert np.all(np.diff(Di) > 0)


def test_strict_segment_example():
    A = Points([[2, 0]])
    s = strict_segment_bound(E2, A, [0, 0], [1, 0], [0.5, 0], 1.0)
    assert s.r == pytest.approx(float(mp_delta2(mpmath.mpf(1) / 15) / 2), rel=1e-12)
    assert s.holds
    # x = p
    assert strict_segment_bound(E2, A, [0, 0], [1, 0], [0, 0], 1.0).holds


def test_strict_segment_preconditions():
    A = Points([[2, 0]])
    with pytest.raises(PreconditionViolated, match="d\\(y, p\\)"):
        strict_segment_bound(E2, A, [0, 0], [1.5, 0], [0.5, 0], 1.0)
    with pytest.raises(PreconditionViolated, match="half-open"):
        strict_segment_bound(E2, A, [0, 0], [1, 0], [1, 0], 1.0)
    with pytest.raises(PreconditionViolated, match="half-open"):
        strict_segment_bound(E2, A, [0, 0], [1, 0], [0.5, 0.1], 1.0)
    with pytest.raises(PreconditionViolated, match="sigma"):
        strict_segment_bound(E2, A, [0, 0], [1, 0], [0.5, 0], 0.0)
    with pytest.raises(PreconditionViolated, match="d\\(p, A\\)"):
        strict_segment_bound(E2, A, [2, 0], [1, 0], [1.5, 0], 1.0)
    with pytest.raises(PreconditionViolated, match="uniform"):
        strict_segment_bound(NormedSpace.linf(), A, [0, 0], [1, 0], [0.5, 0], 1.0)


@st.composite
def admissible_triples(draw):
    p = draw(st.sampled_from([1.5, 2.0, 3.0]))
    space = NormedSpace.lp(p)
    pts = draw(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=4))
    A = Points(pts)
    anchor = np.array([draw(st.floats(-5, 5)), draw(st.floats(-5, 5))])
    ang = draw(st.floats(0, 2 * math.pi))
    theta = space.unit(np.array([math.cos(ang), math.sin(ang)]))
    frac = draw(st.floats(0, 1))
    s = draw(st.floats(0, 1 - 1e-6))  # x strictly before y, resolvable in floating point
    sigma = draw(st.floats(1e-3, 5))
    return space, A, anchor, theta, frac, s, sigma


@settings(max_examples=2000, deadline=None)
@given(admissible_triples())
def test_strict_segment_property(args):
    space, A, anchor, theta, frac, s, sigma = args
    if A.dist(space, anchor[None])[0] < 1e-3:
        return
    # y at fraction frac of the maximal dominance segment from the anchor
    lo, hi = 0.0, 50.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid <= A.dist(space, (anchor + mid * theta)[None])[0]:
            lo = mid
        else:
            hi = mid
    y = anchor + frac * lo * theta
    x = anchor + s * (y - anchor)
    if space.norm(y - anchor) < 1e-6:
        return
    assert strict_segment_bound(space, A, anchor, y, x, sigma).holds


def test_lambda_consistency(rng):
    """r from the segment bound is never below the certificate's lambda
    for x at distance eps/2 before the end of a maximal segment."""
    checked = 0
    while checked < 1000:
        space = NormedSpace.lp(float(rng.choice([1.5, 2.0, 3.0])))
        pts = rng.uniform(-8, 8, size=(3, 2))
        cfg = Configuration(space, Box([-10, -10], [10, 10]), [Points(pts[:1]), Points(pts[1:])])
        eta = cfg.eta()
        if eta < 0.5:
            continue
        eps = rng.uniform(0.01, 1.0) * eta / 6
        cert = certify(cfg, eps)
        theta = direction_set(space, 32)[rng.integers(32)]
        T = compute_T(cfg, 0, pts[0], theta)
        if T <= eps / 2:
            continue
        # compute_T returns a bracket midpoint; step back inside the admissible part
        y = pts[0] + (T - 1e-8) * theta
        x = y - 0.5 * eps * theta
        A = cfg.others(0)
        assert A.dist(space, x[None])[0] <= cert.rho
        sb = strict_segment_bound(space, A, pts[0], y, x, eta / 6)
        assert sb.r >= cert.lam * (1 - 1e-9)
        checked += 1


SITES = [Points([[0, 0], [1, 2]]), Segment([0, 0], [3, 1]), Disc([1, 1], 0.5), BoxSite([0, 0], [1, 2]),
         Union([Points([[5, 5]]), Segment([0, 0], [1, 0])])]


@pytest.mark.parametrize("site", SITES, ids=repr)
@pytest.mark.parametrize("mode", ["jitter", "reshape"])
def test_perturbation_stays_within_delta(site, mode, rng):
    for space in (E2, NormedSpace.lp(3)):
        for _ in range(10):
            cand = perturb_site(space, site, 0.05, rng, mode)
            h = hausdorff(space, site, cand)
            assert h.value < 0.05


def test_perturb_sites_reports_sizes(rng):
    cfg = Configuration(E2, Box([-10, -10], [10, 10]), SITES[:4])
    sites, sizes = perturb_sites(cfg, 0.01, rng)
    assert len(sites) == 4 and all(0 <= s < 0.01 for s in sizes)
    with pytest.raises(DomainError):
        perturb_site(E2, SITES[0], 0.1, rng, "explode")


def test_experiment_two_points():
    cfg = Configuration(E2, Box([-10, -10], [10, 10]), [Points([[-1, 0]]), Points([[1, 0]])])
    rep = run_experiment(cfg, 0.3, trials=10, seed=7)
    assert rep.passed and rep.failures == 0
    assert rep.resolution < 0.03
    d = rep.to_dict()
    assert d["resolution_ok"] and len(d["trials"]) == 10
    for t in rep.trials:
        assert all(s < rep.certificate.Delta for s in t.site_perturbations)
        assert all(h < 0.3 for h in t.cell_distances)


def test_experiment_zero_perturbation():
    cfg = Configuration(E2, Box([-10, -10], [10, 10]), [Points([[-1, 0]]), Points([[1, 0]])])
    rep = run_experiment(cfg, 0.3, trials=2, zero=True)
    assert all(h == 0.0 for t in rep.trials for h in t.cell_distances)


def test_experiment_is_deterministic():
    cfg = Configuration(NormedSpace.lp(3), Box([-10, -10], [10, 10]), [Points([[-1, 0]]), Points([[2, 1]])])
    a = run_experiment(cfg, 0.3, trials=3, seed=11, directions=512).to_dict()
    b = run_experiment(cfg, 0.3, trials=3, seed=11, directions=512).to_dict()
    assert a == b


def test_counterexample_eta_zero():
    r = counterexample("eta_zero")
    assert abs(r["cell_distance"] - 10.0) <= 0.05 and r["unstable"]


def test_counterexample_linf_square():
    r = counterexample("linf_square", 0.05)
    assert r["cell_distance"] >= 1.0
    assert r["site_distance"] == pytest.approx(0.05)
    assert r["amplification"] >= 20
    assert r["lower_rays_before"] > 0 and r["lower_rays_after"] == 0
    assert r["unstable"]


def test_counterexample_rectangle_and_rho():
    r = counterexample("eta_zero_rectangle")
    assert r["rectangle_in_cell_beta"] is False and r["rectangle_in_cell_zero"] is True
    r = counterexample("rho_unbounded")
    assert r["cell_distance"] == "inf" and r["rho"] == "unbounded" and r["unstable"]
    with pytest.raises(UnknownScenario):
        counterexample("nope")


def test_experiment_mixed_sites_reshape():
    from pathlib import Path

    from ucvoronoi.scene import load_scene

    scene = load_scene(str(Path(__file__).resolve().parents[1] / "scenes" / "fig3_mixed.json"))
    cfg = scene.configuration()
    # coarse fans keep this quick; the pass rule is still eps + measured resolution
    rep = run_experiment(cfg, 0.6, trials=2, seed=3, mode="reshape", directions=1024, anchors=32)
    assert rep.passed
    assert all(len(t.cell_distances) == 5 for t in rep.trials)
