"""Chord lengths L(theta), the emanation property and continuity of T in theta."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .cells import ray_lengths
from .errors import (
    AnchorOnOtherSite,
    DirectionNotInThetaP,
    EpsilonTooLarge,
    NotUniformlyConvex,
    UnknownScenario,
)
from .sites import Configuration, Points, Segment, Site
from .space import NormedSpace
from .world import Box, Polytope, World


class EmanationResult(NamedTuple):
    holds: bool
    beta: float
    L: float
    checked: int  # directions of Theta_p examined at the returned beta


def chord_length(world: World, p, theta) -> float:
    """``L(theta)``: how far the ray from ``p`` stays in the world."""
    return float(np.atleast_1d(world.ray_exit(np.asarray(p, float), np.asarray(theta, float)))[0])


def in_theta_p(world: World, p, theta) -> bool:
    """Whether the ray from ``p`` in direction ``theta`` meets X beyond ``p``."""
    return chord_length(world, p, theta) > 0.0


def _nearby(space: NormedSpace, theta: np.ndarray, beta: float, count: int, rng) -> np.ndarray:
    """Scene-unit directions at distance below ``beta`` from ``theta``."""
    d = space.dim
    if d == 2:
        # bisect the angular extent of the beta-neighbourhood on each side,
        # then sample that arc densely, ends included
        base = math.atan2(theta[1], theta[0])

        def at(a):
            a = base + np.asarray(a, dtype=float)
            return space.unit(np.stack([np.cos(a), np.sin(a)], axis=-1))

        ends = []
        for side in (-1.0, 1.0):
            lo, hi = 0.0, math.pi
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if space.norm(at(side * mid) - theta) < beta:
                    lo = mid
                else:
                    hi = mid
            ends.append(side * lo)
        u = at(np.linspace(ends[0], ends[1], count))
    else:
        g = rng.standard_normal((count, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        s = beta * rng.uniform(0.0, 1.0, count) ** (1.0 / d)
        u = theta + s[:, None] * g
        u = space.unit(u[np.linalg.norm(u, axis=1) > 0])
    return u[space.norm(u - theta) < beta]


def emanation_check(world: World, p, theta, epsilon: float, direction_samples: int = 512,
                    space: NormedSpace | None = None, candidates=None, beta_min: float = 1e-6,
                    seed: int = 0) -> EmanationResult:
    """Empirical emanation modulus at ``p`` in direction ``theta``.

    Scans ``beta = 2, 1, 1/2, ...`` down to ``beta_min``; at each radius it
    samples directions ``phi`` of Theta_p with ``|phi - theta| < beta`` (plus
    any supplied ``candidates`` within that radius) and accepts the radius
    when every one of them has ``L(phi) >= L(theta) - epsilon``.  Returns the
    first accepted radius, or ``holds=False`` if none is accepted.
    """
    p = np.asarray(p, dtype=float)
    theta = np.asarray(theta, dtype=float)
    space = space or getattr(world, "space", None) or NormedSpace.euclidean(world.dim)
    world._require_inside(p)
    L = chord_length(world, p, theta)
    if not L > 0:
        raise DirectionNotInThetaP("the ray leaves the world immediately")
    cand = None if candidates is None else space.unit(np.atleast_2d(np.asarray(candidates, dtype=float)))
    rng = np.random.default_rng(seed)
    beta = 2.0
    while beta >= beta_min:
        phis = _nearby(space, theta, beta, direction_samples, rng)
        if cand is not None:
            phis = np.vstack([phis, cand[space.norm(cand - theta) < beta]])
        if len(phis):
            Ls = np.atleast_1d(world.ray_exit(p, phis))
            keep = Ls > 0
            ok = bool(np.all(Ls[keep] >= L - epsilon))
            n = int(keep.sum())
        else:
            ok, n = True, 0
        if ok:
            return EmanationResult(True, beta, L, n)
        beta *= 0.5
    return EmanationResult(False, 0.0, L, 0)


# ---------------------------------------------------------------------------
# continuity of T


class TContinuity(NamedTuple):
    lam: float
    Delta: float


def t_continuity_constants(space: NormedSpace, epsilon: float, eta_p: float, rho: float,
                           beta1: float, beta2: float) -> TContinuity:
    """``lambda = 0.5 eps delta(eta_p / (10 (rho + eta_p / 4)))`` and
    ``Delta = min(beta1, beta2, lambda / (4 rho))``."""
    lam = 0.5 * epsilon * float(space.delta(eta_p / (10.0 * (rho + eta_p / 4.0))))
    return TContinuity(lam, min(beta1, beta2, lam / (4.0 * rho)))


def _anchor_eta(config: Configuration, k: int, p) -> float:
    eta_p = float(config.others(k).dist(config.space, np.asarray(p, float)[None, :])[0])
    if eta_p <= 0:
        raise AnchorOnOtherSite("anchor lies on another site")
    return eta_p


def t_continuity_delta(config: Configuration, k: int, p, epsilon: float, beta1: float, beta2: float) -> float:
    """Angular radius within which ``T(., p)`` moves by at most ``epsilon``,
    given the semicontinuity radius ``beta1`` and emanation radius ``beta2``."""
    if not config.space.is_uniformly_convex():
        raise NotUniformlyConvex(f"{config.space.kind} is not uniformly convex")
    eta_p = _anchor_eta(config, k, p)
    if not 0 < epsilon < eta_p / 6.0:
        raise EpsilonTooLarge(f"epsilon must lie in (0, {eta_p / 6.0})")
    return t_continuity_constants(config.space, epsilon, eta_p, config.rho, beta1, beta2).Delta


def _T(config: Configuration, k: int, p, thetas) -> np.ndarray:
    cap = config.rho if config.world.bounded else config.rho_override
    return ray_lengths(config.space, config.world, config.others(k), p, thetas, cap)


def upper_semicontinuity_beta(config: Configuration, k: int, p, theta, epsilon: float,
                              direction_samples: int = 256, beta_min: float = 1e-6, seed: int = 0) -> float:
    """Largest scanned ``beta`` with ``T(phi) <= T(theta) + epsilon`` for all
    sampled ``phi`` within ``beta`` of ``theta`` (0 if none)."""
    theta = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(seed)
    T0 = float(_T(config, k, p, theta[None, :])[0])
    beta = 2.0
    while beta >= beta_min:
        phis = _nearby(config.space, theta, beta, direction_samples, rng)
        if not len(phis) or np.all(_T(config, k, p, phis) <= T0 + epsilon):
            return beta
        beta *= 0.5
    return 0.0


def verify_t_continuity(config: Configuration, k: int, p, theta, epsilon: float, samples: int = 1000,
                        seed: int = 0) -> dict:
    """Estimate both radii, derive the certified radius and check it on
    ``samples`` directions within it."""
    p = np.asarray(p, dtype=float)
    theta = np.asarray(theta, dtype=float)
    beta1 = upper_semicontinuity_beta(config, k, p, theta, epsilon, seed=seed)
    beta2 = emanation_check(config.world, p, theta, epsilon, space=config.space, seed=seed).beta
    Delta = t_continuity_delta(config, k, p, epsilon, beta1, beta2)
    T0 = float(_T(config, k, p, theta[None, :])[0])
    worst = 0.0
    if Delta > 0:
        rng = np.random.default_rng(seed)
        phis = np.empty((0, config.space.dim))
        while len(phis) < samples:
            phis = np.vstack([phis, _random_near(config.space, theta, Delta, samples, rng)])
        phis = phis[:samples]
        worst = float(np.max(np.abs(_T(config, k, p, phis) - T0)))
    return {
        "beta1": beta1,
        "beta2": beta2,
        "Delta": Delta,
        "T": T0,
        "samples": samples if Delta > 0 else 0,
        "max_T_change": worst,
        "passed": bool(Delta > 0 and worst <= epsilon),
    }


def _random_near(space: NormedSpace, theta, radius, count, rng) -> np.ndarray:
    g = rng.standard_normal((count, space.dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    u = space.unit(theta + radius * rng.uniform(0.0, 1.0, count)[:, None] * g)
    return u[space.norm(u - theta) < radius]


# ---------------------------------------------------------------------------
# discontinuity witnesses


def non_emanation_world(dim: int = 20) -> Polytope:
    """Simplex with vertices -e1, e1 and e1/2 + e_n/n for n = 2..dim."""
    eye = np.eye(dim)
    verts = [-eye[0], eye[0]] + [0.5 * eye[0] + eye[n - 1] / n for n in range(2, dim + 1)]
    return Polytope.from_vertices(np.array(verts))


def non_emanation_directions(dim: int = 20) -> np.ndarray:
    """Euclidean unit vectors towards the vertices e1/2 + e_n/n, n = 2..dim."""
    eye = np.eye(dim)
    v = np.array([0.5 * eye[0] + eye[n - 1] / n for n in range(2, dim + 1)])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _first_failure(space, A: Site, p, theta, upper, step) -> float:
    """Brute-force T: scan ``t`` on a grid and stop at the first
    inadmissible point."""
    t = np.arange(0.0, upper + step / 2, step)
    pts = p + t[:, None] * theta
    bad = np.flatnonzero(space.norm(pts - p) > A.dist(space, pts) * (1 + 1e-13))
    return float(t[bad[0] - 1]) if bad.size else float(upper)


def t_discontinuity_witness(name: str, n: int | None = None) -> dict:
    """Reproduce a jump of ``T(., p)`` in one of the known scenarios."""
    runners = {
        "linf_corners": _linf_corners,
        "non_emanation": _non_emanation,
        "zero_site_distance": _zero_site_distance,
        "unbounded": _unbounded,
    }
    if name not in runners:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {sorted(runners)}")
    return runners[name](n)


def _linf_corners(n):
    space, world = NormedSpace.linf(2), Box([-10, -10], [10, 10])
    p = np.zeros(2)
    A = Points([(0, -2), (2, 0), (-2, 0)])
    theta = np.array([1.0, 1.0])
    shifts = [1e-2, 1e-3, 1e-4]
    below = np.array([[1.0, 1.0 - s] for s in shifts])
    above = np.array([[1.0 - s, 1.0] for s in shifts])
    T0 = float(ray_lengths(space, world, A, p, theta[None])[0])
    Tb = ray_lengths(space, world, A, p, below)
    Ta = ray_lengths(space, world, A, p, above)
    brute = [_first_failure(space, A, p, phi, chord_length(world, p, phi), 1e-3) for phi in below]
    jump = T0 - float(Tb.max())
    return {
        "name": "linf_corners",
        "p": p.tolist(),
        "theta": theta.tolist(),
        "T_theta": T0,
        "shifts": shifts,
        "T_below": Tb.tolist(),
        "T_below_brute": brute,
        "T_above": Ta.tolist(),
        "jump": jump,
        "discontinuous": bool(jump > 0.5),
    }


def _non_emanation(n, dim: int = 20):
    space = NormedSpace.euclidean(dim)
    world = non_emanation_world(dim)
    p = np.zeros(dim)
    A = Points(-np.eye(dim)[0])
    theta = np.eye(dim)[0]
    thetas = non_emanation_directions(dim)
    T0 = float(ray_lengths(space, world, A, p, theta[None])[0])
    T = ray_lengths(space, world, A, p, thetas)
    L = np.atleast_1d(world.ray_exit(p, thetas))
    ns = np.arange(2, dim + 1)
    return {
        "name": "non_emanation",
        "dim": dim,
        "n": ns.tolist(),
        "angle_to_theta": np.linalg.norm(thetas - theta, axis=1).tolist(),
        "L_theta": chord_length(world, p, theta),
        "L_theta_n": L.tolist(),
        "L_expected": np.sqrt(0.25 + 1.0 / ns ** 2).tolist(),
        "T_theta": T0,
        "T_theta_n": T.tolist(),
        "discontinuous": bool(np.all(T < T0 - 0.01)),
    }


def _zero_site_distance(n):
    n = 100 if n is None else int(n)
    space, world = NormedSpace.euclidean(2), Box([-1, -1], [1, 1])
    p = np.zeros(2)
    A = Segment((-1, 0), (1, 0))
    theta = np.array([0.0, 1.0])
    phi = np.array([1.0 / n, math.sqrt(1.0 - 1.0 / n ** 2)])
    T0, T1 = ray_lengths(space, world, A, p, np.stack([theta, phi]))
    return {
        "name": "zero_site_distance",
        "n": n,
        "theta": theta.tolist(),
        "phi": phi.tolist(),
        "T_theta": float(T0),
        "T_phi": float(T1),
        "discontinuous": bool(T0 - T1 > 0.5),
    }


def _unbounded(n):
    n = 10 if n is None else int(n)
    space, world = NormedSpace.euclidean(2), Box.plane(2)
    p = np.array([0.0, -1.0])
    A = Points((0, 1))
    theta = np.array([1.0, 0.0])
    phi = np.array([math.sqrt(1.0 - 1.0 / n ** 2), 1.0 / n])
    T0, T1 = ray_lengths(space, world, A, p, np.stack([theta, phi]))
    return {
        "name": "unbounded",
        "n": n,
        "theta": theta.tolist(),
        "phi": phi.tolist(),
        "T_theta": "inf" if math.isinf(T0) else float(T0),
        "T_phi": float(T1),
        "T_phi_exact": float(n),
        "discontinuous": bool(math.isinf(T0) and math.isfinite(T1)),
    }
