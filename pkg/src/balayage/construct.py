"""Builders for balayage measures: harmonic measure on balls, Jensen mixtures,
convolution and integral-of-measures sweeping, and mollifier smoothing.

The measure-valued integral of a family of representing measures is
realised for atomic ``mu`` only, as the finite mixture sum_i w_i * iota_{x_i}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .geom import Ball, SetExpr, as_point
from .measure import (DiscreteCharge, coalesce, convolve, mix, shift, total_mass)
from .quad import ContinuousComponent, Shell, unit_sphere_rule


class ConstructionError(ValueError):
    pass


def harmonic_measure_ball(ball: Ball, x, n: int = 256) -> DiscreteCharge:
    """Harmonic measure of ``ball`` at ``x`` on the sphere rule of level ``n``.

    Weights are the sphere-rule weights times the Poisson kernel
    (R^2 - |x - c|^2) / (R |x - zeta|^d), renormalised to mass one.
    """
    x = as_point(x)
    d = ball.d
    if x.size != d:
        raise ValueError("dimension mismatch")
    R = ball.radius
    rho = float(np.linalg.norm(x - ball.center))
    if rho >= R:
        raise ConstructionError(f"x={x.tolist()} is not inside the ball (|x-c|={rho:g}, R={R:g})")
    pts, w, spacing, exact = unit_sphere_rule(d, n)
    zeta = ball.center + R * pts
    kernel = (R ** 2 - rho ** 2) / (R * np.linalg.norm(zeta - x, axis=1) ** d)
    weights = w * kernel
    weights /= weights.sum()
    order = np.lexsort(zeta.T[::-1])
    budget = (R * spacing) ** 2 if exact else 1.0 / np.sqrt(len(w))
    shells = (Shell(tuple(ball.center), R, 4.0 * R * spacing),)
    return DiscreteCharge(d, zeta[order], weights[order], (), budget, shells)


def jensen_mixture(a: float, x, b: float, ball: Ball, n: int = 256,
                   domain: SetExpr | None = None) -> DiscreteCharge:
    """a * delta_x + b * harmonic measure of ``ball`` at ``x`` (a, b >= 0, a + b = 1)."""
    if a < 0 or b < 0 or abs(a + b - 1.0) > 1e-12:
        raise ConstructionError(f"need a, b >= 0 with a + b = 1, got a={a}, b={b}")
    if domain is not None and domain.classify_ball(ball.center, ball.radius) != "inside":
        raise ConstructionError("the ball closure must lie inside the domain")
    x = as_point(x)
    parts = []
    if a > 0:
        parts.append((a, DiscreteCharge.dirac(x)))
    if b > 0:
        parts.append((b, harmonic_measure_ball(ball, x, n)))
    return coalesce(mix(parts))


def support_diameter(m: DiscreteCharge) -> float:
    m.require_flat("support_diameter")
    pts = m.points[m.weights != 0]
    if len(pts) < 2:
        return 0.0
    if len(pts) > 2000 and 2 <= m.d <= 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            pass
    return float(pdist(pts).max())


def boundary_distance(m: DiscreteCharge, domain: SetExpr) -> float:
    """dist(supp m, boundary of domain) (a lower bound for composite sets)."""
    m.require_flat("boundary_distance")
    pts = m.points[m.weights != 0]
    if len(pts) == 0:
        return float("inf")
    if not np.all(domain.contains(pts)):
        raise ConstructionError("support is not contained in the domain")
    return float(domain.boundary_distance(pts).min())


def _check_probability(iota: DiscreteCharge, what: str):
    iota.require_flat(what)
    if np.any(iota.weights < 0):
        raise ConstructionError(f"{what}: measure has negative atoms")
    if abs(total_mass(iota) - 1.0) > 1e-12:
        raise ConstructionError(f"{what}: mass {total_mass(iota)!r} is not 1")


def convolution_balayage(mu: DiscreteCharge, iota0: DiscreteCharge, domain: SetExpr,
                         verify: bool = True, eps: float = 1e-9) -> DiscreteCharge:
    """beta = iota0 * mu, with the support hypothesis checked on measured distances.

    With ``verify`` the Jensen property of iota0 at the origin is checked
    against a small subharmonic family first.
    """
    _check_probability(iota0, "convolution_balayage")
    mu.require_flat("convolution_balayage")
    diam = support_diameter(iota0)
    dist = boundary_distance(mu, domain)
    if not diam < 0.5 * dist:
        raise ConstructionError(f"diam supp iota0 = {diam:.6g} is not below "
                                f"half of dist(supp mu, boundary) = {0.5 * dist:.6g}")
    if verify:
        from .checker import verify_jensen
        from .testfn import subharmonic_family
        r = max(iota0.support_radius(), 1e-3)
        fam = subharmonic_family(mu.d, Ball(np.zeros(mu.d), 4 * r), seed=7, harmonic_degree=4,
                                 n_potentials=8, truncations=(10, 40), n_max_combos=4,
                                 avoid=(iota0,))
        v = verify_jensen(iota0, np.zeros(mu.d), fam, eps)
        if not v.passed:
            raise ConstructionError(f"iota0 is not a Jensen measure at 0 "
                                    f"(worst margin {v.worst_margin:.3g})")
    return convolve(mu, iota0)


class MeasureFamily:
    """Assignment x -> iota_x of probability measures."""

    def at(self, x) -> DiscreteCharge:
        raise NotImplementedError


@dataclass(frozen=True)
class ShiftFamily(MeasureFamily):
    """iota_x = parallel shift of ``base`` (a measure at 0) to x."""

    base: DiscreteCharge

    def at(self, x) -> DiscreteCharge:
        return shift(self.base, x)


@dataclass(frozen=True)
class TableFamily(MeasureFamily):
    """Explicit table point -> measure (matched within ``tol``)."""

    points: np.ndarray
    measures: tuple[DiscreteCharge, ...]
    tol: float = 1e-12

    def at(self, x) -> DiscreteCharge:
        x = as_point(x)
        dist = np.linalg.norm(np.asarray(self.points, float) - x, axis=1)
        k = int(np.argmin(dist))
        if dist[k] > self.tol:
            raise KeyError(f"no family entry at {x.tolist()}")
        return self.measures[k]


def family_integral_balayage(mu: DiscreteCharge, fam: MeasureFamily,
                             domain: SetExpr | None = None) -> DiscreteCharge:
    """beta = sum_i w_i * iota_{x_i} over the atoms (x_i, w_i) of ``mu``."""
    mu.require_flat("family_integral_balayage")
    if np.any(mu.weights < 0):
        raise ConstructionError("mu must be a positive measure")
    half = 0.5 * boundary_distance(mu, domain) if domain is not None else None
    parts = []
    widest = 0.0
    for x, w in zip(mu.points, mu.weights):
        try:
            iota = fam.at(x)
        except KeyError as exc:
            raise ConstructionError(str(exc)) from exc
        iota = iota.flatten()
        _check_probability(iota, "family member")
        reach = iota.support_radius(about=x)
        widest = max(widest, reach)
        if half is not None:
            if not reach < half:
                raise ConstructionError(f"supp iota_x at {x.tolist()} reaches {reach:.6g}, "
                                        f"not inside B(x, {half:.6g})")
        parts.append((w, iota))
    if not parts:
        return DiscreteCharge.zero(mu.d)
    beta = mix(parts)
    # per-member shells would multiply with the atom count; widen mu's instead
    shells = tuple(Shell(s.center, s.radius, s.width + 2 * widest) for s in mu.shells)
    return beta.with_atoms(beta.points, beta.weights, shells=shells)


def default_radius(domain: SetExpr, r_user: float) -> Callable:
    """r(x) = min(r_user, 0.4 * dist(x, boundary))."""
    def r(x):
        return min(r_user, 0.4 * float(domain.boundary_distance(np.asarray(x)[None, :])[0]))
    return r


def smooth(mu: DiscreteCharge, r, level: int = 16,
           domain: SetExpr | None = None) -> DiscreteCharge:
    """Replace each atom by a mollifier component of radius r(x) and the atom's mass.

    ``r`` is a number or a callable point -> radius.  The result carries no
    point atoms; it is kept symbolic until ``flatten``.
    """
    mu.require_flat("smooth")
    radius = r if callable(r) else (lambda x, _r=float(r): _r)
    comps = []
    for x, w in zip(mu.points, mu.weights):
        if w == 0:
            continue
        rx = float(radius(x))
        if not rx > 0:
            raise ConstructionError(f"smoothing radius must be positive at {x.tolist()}")
        if domain is not None:
            dx = float(domain.boundary_distance(x[None, :])[0])
            if not domain.contains(x[None, :])[0] or not rx < 0.5 * dx:
                raise ConstructionError(f"radius {rx:.6g} at {x.tolist()} is too large "
                                        f"for boundary distance {dx:.6g}")
        comps.append(ContinuousComponent("mollifier", x, rx, float(w), level))
    widen = max((c.radius for c in comps), default=0.0)
    shells = tuple(Shell(s.center, s.radius, s.width + widen) for s in mu.shells)
    return DiscreteCharge(mu.d, np.empty((0, mu.d)), np.empty(0), tuple(comps),
                          mu.budget, shells)
