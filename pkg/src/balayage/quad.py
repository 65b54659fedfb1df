"""Discretisers for the continuous measures used throughout the package.

Three kinds of component are supported:

``uniform_ball``
    normalised volume measure on a ball.  Polar/spherical midpoint product
    rule: equal-width radial cells with exact cell volumes as weights, times an
    angular rule on each shell.  Every harmonic polynomial of degree below the
    angular resolution is integrated to ``total * h(center)`` up to rounding.
``surface_sphere``
    normalised surface measure on a sphere.  d = 2: equispaced angles;
    d = 3: Gauss-Legendre in the polar cosine times equispaced azimuth;
    d > 3: seeded Monte Carlo.
``mollifier``
    the radial bump ``exp(-1/(1 - t^2))`` on a tensor midpoint grid, which
    keeps the full hyperoctahedral symmetry of the cube.

Every discretiser returns an :class:`Atoms` record whose nodes are sorted
lexicographically, together with a heuristic error budget and the list of
"shells" (spheres near which the rule cannot resolve point singularities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geom import as_point

KINDS = ("uniform_ball", "surface_sphere", "mollifier")


class Shell(NamedTuple):
    center: tuple[float, ...]
    radius: float
    width: float


class Atoms(NamedTuple):
    points: np.ndarray
    weights: np.ndarray
    budget: float
    shells: tuple[Shell, ...]


@dataclass(frozen=True)
class ContinuousComponent:
    kind: str
    center: np.ndarray
    radius: float
    total: float = 1.0
    level: int = 32

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0:
            raise ValueError("component radius must be positive")
        if not math.isfinite(self.total):
            raise ValueError("component total mass must be finite")
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "total", float(self.total))
        object.__setattr__(self, "level", int(self.level))

    @property
    def d(self) -> int:
        return self.center.size

    def scaled(self, factor: float) -> ContinuousComponent:
        return ContinuousComponent(self.kind, self.center, self.radius,
                                   self.total * factor, self.level)

    def shifted(self, v) -> ContinuousComponent:
        return ContinuousComponent(self.kind, self.center + np.asarray(v, float),
                                   self.radius, self.total, self.level)

    def to_json(self) -> dict:
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius,
                "total": self.total, "level": self.level}

    @classmethod
    def from_json(cls, obj: dict) -> ContinuousComponent:
        return cls(obj["kind"], obj["center"], obj["radius"], obj.get("total", 1.0),
                   obj.get("level", 32))


def _sorted(points: np.ndarray, weights: np.ndarray):
    order = np.lexsort(points.T[::-1])
    return points[order], weights[order]


# --------------------------------------------------------------------------
# unit-sphere rules (nodes on the unit sphere, weights summing to 1)
# --------------------------------------------------------------------------

def unit_circle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    # half-step offset keeps the node set symmetric under both axis reflections
    theta = (np.arange(n) + 0.5) * (2.0 * np.pi / n)
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    return pts, np.full(n, 1.0 / n)


def unit_sphere3_rule(n_polar: int, n_azimuth: int | None = None):
    n_azimuth = 2 * n_polar if n_azimuth is None else n_azimuth
    t, wt = np.polynomial.legendre.leggauss(n_polar)
    phi = (np.arange(n_azimuth) + 0.5) * (2.0 * np.pi / n_azimuth)
    st = np.sqrt(1.0 - t ** 2)
    x = np.outer(st, np.cos(phi)).ravel()
    y = np.outer(st, np.sin(phi)).ravel()
    z = np.repeat(t, n_azimuth)
    w = np.repeat(wt / 2.0, n_azimuth) / n_azimuth
    return np.column_stack([x, y, z]), w


def unit_sphere_mc_rule(d: int, n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return g, np.full(n, 1.0 / n)


def unit_sphere_rule(d: int, level: int):
    """Rule on the unit sphere of R^d plus its nominal node spacing and exactness flag."""
    if d == 2:
        pts, w = unit_circle_rule(level)
        return pts, w, 2.0 * np.pi / level, True
    if d == 3:
        pts, w = unit_sphere3_rule(level)
        return pts, w, np.pi / level, True
    n = level ** (d - 1)
    pts, w = unit_sphere_mc_rule(d, n, seed=level)
    return pts, w, n ** (-1.0 / (d - 1)), False


# --------------------------------------------------------------------------
# discretisers
# --------------------------------------------------------------------------

def discretize_sphere(c: ContinuousComponent) -> Atoms:
    """Surface measure of total ``c.total`` on the sphere ``|x - center| = radius``.

    ``level`` is the number of nodes for d = 2 and the number of polar nodes
    (with twice as many azimuth nodes) for d = 3.
    """
    if c.kind != "surface_sphere":
        raise ValueError(f"expected a surface_sphere component, got {c.kind}")
    if c.level < 2:
        raise ValueError("sphere level must be >= 2")
    pts, w, spacing, exact = unit_sphere_rule(c.d, c.level)
    points = c.center + c.radius * pts
    weights = c.total * w / w.sum()
    if exact:
        budget = abs(c.total) * (c.radius * spacing) ** 2
    else:
        budget = abs(c.total) / math.sqrt(len(w))
    shell = Shell(tuple(c.center), c.radius, 4.0 * c.radius * spacing)
    return Atoms(*_sorted(points, weights), budget, (shell,))


def ball_rule(d: int, level: int):
    """Unit-ball polar midpoint rule: nodes, weights (sum 1), radial step, arc step."""
    if level < 2:
        raise ValueError("ball level must be >= 2")
    n_r = max(level // 2, 1)
    edges = np.linspace(0.0, 1.0, n_r + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    shell_w = edges[1:] ** d - edges[:-1] ** d
    if d == 2:
        sp, sw, arc, _ = unit_sphere_rule(2, 2 * level)
    elif d == 3:
        sp, sw, arc, _ = unit_sphere_rule(3, max(level // 2, 2))
    else:
        sp, sw, arc, _ = unit_sphere_rule(d, max(level // 2, 2))
    points = (mids[:, None, None] * sp[None, :, :]).reshape(-1, d)
    weights = (shell_w[:, None] * sw[None, :]).ravel()
    return points, weights / weights.sum(), 1.0 / n_r, arc


def discretize_uniform_ball(c: ContinuousComponent) -> Atoms:
    """Normalised volume measure of total ``c.total`` on the ball B(center, radius)."""
    if c.kind != "uniform_ball":
        raise ValueError(f"expected a uniform_ball component, got {c.kind}")
    pts, w, dr, arc = ball_rule(c.d, c.level)
    points = c.center + c.radius * pts
    weights = c.total * w
    spacing = c.radius * max(dr, arc)
    budget = abs(c.total) * (c.radius * dr) ** 2
    if c.d > 3:
        budget += abs(c.total) / math.sqrt(len(w) // max(c.level // 2, 1))
    shell = Shell(tuple(c.center), c.radius, 4.0 * spacing)
    return Atoms(*_sorted(points, weights), budget, (shell,))


def bump(t):
    """Radial mollifier profile exp(-1/(1 - t^2)) on |t| < 1, zero elsewhere."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def mollifier_unit_rule(d: int, level: int):
    """Bump-weighted tensor midpoint grid on the unit ball (weights sum to 1)."""
    if level < 8:
        raise ValueError("mollifier level must be >= 8 to resolve the bump")
    axis = -1.0 + (np.arange(level) + 0.5) * (2.0 / level)
    grid = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    w = bump(np.linalg.norm(grid, axis=1))
    keep = w > 0
    grid, w = grid[keep], w[keep]
    return grid, w / w.sum()


def discretize_mollifier(c: ContinuousComponent) -> Atoms:
    """Mollifier of radius ``c.radius`` centred at ``c.center`` with mass ``c.total``.

    Nodes are ``center + radius * unit_nodes``, so the rule for radius r is the
    image of the radius-1 rule under x -> r x.
    """
    if c.kind != "mollifier":
        raise ValueError(f"expected a mollifier component, got {c.kind}")
    pts, w = mollifier_unit_rule(c.d, c.level)
    points = c.center + c.radius * pts
    weights = c.total * w
    budget = abs(c.total) * (2.0 * c.radius / c.level) ** 2
    # the density vanishes to all orders at the rim: no unresolved shell
    return Atoms(*_sorted(points, weights), budget, ())


def discretize(c: ContinuousComponent) -> Atoms:
    if c.kind == "uniform_ball":
        return discretize_uniform_ball(c)
    if c.kind == "surface_sphere":
        return discretize_sphere(c)
    return discretize_mollifier(c)
