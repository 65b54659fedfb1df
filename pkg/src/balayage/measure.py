"""Finite charges: point atoms plus tagged continuous components.

Integrals follow the extended-real conventions ``x * (+-inf) = +-inf`` for
``x > 0`` and ``0 * (+-inf) = 0``.  Extended reals are plain Python/numpy
floats; ``+inf - inf`` inside one integral raises :class:`UndefinedIntegral`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .geom import SetExpr, as_point, as_points
from .quad import ContinuousComponent, Shell, discretize

COALESCE_TOL = 1e-12


class UndefinedIntegral(ArithmeticError):
    """An integral hit both +inf and -inf contributions."""


class NotFlattened(ValueError):
    """The operation needs atoms only; call ``flatten`` first."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteCharge:
    """A finite signed measure on R^d.

    ``budget`` is the accumulated discretisation error estimate of the
    components that have been flattened into atoms; ``shells`` records the
    spheres near which those discretisations cannot resolve singular test
    functions.
    """

    d: int
    points: np.ndarray
    weights: np.ndarray
    components: tuple[ContinuousComponent, ...] = ()
    budget: float = 0.0
    shells: tuple[Shell, ...] = field(default=())

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.d)
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise ValueError("atoms must have finite coordinates and weights")
        for c in self.components:
            if c.d != self.d:
                raise ValueError("component dimension mismatch")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "shells", tuple(self.shells))

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, d: int) -> DiscreteCharge:
        return cls(d, np.empty((0, d)), np.empty(0))

    @classmethod
    def dirac(cls, x, weight: float = 1.0) -> DiscreteCharge:
        x = as_point(x)
        return cls(x.size, x[None, :], [weight])

    @classmethod
    def from_atoms(cls, points, weights) -> DiscreteCharge:
        pts = as_points(points)
        return cls(pts.shape[1], pts, weights)

    @classmethod
    def component(cls, kind: str, center, radius: float, total: float = 1.0,
                  level: int = 32) -> DiscreteCharge:
        c = ContinuousComponent(kind, center, radius, total, level)
        return cls(c.d, np.empty((0, c.d)), np.empty(0), (c,))

    # -- basic properties ----------------------------------------------------
    @property
    def n_atoms(self) -> int:
        return len(self.weights)

    @property
    def is_flat(self) -> bool:
        return not self.components

    def require_flat(self, what: str = "operation"):
        if self.components:
            raise NotFlattened(f"{what} needs a flattened charge ({len(self.components)} "
                               "continuous component(s) pending)")

    def flatten(self) -> DiscreteCharge:
        """Discretise every component and append its atoms."""
        if not self.components:
            return self
        pts, ws = [self.points], [self.weights]
        budget, shells = self.budget, list(self.shells)
        for c in self.components:
            a = discretize(c)
            pts.append(a.points)
            ws.append(a.weights)
            budget += a.budget
            shells.extend(a.shells)
        return DiscreteCharge(self.d, np.concatenate(pts), np.concatenate(ws), (),
                              budget, tuple(shells))

    def with_atoms(self, points, weights, **kw) -> DiscreteCharge:
        args = dict(components=self.components, budget=self.budget, shells=self.shells)
        args.update(kw)
        return DiscreteCharge(self.d, points, weights, **args)

    def support_radius(self, about=None) -> float:
        self.require_flat("support_radius")
        o = np.zeros(self.d) if about is None else as_point(about)
        live = self.weights != 0
        if not np.any(live):
            return 0.0
        return float(np.max(np.linalg.norm(self.points[live] - o, axis=1)))

    def to_json(self) -> dict:
        return {"d": self.d,
                "atoms": [{"p": p.tolist(), "w": float(w)}
                          for p, w in zip(self.points, self.weights)],
                "components": [c.to_json() for c in self.components]}

    @classmethod
    def from_json(cls, obj: dict) -> DiscreteCharge:
        d = int(obj["d"])
        atoms = obj.get("atoms", [])
        pts = np.array([a["p"] for a in atoms], dtype=float).reshape(-1, d)
        ws = np.array([a["w"] for a in atoms], dtype=float)
        comps = tuple(ContinuousComponent.from_json(c) for c in obj.get("components", []))
        return cls(d, pts, ws, comps)

    def __repr__(self) -> str:
        return (f"DiscreteCharge(d={self.d}, atoms={self.n_atoms}, "
                f"components={len(self.components)}, mass={total_mass(self):.6g})")


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

def total_mass(m: DiscreteCharge) -> float:
    return float(np.sum(m.weights)) + sum(c.total for c in m.components)


def coalesce(m: DiscreteCharge, tol: float = COALESCE_TOL) -> DiscreteCharge:
    """Merge atoms closer than ``tol`` (after lexicographic sorting); drop zero weights."""
    m.require_flat("coalesce")
    if m.n_atoms == 0:
        return m
    order = np.lexsort(m.points.T[::-1])
    pts, w = m.points[order], m.weights[order]
    gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    group = np.concatenate([[0], np.cumsum(gaps > tol)])
    n = group[-1] + 1
    first = np.searchsorted(group, np.arange(n))
    merged = np.zeros(n)
    np.add.at(merged, group, w)
    keep = merged != 0
    return m.with_atoms(pts[first][keep], merged[keep])


def jordan(m: DiscreteCharge) -> tuple[DiscreteCharge, DiscreteCharge, DiscreteCharge]:
    """Positive part, negative part and total variation of a flattened charge."""
    m.require_flat("jordan")
    c = coalesce(m)
    pos = c.weights > 0
    neg = c.weights < 0
    plus = c.with_atoms(c.points[pos], c.weights[pos])
    minus = c.with_atoms(c.points[neg], -c.weights[neg])
    var = c.with_atoms(c.points, np.abs(c.weights))
    return plus, minus, var


def restrict(m: DiscreteCharge, region: SetExpr) -> DiscreteCharge:
    """Keep atoms in ``region`` and components lying wholly inside it."""
    kept = []
    for c in m.components:
        where = region.classify_ball(c.center, c.radius)
        if where == "inside":
            kept.append(c)
        elif where == "unknown":
            raise NotFlattened(f"{c.kind} component at {c.center.tolist()} r={c.radius} "
                               "straddles the region boundary; flatten first")
    if m.n_atoms:
        inside = region.contains(m.points)
        pts, w = m.points[inside], m.weights[inside]
    else:
        pts, w = m.points, m.weights
    return m.with_atoms(pts, w, components=tuple(kept))


def ball_mass(m: DiscreteCharge, center, radius: float) -> float:
    """Mass of the closed ball (boundary atoms are counted)."""
    m.require_flat("ball_mass")
    if m.n_atoms == 0:
        return 0.0
    r = np.linalg.norm(m.points - as_point(center), axis=1)
    return float(np.sum(m.weights[r <= radius]))


def ext_dot(weights: np.ndarray, values: np.ndarray) -> float:
    """Sum of weight * value under extended-real rules (0 * inf = 0)."""
    values = np.asarray(values, dtype=float)
    if np.any(np.isnan(values)):
        raise UndefinedIntegral("test function returned NaN")
    live = weights != 0
    w, v = weights[live], values[live]
    inf = np.isinf(v)
    if not np.any(inf):
        return float(np.dot(w, v))
    signs = np.sign(w[inf]) * np.sign(v[inf])
    if np.any(signs > 0) and np.any(signs < 0):
        raise UndefinedIntegral("integral mixes +inf and -inf contributions")
    return float(np.inf * signs[0])


def integrate(m: DiscreteCharge, f: Callable) -> float:
    """Integral of ``f`` (vectorised over an (n, d) array) against a flat charge."""
    m.require_flat("integrate")
    if m.n_atoms == 0:
        return 0.0
    return ext_dot(m.weights, f(m.points))


def convolve(a: DiscreteCharge, b: DiscreteCharge) -> DiscreteCharge:
    """All pairwise sums x_i + y_j with weights w_i v_j (a-major order)."""
    a.require_flat("convolve")
    b.require_flat("convolve")
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    pts = (a.points[:, None, :] + b.points[None, :, :]).reshape(-1, a.d)
    w = np.outer(a.weights, b.weights).ravel()
    ra = a.support_radius() if a.n_atoms else 0.0
    rb = b.support_radius() if b.n_atoms else 0.0
    shells = tuple(Shell(s.center, s.radius, s.width + 2 * rb) for s in a.shells) + \
        tuple(Shell(s.center, s.radius, s.width + 2 * ra) for s in b.shells)
    budget = abs(total_mass(b)) * a.budget + abs(total_mass(a)) * b.budget
    return DiscreteCharge(a.d, pts, w, (), budget, shells)


def mix(parts: Iterable[tuple[float, DiscreteCharge]]) -> DiscreteCharge:
    """Linear combination sum_i c_i m_i."""
    parts = list(parts)
    if not parts:
        raise ValueError("mix needs at least one part")
    d = parts[0][1].d
    pts, ws, comps, shells = [], [], [], []
    budget = 0.0
    for coef, m in parts:
        if m.d != d:
            raise ValueError("dimension mismatch in mix")
        pts.append(m.points)
        ws.append(coef * m.weights)
        comps.extend(c.scaled(coef) for c in m.components if coef != 0)
        if coef != 0:
            shells.extend(m.shells)
        budget += abs(coef) * m.budget
    return DiscreteCharge(d, np.concatenate(pts), np.concatenate(ws), tuple(comps),
                          budget, tuple(shells))


class PushforwardError(ValueError):
    pass


def pushforward(m: DiscreteCharge, fmap: Callable) -> DiscreteCharge:
    """Move every atom through ``fmap`` (a point -> point callable); weights kept."""
    m.require_flat("pushforward")
    out = []
    for p in m.points:
        try:
            q = np.asarray(fmap(p.copy()), dtype=float)
        except Exception as exc:  # map undefined at this atom
            raise PushforwardError(f"map failed at atom {p.tolist()}: {exc}") from exc
        if q.shape != (m.d,) or not np.all(np.isfinite(q)):
            raise PushforwardError(f"map returned an invalid point at {p.tolist()}")
        out.append(q)
    pts = np.array(out).reshape(-1, m.d)
    # a general map does not carry shell geometry along
    return DiscreteCharge(m.d, pts, m.weights, (), m.budget, ())


def shift(m: DiscreteCharge, v: Sequence[float]) -> DiscreteCharge:
    """Parallel shift by ``v``; components and shells move along."""
    v = as_point(v)
    shells = tuple(Shell(tuple(np.asarray(s.center) + v), s.radius, s.width) for s in m.shells)
    return DiscreteCharge(m.d, m.points + v, m.weights,
                          tuple(c.shifted(v) for c in m.components), m.budget, shells)


def same_atoms(a: DiscreteCharge, b: DiscreteCharge, tol: float = COALESCE_TOL) -> float:
    """Max weight discrepancy between coalesced a and b (inf if supports differ)."""
    ca, cb = coalesce(a, tol), coalesce(b, tol)
    if ca.n_atoms != cb.n_atoms:
        return float("inf")
    if ca.n_atoms == 0:
        return 0.0
    if np.max(np.abs(ca.points - cb.points)) > 10 * tol:
        return float("inf")
    return float(np.max(np.abs(ca.weights - cb.weights)))
