"""Geometric primitives: points, balls, constructive sets, inversion and Kelvin values.

Points are plain 1-d numpy arrays of length ``d``.  Sets are small expression
trees over ball leaves and are evaluated point-wise (vectorised over an
``(n, d)`` array of query points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class PoleError(ValueError):
    """A map or transform was evaluated at its singular point."""


def as_point(p: Sequence[float]) -> np.ndarray:
    q = np.asarray(p, dtype=float)
    if q.ndim != 1 or q.size < 1:
        raise ValueError(f"a point must be a flat coordinate vector, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("point coordinates must be finite")
    return q


def as_points(x, d: int | None = None) -> np.ndarray:
    """Coerce ``x`` to an ``(n, d)`` float array (a single point becomes ``n = 1``)."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"expected an (n, d) array of points, got shape {a.shape}")
    if d is not None and a.shape[1] != d:
        raise ValueError(f"expected points in dimension {d}, got {a.shape[1]}")
    return a


# --------------------------------------------------------------------------
# dimensional constants
# --------------------------------------------------------------------------

def half_gamma(k: int) -> float:
    """Gamma(k/2) for a positive integer ``k`` via the half-integer recursion."""
    if k < 1:
        raise ValueError("half_gamma needs k >= 1")
    if k % 2 == 0:
        g, start = 1.0, 2          # Gamma(1)
    else:
        g, start = math.sqrt(math.pi), 1   # Gamma(1/2)
    for j in range(start, k, 2):
        g *= j / 2.0
    return g


def sphere_area(p: int) -> float:
    """Surface area of the unit sphere in R^p, i.e. s_{p-1} = 2 pi^{p/2} / Gamma(p/2)."""
    return 2.0 * math.pi ** (p / 2.0) / half_gamma(p)


@dataclass(frozen=True)
class DimConstants:
    d: int
    s: float              # area of the unit sphere in R^d
    b: tuple[float, ...]  # b[p] = volume of the unit ball of R^p, p = 0..d
    c: float              # Riesz normalisation, Riesz measure = c * Laplacian


def constants(d: int) -> DimConstants:
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d}")
    d = int(d)
    s = sphere_area(d)
    b = (0.0,) + tuple(sphere_area(p) / p for p in range(1, d + 1))
    c = 1.0 / (s * max(1, d - 2))
    return DimConstants(d=d, s=s, b=b, c=c)


# --------------------------------------------------------------------------
# inversion and Kelvin transform
# --------------------------------------------------------------------------

def invert(p, o) -> np.ndarray:
    """Inversion in the unit sphere centred at ``o``: o + (p - o)/|p - o|^2."""
    p, o = as_point(p), as_point(o)
    v = p - o
    r2 = float(v @ v)
    if r2 == 0.0:
        raise PoleError("inversion centre maps to infinity")
    return o + v / r2


def kelvin_value(u_at_x: float, x, o, d: int) -> float:
    """Value of the Kelvin transform of ``u`` at ``invert(x, o)`` given ``u(x)``."""
    x, o = as_point(x), as_point(o)
    r = float(np.linalg.norm(x - o))
    if r == 0.0:
        raise PoleError("Kelvin transform undefined at the inversion centre")
    return r ** (d - 2) * u_at_x


def kelvin_transform(f, o, d: int):
    """Return ``y -> |y - o|^(2-d) f(invert(y, o))`` as a vectorised callable."""
    o = as_point(o)

    def transformed(y):
        y = as_points(y, d)
        v = y - o
        r2 = np.einsum("ij,ij->i", v, v)
        if np.any(r2 == 0.0):
            raise PoleError("Kelvin transform undefined at the inversion centre")
        x = o + v / r2[:, None]
        return r2 ** ((2 - d) / 2.0) * np.asarray(f(x), dtype=float)

    return transformed


# --------------------------------------------------------------------------
# balls and set expressions
# --------------------------------------------------------------------------

class SetExpr:
    """A set in R^d built from balls by union and difference."""

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def sdf(self, x) -> np.ndarray:
        """Signed-distance bound: negative inside, and |sdf| never exceeds the true
        distance to the boundary (exact for a single ball)."""
        raise NotImplementedError

    def classify_ball(self, center, radius) -> str:
        """'inside', 'outside' or 'unknown' for the closed ball B(center, radius)."""
        raise NotImplementedError

    def bounds(self) -> tuple[np.ndarray, np.ndarray] | None:
        raise NotImplementedError

    def leaves(self) -> list[Ball]:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    @property
    def dim(self) -> int | None:
        lv = self.leaves()
        return lv[0].d if lv else None

    def boundary_distance(self, x) -> np.ndarray:
        """Lower bound on the distance from interior points to the boundary."""
        return np.maximum(-self.sdf(x), 0.0)

    def __or__(self, other: SetExpr) -> SetExpr:
        return Union((self, other))

    def __sub__(self, other: SetExpr) -> SetExpr:
        return Diff(self, other)


@dataclass(frozen=True, eq=False)
class Ball(SetExpr):
    center: np.ndarray
    radius: float
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if not self.radius > 0 or not math.isfinite(self.radius):
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def d(self) -> int:
        return self.center.size

    def contains(self, x) -> np.ndarray:
        r = np.linalg.norm(as_points(x, self.d) - self.center, axis=1)
        return r <= self.radius if self.closed else r < self.radius

    def sdf(self, x) -> np.ndarray:
        return np.linalg.norm(as_points(x, self.d) - self.center, axis=1) - self.radius

    def classify_ball(self, center, radius) -> str:
        dist = float(np.linalg.norm(as_point(center) - self.center))
        if dist + radius <= self.radius:
            return "inside"
        if dist >= radius + self.radius:
            return "outside"
        return "unknown"

    def bounds(self):
        return self.center - self.radius, self.center + self.radius

    def leaves(self):
        return [self]

    def to_json(self) -> dict:
        return {"ball": {"center": self.center.tolist(), "radius": self.radius,
                         "closed": self.closed}}

    def __repr__(self) -> str:
        kind = "closed" if self.closed else "open"
        return f"Ball({self.center.tolist()}, {self.radius}, {kind})"


@dataclass(frozen=True, eq=False)
class Union(SetExpr):
    args: tuple[SetExpr, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))

    def _dim(self, x):
        dims = {lf.d for lf in self.leaves()}
        return as_points(x, dims.pop() if len(dims) == 1 else None)

    def contains(self, x) -> np.ndarray:
        x = self._dim(x)
        out = np.zeros(len(x), dtype=bool)
        for a in self.args:
            out |= a.contains(x)
        return out

    def sdf(self, x) -> np.ndarray:
        x = self._dim(x)
        if not self.args:
            return np.full(len(x), np.inf)
        return np.min([a.sdf(x) for a in self.args], axis=0)

    def classify_ball(self, center, radius) -> str:
        labels = [a.classify_ball(center, radius) for a in self.args]
        if "inside" in labels:
            return "inside"
        if all(lbl == "outside" for lbl in labels):
            return "outside"
        return "unknown"

    def bounds(self):
        bs = [b for b in (a.bounds() for a in self.args) if b is not None]
        if not bs:
            return None
        return np.min([b[0] for b in bs], axis=0), np.max([b[1] for b in bs], axis=0)

    def leaves(self):
        return [lf for a in self.args for lf in a.leaves()]

    def to_json(self) -> dict:
        return {"op": "union", "args": [a.to_json() for a in self.args]}


@dataclass(frozen=True, eq=False)
class Diff(SetExpr):
    base: SetExpr
    cut: SetExpr

    def contains(self, x) -> np.ndarray:
        return self.base.contains(x) & ~self.cut.contains(x)

    def sdf(self, x) -> np.ndarray:
        return np.maximum(self.base.sdf(x), -self.cut.sdf(x))

    def classify_ball(self, center, radius) -> str:
        a = self.base.classify_ball(center, radius)
        b = self.cut.classify_ball(center, radius)
        if a == "outside" or b == "inside":
            return "outside"
        if a == "inside" and b == "outside":
            return "inside"
        return "unknown"

    def bounds(self):
        return self.base.bounds()

    def leaves(self):
        return self.base.leaves() + self.cut.leaves()

    def to_json(self) -> dict:
        return {"op": "diff", "args": [self.base.to_json(), self.cut.to_json()]}


def annulus(center, inner: float, outer: float, closed: bool = False) -> Diff:
    """{inner < |x - c| < outer} (open) or {inner <= |x - c| <= outer} (closed)."""
    if not 0 < inner < outer:
        raise ValueError("annulus needs 0 < inner < outer")
    return Diff(Ball(center, outer, closed=closed), Ball(center, inner, closed=not closed))


EMPTY = Union(())


def set_from_json(obj) -> SetExpr:
    if not isinstance(obj, dict):
        raise ValueError(f"set expression must be an object, got {type(obj).__name__}")
    if "ball" in obj:
        b = obj["ball"]
        return Ball(b["center"], b["radius"], bool(b.get("closed", False)))
    op = obj.get("op")
    args = [set_from_json(a) for a in obj.get("args", [])]
    if op == "union":
        return Union(tuple(args))
    if op == "diff":
        if len(args) != 2:
            raise ValueError("diff takes exactly two arguments")
        return Diff(args[0], args[1])
    raise ValueError(f"unknown set operation {op!r}")
