"""Rasterised holes and inward-filled hulls.

A :class:`GridMask` is a boolean array of cells of side ``h`` covering a box.
Connectivity is face adjacency (2d neighbours) for sets and complements
alike.  "Touching the boundary of O" at grid level means being
face-adjacent to a cell outside O or to the edge of the box; the edge of the
box plays the part of the point at infinity.

The hull is computed twice, by two independent routes:

* holes: label the components of O \\ K (scipy) and keep those that never
  touch the outside;
* complement: flood O \\ K (breadth-first, written here) from every cell that
  touches the outside and take what the flood cannot reach.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

from .geom import SetExpr


class HullDisagreement(RuntimeError):
    """The two hull algorithms disagree; rerun at a smaller cell size."""


@dataclass(frozen=True, eq=False)
class GridMask:
    lo: np.ndarray
    h: float
    cells: np.ndarray
    connectivity: str = "face"

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        cells = np.asarray(self.cells, dtype=bool)
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def d(self) -> int:
        return self.cells.ndim

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells.shape

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.h * np.array(self.shape)

    @property
    def count(self) -> int:
        return int(self.cells.sum())

    @property
    def volume(self) -> float:
        return self.count * self.h ** self.d

    def like(self, cells: np.ndarray) -> GridMask:
        return GridMask(self.lo, self.h, cells, self.connectivity)

    def centers(self) -> np.ndarray:
        idx = np.argwhere(self.cells)
        return self.lo + (idx + 0.5) * self.h

    def same_grid(self, other: GridMask) -> bool:
        return (self.shape == other.shape and self.h == other.h
                and np.allclose(self.lo, other.lo))

    def to_json(self) -> dict:
        rows = self.cells.reshape(-1, self.shape[-1])
        packed = [base64.b64encode(np.packbits(r).tobytes()).decode("ascii") for r in rows]
        return {"box": [self.lo.tolist(), self.hi.tolist()], "h": self.h,
                "shape": list(self.shape), "connectivity": self.connectivity, "rows": packed}

    @classmethod
    def from_json(cls, obj: dict) -> GridMask:
        shape = tuple(obj["shape"])
        rows = [np.unpackbits(np.frombuffer(base64.b64decode(r), dtype=np.uint8))[:shape[-1]]
                for r in obj["rows"]]
        cells = np.array(rows, dtype=bool).reshape(shape)
        return cls(np.array(obj["box"][0]), float(obj["h"]), cells,
                   obj.get("connectivity", "face"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = ",".join(f"x{i}" for i in range(self.d))
        np.savetxt(buf, self.centers(), delimiter=",", header=header, comments="", fmt="%.17g")
        return buf.getvalue()


def grid_for(box, h: float) -> tuple[np.ndarray, tuple[int, ...]]:
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    if not h > 0:
        raise ValueError("cell size must be positive")
    n = tuple(int(np.ceil((hi[i] - lo[i]) / h - 1e-9)) for i in range(lo.size))
    return lo, n


def rasterize(s: SetExpr, box, h: float) -> GridMask:
    """Cell included iff its centre belongs to ``s``."""
    lo, n = grid_for(box, h)
    axes = [lo[i] + (np.arange(n[i]) + 0.5) * h for i in range(lo.size)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    return GridMask(lo, h, s.contains(pts).reshape(n))


def rasterize_points(points: np.ndarray, box, h: float, dilate: int = 1) -> GridMask:
    """Cells containing any of ``points``, dilated by ``dilate`` full-neighbourhood steps."""
    lo, n = grid_for(box, h)
    cells = np.zeros(n, dtype=bool)
    idx = np.floor((np.asarray(points) - lo) / h).astype(int)
    ok = np.all((idx >= 0) & (idx < np.array(n)), axis=1)
    cells[tuple(idx[ok].T)] = True
    if dilate:
        st = ndi.generate_binary_structure(len(n), len(n))
        cells = ndi.binary_dilation(cells, st, iterations=dilate)
    return GridMask(lo, h, cells)


def components(m: GridMask) -> tuple[np.ndarray, int]:
    """Face-connected components; labels 1..n in raster-scan order of first cell."""
    st = ndi.generate_binary_structure(m.d, 1)
    labels, n = ndi.label(m.cells, structure=st)
    return labels, int(n)


def touches_outside(region: np.ndarray, O: np.ndarray) -> np.ndarray:
    """Cells of ``region`` face-adjacent to a cell outside ``O`` or to the box edge."""
    out = np.zeros_like(region)
    outside = ~O
    for ax in range(region.ndim):
        for step in (1, -1):
            nb = np.roll(outside, step, axis=ax)
            edge = [slice(None)] * region.ndim
            edge[ax] = 0 if step == 1 else -1
            nb[tuple(edge)] = True   # beyond the box
            out |= nb
    return out & region


def flood_fill(region: np.ndarray, seeds: np.ndarray) -> np.ndarray:
    """Breadth-first face-connected flood of ``region`` from ``seeds``."""
    shape = region.shape
    flat_region = region.ravel()
    reached = np.zeros(flat_region.size, dtype=bool)
    frontier = np.flatnonzero(seeds.ravel() & flat_region)
    reached[frontier] = True
    strides = np.array([int(np.prod(shape[i + 1:])) for i in range(len(shape))])
    while frontier.size:
        coords = np.array(np.unravel_index(frontier, shape))
        nxt = []
        for ax in range(len(shape)):
            for step in (1, -1):
                c = coords[ax] + step
                ok = (c >= 0) & (c < shape[ax])
                nb = frontier[ok] + step * strides[ax]
                nb = nb[flat_region[nb] & ~reached[nb]]
                reached[nb] = True
                nxt.append(nb)
        frontier = np.unique(np.concatenate(nxt)) if nxt else np.empty(0, int)
    return reached.reshape(shape)


@dataclass
class HullReport:
    hull: GridMask
    holes: int
    free_components: int          # components of O \ K
    complement_components: int    # components of box \ hull
    agree: bool
    details: dict = field(default_factory=dict)

    def to_json(self, include_mask: bool = False) -> dict:
        out = {"hole_count": self.holes, "free_components": self.free_components,
               "complement_components": self.complement_components,
               "algorithms_agree": self.agree, "hull_cells": self.hull.count,
               "hull_volume": self.hull.volume, "h": self.hull.h,
               "connectivity": self.hull.connectivity}
        out.update(self.details)
        if include_mask:
            out["hull_mask"] = self.hull.to_json()
        return out


def hull_by_holes(O: np.ndarray, K: np.ndarray) -> tuple[np.ndarray, int, int]:
    free = O & ~K
    st = ndi.generate_binary_structure(O.ndim, 1)
    labels, n = ndi.label(free, structure=st)
    touching = np.unique(labels[touches_outside(free, O)])
    is_hole = np.ones(n + 1, dtype=bool)
    is_hole[0] = False
    is_hole[touching] = False
    return K | is_hole[labels], int(is_hole.sum()), int(n)


def hull_by_complement(O: np.ndarray, K: np.ndarray) -> np.ndarray:
    free = O & ~K
    reach = flood_fill(free, touches_outside(free, O))
    return O & ~reach


def inward_filled_hull(O: GridMask, K: GridMask) -> HullReport:
    """Hull of K in O by both routes; raises HullDisagreement if they differ."""
    if not O.same_grid(K):
        raise ValueError("O and K must be rasterised on the same grid")
    if np.any(K.cells & ~O.cells):
        raise ValueError("K must be contained in O")
    a, holes, n_free = hull_by_holes(O.cells, K.cells)
    b = hull_by_complement(O.cells, K.cells)
    if not np.array_equal(a, b):
        raise HullDisagreement(f"{int(np.sum(a != b))} cells differ between the two hull "
                               "algorithms; rerun at a smaller cell size")
    hull = O.like(a)
    _, n_comp = components(O.like(~a))
    return HullReport(hull, holes, n_free, n_comp, True)


@dataclass
class KocReport:
    compact: bool        # hull inside O and away from the box edge
    monotone: bool       # hull in O is contained in hull in O_big
    complement_components: int
    census_ok: bool | None
    idempotent: bool

    @property
    def passed(self) -> bool:
        return self.compact and self.monotone and self.idempotent and self.census_ok is not False

    def to_json(self) -> dict:
        return {"compact": self.compact, "monotone": self.monotone,
                "complement_components": self.complement_components,
                "census_ok": self.census_ok, "idempotent": self.idempotent,
                "pass": self.passed}


def koc_check(O: GridMask, O_big: GridMask, K: GridMask,
              expected_components: int | None = None) -> KocReport:
    """Compactness, monotonicity in O, finite complement census and idempotence."""
    if np.any(O.cells & ~O_big.cells):
        raise ValueError("O must be contained in O_big")
    small = inward_filled_hull(O, K)
    big = inward_filled_hull(O_big, K)
    hc = small.hull.cells
    edge = np.zeros_like(hc)
    for ax in range(hc.ndim):
        sl = [slice(None)] * hc.ndim
        sl[ax] = 0
        edge[tuple(sl)] = True
        sl[ax] = -1
        edge[tuple(sl)] = True
    compact = bool(np.all(~hc | O.cells) and not np.any(hc & edge))
    monotone = bool(np.all(~hc | big.hull.cells))
    census = None if expected_components is None else \
        small.complement_components == expected_components
    again = inward_filled_hull(O, small.hull)
    idempotent = bool(np.array_equal(again.hull.cells, hc))
    return KocReport(compact, monotone, small.complement_components, census, idempotent)
