"""Test functions: harmonic polynomials, point potentials, truncations and
combinations, plus finite-difference Laplacians and grid Riesz measures.

Every :class:`TestFunction` is a vectorised callable on ``(n, d)`` arrays.
Values may be ``-inf`` at recorded poles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg
from scipy.stats import qmc

from .geom import SetExpr, as_point, as_points, constants
from .measure import DiscreteCharge

MAX_DEGREE = 12


class NonFiniteSample(ValueError):
    """A stencil or grid node landed on a pole."""


class TestFunction:
    kind: str = "abstract"
    tag: str = "subharmonic"
    d: int

    __test__ = False  # keep pytest from collecting this class

    @property
    def poles(self) -> tuple[tuple[float, ...], ...]:
        return ()

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> dict:
        raise NotImplementedError

    def __neg__(self) -> TestFunction:
        return Negation(self)


@dataclass(frozen=True, eq=False)
class Constant(TestFunction):
    d: int
    value: float = 1.0
    kind = "constant"
    tag = "harmonic"

    def __call__(self, x):
        return np.full(len(as_points(x, self.d)), float(self.value))

    def descriptor(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class HarmonicPoly(TestFunction):
    """sum_k coeffs[k] * prod_i x_i ** exponents[k, i]."""

    exponents: np.ndarray
    coeffs: np.ndarray
    label: str = ""
    kind = "harmonic_poly"
    tag = "harmonic"

    def __post_init__(self):
        object.__setattr__(self, "exponents", np.asarray(self.exponents, dtype=int))
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    @property
    def d(self) -> int:
        return self.exponents.shape[1]

    @property
    def degree(self) -> int:
        live = np.abs(self.coeffs) > 0
        return int(self.exponents[live].sum(axis=1).max()) if np.any(live) else 0

    def __call__(self, x):
        x = as_points(x, self.d)
        return monomial_matrix(x, self.exponents) @ self.coeffs

    def descriptor(self):
        return {"kind": self.kind, "label": self.label, "degree": self.degree,
                "terms": [[e.tolist(), float(c)] for e, c in zip(self.exponents, self.coeffs)
                          if c != 0]}


@dataclass(frozen=True, eq=False)
class PointPotential(TestFunction):
    """log|x - pole| for d = 2, -|x - pole|^(2-d) for d >= 3."""

    pole: np.ndarray
    kind = "point_potential"
    tag = "subharmonic"

    def __post_init__(self):
        object.__setattr__(self, "pole", as_point(self.pole))

    @property
    def d(self) -> int:
        return self.pole.size

    @property
    def poles(self):
        return (tuple(self.pole),)

    def __call__(self, x):
        r = np.linalg.norm(as_points(x, self.d) - self.pole, axis=1)
        with np.errstate(divide="ignore"):
            if self.d == 2:
                return np.log(r)
            return -(r ** (2.0 - self.d))

    def descriptor(self):
        return {"kind": self.kind, "pole": self.pole.tolist()}


@dataclass(frozen=True, eq=False)
class Truncated(TestFunction):
    """x -> max(f(x), -M)."""

    base: TestFunction
    level: float
    kind = "truncated_potential"
    tag = "subharmonic"

    @property
    def d(self) -> int:
        return self.base.d

    def __call__(self, x):
        return np.maximum(self.base(x), -self.level)

    def descriptor(self):
        return {"kind": self.kind, "M": self.level, "base": self.base.descriptor()}


@dataclass(frozen=True, eq=False)
class SmoothSbh(TestFunction):
    """Smooth subharmonic samples.

    ``form='regularized'``: the potential with |x - c|^2 replaced by
    |x - c|^2 + eps^2 (log(.)/2 for d = 2, -(.)^((2-d)/2) for d >= 3).
    ``form='square'``: |x - c|^2.
    """

    center: np.ndarray
    eps: float = 0.05
    form: str = "regularized"
    kind = "smooth_sbh"
    tag = "subharmonic"

    def __post_init__(self):
        object.__setattr__(self, "center", as_point(self.center))
        if self.form not in ("regularized", "square"):
            raise ValueError(f"unknown smooth form {self.form!r}")

    @property
    def d(self) -> int:
        return self.center.size

    def __call__(self, x):
        v = as_points(x, self.d) - self.center
        r2 = np.einsum("ij,ij->i", v, v)
        if self.form == "square":
            return r2
        q = r2 + self.eps ** 2
        if self.d == 2:
            return 0.5 * np.log(q)
        return -(q ** ((2.0 - self.d) / 2.0))

    def descriptor(self):
        return {"kind": self.kind, "form": self.form, "center": self.center.tolist(),
                "eps": self.eps}


@dataclass(frozen=True, eq=False)
class Negation(TestFunction):
    base: TestFunction
    kind = "negation"
    tag = "harmonic"

    def __post_init__(self):
        if self.base.tag != "harmonic":
            raise ValueError("only harmonic test functions may be negated")

    @property
    def d(self) -> int:
        return self.base.d

    def __call__(self, x):
        return -self.base(x)

    def descriptor(self):
        return {"kind": self.kind, "base": self.base.descriptor()}


@dataclass(frozen=True, eq=False)
class MaxCombo(TestFunction):
    parts: tuple[TestFunction, ...]
    kind = "max_combo"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if len(self.parts) < 2:
            raise ValueError("max_combo needs at least two operands")

    @property
    def tag(self) -> str:
        return "subharmonic"

    @property
    def d(self) -> int:
        return self.parts[0].d

    @property
    def poles(self):
        common = set(self.parts[0].poles)
        for p in self.parts[1:]:
            common &= set(p.poles)
        return tuple(sorted(common))

    def __call__(self, x):
        out = self.parts[0](x)
        for p in self.parts[1:]:
            out = np.maximum(out, p(x))
        return out

    def descriptor(self):
        return {"kind": self.kind, "parts": [p.descriptor() for p in self.parts]}


def point_potential(pole, d: int | None = None) -> PointPotential:
    pole = as_point(pole)
    if d is not None and pole.size != d:
        raise ValueError("pole dimension mismatch")
    if pole.size < 2:
        raise ValueError("point potentials need d >= 2")
    return PointPotential(pole)


def truncate(f: TestFunction, M: float) -> Truncated:
    if f.tag != "subharmonic":
        raise ValueError("truncation is defined for subharmonic test functions")
    if not M > 0:
        raise ValueError("truncation level must be positive")
    return Truncated(f, float(M))


# --------------------------------------------------------------------------
# harmonic polynomial basis
# --------------------------------------------------------------------------

def monomial_exponents(d: int, degree: int) -> np.ndarray:
    """All exponent vectors of total degree exactly ``degree`` (lexicographic)."""
    out = [e for e in itertools.product(range(degree + 1), repeat=d) if sum(e) == degree]
    return np.array(sorted(out, reverse=True), dtype=int).reshape(-1, d)


def monomial_matrix(x: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    out = np.ones((len(x), len(exponents)))
    for i in range(x.shape[1]):
        e = exponents[:, i]
        top = int(e.max()) if e.size else 0
        if top == 0:
            continue
        # power table by repeated products; much cheaper than a float pow
        table = np.empty((len(x), top + 1))
        table[:, 0] = 1.0
        for k in range(1, top + 1):
            table[:, k] = table[:, k - 1] * x[:, i]
        out *= table[:, e]
    return out


def laplacian_matrix(d: int, degree: int) -> np.ndarray:
    """Matrix of Laplace: homogeneous degree ``degree`` -> degree ``degree - 2``."""
    src = monomial_exponents(d, degree)
    if degree < 2:
        return np.zeros((0, len(src)))
    dst = monomial_exponents(d, degree - 2)
    index = {tuple(e): i for i, e in enumerate(dst)}
    L = np.zeros((len(dst), len(src)))
    for j, e in enumerate(src):
        for i in range(d):
            if e[i] >= 2:
                f = e.copy()
                f[i] -= 2
                L[index[tuple(f)], j] += e[i] * (e[i] - 1)
    return L


def harmonic_dimension(d: int, N: int) -> int:
    """Dimension of harmonic polynomials of degree <= N in d variables."""
    return comb(N + d - 1, d - 1) + comb(N + d - 2, d - 1)


@dataclass(frozen=True)
class HarmonicBasis:
    d: int
    max_degree: int
    members: tuple[HarmonicPoly, ...]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def coefficient_matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Exponents of all monomials of degree <= N and the (members x monomials) matrix."""
        exps = np.vstack([monomial_exponents(self.d, k) for k in range(self.max_degree + 1)])
        idx = {tuple(e): i for i, e in enumerate(exps)}
        C = np.zeros((len(self.members), len(exps)))
        for r, p in enumerate(self.members):
            for e, c in zip(p.exponents, p.coeffs):
                C[r, idx[tuple(e)]] += c
        return exps, C


def harmonic_poly_basis(d: int, N: int) -> HarmonicBasis:
    """Orthonormal-coefficient basis of harmonic polynomials of degree <= N.

    Built degree by degree as the null space of the Laplacian on homogeneous
    polynomials; members are homogeneous.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    if N < 0:
        raise ValueError("N must be >= 0")
    if N > MAX_DEGREE:
        raise ValueError(f"degree {N} exceeds the conditioning guard ({MAX_DEGREE})")
    members = []
    for k in range(N + 1):
        exps = monomial_exponents(d, k)
        L = laplacian_matrix(d, k)
        if L.shape[0] == 0:
            null = np.eye(len(exps))
        else:
            null = scipy.linalg.null_space(L)
        # deterministic sign: largest-magnitude coefficient positive
        for j in range(null.shape[1]):
            v = null[:, j]
            v = np.where(np.abs(v) < 1e-14, 0.0, v)
            if v[np.argmax(np.abs(v))] < 0:
                v = -v
            members.append(HarmonicPoly(exps, v, label=f"deg{k}.{j}"))
    return HarmonicBasis(d, N, tuple(members))


# --------------------------------------------------------------------------
# finite differences and Riesz measures
# --------------------------------------------------------------------------

def laplacian_fd(f, x, h: float = 1e-3) -> float:
    """(2d+1)-point central difference estimate of the Laplacian at ``x``."""
    x = as_point(x)
    d = x.size
    offsets = np.vstack([np.zeros(d), h * np.eye(d), -h * np.eye(d)])
    vals = np.asarray(f(x + offsets), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample(f"non-finite sample in the stencil around {x.tolist()}")
    return float((vals[1:].sum() - 2 * d * vals[0]) / h ** 2)


def riesz_measure_grid(f, box, h: float) -> DiscreteCharge:
    """Atoms c_d * (stencil Laplacian) * h^d on the grid lo + i*h inside ``box``."""
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    d = lo.size
    counts = np.floor((hi - lo) / h + 1e-9).astype(int) + 1
    axes = [lo[i] + h * np.arange(-1, counts[i] + 1) for i in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.asarray(f(grid.reshape(-1, d)), dtype=float).reshape(grid.shape[:-1])
    if not np.all(np.isfinite(vals)):
        raise NonFiniteSample("non-finite node value; truncate poled functions first")
    inner = tuple(slice(1, -1) for _ in range(d))
    lap = -2.0 * d * vals[inner]
    for i in range(d):
        up = list(inner)
        dn = list(inner)
        up[i] = slice(2, None)
        dn[i] = slice(0, -2)
        lap = lap + vals[tuple(up)] + vals[tuple(dn)]
    lap /= h ** 2
    cd = constants(d).c
    pts = grid[inner].reshape(-1, d)
    return DiscreteCharge(d, pts, (cd * lap * h ** d).ravel())


# --------------------------------------------------------------------------
# checker families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Family:
    members: tuple[TestFunction, ...]
    descriptor: dict

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def subfamily(self, idx) -> Family:
        idx = [int(i) for i in idx]
        desc = dict(self.descriptor)
        desc["subset"] = idx
        return Family(tuple(self.members[i] for i in idx), desc)


FAMILY_VERSION = 1


def harmonic_family(d: int, N: int = 6) -> Family:
    """Harmonic basis members and their negations (a family with H = -H)."""
    basis = harmonic_poly_basis(d, N)
    members = tuple(basis.members) + tuple(Negation(p) for p in basis.members)
    return Family(members, {"version": FAMILY_VERSION, "class": "harmonic",
                            "harmonic_degree": N})


def _in_shell_band(p: np.ndarray, shells) -> bool:
    for s in shells:
        r = float(np.linalg.norm(p - np.asarray(s.center)))
        if abs(r - s.radius) < s.width:
            return True
    return False


def sample_poles(d: int, region: SetExpr | None, n: int, seed: int = 0,
                 avoid: tuple[DiscreteCharge, ...] = (), clearance: float = 1e-6,
                 max_draws: int = 1 << 14) -> np.ndarray:
    """Scrambled Sobol points in ``region`` kept clear of atoms and resolution shells."""
    if n == 0:
        return np.empty((0, d))
    if region is None:
        lo, hi = -np.ones(d), np.ones(d)
    else:
        lo, hi = region.bounds()
    from scipy.spatial import cKDTree

    atoms = [m.points for m in avoid if m.n_atoms]
    tree = cKDTree(np.vstack(atoms)) if atoms else None
    shells = tuple(s for m in avoid for s in m.shells)
    sob = qmc.Sobol(d, scramble=True, seed=seed)
    out = []
    drawn = 0
    while len(out) < n and drawn < max_draws:
        cand = qmc.scale(sob.random(64), lo, hi)
        drawn += 64
        if region is not None:
            cand = cand[region.contains(cand)]
        for p in cand:
            if tree is not None and tree.query(p)[0] < clearance:
                continue
            if _in_shell_band(p, shells):
                continue
            out.append(p)
            if len(out) == n:
                break
    if len(out) < n:
        raise RuntimeError(f"only {len(out)} admissible poles found in {drawn} draws")
    return np.array(out)


def subharmonic_family(d: int, region: SetExpr | None = None, *, seed: int = 0,
                       harmonic_degree: int = 6, n_potentials: int = 20,
                       truncations=(5, 10, 20, 40), n_max_combos: int = 10,
                       poles=None, avoid: tuple[DiscreteCharge, ...] = (),
                       clearance: float = 1e-6) -> Family:
    """Default subharmonic checker family.

    Harmonic basis of degree ``harmonic_degree`` (no negations), truncated
    point potentials at every level in ``truncations`` with poles on a
    scrambled Sobol set over ``region``, and maxima of random pairs of basis
    members.
    """
    basis = harmonic_poly_basis(d, harmonic_degree)
    members: list[TestFunction] = list(basis.members)
    if poles is None:
        poles = sample_poles(d, region, n_potentials, seed, avoid, clearance)
    poles = np.asarray(poles, dtype=float).reshape(-1, d)
    for p in poles:
        pot = PointPotential(p)
        members.extend(truncate(pot, M) for M in truncations)
    rng = np.random.default_rng(seed)
    nonconst = basis.members[1:]
    for _ in range(n_max_combos if len(nonconst) >= 2 else 0):
        i, j = rng.choice(len(nonconst), size=2, replace=False)
        a, b = rng.normal(size=2)
        pa = HarmonicPoly(nonconst[i].exponents, a * nonconst[i].coeffs, nonconst[i].label)
        pb = HarmonicPoly(nonconst[j].exponents, b * nonconst[j].coeffs, nonconst[j].label)
        members.append(MaxCombo((pa, pb)))
    desc = {"version": FAMILY_VERSION, "class": "subharmonic",
            "harmonic_degree": harmonic_degree, "potential_poles": poles.tolist(),
            "truncations": list(truncations), "max_combos": n_max_combos, "seed": seed}
    return Family(tuple(members), desc)


def smooth_family(d: int, region: SetExpr | None = None, *, seed: int = 0,
                  harmonic_degree: int = 6, n_potentials: int = 20,
                  eps=(0.2, 0.1, 0.05), poles=None,
                  avoid: tuple[DiscreteCharge, ...] = ()) -> Family:
    """Family of smooth subharmonic functions: basis, regularised potentials, |x - c|^2."""
    basis = harmonic_poly_basis(d, harmonic_degree)
    members: list[TestFunction] = list(basis.members)
    if poles is None:
        poles = sample_poles(d, region, n_potentials, seed, avoid)
    poles = np.asarray(poles, dtype=float).reshape(-1, d)
    for p in poles:
        members.extend(SmoothSbh(p, e) for e in eps)
        members.append(SmoothSbh(p, form="square"))
    desc = {"version": FAMILY_VERSION, "class": "smooth", "harmonic_degree": harmonic_degree,
            "potential_poles": poles.tolist(), "eps": list(eps), "seed": seed}
    return Family(tuple(members), desc)


def family_from_descriptor(desc: dict, d: int, region: SetExpr | None = None,
                           avoid: tuple[DiscreteCharge, ...] = ()) -> Family:
    cls = desc.get("class", "subharmonic")
    N = int(desc.get("harmonic_degree", 6))
    if cls == "harmonic":
        return harmonic_family(d, N)
    poles = desc.get("potential_poles")
    if poles is not None and len(poles) == 0:
        poles = np.empty((0, d))
    seed = int(desc.get("seed", 0))
    if cls == "smooth":
        return smooth_family(d, region, seed=seed, harmonic_degree=N,
                             n_potentials=int(desc.get("n_potentials", 20)),
                             eps=tuple(desc.get("eps", (0.2, 0.1, 0.05))), poles=poles,
                             avoid=avoid)
    if cls != "subharmonic":
        raise ValueError(f"unknown family class {cls!r}")
    return subharmonic_family(d, region, seed=seed, harmonic_degree=N,
                              n_potentials=int(desc.get("n_potentials", 20)),
                              truncations=tuple(desc.get("truncations", (5, 10, 20, 40))),
                              n_max_combos=int(desc.get("max_combos", 10)), poles=poles,
                              avoid=avoid, clearance=float(desc.get("clearance", 1e-6)))
