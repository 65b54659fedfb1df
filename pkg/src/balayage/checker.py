"""The balayage relation theta <=_H mu over a finite test family.

``check`` integrates every family member against both charges and reports
the worst margin ``int h dmu - int h dtheta``.  Verdicts are relative to the
declared finite family only.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geom import as_point
from .measure import DiscreteCharge, UndefinedIntegral, integrate, total_mass
from .testfn import Constant, Family, HarmonicBasis, TestFunction, PointPotential, truncate

INCONCLUSIVE_SKIP_RATIO = 0.10


class PreconditionError(ValueError):
    """Inputs violate the hypotheses of the requested check; no verdict issued."""


class NotACandidate(ValueError):
    """The measure cannot be a representing measure (e.g. negative atoms)."""


@dataclass
class BalayageVerdict:
    passed: bool
    worst_margin: float
    witness: TestFunction | None
    witness_index: int | None
    tolerance: float
    family: dict
    skipped: int = 0
    inconclusive: bool = False
    margins: np.ndarray = field(default_factory=lambda: np.empty(0))
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def to_json(self) -> dict:
        wm = self.worst_margin
        return {"pass": bool(self.passed),
                "worst_margin": wm if np.isfinite(wm) else ("-inf" if wm < 0 else "inf"),
                "witness": None if self.witness is None else self.witness.descriptor(),
                "witness_index": self.witness_index,
                "skipped": int(self.skipped),
                "inconclusive": bool(self.inconclusive),
                "tolerance": float(self.tolerance),
                "family": self.family,
                **({"details": _jsonable(self.details)} if self.details else {})}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return None
        return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BALAYAGE_THREADS", "1")))
    except ValueError:
        return 1


def _safe_integral(m: DiscreteCharge, f) -> float:
    try:
        return integrate(m, f)
    except UndefinedIntegral:
        return float("nan")


def integrals(m: DiscreteCharge, family: Sequence) -> np.ndarray:
    """int h dm for every member (NaN where undefined)."""
    members = list(family)
    n = _threads()
    if n > 1 and len(members) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            vals = list(pool.map(lambda f: _safe_integral(m, f), members))
    else:
        vals = [_safe_integral(m, f) for f in members]
    return np.array(vals, dtype=float)


def ext_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a - b elementwise, NaN where both are the same infinity."""
    with np.errstate(invalid="ignore"):
        return a - b


def budget_of(*charges: DiscreteCharge) -> float:
    return float(sum(m.budget for m in charges))


def check(theta: DiscreteCharge, mu: DiscreteCharge, family, eps: float = 0.0,
          compose: bool = True) -> BalayageVerdict:
    """Verdict for theta <=_H mu over ``family``.

    The tolerance is ``eps`` plus, when ``compose`` is set, the quadrature
    budgets of both charges.  Members whose integrals are undefined are
    skipped and counted.
    """
    theta.require_flat("check")
    mu.require_flat("check")
    if theta.d != mu.d:
        raise ValueError("dimension mismatch")
    members = list(family)
    desc = family.descriptor if isinstance(family, Family) else {"class": "custom",
                                                                  "size": len(members)}
    budget = budget_of(theta, mu)
    tol = eps + (budget if compose else 0.0)
    if not members:
        return BalayageVerdict(True, float("inf"), None, None, tol, desc)
    lhs = integrals(theta, members)
    rhs = integrals(mu, members)
    margins = ext_diff(rhs, lhs)
    valid = ~np.isnan(margins)
    skipped = int(np.count_nonzero(~valid))
    if not np.any(valid):
        return BalayageVerdict(False, float("nan"), None, None, tol, desc, skipped, True,
                               margins)
    masked = np.where(valid, margins, np.inf)
    k = int(np.argmin(masked))          # first index on ties
    worst = float(masked[k])
    passed = worst >= -tol
    inconclusive = skipped > INCONCLUSIVE_SKIP_RATIO * len(members)
    if not passed and worst >= -(eps + budget):
        inconclusive = True             # failure lies inside the discretisation noise
    return BalayageVerdict(passed, worst, members[k], k, tol, desc, skipped, inconclusive,
                           margins, {"theta_integrals": lhs, "mu_integrals": rhs})


@dataclass
class MassReport:
    theta_mass: float
    mu_mass: float
    item1: bool | None    # theta(O) <= mu(O), when 1 is in H
    item2: bool | None    # theta(O) == mu(O), when +-1 are in H

    @property
    def passed(self) -> bool:
        return all(v is not False for v in (self.item1, self.item2))

    def to_json(self) -> dict:
        return {"theta_mass": self.theta_mass, "mu_mass": self.mu_mass,
                "item1": self.item1, "item2": self.item2, "pass": self.passed}


def mass_relations(theta: DiscreteCharge, mu: DiscreteCharge, family_has_one: bool,
                   family_has_minus_one: bool, tol: float = 1e-12) -> MassReport:
    a, b = total_mass(theta), total_mass(mu)
    item1 = (a <= b + tol) if family_has_one else None
    item2 = (abs(a - b) <= tol) if (family_has_one and family_has_minus_one) else None
    return MassReport(a, b, item1, item2)


def _require_positive(mu: DiscreteCharge):
    mu.require_flat("representing-measure check")
    if np.any(mu.weights < 0):
        raise NotACandidate("measure has negative atoms")


def verify_jensen(mu: DiscreteCharge, x, family, eps: float = 0.0,
                  compose: bool = True) -> BalayageVerdict:
    """Is ``mu`` a Jensen measure for ``x`` relative to ``family``?"""
    _require_positive(mu)
    x = as_point(x)
    tol = eps + (mu.budget if compose else 0.0)
    mass = total_mass(mu)
    mass_ok = abs(mass - 1.0) <= max(tol, 1e-12)
    v = check(DiscreteCharge.dirac(x), mu, family, eps, compose)
    v.details["mass"] = mass
    v.details["mass_ok"] = mass_ok
    v.passed = v.passed and mass_ok
    return v


def verify_arens_singer(mu: DiscreteCharge, x, basis: HarmonicBasis | Sequence,
                        eps: float = 0.0, compose: bool = True) -> BalayageVerdict:
    """|int h dmu - h(x)| <= tolerance for every harmonic ``h`` in ``basis``."""
    _require_positive(mu)
    x = as_point(x)
    members = list(basis)
    if not any(isinstance(m, Constant) or getattr(m, "degree", None) == 0 for m in members):
        members = [Constant(x.size, 1.0)] + members
    tol = eps + (mu.budget if compose else 0.0)
    ints = integrals(mu, members)
    at_x = np.array([float(h(x[None, :])[0]) for h in members])
    dev = np.abs(ints - at_x)
    k = int(np.argmax(dev))
    worst = float(dev[k])
    desc = {"class": "harmonic_basis", "size": len(members),
            "harmonic_degree": getattr(basis, "max_degree", None)}
    return BalayageVerdict(worst <= tol, -worst, members[k], k, tol, desc, 0, False,
                           ints - at_x, {"mass": total_mass(mu)})


@dataclass
class SweepResult:
    first_failing: float | None
    levels: list[float]
    margins: list[float]
    eps: float

    def to_json(self) -> dict:
        return {"first_failing_M": self.first_failing,
                "levels": list(self.levels), "margins": list(self.margins), "eps": self.eps}


def polar_witness_sweep(theta: DiscreteCharge, mu: DiscreteCharge, e, M_list,
                        eps: float = 0.0, clearance: float = 1e-6) -> SweepResult:
    """Margins of the truncated point potential at ``e`` for increasing truncations.

    Returns the first ``M`` whose margin falls below ``-eps``.
    """
    theta.require_flat("polar_witness_sweep")
    mu.require_flat("polar_witness_sweep")
    e = as_point(e)
    if theta.n_atoms:
        live = theta.weights != 0
        dist = np.linalg.norm(theta.points[live] - e, axis=1)
        if dist.size and dist.min() < clearance:
            raise PreconditionError(
                f"witness point {e.tolist()} lies on the support of theta "
                f"(distance {dist.min():.3g}); the polar-set statement excludes supp theta")
    levels = [float(M) for M in M_list]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("M_list must be strictly increasing")
    pot = PointPotential(e)
    margins = []
    first = None
    for M in levels:
        h = truncate(pot, M)
        m = integrate(mu, h) - integrate(theta, h)
        margins.append(float(m))
        if first is None and m < -eps:
            first = M
    return SweepResult(first, levels, margins, eps)
