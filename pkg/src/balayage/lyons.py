"""A harmonic balayage that charges a finite (hence polar) set.

Start from the normalised volume measures on two concentric balls of radii
``r0 < r`` inside the domain ball of radius ``R``.  Carve finitely many small
balls ``B(e_j, r_j)`` out of the larger measure and put their mass back as
atoms at the centres ``e_j``.  By the mean-value property the new measure
integrates every harmonic function exactly like the old one, yet it puts
positive mass on the finite set ``{e_j}``.  A truncated point potential at an
``e_j`` sees that mass and breaks the subharmonic ordering.

Only finitely many excisions are built; one already shows the effect.

The module also holds a small fixture in which the two measures agree on
functions harmonic near the inward-filled hull of their supports, and
compare correctly on subharmonic ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .checker import check, polar_witness_sweep
from .construct import harmonic_measure_ball
from .geom import Ball, as_point
from .hull import inward_filled_hull, rasterize, rasterize_points
from .measure import DiscreteCharge, ball_mass, integrate, mix, total_mass
from .testfn import (Family, MaxCombo, PointPotential, harmonic_family,
                     subharmonic_family)

DEFAULT_M_LIST = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0, 50.0)


class FixtureError(ValueError):
    pass


@dataclass(frozen=True)
class LyonsFixture:
    d: int
    r0: float
    r: float
    excisions: tuple[tuple[tuple[float, ...], float], ...]
    R: float = 1.0  # radius of the domain ball, centred at 0

    def __post_init__(self):
        ex = tuple((tuple(float(v) for v in as_point(e)), float(rj)) for e, rj in self.excisions)
        object.__setattr__(self, "excisions", ex)
        if self.d < 2:
            raise FixtureError("d must be at least 2")
        if not 0 < self.r0 < self.r < self.R:
            raise FixtureError(f"need 0 < r0 < r < R, got r0={self.r0}, r={self.r}, R={self.R}")
        for e, rj in ex:
            if len(e) != self.d:
                raise FixtureError("excision centre has the wrong dimension")
            if not rj > 0:
                raise FixtureError("excision radii must be positive")
            n = float(np.linalg.norm(e))
            if not (n - rj > self.r0 and n + rj < self.r):
                raise FixtureError(f"closed ball B({list(e)}, {rj}) is not inside the annulus "
                                   f"{self.r0} < |x| < {self.r}")
        for i in range(len(ex)):
            for j in range(i + 1, len(ex)):
                gap = np.linalg.norm(np.subtract(ex[i][0], ex[j][0]))
                if not gap > ex[i][1] + ex[j][1]:
                    raise FixtureError(f"excision balls {i} and {j} overlap")

    @property
    def atom_weights(self) -> np.ndarray:
        """r_j^d / r^d: the excised mass, returned as an atom at e_j."""
        return np.array([(rj / self.r) ** self.d for _, rj in self.excisions])

    @property
    def domain(self) -> Ball:
        return Ball(np.zeros(self.d), self.R)

    def scaled(self, s: float) -> LyonsFixture:
        return LyonsFixture(self.d, self.r0 * s, self.r * s,
                            tuple((tuple(np.multiply(e, s)), rj * s) for e, rj in self.excisions),
                            self.R * s)

    def to_json(self) -> dict:
        return {"d": self.d, "r0": self.r0, "r": self.r, "R": self.R,
                "excisions": [{"center": list(e), "radius": rj} for e, rj in self.excisions]}

    @classmethod
    def from_json(cls, obj: dict) -> LyonsFixture:
        return cls(int(obj["d"]), float(obj["r0"]), float(obj["r"]),
                   tuple((x["center"], x["radius"]) for x in obj.get("excisions", [])),
                   float(obj.get("R", 1.0)))


def default_fixture() -> LyonsFixture:
    return LyonsFixture(2, 0.3, 0.8, (((0.5, 0.0), 0.1),))


def build_example5(f: LyonsFixture, level: int = 128, flat: bool = True):
    """(theta, mu, mu_E), with theta and mu uniform on the balls of radius r0 and r."""
    o = np.zeros(f.d)
    theta = DiscreteCharge.component("uniform_ball", o, f.r0, 1.0, level)
    mu = DiscreteCharge.component("uniform_ball", o, f.r, 1.0, level)
    parts = [(1.0, mu)]
    for (e, rj), w in zip(f.excisions, f.atom_weights):
        parts.append((1.0, DiscreteCharge.component("uniform_ball", e, rj, -w, level)))
        parts.append((1.0, DiscreteCharge.dirac(e, w)))
    mu_E = mix(parts)
    if flat:
        theta, mu, mu_E = theta.flatten(), mu.flatten(), mu_E.flatten()
    return theta, mu, mu_E


def default_families(f: LyonsFixture, theta: DiscreteCharge, mu: DiscreteCharge,
                     seed: int = 0, harmonic_degree: int = 8) -> dict[str, Family]:
    return {"subharmonic": subharmonic_family(f.d, f.domain, seed=seed, avoid=(theta, mu)),
            "harmonic": harmonic_family(f.d, harmonic_degree)}


def potential_offset(f: LyonsFixture, j: int = 0) -> float | None:
    """Closed-form margin offset C for the sweep at e_j (d = 2, single excision only).

    With the log potential at e, margin(M) = C - w M once M exceeds the
    potential's range on the continuous parts.
    """
    if f.d != 2 or len(f.excisions) != 1:
        return None
    e, rj = f.excisions[j]
    rho = float(np.linalg.norm(e))
    w = (rj / f.r) ** 2
    on_mu = np.log(f.r) - (f.r ** 2 - rho ** 2) / (2 * f.r ** 2)
    on_cut = np.log(rj) - 0.5
    on_theta = np.log(rho)
    return float(on_mu - w * on_cut - on_theta)


@dataclass
class Example5Report:
    sbh: dict
    har: dict
    sweep: dict
    masses: dict
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"pass": self.passed, "subharmonic_theta_mu": self.sbh,
                "harmonic_theta_muE": self.har, "polar_witness": self.sweep,
                "atoms_on_E": self.masses, **self.details}


def verify_example5(f: LyonsFixture, theta: DiscreteCharge, mu: DiscreteCharge,
                    mu_E: DiscreteCharge, families: dict[str, Family] | None = None,
                    M_list=DEFAULT_M_LIST, eps_sbh: float = 1e-7, eps_har: float = 1e-6,
                    eps_sweep: float = 1e-7, seed: int = 0) -> Example5Report:
    """Check the four conclusions of the construction.

    1. theta <= mu over the subharmonic family.
    2. theta <= mu_E over the harmonic family, with every |margin| small.
    3. The sweep at e_1 finds a truncation level where mu_E loses.
    4. mu_E puts mass r_j^d / r^d on each e_j.
    """
    if families is None:
        families = default_families(f, theta, mu, seed)
    v1 = check(theta, mu, families["subharmonic"], eps_sbh)
    sbh = {**v1.to_json(), "pass": bool(v1.passed)}

    v2 = check(theta, mu_E, families["harmonic"], eps_har)
    max_abs = float(np.nanmax(np.abs(v2.margins))) if v2.margins.size else 0.0
    har_ok = bool(v2.passed and max_abs <= v2.tolerance)
    har = {**v2.to_json(), "max_abs_margin": max_abs, "pass": har_ok}

    e1 = f.excisions[0][0]
    sw = polar_witness_sweep(theta, mu_E, e1, M_list, eps_sweep)
    w1 = float(f.atom_weights[0])
    offset = sw.margins[-1] + w1 * sw.levels[-1]
    sweep = {**sw.to_json(), "point": list(e1), "atom_weight": w1,
             "offset_estimate": offset, "offset_closed_form": potential_offset(f),
             "pass": sw.first_failing is not None}

    found = [ball_mass(mu_E, e, 1e-9) for e, _ in f.excisions]
    expect = f.atom_weights.tolist()
    mass_ok = all(abs(a - b) <= 1e-12 for a, b in zip(found, expect))
    masses = {"found": found, "expected": expect, "total": float(sum(found)),
              "pass": bool(mass_ok)}

    passed = bool(v1.passed and har_ok and sweep["pass"] and mass_ok)
    details = {"fixture": f.to_json(),
               "total_masses": {"theta": total_mass(theta), "mu": total_mass(mu),
                                "mu_E": total_mass(mu_E)}}
    return Example5Report(sbh, har, sweep, masses, passed, details)


@dataclass
class HullEqualityReport:
    equality_gap: float
    max_margin: float
    tol: float
    cases: list[dict]

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.cases if not c["excluded"])

    def to_json(self) -> dict:
        return {"pass": self.passed, "equality_gap": self.equality_gap,
                "max_combo_margin": self.max_margin, "tol": self.tol, "cases": self.cases}


def hull_equality_fixture(d: int = 2, n: int = 512, tol: float = 1e-7,
                          h: float | None = None) -> HullEqualityReport:
    """theta = delta_0 against the harmonic measure of B(0, 1/2) at 0, inside the unit ball.

    Poles are checked against a rasterised hull of the two supports; a pole
    inside the hull makes the case excluded, not failed.
    """
    o = np.zeros(d)
    theta = DiscreteCharge.dirac(o)
    mu = harmonic_measure_ball(Ball(o, 0.5), o, n)
    h = h if h is not None else (1 / 64 if d == 2 else 1 / 24)
    box = (-1.1 * np.ones(d), 1.1 * np.ones(d))
    O = rasterize(Ball(o, 1.0), box, h)
    supp = np.vstack([theta.points, mu.points])
    K = rasterize_points(supp, box, h, dilate=1)
    hull = inward_filled_hull(O, K.like(K.cells & O.cells)).hull

    def in_hull(p) -> bool:
        idx = tuple(np.floor((np.asarray(p) - hull.lo) / hull.h).astype(int))
        return bool(hull.cells[idx])

    e1 = np.eye(d)[0]
    cases = []
    gap = float("nan")
    for label, pole in (("pole_0.8", 0.8 * e1), ("pole_0.49", 0.49 * e1)):
        pot = PointPotential(pole)
        g = abs(integrate(mu, pot) - integrate(theta, pot))
        excl = in_hull(pole)
        if label == "pole_0.8":
            gap = g
        cases.append({"case": label, "kind": "equality", "pole": pole.tolist(), "gap": g,
                      "excluded": excl, "pass": bool(excl or g <= tol)})
    u = MaxCombo((PointPotential(0.8 * e1), PointPotential(-0.8 * e1)))
    m = integrate(mu, u) - integrate(theta, u)
    excl = in_hull(0.8 * e1) or in_hull(-0.8 * e1)
    cases.append({"case": "max_combo_pm0.8", "kind": "inequality", "margin": m,
                  "excluded": excl, "pass": bool(excl or m >= -tol)})
    return HullEqualityReport(gap, m, tol, cases)
