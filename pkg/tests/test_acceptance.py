"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line; the lines are printed in the pytest
terminal summary (and immediately when run with ``-s``).
"""

import math
import time

import numpy as np
import pytest

from balayage.checker import check, mass_relations, verify_arens_singer, verify_jensen
from balayage.construct import (ShiftFamily, convolution_balayage, default_radius,
                                family_integral_balayage, harmonic_measure_ball, jensen_mixture,
                                smooth)
from balayage.geom import Ball, annulus, constants
from balayage.hull import inward_filled_hull, koc_check, rasterize
from balayage.lyons import (LyonsFixture, build_example5, hull_equality_fixture,
                            verify_example5)
from balayage.measure import DiscreteCharge, ball_mass, integrate, restrict, same_atoms
from balayage.testfn import (PointPotential, harmonic_family, harmonic_poly_basis,
                             riesz_measure_grid, subharmonic_family, truncate)

RESULTS = {}
DISK = Ball([0, 0], 1.0)


def record(key, checks):
    """checks: list of (label, ok, detail)."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{lab}={'ok' if good else 'FAIL'} ({info})" for lab, good, info in checks)
    line = f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}"
    RESULTS[key] = line
    print(line)
    assert ok, line


def test_ac1_excision_counterexample_end_to_end():
    t0 = time.perf_counter()
    f = LyonsFixture(2, 0.3, 0.8, (((0.5, 0.0), 0.1),))
    theta, mu, mu_E = build_example5(f, 128)
    fams = {"subharmonic": subharmonic_family(2, DISK, seed=0, avoid=(theta, mu)),
            "harmonic": harmonic_family(2, 8)}
    rep = verify_example5(f, theta, mu, mu_E, fams, (5, 10, 15, 20, 25, 30, 40, 50))
    elapsed = time.perf_counter() - t0
    atom = ball_mass(mu_E, (0.5, 0.0), 1e-9)
    wm = rep.sbh["worst_margin"]
    record("AC1", [
        ("a", rep.sbh["pass"] and wm >= -1e-7, f"worst margin {wm:.3g}"),
        ("b", rep.har["max_abs_margin"] <= 1e-6, f"max |margin| {rep.har['max_abs_margin']:.3g}"),
        ("c", abs(atom - 0.015625) <= 1e-12, f"atom {atom!r}"),
        ("d", rep.sweep["first_failing_M"] is not None and rep.sweep["first_failing_M"] <= 50,
         f"first failing M {rep.sweep['first_failing_M']}"),
        ("time", elapsed <= 10.0, f"{elapsed:.2f} s"),
    ])


def test_ac2_poisson_reproducing():
    x = np.array([0.3, 0.1])
    om = harmonic_measure_ball(Ball([0, 0], 0.5), x, 512)
    basis = harmonic_poly_basis(2, 6)
    dev = max(abs(integrate(om, h) - h(x[None])[0]) for h in basis)
    fam = subharmonic_family(2, DISK, seed=0, avoid=(om,))
    j = verify_jensen(om, x, fam, 1e-6)
    a = verify_arens_singer(om, x, basis, 1e-6)
    record("AC2", [("reproduce", dev <= 1e-6, f"max dev {dev:.3g}"),
                   ("jensen", j.passed, f"worst {j.worst_margin:.3g}"),
                   ("arens_singer", a.passed, f"worst {a.worst_margin:.3g}")])


def test_ac3_mass_relations():
    rng = np.random.default_rng(2024)
    bad = 0
    for k in range(20):
        n1, n2 = rng.integers(1, 6, size=2)
        theta = DiscreteCharge.from_atoms(rng.uniform(-1, 1, (n1, 2)), rng.uniform(0, 1, n1))
        w = rng.uniform(0, 1, n2)
        if k % 3 == 0:
            w = w / w.sum() * theta.weights.sum()
        mu = DiscreteCharge.from_atoms(rng.uniform(-1, 1, (n2, 2)), w)
        a, b = math.fsum(theta.weights), math.fsum(mu.weights)
        for one, minus in ((True, False), (True, True), (False, False)):
            rep = mass_relations(theta, mu, one, minus)
            exp1 = (a <= b + 1e-12) if one else None
            exp2 = (abs(a - b) <= 1e-12) if (one and minus) else None
            bad += (rep.item1 != exp1) + (rep.item2 != exp2)
    record("AC3", [("agreement", bad == 0, f"{bad} disagreements over 20 pairs")])


def test_ac4_convolution_chain():
    theta = DiscreteCharge.component("uniform_ball", [0, 0], 0.3, 1.0, 64).flatten()
    mu = DiscreteCharge.component("uniform_ball", [0, 0], 0.8, 1.0, 64).flatten()
    iota = DiscreteCharge.component("mollifier", [0, 0], 0.05, 1.0, 16).flatten()
    beta = convolution_balayage(mu, iota, DISK)
    fam = subharmonic_family(2, DISK, seed=0, avoid=(theta, beta))
    v = check(theta, beta, fam, 0.0)
    gap = same_atoms(beta, family_integral_balayage(mu, ShiftFamily(iota), DISK))
    record("AC4", [("chain", v.passed, f"worst {v.worst_margin:.3g}, tol {v.tolerance:.3g}"),
                   ("atoms", gap <= 1e-12, f"max weight gap {gap:.3g}")])


def test_ac5_smoothing():
    checks = []
    cases = {
        "jensen_mix": (DiscreteCharge.dirac([0, 0]),
                       jensen_mixture(0.5, [0, 0], 0.5, Ball([0, 0], 0.5), 128)),
        "excision_mu": (DiscreteCharge.component("uniform_ball", [0, 0], 0.3, 1, 32).flatten(),
                        DiscreteCharge.component("uniform_ball", [0, 0], 0.8, 1, 32).flatten()),
    }
    for name, (theta, mu) in cases.items():
        sm = smooth(mu, default_radius(DISK, 0.02), 16, DISK)
        beta = sm.flatten()
        fam = subharmonic_family(2, DISK, seed=0, avoid=(theta, mu, beta))
        before, after = check(theta, mu, fam, 0.0), check(theta, beta, fam, 0.0)
        checks.append((name, before.passed and after.passed and sm.n_atoms == 0,
                       f"before {before.worst_margin:.3g}, after {after.worst_margin:.3g}, "
                       f"point atoms {sm.n_atoms}"))
    record("AC5", checks)


def test_ac6_hull_engine():
    h = 1 / 256
    box = ([-2.1, -2.1], [2.1, 2.1])
    O = rasterize(DISK, box, h)
    K = rasterize(annulus([0, 0], 0.45, 0.55, closed=True), box, h)
    rep = inward_filled_hull(O, K)
    area = rep.hull.volume
    rel = abs(area - math.pi * 0.55 ** 2) / (math.pi * 0.55 ** 2)
    koc = koc_check(O, rasterize(Ball([0, 0], 2.0), box, h), K, expected_components=1)
    from test_hull import random_scene
    disagreements = 0
    for seed in range(50):
        try:
            Os, _, Ks = random_scene(seed)
            inward_filled_hull(Os, Ks)
        except Exception:
            disagreements += 1
    record("AC6", [("agree", rep.agree, "cell-exact"),
                   ("area", rel <= 0.03, f"rel err {rel:.3g}"),
                   ("monotone", koc.monotone, "O in B(0,2)"),
                   ("idempotent", koc.idempotent, ""),
                   ("random", disagreements == 0, f"{disagreements} of 50")])


def test_ac7_hull_equality():
    rep = hull_equality_fixture(2, 512)
    record("AC7", [("equality", rep.equality_gap <= 1e-7, f"gap {rep.equality_gap:.3g}"),
                   ("max_combo", rep.max_margin >= -1e-7, f"margin {rep.max_margin:.3g}")])


def test_ac8_riesz_and_constants():
    m = riesz_measure_grid(truncate(PointPotential([0.0, 0.0]), 20), ([-0.5, -0.5], [0.5, 0.5]),
                           1 / 400)
    mass = ball_mass(m, [0, 0], 0.2)
    c2, c3 = constants(2).c, constants(3).c
    b3 = constants(3).b[3]
    record("AC8", [("mass", abs(mass - 1) <= 0.02, f"{mass:.6f}"),
                   ("c2", abs(c2 - 1 / (2 * math.pi)) <= 1e-12, repr(c2)),
                   ("c3", abs(c3 - 1 / (4 * math.pi)) <= 1e-12, repr(c3)),
                   ("b3", abs(b3 - 4 * math.pi / 3) <= 1e-12, repr(b3))])


def test_ac9_checker_algebra():
    from test_checker import random_pair
    region = Ball([0, 0], 0.75)
    mono = restr = 0
    for seed in range(100):
        theta, mu = random_pair(seed)
        fam = subharmonic_family(2, DISK, seed=seed, n_potentials=6, avoid=(theta, mu))
        full = check(theta, mu, fam, 1e-9)
        idx = np.random.default_rng(seed).choice(len(fam), size=len(fam) // 2, replace=False)
        sub = check(theta, mu, fam.subfamily(sorted(idx)), 1e-9)
        mono += (sub.worst_margin < full.worst_margin) or (full.passed and not sub.passed)
        r = check(restrict(theta, region), restrict(mu, region), fam, 1e-9)
        restr += (r.passed != full.passed) or (r.worst_margin != full.worst_margin)
    record("AC9", [("monotonicity", mono == 0, f"{mono} violations"),
                   ("restriction", restr == 0, f"{restr} violations")])


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q", "-s"]))
