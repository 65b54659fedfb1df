import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from balayage.checker import (NotACandidate, PreconditionError, check, mass_relations,
                              polar_witness_sweep, verify_arens_singer, verify_jensen)
from balayage.construct import harmonic_measure_ball, jensen_mixture
from balayage.geom import Ball
from balayage.measure import DiscreteCharge, restrict
from balayage.testfn import (Constant, HarmonicPoly, PointPotential, harmonic_family,
                             harmonic_poly_basis, subharmonic_family)

DISK = Ball([0, 0], 1.0)


def random_measure(rng, n, radius=0.6, d=2):
    pts = rng.normal(size=(n, d))
    pts *= (radius * rng.uniform(0, 1, n) / np.linalg.norm(pts, axis=1))[:, None]
    w = rng.uniform(0.1, 1.0, n)
    return DiscreteCharge.from_atoms(pts, w / w.sum())


def test_reflexive():
    rng = np.random.default_rng(0)
    m = random_measure(rng, 12)
    fam = subharmonic_family(2, DISK, seed=0, avoid=(m,))
    v = check(m, m, fam)
    assert v.passed and v.worst_margin == 0.0
    assert v.witness is not None


def test_mass_deficit_is_witnessed_by_one():
    theta = DiscreteCharge.dirac([0, 0])
    mu = DiscreteCharge.dirac([0, 0], 0.5)
    fam = [HarmonicPoly([[1, 0]], [1.0]), Constant(2, 1.0)]
    v = check(theta, mu, fam)
    assert not v.passed
    assert v.worst_margin == pytest.approx(-0.5)
    assert isinstance(v.witness, Constant) and v.witness_index == 1


def test_pole_on_mu_side_forces_failure():
    theta = DiscreteCharge.dirac([0, 0])
    mu = DiscreteCharge.from_atoms([[0.5, 0], [-0.5, 0]], [0.5, 0.5])
    pot = PointPotential([0.5, 0])
    v = check(theta, mu, [Constant(2, 1.0), pot], eps=1.0)
    assert not v.passed and v.worst_margin == -np.inf and v.witness is pot
    assert json.loads(json.dumps(v.to_json()))["worst_margin"] == "-inf"


def test_undefined_members_are_skipped_and_flagged():
    theta = DiscreteCharge.dirac([0, 0])
    clash = DiscreteCharge(2, [[0.5, 0], [0.5, 0], [0.1, 0]], [1.0, -1.0, 1.0])
    fam = [PointPotential([0.5, 0]), Constant(2, 1.0)]
    v = check(theta, clash, fam)
    assert v.skipped == 1 and v.inconclusive
    assert v.witness_index == 1


def test_ties_break_by_family_order():
    theta = DiscreteCharge.dirac([0, 0])
    mu = DiscreteCharge.dirac([0, 0], 0.5)
    v = check(theta, mu, [Constant(2, 1.0), Constant(2, 1.0)])
    assert v.witness_index == 0


def test_noise_level_failure_is_inconclusive():
    theta = DiscreteCharge.dirac([0.3, 0.1])
    mu = harmonic_measure_ball(Ball([0, 0], 0.5), [0.3, 0.1], 512)
    v = check(theta, mu, harmonic_family(2, 6), eps=0.0, compose=False)
    assert not v.passed and v.inconclusive
    assert check(theta, mu, harmonic_family(2, 6), eps=0.0).passed


def test_verdict_json_is_serialisable():
    m = random_measure(np.random.default_rng(1), 5)
    v = check(m, m, harmonic_family(2, 2))
    json.dumps(v.to_json())


def test_mass_relation_examples():
    jm = harmonic_measure_ball(Ball([0, 0], 0.5), [0.1, 0.0], 64)
    assert mass_relations(DiscreteCharge.dirac([0.1, 0]), jm, True, True).item2 is True
    one, two = DiscreteCharge.dirac([0, 0]), DiscreteCharge.dirac([0, 0], 2.0)
    rep = mass_relations(one, two, True, False)
    assert rep.item1 is True and rep.item2 is None and rep.passed
    rep = mass_relations(one, two, True, True)
    assert rep.item2 is False and not rep.passed


def test_jensen_examples():
    x = np.array([0.3, 0.1])
    fam = subharmonic_family(2, DISK, seed=0)
    assert verify_jensen(DiscreteCharge.dirac(x), x, fam).passed
    om = harmonic_measure_ball(Ball([0, 0], 0.5), x, 512)
    assert verify_jensen(om, x, subharmonic_family(2, DISK, seed=0, avoid=(om,)), 1e-6).passed
    with pytest.raises(NotACandidate):
        verify_jensen(DiscreteCharge.from_atoms([[0, 0], [0.1, 0]], [1.5, -0.5]), [0, 0], fam)


def test_sphere_measure_is_jensen_at_centre_of_a_larger_disk():
    sigma = DiscreteCharge.component("surface_sphere", [0, 0], 1.0, 1.0, 256).flatten()
    fam = subharmonic_family(2, Ball([0, 0], 1.5), seed=2, avoid=(sigma,))
    assert verify_jensen(sigma, [0, 0], fam, 1e-7).passed


def test_arens_singer_examples():
    x = np.array([0.3, 0.1])
    basis = harmonic_poly_basis(2, 6)
    assert verify_arens_singer(DiscreteCharge.dirac(x), x, basis).passed
    om = harmonic_measure_ball(Ball([0, 0], 0.5), x, 512)
    assert verify_arens_singer(om, x, basis, 1e-6).passed
    v = verify_arens_singer(DiscreteCharge.dirac(x, 2.0), x, basis)
    assert not v.passed and v.witness.degree == 0


def test_sweep_finds_atom_at_polar_point():
    theta = DiscreteCharge.component("uniform_ball", [0, 0], 0.3, 1.0, 32).flatten()
    w = 0.015625
    mu = DiscreteCharge.component("uniform_ball", [0, 0], 0.8, 1.0, 32).flatten()
    from balayage.measure import mix
    muE = mix([(1, mu),
               (1, DiscreteCharge.component("uniform_ball", [0.5, 0], 0.1, -w, 32).flatten()),
               (1, DiscreteCharge.dirac([0.5, 0], w))])
    res = polar_witness_sweep(theta, muE, [0.5, 0], [5, 10, 20, 30, 40, 50], 1e-7)
    assert res.first_failing is not None and res.first_failing <= 50
    tail = res.margins[2:]
    assert all(b < a for a, b in zip(tail, tail[1:]))
    assert polar_witness_sweep(theta, mu, [0.95, 0], [5, 10, 20, 50]).first_failing is None


def test_sweep_rejects_point_on_theta_support():
    theta = DiscreteCharge.dirac([0.5, 0])
    with pytest.raises(PreconditionError):
        polar_witness_sweep(theta, theta, [0.5, 0], [5, 10])
    with pytest.raises(ValueError):
        polar_witness_sweep(DiscreteCharge.dirac([0, 0]), theta, [0.5, 0], [10, 5])


def random_pair(seed):
    """Even seeds: a point mass and a Jensen mixture at it (a true balayage pair)."""
    rng = np.random.default_rng(seed)
    if seed % 2 == 0:
        x = rng.uniform(-0.3, 0.3, 2)
        a = rng.uniform(0, 1)
        mu = jensen_mixture(a, x, 1 - a, Ball(x, rng.uniform(0.05, 0.3)), 32)
        return DiscreteCharge.dirac(x), mu
    theta = random_measure(rng, int(rng.integers(1, 8)), 0.5)
    mu = random_measure(rng, int(rng.integers(1, 8)), 0.7)
    return theta, mu


@given(st.integers(0, 10_000))
def test_family_monotonicity(seed):
    theta, mu = random_pair(seed)
    fam = subharmonic_family(2, DISK, seed=seed, n_potentials=6, avoid=(theta, mu))
    full = check(theta, mu, fam, 1e-9)
    idx = np.random.default_rng(seed).choice(len(fam), size=len(fam) // 2, replace=False)
    sub = check(theta, mu, fam.subfamily(sorted(idx)), 1e-9)
    assert sub.worst_margin >= full.worst_margin
    assert sub.passed or not full.passed


@given(st.integers(0, 10_000))
def test_restriction_consistency(seed):
    theta, mu = random_pair(seed)
    fam = subharmonic_family(2, DISK, seed=seed, n_potentials=6, avoid=(theta, mu))
    region = Ball([0, 0], 0.75)
    a = check(theta, mu, fam, 1e-9)
    b = check(restrict(theta, region), restrict(mu, region), fam, 1e-9)
    assert a.passed == b.passed and a.worst_margin == b.worst_margin


def test_transitivity_at_doubled_tolerance():
    x = np.array([0.1, 0.05])
    a = DiscreteCharge.dirac(x)
    b = harmonic_measure_ball(Ball([0, 0], 0.3), x, 128)
    c = harmonic_measure_ball(Ball([0, 0], 0.6), x, 128)
    fam = subharmonic_family(2, DISK, seed=4, avoid=(a, b, c))
    ab, bc = check(a, b, fam, 1e-9), check(b, c, fam, 1e-9)
    assert ab.passed and bc.passed
    ac = check(a, c, fam, 1e-9)
    assert ac.worst_margin >= -(abs(ab.worst_margin) + abs(bc.worst_margin)) - 2e-9


@pytest.mark.parametrize("x", [(0.0, 0.0), (0.2, -0.1), (0.35, 0.2)])
def test_jensen_implies_arens_singer(x):
    om = harmonic_measure_ball(Ball([0, 0], 0.5), x, 256)
    fam = subharmonic_family(2, DISK, seed=1, avoid=(om,))
    assert verify_jensen(om, x, fam, 1e-6).passed
    assert verify_arens_singer(om, x, harmonic_poly_basis(2, 6), 1e-6).passed


def test_threaded_evaluation_is_identical(monkeypatch):
    theta, mu = random_pair(3)
    fam = subharmonic_family(2, DISK, seed=3, avoid=(theta, mu))
    serial = check(theta, mu, fam)
    monkeypatch.setenv("BALAYAGE_THREADS", "4")
    threaded = check(theta, mu, fam)
    assert np.array_equal(serial.margins, threaded.margins)
    assert serial.witness_index == threaded.witness_index
