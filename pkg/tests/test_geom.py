import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from balayage.geom import (Ball, EMPTY, PoleError, Union, annulus, constants, half_gamma,
                           invert, kelvin_transform, kelvin_value, set_from_json)
from balayage.testfn import laplacian_fd

coord = st.floats(-5, 5, allow_nan=False)


@pytest.mark.parametrize("p, o, expected", [
    ((2.0, 0.0, 0.0), (0.0, 0.0, 0.0), (0.5, 0.0, 0.0)),
    ((1.0, 0.0), (0.0, 0.0), (1.0, 0.0)),
])
def test_invert_examples(p, o, expected):
    assert np.allclose(invert(p, o), expected, atol=1e-15)


def test_invert_twice_returns_point():
    assert np.allclose(invert(invert((0.3, 0.4), (0, 0)), (0, 0)), (0.3, 0.4), atol=1e-15)


def test_invert_at_center_is_a_pole():
    with pytest.raises(PoleError):
        invert((1.0, 2.0), (1.0, 2.0))


@given(st.lists(coord, min_size=3, max_size=3), st.lists(coord, min_size=3, max_size=3))
def test_invert_is_involution(p, o):
    p, o = np.array(p), np.array(o)
    if np.linalg.norm(p - o) < 1e-3:
        return
    back = invert(invert(p, o), o)
    assert np.linalg.norm(back - p) <= 1e-12 * max(1.0, np.linalg.norm(p))


@given(st.floats(0, 2 * math.pi), st.lists(coord, min_size=2, max_size=2))
def test_unit_sphere_is_fixed(t, o):
    o = np.array(o)
    p = o + np.array([math.cos(t), math.sin(t)])
    assert np.linalg.norm(invert(p, o) - p) <= 1e-12 * max(1.0, np.linalg.norm(p))


def test_kelvin_value_examples():
    assert kelvin_value(5.0, (0.3, -1.2), (0.0, 0.0), 2) == 5.0
    assert kelvin_value(1.0, (2.0, 0.0, 0.0), (0.0, 0.0, 0.0), 3) == pytest.approx(2.0)
    with pytest.raises(PoleError):
        kelvin_value(1.0, (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 3)


def test_kelvin_of_constant_is_inverse_distance_and_harmonic():
    o = np.zeros(3)
    rng = np.random.default_rng(3)
    x = rng.normal(size=(20, 3))
    x *= (1.7 / np.linalg.norm(x, axis=1))[:, None]
    for xi in x:
        y = invert(xi, o)
        assert kelvin_value(1.0, xi, o, 3) == pytest.approx(1 / np.linalg.norm(y), rel=1e-12)
    u = kelvin_transform(lambda pts: np.ones(len(np.atleast_2d(pts))), o, 3)
    h = 1e-3
    for xi in x[:5]:
        y = invert(xi, o)
        # stencil truncation error is O(h^2 |y|^-5) for 1/|y|
        assert abs(laplacian_fd(u, y, h)) < 10 * h ** 2 * np.linalg.norm(y) ** -5


def test_half_gamma_matches_math_gamma():
    for k in range(1, 21):
        assert half_gamma(k) == pytest.approx(math.gamma(k / 2), rel=1e-13)


@pytest.mark.parametrize("d", range(2, 9))
def test_constants_against_gamma_oracle(d):
    c = constants(d)
    assert c.s == pytest.approx(oracles.sphere_area(d), rel=1e-12)
    assert c.c == pytest.approx(oracles.riesz_constant(d), rel=1e-12)
    assert c.b[d] == pytest.approx(oracles.ball_volume(d), rel=1e-12)
    assert c.b[0] == 0
    assert c.c * c.s * max(1, d - 2) == pytest.approx(1.0, abs=1e-12)


def test_constants_examples():
    assert constants(2).s == pytest.approx(2 * math.pi, abs=1e-12)
    assert constants(2).c == pytest.approx(1 / (2 * math.pi), abs=1e-12)
    assert constants(2).b[2] == pytest.approx(math.pi, abs=1e-12)
    assert constants(3).s == pytest.approx(4 * math.pi, abs=1e-12)
    assert constants(3).c == pytest.approx(1 / (4 * math.pi), abs=1e-12)
    assert constants(3).b[3] == pytest.approx(4 * math.pi / 3, abs=1e-12)
    assert constants(4).c == pytest.approx(1 / (4 * math.pi ** 2), abs=1e-12)
    with pytest.raises(ValueError):
        constants(1)


def test_set_expressions():
    b = Ball([0, 0], 1.0)
    ann = annulus([0, 0], 0.45, 0.55, closed=True)
    pts = np.array([[0, 0], [0.5, 0], [0.55, 0], [0.9, 0], [1.0, 0]])
    assert b.contains(pts).tolist() == [True, True, True, True, False]
    assert ann.contains(pts).tolist() == [False, True, True, False, False]
    u = Ball([-2, 0], 0.5) | Ball([2, 0], 0.5)
    assert u.contains(np.array([[-2, 0], [0, 0], [2.2, 0]])).tolist() == [True, False, True]
    assert not EMPTY.contains(np.zeros((1, 2)))[0]
    assert b.classify_ball([0, 0], 0.5) == "inside"
    assert b.classify_ball([3, 0], 0.5) == "outside"
    assert b.classify_ball([1, 0], 0.5) == "unknown"


def test_set_json_round_trip():
    s = (Ball([0, 0], 1.0) | Ball([3, 0], 0.5, closed=True)) - Ball([0, 0], 0.2)
    t = set_from_json(s.to_json())
    rng = np.random.default_rng(0)
    x = rng.uniform(-4, 4, size=(500, 2))
    assert np.array_equal(s.contains(x), t.contains(x))
    assert isinstance(set_from_json({"op": "union", "args": []}), Union)
