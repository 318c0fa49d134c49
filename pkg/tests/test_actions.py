import itertools
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from routemap.actions import (
    DEFAULT_THETA,
    Action,
    compose,
    from_angle,
    from_quarter_turns,
    inverse,
    normalize_angle,
    to_quarter_turns,
)

F, L, R, T = Action.FORWARD, Action.LEFT, Action.RIGHT, Action.AROUND
ALL = list(Action)

# Independent model: an action is the planar rotation it applies to the heading.
_DEGREES = {F: 0, L: 90, T: 180, R: -90}


def _rotation(action):
    a = math.radians(_DEGREES[action])
    return ((round(math.cos(a)), -round(math.sin(a))), (round(math.sin(a)), round(math.cos(a))))


def _matmul(m, n):
    return tuple(tuple(sum(m[i][k] * n[k][j] for k in range(2)) for j in range(2)) for i in range(2))


def _from_rotation(m):
    return next(a for a in ALL if _rotation(a) == m)


def test_exactly_four_actions():
    assert len(ALL) == 4
    assert {a.value for a in ALL} == {"F", "L", "R", "T"}


def test_quarter_turn_encoding():
    assert [to_quarter_turns(a) for a in (F, L, T, R)] == [0, 1, 2, 3]
    assert from_quarter_turns(2) is T
    assert to_quarter_turns(L) == 1
    for q in range(4):
        assert to_quarter_turns(from_quarter_turns(q)) == q


@pytest.mark.parametrize(
    "a, b, expected",
    [
        (T, L, R),
        (T, R, L),
        (L, R, F),
        (L, L, T),
        (R, R, T),
    ],
)
def test_composition_identities(a, b, expected):
    assert compose(a, b) is expected
    assert a * b is expected


@pytest.mark.parametrize("x", ALL)
def test_forward_is_identity(x):
    assert compose(F, x) is x
    assert compose(x, F) is x


@pytest.mark.parametrize("a, expected", [(L, R), (F, F), (T, T), (R, L)])
def test_inverse(a, expected):
    assert inverse(a) is expected
    assert ~a is expected
    assert compose(a, inverse(a)) is F


@pytest.mark.parametrize("a, b", list(itertools.product(ALL, repeat=2)))
def test_compose_matches_rotation_model(a, b):
    assert compose(a, b) is _from_rotation(_matmul(_rotation(a), _rotation(b)))
    assert to_quarter_turns(compose(a, b)) == (to_quarter_turns(a) + to_quarter_turns(b)) % 4


def test_group_axioms():
    for a, b, c in itertools.product(ALL, repeat=3):
        assert compose(compose(a, b), c) is compose(a, compose(b, c))
    for a, b in itertools.product(ALL, repeat=2):
        assert compose(a, b) is compose(b, a)


@pytest.mark.parametrize(
    "angle, expected",
    [
        (0.0, F),
        (math.pi / 2, L),
        (math.pi, T),
        (-math.pi / 2, R),
        (math.pi / 4, F),
        (-math.pi / 4, F),
        (3 * math.pi / 4, T),
        (-3 * math.pi / 4, T),
        (math.pi / 4 + 1e-9, L),
        (-math.pi / 4 - 1e-9, R),
    ],
)
def test_from_angle(angle, expected):
    assert from_angle(angle, DEFAULT_THETA) is expected


def test_from_angle_other_theta():
    assert from_angle(0.5, theta=0.4) is L
    assert from_angle(0.3, theta=0.4) is F
    assert from_angle(2.8, theta=0.4) is T


@pytest.mark.parametrize("bad", [-math.pi, 4.0, float("nan"), float("inf")])
def test_from_angle_domain(bad):
    with pytest.raises(ValueError):
        from_angle(bad)


@pytest.mark.parametrize("theta", [0.0, math.pi / 2, -0.1, 2.0])
def test_theta_range(theta):
    with pytest.raises(ValueError):
        from_angle(0.0, theta)


def test_normalize_angle():
    assert normalize_angle(-math.pi) == pytest.approx(math.pi)
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
    assert normalize_angle(-math.pi / 2 + 4 * math.pi) == pytest.approx(-math.pi / 2)


def _off_boundary(x, theta=DEFAULT_THETA):
    return all(abs(abs(x) - b) > 1e-9 for b in (theta, math.pi - theta)) and abs(x) < math.pi - 1e-9


@given(st.floats(min_value=-math.pi, max_value=math.pi, exclude_min=True).filter(_off_boundary))
def test_negated_angle_gives_inverse(x):
    assert from_angle(-x) is inverse(from_angle(x))


def test_serialized_tokens():
    assert [str(a) for a in (F, L, R, T)] == ["F", "L", "R", "T"]
    assert Action.parse("R") is R
    with pytest.raises(ValueError):
        Action.parse("X")
