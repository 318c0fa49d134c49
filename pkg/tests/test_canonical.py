import pytest
from hypothesis import given
from hypothesis import strategies as st

from routemap.actions import Action
from routemap.canonical import CanonicalPath, PathValidationError, reverse, validate

NAMES = ["n1", "n2", "n3", "n4", "Kitchen", "Lobby", "Living room"]


@st.composite
def valid_paths(draw):
    k = draw(st.integers(min_value=2, max_value=8))
    # each step moves 1..len-1 places round the name list, so no repeats
    steps = draw(st.lists(st.integers(1, len(NAMES) - 1), min_size=k - 1, max_size=k - 1))
    index = draw(st.integers(0, len(NAMES) - 1))
    waypoints = [NAMES[index]]
    for step in steps:
        index = (index + step) % len(NAMES)
        waypoints.append(NAMES[index])
    actions = draw(st.lists(st.sampled_from(list(Action)), min_size=k - 2, max_size=k - 2))
    return CanonicalPath(waypoints, actions)


def test_valid_path():
    assert validate(CanonicalPath(["n1", "n2", "n3"], ["R"])) == []


def test_consecutive_repeat():
    problems = validate(CanonicalPath(["n1", "n1"], []))
    assert len(problems) == 1 and "consecutive repeat" in problems[0]


def test_repeat_is_case_insensitive():
    assert validate(CanonicalPath(["Lobby", "lobby"], []))


def test_action_count_mismatch():
    problems = validate(CanonicalPath(["n1", "n2", "n3"], []))
    assert len(problems) == 1 and "action count mismatch" in problems[0]


def test_bad_names():
    assert validate(CanonicalPath(["", "n2"], []))
    assert validate(CanonicalPath(["a\nb", "n2"], []))
    assert validate(CanonicalPath([" n1", "n2"], []))
    assert validate(CanonicalPath(["n1"], []))


def test_reverse_inverts_turns():
    assert reverse(CanonicalPath(["n1", "n2", "n3"], ["R"])) == CanonicalPath(["n3", "n2", "n1"], ["L"])
    assert reverse(CanonicalPath(["a", "b"], [])) == CanonicalPath(["b", "a"], [])
    assert reverse(CanonicalPath(["a", "b", "c", "d"], ["F", "T"])) == CanonicalPath(["d", "c", "b", "a"], ["T", "F"])


def test_reverse_rejects_invalid():
    with pytest.raises(PathValidationError):
        reverse(CanonicalPath(["a", "a"], []))


@given(valid_paths())
def test_reverse_is_involution(path):
    assert validate(path) == []
    assert validate(reverse(path)) == []
    assert reverse(reverse(path)) == path


def test_json_shape():
    path = CanonicalPath(["n1", "n2", "n3"], ["R"])
    assert path.to_dict() == {"waypoints": ["n1", "n2", "n3"], "actions": ["R"]}
    assert CanonicalPath.from_dict(path.to_dict()) == path
    with pytest.raises(ValueError):
        CanonicalPath.from_dict({"waypoints": ["a"]})
    with pytest.raises(ValueError):
        CanonicalPath.from_dict({"waypoints": ["a", "b", "c"], "actions": ["Q"]})


def test_same_as_ignores_case():
    assert CanonicalPath(["Living Room", "hall"], []).same_as(CanonicalPath(["living  room", "Hall"], []))
