"""Canonical path representation: waypoint names plus the action taken at
every interior waypoint."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .actions import Action, inverse


class PathValidationError(ValueError):
    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def node_key(name: str) -> str:
    """Comparison key for place names: whitespace-collapsed and case-folded."""
    return " ".join(name.split()).casefold()


def clean_name(name: str) -> str:
    """Trim a place name and check it is usable as a node label."""
    if not isinstance(name, str):
        raise TypeError(f"node name must be str, got {type(name).__name__}")
    trimmed = name.strip()
    if not trimmed:
        raise ValueError("node name is empty")
    if "\n" in trimmed or "\r" in trimmed:
        raise ValueError(f"node name {trimmed!r} contains a line break")
    return trimmed


@dataclass(frozen=True)
class CanonicalPath:
    waypoints: tuple[str, ...]
    actions: tuple[Action, ...]

    def __init__(self, waypoints: Iterable[str], actions: Iterable[Action | str] = ()):
        object.__setattr__(self, "waypoints", tuple(waypoints))
        object.__setattr__(
            self,
            "actions",
            tuple(a if isinstance(a, Action) else Action.parse(a) for a in actions),
        )

    def __len__(self) -> int:
        return len(self.waypoints)

    def triples(self) -> list[tuple[str, str, str, Action]]:
        """(prev, at, next, action) for each interior waypoint."""
        w = self.waypoints
        return [(w[i], w[i + 1], w[i + 2], a) for i, a in enumerate(self.actions)]

    def same_as(self, other: CanonicalPath) -> bool:
        """Equality up to place-name casing and spacing."""
        return self.actions == other.actions and [node_key(w) for w in self.waypoints] == [
            node_key(w) for w in other.waypoints
        ]

    def to_dict(self) -> dict[str, Any]:
        return {"waypoints": list(self.waypoints), "actions": [a.value for a in self.actions]}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CanonicalPath:
        try:
            waypoints, actions = data["waypoints"], data["actions"]
        except (KeyError, TypeError):
            raise ValueError("canonical path needs 'waypoints' and 'actions'") from None
        if not isinstance(waypoints, list) or not isinstance(actions, list):
            raise ValueError("'waypoints' and 'actions' must be lists")
        return cls(waypoints, [Action.parse(a) for a in actions])

    def __str__(self) -> str:
        acts = ",".join(a.value for a in self.actions)
        return f"[{', '.join(self.waypoints)}] / [{acts}]"


def validate(path: CanonicalPath) -> list[str]:
    """Return every invariant violation of ``path``; empty means valid."""
    problems = []
    if len(path.waypoints) < 2:
        problems.append(f"path needs at least 2 waypoints, has {len(path.waypoints)}")
    for i, name in enumerate(path.waypoints):
        try:
            if clean_name(name) != name:
                problems.append(f"waypoint {i} {name!r} has surrounding whitespace")
        except (TypeError, ValueError) as exc:
            problems.append(f"waypoint {i}: {exc}")
    for i in range(len(path.waypoints) - 1):
        a, b = path.waypoints[i], path.waypoints[i + 1]
        if isinstance(a, str) and isinstance(b, str) and node_key(a) == node_key(b):
            problems.append(f"consecutive repeat of {a!r} at positions {i} and {i + 1}")
    expected = max(len(path.waypoints) - 2, 0)
    if len(path.actions) != expected:
        problems.append(f"action count mismatch: {len(path.actions)} actions for {expected} interior waypoints")
    return problems


def ensure_valid(path: CanonicalPath) -> CanonicalPath:
    problems = validate(path)
    if problems:
        raise PathValidationError(problems)
    return path


def reverse(path: CanonicalPath) -> CanonicalPath:
    """The same route walked from goal back to start.

    Each interior action flips to its inverse: a left turn on the way out is
    a right turn on the way back.
    """
    ensure_valid(path)
    return CanonicalPath(path.waypoints[::-1], [inverse(a) for a in reversed(path.actions)])
