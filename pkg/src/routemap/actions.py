"""Turn actions at a waypoint and their quarter-turn group structure.

An action describes how the heading changes when passing through a node:
keep going (F), turn left (L), turn right (R) or turn around (T).  Encoded
as counter-clockwise quarter turns, composing two actions is addition
modulo 4.
"""

from __future__ import annotations

import enum
import math

DEFAULT_THETA = math.pi / 4


class Action(enum.Enum):
    FORWARD = "F"
    LEFT = "L"
    AROUND = "T"
    RIGHT = "R"

    @property
    def quarter_turns(self) -> int:
        return _TO_QUARTERS[self]

    def __mul__(self, other: Action) -> Action:
        if not isinstance(other, Action):
            return NotImplemented
        return compose(self, other)

    def __invert__(self) -> Action:
        return inverse(self)

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, token: str) -> Action:
        """Read one of the serialized tokens ``F``, ``L``, ``R``, ``T``."""
        try:
            return cls(token)
        except ValueError:
            raise ValueError(f"unknown action token {token!r}") from None


_TO_QUARTERS = {Action.FORWARD: 0, Action.LEFT: 1, Action.AROUND: 2, Action.RIGHT: 3}
_FROM_QUARTERS = {q: a for a, q in _TO_QUARTERS.items()}


def to_quarter_turns(action: Action) -> int:
    return _TO_QUARTERS[action]


def from_quarter_turns(q: int) -> Action:
    return _FROM_QUARTERS[q % 4]


def compose(a: Action, b: Action) -> Action:
    """Group product of two actions (perform ``a`` then ``b``)."""
    return _FROM_QUARTERS[(_TO_QUARTERS[a] + _TO_QUARTERS[b]) % 4]


def inverse(a: Action) -> Action:
    return _FROM_QUARTERS[-_TO_QUARTERS[a] % 4]


def check_theta(theta: float) -> float:
    if not (0.0 < theta < math.pi / 2):
        raise ValueError(f"theta must lie in (0, pi/2), got {theta!r}")
    return theta


def normalize_angle(angle: float) -> float:
    """Wrap an angle in radians into ``(-pi, pi]``."""
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    wrapped = math.remainder(angle, 2 * math.pi)
    if wrapped <= -math.pi:
        wrapped += 2 * math.pi
    return wrapped


def from_angle(angle: float, theta: float = DEFAULT_THETA) -> Action:
    """Quantize a heading change into an action.

    ``angle`` is the deviation of the outgoing direction from straight ahead,
    positive to the left, already wrapped into ``(-pi, pi]``.  Deviations of
    at most ``theta`` are forward; at least ``pi - theta`` is turning around.
    """
    check_theta(theta)
    if not math.isfinite(angle) or not (-math.pi < angle <= math.pi):
        raise ValueError(f"angle {angle!r} outside (-pi, pi]")
    magnitude = abs(angle)
    if magnitude <= theta:
        return Action.FORWARD
    if magnitude >= math.pi - theta:
        return Action.AROUND
    return Action.LEFT if angle > 0 else Action.RIGHT
