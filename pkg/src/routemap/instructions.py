"""Reading and writing route instructions.

Three pieces live here:

* :func:`parse_instruction`, a deterministic parser for a controlled route
  English ("Depart from A to B. Then, turn left and proceed to C.").
* :func:`generate_instruction`, the inverse template.
* :func:`extract_canonical`, the two-extractor loop used with language-model
  backends: a left-turn extractor and a right-turn extractor must agree on
  the waypoint sequence before their turn points are merged.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Protocol

from .actions import Action
from .canonical import CanonicalPath, clean_name, ensure_valid, node_key, validate


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset  # bytes into the UTF-8 encoded text
        super().__init__(f"{message} (at byte {offset})")


_TOKEN_RE = re.compile(
    r"""
    (?P<space>\s+)
  | (?P<dq>"(?:[^"\\\n]|\\.)*")
  | (?P<tex>``[^\n]*?'')
  | (?P<curly>“[^”\n]*”)
  | (?P<punct>[.,;])
  | (?P<word>[^\s.,;"“”]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "word", "quoted" or "punct"
    text: str
    start: int

    @property
    def low(self) -> str:
        return self.text.lower()


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", len(text[:pos].encode()))
        kind = m.lastgroup
        raw = m.group()
        if kind == "dq":
            tokens.append(_Token("quoted", re.sub(r"\\(.)", r"\1", raw[1:-1]), pos))
        elif kind == "tex":
            tokens.append(_Token("quoted", raw[2:-2], pos))
        elif kind == "curly":
            tokens.append(_Token("quoted", raw[1:-1], pos))
        elif kind in ("punct", "word"):
            tokens.append(_Token(kind, raw, pos))
        pos = m.end()
    return tokens


def _phrases(*texts: str) -> list[tuple[str, ...]]:
    # longest first so "continue on to" wins over "continue on"
    return sorted((tuple(t.split()) for t in texts), key=len, reverse=True)


_START = _phrases("depart from", "begin in", "begin at", "commence on", "commence at", "start at", "start from")
_VERB_BASE = ["proceed", "continue", "advance", "go", "head", "walk", "move"]
_VERBS = _phrases(
    "continue on to",
    "move through",
    "towards",
    "toward",
    *(f"{v} to" for v in _VERB_BASE),
    *(f"{v} {adv} to" for v in _VERB_BASE for adv in ("straight", "further", "on")),
    *(f"{v} towards" for v in _VERB_BASE),
)
_TURNS = {
    **{(*verb, side): Action.LEFT if side == "left" else Action.RIGHT
       for verb in (("turn",), ("swing",), ("guide", "yourself"), ("bear",))
       for side in ("left", "right")},
    ("turn", "around"): Action.AROUND,
}
_TURN_PHRASES = sorted(_TURNS, key=len, reverse=True)
_CONNECTORS = _phrases("then", "and", "from there", "continue on", "there", "again", "straight", ",", ".", ";")

_STOP_WORDS = (
    {p[0] for p in _VERBS + _TURN_PHRASES + _CONNECTORS + _START}
    | {"to", "from", "where"}
) - {",", ".", ";"}
_ARTICLE = "the"


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def offset(self) -> int:
        if self.pos < len(self.tokens):
            char = self.tokens[self.pos].start
        else:
            char = len(self.text)
        return len(self.text[:char].encode())

    def at_end(self) -> bool:
        return self.pos >= len(self.tokens)

    def match(self, phrase: tuple[str, ...]) -> bool:
        end = self.pos + len(phrase)
        if end > len(self.tokens):
            return False
        window = self.tokens[self.pos:end]
        if any(t.kind == "quoted" for t in window):
            return False
        if [t.low for t in window] != list(phrase):
            return False
        self.pos = end
        return True

    def match_any(self, phrases) -> tuple[str, ...] | None:
        for phrase in phrases:
            if self.match(phrase):
                return phrase
        return None

    def fail(self, message: str) -> ParseError:
        return ParseError(message, self.offset())

    def place(self) -> str:
        if (
            not self.at_end()
            and self.tokens[self.pos].kind == "word"
            and self.tokens[self.pos].low == _ARTICLE
            and self.pos + 1 < len(self.tokens)
        ):
            self.pos += 1
        if self.at_end():
            raise self.fail("expected a place name")
        tok = self.tokens[self.pos]
        if tok.kind == "quoted":
            self.pos += 1
            try:
                return clean_name(tok.text)
            except ValueError as exc:
                raise ParseError(str(exc), len(self.text[: tok.start].encode())) from None
        words = []
        while not self.at_end():
            tok = self.tokens[self.pos]
            if tok.kind != "word" or tok.low in _STOP_WORDS:
                break
            words.append(tok.text)
            self.pos += 1
        if not words:
            raise self.fail("expected a place name")
        return " ".join(words)

    def parse(self) -> CanonicalPath:
        if self.match_any(_START) is None:
            raise self.fail("instruction must open with a start phrase such as 'Depart from'")
        places = [self.place()]
        leaving_turns: list[Action | None] = []
        if self.match(("to",)):
            places.append(self.place())
            leaving_turns.append(None)
        while not self.at_end():
            turn: Action | None = None
            while True:
                if self.at_end():
                    if turn is not None:
                        raise self.fail("turn without a destination")
                    break
                if self.match_any(_VERBS) is not None:
                    places.append(self.place())
                    leaving_turns.append(turn)
                    break
                if self.match_any(_CONNECTORS) is not None:
                    continue
                before = self.pos
                phrase = self.match_any(_TURN_PHRASES)
                if phrase is not None:
                    if turn is not None:
                        self.pos = before
                        raise self.fail("two turns in one clause")
                    turn = _TURNS[phrase]
                    continue
                raise self.fail(f"unrecognized clause starting {self.tokens[self.pos].text!r}")
        if len(places) < 2:
            raise self.fail("instruction names fewer than two places")
        # leaving_turns[i] is the turn made when leaving places[i]; none at the start
        actions = [t or Action.FORWARD for t in leaving_turns[1:]]
        path = CanonicalPath(places, actions)
        problems = validate(path)
        if problems:
            raise ParseError("; ".join(problems), len(self.text.encode()))
        return path


def parse_instruction(text: str) -> CanonicalPath:
    """Parse one controlled-language route instruction.

    Place names are double-quoted (also ````x''`` and curly quotes) or bare
    word runs.  A turn phrase in the clause that leaves a waypoint sets that
    waypoint's action; otherwise it is forward.

    >>> parse_instruction("Depart from n5 to n4. Then, turn right and proceed to n2.")
    CanonicalPath(waypoints=('n5', 'n4', 'n2'), actions=(<Action.RIGHT: 'R'>,))
    """
    return _Parser(text).parse()


def _bare_ok(name: str) -> bool:
    if " ".join(name.split()) != name:
        return False
    try:
        tokens = _tokenize(name)
    except ParseError:
        return False
    if not tokens or any(t.kind != "word" for t in tokens):
        return False
    return tokens[0].low != _ARTICLE and not any(t.low in _STOP_WORDS for t in tokens)


def render_place(name: str) -> str:
    """Place name as it should appear in generated text: bare when the
    parser will read it back unchanged, quoted otherwise."""
    if _bare_ok(name):
        return name
    escaped = name.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


_PHRASING = {
    Action.FORWARD: "Then, proceed to {}.",
    Action.LEFT: "Then, turn left and proceed to {}.",
    Action.RIGHT: "Then, turn right and proceed to {}.",
    Action.AROUND: "Then, turn around and proceed to {}.",
}


def generate_instruction(path: CanonicalPath) -> str:
    ensure_valid(path)
    w = [render_place(name) for name in path.waypoints]
    sentences = [f"Depart from {w[0]} to {w[1]}."]
    for action, place in zip(path.actions, w[2:]):
        sentences.append(_PHRASING[action].format(place))
    return " ".join(sentences)


# -- extraction with two turn-point extractors ------------------------------


class BackendError(RuntimeError):
    """An extractor backend call failed.  ``attempts`` is filled in by
    :func:`extract_canonical` when it propagates the error."""

    attempts: int | None = None


class ExtractorBackend(Protocol):
    def extract_left(self, instruction: str) -> tuple[list[str], set[str]]: ...

    def extract_right(self, instruction: str) -> tuple[list[str], set[str]]: ...

    def check_turn(self, instruction: str, waypoint: str) -> Action: ...


@dataclass
class ExtractionRecord:
    waypoints_left: list[str] = field(default_factory=list)
    waypoints_right: list[str] = field(default_factory=list)
    left_turns: set[str] = field(default_factory=set)
    right_turns: set[str] = field(default_factory=set)
    attempts: int = 0
    checked: dict[str, Action] = field(default_factory=dict)


class ExtractionError(RuntimeError):
    def __init__(self, message: str, record: ExtractionRecord):
        self.record = record
        self.attempts = record.attempts
        super().__init__(message)


def _same_sequence(a: list[str], b: list[str]) -> bool:
    return [node_key(x) for x in a] == [node_key(x) for x in b]


def extract_canonical(
    text: str, backend: ExtractorBackend, max_attempts: int = 3
) -> tuple[CanonicalPath, ExtractionRecord]:
    """Translate ``text`` into a canonical path with a pair of extractors.

    Both extractors run up to ``max_attempts`` times until their waypoint
    sequences agree.  Interior waypoints marked by exactly one extractor take
    that extractor's turn, those marked by both are settled by
    ``backend.check_turn`` and unmarked ones are forward.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    record = ExtractionRecord()

    def call(fn, *args):
        try:
            return fn(*args)
        except BackendError as exc:
            exc.attempts = record.attempts
            raise

    while True:
        record.attempts += 1
        record.waypoints_left, left = call(backend.extract_left, text)
        record.waypoints_right, right = call(backend.extract_right, text)
        record.left_turns = {node_key(w) for w in left}
        record.right_turns = {node_key(w) for w in right}
        if _same_sequence(record.waypoints_left, record.waypoints_right):
            break
        if record.attempts >= max_attempts:
            raise ExtractionError(
                f"extractors disagreed on the waypoints in all {record.attempts} attempts", record
            )

    waypoints = [w.strip() for w in record.waypoints_right]
    actions = []
    for w in waypoints[1:-1]:
        key = node_key(w)
        if key in record.left_turns and key in record.right_turns:
            action = call(backend.check_turn, text, w)
            if action not in (Action.LEFT, Action.RIGHT):
                err = BackendError(f"turn check at {w!r} answered {action!r}, not left/right")
                err.attempts = record.attempts
                raise err
            record.checked[w] = action
        elif key in record.left_turns:
            action = Action.LEFT
        elif key in record.right_turns:
            action = Action.RIGHT
        else:
            action = Action.FORWARD
        actions.append(action)
    path = CanonicalPath(waypoints, actions)
    problems = validate(path)
    if problems:
        raise ExtractionError("extracted path is invalid: " + "; ".join(problems), record)
    return path, record


class GrammarExtractor:
    """Exact extractor backend answering from :func:`parse_instruction`.

    Turn-around actions have no left/right answer, so instructions using
    them come back as forward through this backend.
    """

    def _parsed(self, instruction: str) -> CanonicalPath:
        try:
            return parse_instruction(instruction)
        except ParseError as exc:
            raise BackendError(str(exc)) from exc

    def _turns(self, instruction: str, side: Action) -> tuple[list[str], set[str]]:
        path = self._parsed(instruction)
        marked = {w for w, a in zip(path.waypoints[1:-1], path.actions) if a == side}
        return list(path.waypoints), marked

    def extract_left(self, instruction: str) -> tuple[list[str], set[str]]:
        return self._turns(instruction, Action.LEFT)

    def extract_right(self, instruction: str) -> tuple[list[str], set[str]]:
        return self._turns(instruction, Action.RIGHT)

    def check_turn(self, instruction: str, waypoint: str) -> Action:
        path = self._parsed(instruction)
        for w, a in zip(path.waypoints[1:-1], path.actions):
            if node_key(w) == node_key(waypoint) and a in (Action.LEFT, Action.RIGHT):
                return a
        raise BackendError(f"no left/right turn at {waypoint!r}")
