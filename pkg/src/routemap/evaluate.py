"""Reverse-path and combined-path (leave-one-out) evaluation.

Outputs are judged against the ground-truth environment, not by string
comparison with the held-out instruction, so any correct shortest route
counts.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Iterable, Protocol, Sequence

from .actions import Action
from .canonical import CanonicalPath, node_key, reverse, validate
from .envsim import PathDataset, score_walk
from .instructions import BackendError, ExtractionError, ParseError
from .router import RouteFailure, RouteQuery, find_route
from .topomap import MapConflict, TopoMap

SUCCESS = "success"
REACHABLE_ONLY = "reachable"
FAILED_PARSE = "failed_parse"
FAILED_INSUFFICIENT = "failed_insufficient"
FAILED_WRONG = "failed_wrong"

TRANSLATION_ERRORS = (ParseError, ExtractionError, BackendError, ValueError)


class ImplicitClient(Protocol):
    def implicit_query(
        self, mode: str, instructions: list[str], start: str | None = None, goal: str | None = None
    ) -> str: ...


@dataclass
class ExplicitMethod:
    """Translate text to canonical paths, then work on an explicit map."""

    translate: Callable[[str], CanonicalPath]
    backend: str = "grammar"
    name: str = "explicit"


@dataclass
class ImplicitMethod:
    """Hand the instructions to a language model and read its answer."""

    client: ImplicitClient
    backend: str = "llm"
    name: str = "implicit"


@dataclass
class ItemRecord:
    environment: str
    index: int
    start: str
    goal: str
    outcome: str
    output: dict[str, Any] | None = None
    diagnostic: str = ""
    raw: str | None = None


@dataclass
class EvalReport:
    task: str
    method: str
    backend: str
    items: list[ItemRecord] = field(default_factory=list)

    def count(self, *outcomes: str) -> int:
        return sum(1 for r in self.items if r.outcome in outcomes)

    @property
    def attempted(self) -> int:
        return len(self.items)

    @property
    def succeeded_shortest(self) -> int:
        return self.count(SUCCESS)

    @property
    def succeeded_reachable(self) -> int:
        return self.count(SUCCESS, REACHABLE_ONLY)

    @property
    def failed_parse(self) -> int:
        return self.count(FAILED_PARSE)

    @property
    def failed_insufficient(self) -> int:
        return self.count(FAILED_INSUFFICIENT)

    @property
    def failed_wrong(self) -> int:
        return self.count(FAILED_WRONG)

    def rate(self, which: str = "shortest") -> float:
        if not self.items:
            return 0.0
        hits = self.succeeded_shortest if which == "shortest" else self.succeeded_reachable
        return hits / self.attempted

    def totals(self) -> dict[str, int]:
        return {
            "attempted": self.attempted,
            "succeeded_reachable": self.succeeded_reachable,
            "succeeded_shortest": self.succeeded_shortest,
            "failed_parse": self.failed_parse,
            "failed_insufficient": self.failed_insufficient,
            "failed_wrong": self.failed_wrong,
        }

    def to_dict(self) -> dict[str, Any]:
        return {
            "task": self.task,
            "method": self.method,
            "backend": self.backend,
            "totals": self.totals(),
            "items": [asdict(r) for r in self.items],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"


def merge_reports(reports: Iterable[EvalReport]) -> EvalReport:
    reports = list(reports)
    if not reports:
        raise ValueError("nothing to merge")
    first = reports[0]
    for r in reports[1:]:
        if (r.task, r.method, r.backend) != (first.task, first.method, first.backend):
            raise ValueError("can only merge reports of the same task, method and backend")
    return EvalReport(first.task, first.method, first.backend, [i for r in reports for i in r.items])


def format_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per report."""
    header = ("Task", "Method", "Backend", "Paths", "Reachable", "Shortest")
    rows = [header]
    for r in reports:
        rows.append(
            (
                r.task,
                r.method,
                r.backend,
                str(r.attempted),
                f"{100 * r.rate('reachable'):.0f}%",
                f"{100 * r.rate('shortest'):.0f}%",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for n, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# -- reading free-text answers ---------------------------------------------------

_TURN_WORDS = re.compile(r"\b(?:turn(?:ing)?\s+around|u-turn|left|right)\b", re.IGNORECASE)


def lenient_parse(text: str, place_names: Iterable[str]) -> CanonicalPath:
    """Best-effort reading of a model's route description.

    Known place names are located in order of appearance (repeats in a row
    collapse).  The turn word found between a waypoint's last mention and
    the next waypoint's first mention sets that waypoint's action, so both
    "turn right and head to the Lobby" and "advance to the entryway, then
    turn left" are understood.
    """
    names = sorted({n for n in place_names}, key=len, reverse=True)
    if not names:
        raise ParseError("no place names to look for", 0)
    pattern = re.compile(
        r"(?<!\w)(?:" + "|".join(re.escape(n) for n in names) + r")(?!\w)", re.IGNORECASE
    )
    spans: list[list[Any]] = []  # [key, display, first_start, last_end]
    for m in pattern.finditer(text):
        key = node_key(m.group())
        if spans and spans[-1][0] == key:
            spans[-1][3] = m.end()
        else:
            spans.append([key, m.group(), m.start(), m.end()])
    if len(spans) < 2:
        raise ParseError("fewer than two places mentioned", len(text.encode()))
    by_key = {node_key(n): n for n in names}
    actions = []
    for here, there in zip(spans[1:-1], spans[2:]):
        words = _TURN_WORDS.findall(text[here[3]:there[2]])
        if not words:
            actions.append(Action.FORWARD)
            continue
        word = words[0].lower()
        if word == "left":
            actions.append(Action.LEFT)
        elif word == "right":
            actions.append(Action.RIGHT)
        else:
            actions.append(Action.AROUND)
    path = CanonicalPath([by_key[s[0]] for s in spans], actions)
    problems = validate(path)
    if problems:
        raise ParseError("; ".join(problems), 0)
    return path


# -- evaluation ------------------------------------------------------------------


def _translate_all(dataset: PathDataset, method: ExplicitMethod) -> list[CanonicalPath | Exception]:
    out: list[CanonicalPath | Exception] = []
    for item in dataset.items:
        try:
            out.append(method.translate(item.instruction))
        except TRANSLATION_ERRORS as exc:
            out.append(exc)
    return out


def _parallel(fn: Callable[[int], ItemRecord], count: int, workers: int) -> list[ItemRecord]:
    if workers <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(count)))


def eval_reverse(dataset: PathDataset, method: ExplicitMethod | ImplicitMethod, workers: int = 1) -> EvalReport:
    env = dataset.environment
    translated = _translate_all(dataset, method) if isinstance(method, ExplicitMethod) else None

    def run(i: int) -> ItemRecord:
        item = dataset.items[i]
        record = ItemRecord(env.id, i, item.goal, item.start, FAILED_WRONG)
        expected = reverse(item.path)
        if translated is not None:
            got = translated[i]
            if isinstance(got, Exception):
                record.outcome, record.diagnostic = FAILED_PARSE, str(got)
                return record
            answer = reverse(got)
        else:
            try:
                record.raw = method.client.implicit_query("reverse", [item.instruction])
                answer = lenient_parse(record.raw, env.nodes)
            except TRANSLATION_ERRORS as exc:
                record.outcome, record.diagnostic = FAILED_PARSE, str(exc)
                return record
        record.output = answer.to_dict()
        if answer.same_as(expected):
            record.outcome = SUCCESS
        else:
            record.diagnostic = f"expected {expected}"
        return record

    return EvalReport("reverse", method.name, method.backend, _parallel(run, len(dataset.items), workers))


def eval_combined(dataset: PathDataset, method: ExplicitMethod | ImplicitMethod, workers: int = 1) -> EvalReport:
    env = dataset.environment
    translated = _translate_all(dataset, method) if isinstance(method, ExplicitMethod) else None

    def run(i: int) -> ItemRecord:
        held = dataset.items[i]
        record = ItemRecord(env.id, i, held.start, held.goal, FAILED_WRONG)
        others = [j for j in range(len(dataset.items)) if j != i]
        if translated is not None:
            topo = TopoMap()
            try:
                for j in others:
                    got = translated[j]
                    if isinstance(got, Exception):
                        raise got
                    topo.add_path(got)
            except TRANSLATION_ERRORS + (MapConflict,) as exc:
                record.outcome, record.diagnostic = FAILED_PARSE, f"input path {j}: {exc}"
                return record
            try:
                answer = find_route(topo, RouteQuery(held.start, held.goal))
            except RouteFailure as exc:
                record.outcome, record.diagnostic = FAILED_INSUFFICIENT, str(exc)
                return record
        else:
            try:
                record.raw = method.client.implicit_query(
                    "combined", [dataset.items[j].instruction for j in others], held.start, held.goal
                )
                answer = lenient_parse(record.raw, env.nodes)
            except TRANSLATION_ERRORS as exc:
                record.outcome, record.diagnostic = FAILED_PARSE, str(exc)
                return record
        record.output = answer.to_dict()
        score = score_walk(env, answer, held.start, held.goal, dataset.theta)
        if score.shortest:
            record.outcome = SUCCESS
        elif score.reachable:
            record.outcome, record.diagnostic = REACHABLE_ONLY, score.reason
        else:
            record.diagnostic = score.reason
        return record

    return EvalReport("combined", method.name, method.backend, _parallel(run, len(dataset.items), workers))
