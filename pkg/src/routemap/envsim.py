"""Synthetic ground-truth environments with 2D coordinates.

Node positions make the true turn at every node computable from geometry,
which is what generated instructions and evaluation scores are checked
against.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from typing import Any, Iterable, Mapping

from .actions import DEFAULT_THETA, Action, check_theta, from_angle, normalize_angle
from .canonical import CanonicalPath, node_key
from .instructions import generate_instruction
from .router import RouteFailure, RouteQuery, find_route, hop_distances, shortest_paths
from .topomap import MapConflict, MissingEdgeError, TopoMap

BOUNDARY_MARGIN = 1e-6
PATHS_PER_DATASET = 10

_GRID_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class InvalidEnvironment(ValueError):
    pass


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class GeoEnvironment:
    nodes: Mapping[str, tuple[float, float]]
    edges: tuple[tuple[str, str], ...]
    designated: tuple[str, ...]
    id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", {n: (float(x), float(y)) for n, (x, y) in self.nodes.items()})
        object.__setattr__(self, "edges", tuple(sorted(tuple(sorted(e)) for e in self.edges)))
        object.__setattr__(self, "designated", tuple(self.designated))
        self._check()

    def _check(self) -> None:
        keys = [node_key(n) for n in self.nodes]
        if len(set(keys)) != len(keys):
            raise InvalidEnvironment("two nodes share a name")
        for name, (x, y) in self.nodes.items():
            if not (math.isfinite(x) and math.isfinite(y)):
                raise InvalidEnvironment(f"node {name!r} has non-finite coordinates")
        for a, b in self.edges:
            if a not in self.nodes or b not in self.nodes:
                raise InvalidEnvironment(f"edge ({a}, {b}) uses an unknown node")
            if a == b or self.nodes[a] == self.nodes[b]:
                raise InvalidEnvironment(f"edge ({a}, {b}) has zero length")
        if len(set(self.edges)) != len(self.edges):
            raise InvalidEnvironment("duplicate edge")
        for d in self.designated:
            if d not in self.nodes:
                raise InvalidEnvironment(f"designated node {d!r} is not in the environment")
        if self.nodes:
            first = node_key(next(iter(self.nodes)))
            if len(hop_distances(self.adjacency(), first)) != len(self.nodes):
                raise InvalidEnvironment("environment graph is not connected")

    def name_of(self, key: str) -> str:
        for name in self.nodes:
            if node_key(name) == key:
                return name
        raise KeyError(key)

    def adjacency(self) -> dict[str, list[str]]:
        """Node key -> sorted neighbour keys."""
        adj: dict[str, list[str]] = {node_key(n): [] for n in self.nodes}
        for a, b in self.edges:
            adj[node_key(a)].append(node_key(b))
            adj[node_key(b)].append(node_key(a))
        return {k: sorted(v) for k, v in adj.items()}

    def position(self, name: str) -> tuple[float, float]:
        return self.nodes[self.name_of(node_key(name))]

    def has_edge(self, a: str, b: str) -> bool:
        return node_key(b) in self.adjacency().get(node_key(a), ())

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "nodes": {n: list(p) for n, p in self.nodes.items()},
            "edges": [list(e) for e in self.edges],
            "designated": list(self.designated),
        }
        if self.id:
            data["id"] = self.id
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> GeoEnvironment:
        try:
            return cls(
                nodes={n: tuple(p) for n, p in data["nodes"].items()},
                edges=tuple(tuple(e) for e in data["edges"]),
                designated=tuple(data["designated"]),
                id=data.get("id", ""),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidEnvironment):
                raise
            raise InvalidEnvironment(f"malformed environment: {exc}") from None


def turn_angle(env: GeoEnvironment, prev: str, at: str, nxt: str) -> float:
    """Signed deviation (left positive) of at->next from the prev->at heading."""
    for a, b in ((prev, at), (at, nxt)):
        if not env.has_edge(a, b):
            raise MissingEdgeError(f"no edge between {a!r} and {b!r}")
    (px, py), (ax, ay), (nx, ny) = env.position(prev), env.position(at), env.position(nxt)
    ix, iy = ax - px, ay - py
    ox, oy = nx - ax, ny - ay
    return normalize_angle(math.atan2(ix * oy - iy * ox, ix * ox + iy * oy))


def ground_truth_action(env: GeoEnvironment, prev: str, at: str, nxt: str, theta: float = DEFAULT_THETA) -> Action:
    return from_angle(turn_angle(env, prev, at, nxt), theta)


def _boundary_distance(angle: float, theta: float) -> float:
    return min(abs(angle - b) for b in (theta, -theta, math.pi - theta, -(math.pi - theta)))


def all_triples(env: GeoEnvironment) -> Iterable[tuple[str, str, str]]:
    """Every (prev, at, next) over adjacent edges, including prev == next."""
    adj = env.adjacency()
    for at in sorted(adj):
        for prev in adj[at]:
            for nxt in adj[at]:
                yield env.name_of(prev), env.name_of(at), env.name_of(nxt)


def generate_environment(
    seed: int,
    node_count: int,
    designated_count: int = 5,
    theta: float = DEFAULT_THETA,
    jitter: float = 0.1,
    extra_edge_rate: float = 0.35,
) -> GeoEnvironment:
    """Random connected environment on a jittered unit grid.

    Cells are grown from the origin by random 4-neighbour steps; the growth
    tree plus a random share of the remaining grid-adjacent pairs become
    edges.  Keeping edges near the axes holds every bearing within
    ``atan(2*jitter / (1 - 2*jitter))`` of a multiple of 90 degrees.
    Positions are re-jittered until no turn lies within BOUNDARY_MARGIN of a
    quantization boundary.
    """
    check_theta(theta)
    if not 2 <= designated_count <= node_count:
        raise InvalidEnvironment("need node_count >= designated_count >= 2")
    if not 0 <= jitter < 0.25:
        raise InvalidEnvironment("jitter must be in [0, 0.25)")
    rng = random.Random(seed)
    cells = [(0, 0)]
    taken = {(0, 0): 0}
    edges: set[tuple[int, int]] = set()
    while len(cells) < node_count:
        base = rng.choice(cells)
        dx, dy = rng.choice(_GRID_STEPS)
        cell = (base[0] + dx, base[1] + dy)
        if cell in taken:
            continue
        taken[cell] = len(cells)
        cells.append(cell)
        edges.add((taken[base], taken[cell]))
    for (x, y), i in sorted(taken.items()):
        for dx, dy in ((1, 0), (0, 1)):
            j = taken.get((x + dx, y + dy))
            if j is not None and (i, j) not in edges and (j, i) not in edges and rng.random() < extra_edge_rate:
                edges.add((i, j))
    names = [f"n{i + 1}" for i in range(node_count)]
    designated = tuple(sorted(rng.sample(names, designated_count), key=names.index))
    edge_names = tuple((names[a], names[b]) for a, b in sorted(edges))
    for _ in range(100):
        coords = {
            names[i]: (round(x + rng.uniform(-jitter, jitter), 4), round(y + rng.uniform(-jitter, jitter), 4))
            for i, (x, y) in enumerate(cells)
        }
        env = GeoEnvironment(coords, edge_names, designated, id=f"env-{seed}")
        if all(
            _boundary_distance(turn_angle(env, *t), theta) > BOUNDARY_MARGIN for t in all_triples(env)
        ):
            return env
    raise InvalidEnvironment("could not place nodes away from the quantization boundaries")


def toy_environment() -> GeoEnvironment:
    """Five-node example: from n1 go north to n2; n3 lies right, n4 ahead,
    and n5 left of n4."""
    return GeoEnvironment(
        nodes={"n1": (0.0, -1.0), "n2": (0.0, 0.0), "n3": (1.0, 0.0), "n4": (0.0, 1.0), "n5": (-1.0, 1.0)},
        edges=(("n1", "n2"), ("n2", "n3"), ("n2", "n4"), ("n4", "n5")),
        designated=("n1", "n2", "n3", "n4", "n5"),
        id="toy",
    )


# -- ground-truth paths and scoring --------------------------------------------


def ground_truth_path(env: GeoEnvironment, start: str, goal: str, theta: float = DEFAULT_THETA) -> CanonicalPath:
    """Lexicographically first minimum-hop path with geometric actions."""
    keys = next(shortest_paths(env.adjacency(), node_key(start), node_key(goal)), None)
    if keys is None:
        raise InvalidEnvironment(f"{goal!r} is unreachable from {start!r}")
    names = [env.name_of(k) for k in keys]
    actions = [ground_truth_action(env, p, i, n, theta) for p, i, n in zip(names, names[1:], names[2:])]
    return CanonicalPath(names, actions)


@dataclass(frozen=True)
class WalkScore:
    reachable: bool
    shortest: bool
    reason: str = ""


def score_walk(
    env: GeoEnvironment, path: CanonicalPath, start: str, goal: str, theta: float = DEFAULT_THETA
) -> WalkScore:
    """Judge a proposed route against the environment itself.

    Reachable: a real walk from start to goal whose every stated action is
    the geometric one.  Shortest: additionally uses the fewest edges.
    """
    keys = [node_key(w) for w in path.waypoints]
    if len(keys) < 2 or keys[0] != node_key(start) or keys[-1] != node_key(goal):
        return WalkScore(False, False, "does not run from start to goal")
    if len(path.actions) != len(keys) - 2:
        return WalkScore(False, False, "action count does not match waypoints")
    adj = env.adjacency()
    for a, b in zip(keys, keys[1:]):
        if b not in adj.get(a, ()):
            return WalkScore(False, False, f"no edge between {a!r} and {b!r}")
    for (p, i, n), stated in zip(zip(keys, keys[1:], keys[2:]), path.actions):
        truth = ground_truth_action(env, env.name_of(p), env.name_of(i), env.name_of(n), theta)
        if truth != stated:
            return WalkScore(False, False, f"action at {i!r} is {truth.value}, route says {stated.value}")
    hops = hop_distances(adj, keys[0])[keys[-1]]
    if len(keys) - 1 != hops:
        return WalkScore(True, False, f"{len(keys) - 1} edges where {hops} suffice")
    return WalkScore(True, True)


# -- datasets --------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetItem:
    start: str
    goal: str
    path: CanonicalPath
    instruction: str

    def to_dict(self) -> dict[str, Any]:
        return {"start": self.start, "goal": self.goal, "path": self.path.to_dict(), "instruction": self.instruction}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> DatasetItem:
        return cls(data["start"], data["goal"], CanonicalPath.from_dict(data["path"]), data["instruction"])


@dataclass(frozen=True)
class PathDataset:
    environment: GeoEnvironment
    items: tuple[DatasetItem, ...]
    seed: int
    theta: float = DEFAULT_THETA

    @property
    def environment_id(self) -> str:
        return self.environment.id

    def to_dict(self) -> dict[str, Any]:
        return {
            "environment_id": self.environment_id,
            "seed": self.seed,
            "theta": self.theta,
            "environment": self.environment.to_dict(),
            "items": [item.to_dict() for item in self.items],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> PathDataset:
        return cls(
            GeoEnvironment.from_dict(data["environment"]),
            tuple(DatasetItem.from_dict(d) for d in data["items"]),
            data.get("seed", 0),
            data.get("theta", DEFAULT_THETA),
        )


def held_out_answerable(
    env: GeoEnvironment, items: list[DatasetItem], index: int, theta: float = DEFAULT_THETA
) -> bool:
    """Whether the map built from every item except ``index`` answers that
    item's query with a shortest, correctly-actioned route."""
    topo = TopoMap()
    try:
        for j, item in enumerate(items):
            if j != index:
                topo.add_path(item.path)
        held = items[index]
        route = find_route(topo, RouteQuery(held.start, held.goal))
    except (MapConflict, RouteFailure):
        return False
    return score_walk(env, route, held.start, held.goal, theta).shortest


def sample_dataset(
    env: GeoEnvironment,
    seed: int,
    theta: float = DEFAULT_THETA,
    size: int = PATHS_PER_DATASET,
    max_draws: int = 2000,
) -> PathDataset:
    """Choose ``size`` ordered start/goal pairs among the designated nodes.

    Draws are repeated (seeded) until every item can be recovered from the
    other items alone, which makes the leave-one-out evaluation well posed.
    """
    pairs = list(itertools.permutations(env.designated, 2))
    if size > len(pairs):
        raise DatasetError(f"only {len(pairs)} ordered pairs for {size} paths")
    truths = {}
    for s, g in pairs:
        path = ground_truth_path(env, s, g, theta)
        truths[(s, g)] = DatasetItem(s, g, path, generate_instruction(path))
    rng = random.Random(seed)
    for _ in range(max_draws):
        chosen = rng.sample(pairs, size)
        items = [truths[p] for p in chosen]
        if all(held_out_answerable(env, items, i, theta) for i in range(size)):
            return PathDataset(env, tuple(items), seed, theta)
    raise DatasetError(
        f"no draw of {size} paths in {max_draws} attempts lets every path be rebuilt from the others; "
        "the environment is too sparse around its designated nodes"
    )


def seeded_datasets(
    count: int, seed: int, node_count: int = 12, theta: float = DEFAULT_THETA
) -> list[PathDataset]:
    """``count`` environments with one dataset each; environment ``i`` uses
    seed ``seed + i`` for both generation and sampling."""
    return [
        sample_dataset(generate_environment(seed + i, node_count, theta=theta), seed + i, theta)
        for i in range(count)
    ]
