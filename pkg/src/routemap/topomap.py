"""Topological map built from canonical paths.

Nodes and undirected edges come straight from the waypoint sequences.  Only
the actions users actually described are stored, keyed by the directed
triple (prev, at, next).  Everything else is inferred on demand.

Inference works per node.  Give every neighbour ``x`` of node ``i`` an
unknown outgoing bearing ``d(x)`` in quarter turns.  Arriving from ``x`` the
heading is ``d(x) + 2``, so a stored action ``a`` for ``(x, i, y)`` pins
``d(y) - d(x) = a + 2 (mod 4)``.  These difference constraints live in a
union-find with mod-4 offsets; any two neighbours in the same component have
a determined action between them.  Chaining through one pivot ``m`` is
``a(j,i,m) * T * a(m,i,k)``; the union-find applies that through any number
of pivots.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any, Iterable, Iterator

from .actions import Action, from_quarter_turns
from .canonical import CanonicalPath, clean_name, ensure_valid, node_key

MAP_FORMAT_VERSION = 1


class MapConflict(Exception):
    """A new action contradicts what the map already knows at a node."""

    def __init__(self, node: str, triple: tuple[str, str, str], stored: Action, incoming: Action):
        self.node = node
        self.triple = triple
        self.stored = stored
        self.incoming = incoming
        prev, at, nxt = triple
        super().__init__(
            f"conflict at {node!r}: ({prev} -> {at} -> {nxt}) is {stored.value} "
            f"but the instruction says {incoming.value}"
        )


class MissingEdgeError(KeyError):
    pass


class OffsetUnionFind:
    """Union-find over hashable items carrying an offset (mod 4) to the root.

    ``relation(x, y)`` is ``d(y) - d(x)`` when x and y are connected.
    """

    def __init__(self) -> None:
        self._parent: dict[str, str] = {}
        self._offset: dict[str, int] = {}  # d(item) - d(parent)

    def add(self, item: str) -> None:
        if item not in self._parent:
            self._parent[item] = item
            self._offset[item] = 0

    def find(self, item: str) -> tuple[str, int]:
        self.add(item)
        path = []
        while self._parent[item] != item:
            path.append(item)
            item = self._parent[item]
        root = item
        # compress, accumulating offsets from the top of the path down
        acc = 0
        for node in reversed(path):
            acc = (acc + self._offset[node]) % 4
            self._offset[node] = acc
            self._parent[node] = root
        return root, (self._offset[path[0]] if path else 0)

    def relation(self, x: str, y: str) -> int | None:
        rx, ox = self.find(x)
        ry, oy = self.find(y)
        if rx != ry:
            return None
        return (oy - ox) % 4

    def union(self, x: str, y: str, delta: int) -> bool:
        """Impose ``d(y) - d(x) = delta``.  False if that contradicts."""
        rx, ox = self.find(x)
        ry, oy = self.find(y)
        if rx == ry:
            return (oy - ox) % 4 == delta % 4
        # d(ry) - d(rx) = ox + delta - oy
        self._parent[ry] = rx
        self._offset[ry] = (ox + delta - oy) % 4
        return True


def _delta(action: Action) -> int:
    return (action.quarter_turns + 2) % 4


def _action_from_delta(delta: int) -> Action:
    return from_quarter_turns(delta - 2)


@dataclass
class _Entry:
    prev: str
    at: str
    next: str
    action: Action


class TopoMap:
    def __init__(self) -> None:
        self._names: dict[str, str] = {}  # key -> first-seen spelling
        self._adjacent: dict[str, set[str]] = {}
        self._actions: dict[tuple[str, str, str], Action] = {}
        self._relations: dict[str, OffsetUnionFind] = {}

    # -- basic views -------------------------------------------------------

    @property
    def nodes(self) -> list[str]:
        return [self._names[k] for k in sorted(self._names)]

    @property
    def edges(self) -> list[tuple[str, str]]:
        pairs = {tuple(sorted((a, b))) for a, nbrs in self._adjacent.items() for b in nbrs}
        return [(self._names[a], self._names[b]) for a, b in sorted(pairs)]

    @property
    def stored_actions(self) -> dict[tuple[str, str, str], Action]:
        return {tuple(self._names[k] for k in key): a for key, a in sorted(self._actions.items())}

    def __contains__(self, name: str) -> bool:
        return node_key(name) in self._names

    def __len__(self) -> int:
        return len(self._names)

    def resolve(self, name: str) -> str | None:
        """Stored spelling of ``name`` or None when it is not on the map."""
        return self._names.get(node_key(name))

    def neighbors(self, name: str) -> list[str]:
        key = node_key(name)
        return [self._names[k] for k in sorted(self._adjacent.get(key, ()))]

    def has_edge(self, a: str, b: str) -> bool:
        return node_key(b) in self._adjacent.get(node_key(a), ())

    def adjacency(self) -> dict[str, list[str]]:
        """Node key -> sorted neighbour keys."""
        return {k: sorted(v) for k, v in self._adjacent.items()}

    def copy(self) -> TopoMap:
        return copy.deepcopy(self)

    # -- construction ------------------------------------------------------

    def add_path(self, path: CanonicalPath) -> TopoMap:
        """Add waypoints, edges and actions of ``path``.

        All-or-nothing: on MapConflict the map is left exactly as it was.
        """
        ensure_valid(path)
        staged = self.copy()
        staged._apply(path)
        self.__dict__.update(staged.__dict__)
        return self

    def _add_node(self, name: str) -> str:
        key = node_key(name)
        if key not in self._names:
            self._names[key] = clean_name(name)
            self._adjacent[key] = set()
        return key

    def _apply(self, path: CanonicalPath) -> None:
        keys = [self._add_node(w) for w in path.waypoints]
        for a, b in zip(keys, keys[1:]):
            self._adjacent[a].add(b)
            self._adjacent[b].add(a)
        for (prev, at, nxt), action in zip(zip(keys, keys[1:], keys[2:]), path.actions):
            self._store(prev, at, nxt, action)

    def _store(self, prev: str, at: str, nxt: str, action: Action) -> None:
        triple = (prev, at, nxt)
        known = self._known(prev, at, nxt)
        if known is not None and known != action:
            raise MapConflict(self._names[at], self._display(triple), known, action)
        if prev == nxt:
            # turning back on the same edge carries no information
            return
        self._actions[triple] = action
        self._relations.setdefault(at, OffsetUnionFind()).union(prev, nxt, _delta(action))

    def _display(self, triple: Iterable[str]) -> tuple[str, str, str]:
        return tuple(self._names[k] for k in triple)  # type: ignore[return-value]

    # -- queries -----------------------------------------------------------

    def _keys(self, prev: str, at: str, nxt: str) -> tuple[str, str, str]:
        keys = (node_key(prev), node_key(at), node_key(nxt))
        p, i, n = keys
        for a, b in ((p, i), (i, n)):
            if b not in self._adjacent.get(a, ()):
                raise MissingEdgeError(f"no edge between {a!r} and {b!r}")
        return keys

    def stored_action(self, prev: str, at: str, nxt: str) -> Action | None:
        """Exact lookup of a described action; no inference."""
        return self._actions.get((node_key(prev), node_key(at), node_key(nxt)))

    def infer_action(self, prev: str, at: str, nxt: str) -> Action | None:
        """Action at ``at`` going from ``prev`` to ``nxt``, or None if the
        stored actions do not determine it."""
        return self._known(*self._keys(prev, at, nxt))

    def _known(self, prev: str, at: str, nxt: str) -> Action | None:
        if prev == nxt:
            return Action.AROUND
        stored = self._actions.get((prev, at, nxt))
        if stored is not None:
            return stored
        relations = self._relations.get(at)
        if relations is None:
            return None
        delta = relations.relation(prev, nxt)
        return None if delta is None else _action_from_delta(delta)

    def check_consistency(self) -> list[MapConflict]:
        """Re-derive every node's constraints from the stored actions.

        Returns one conflict per inconsistent node, witnessed by the first
        stored triple (in sorted order) that contradicts the others.
        """
        conflicts = []
        by_node: dict[str, list[tuple[tuple[str, str, str], Action]]] = {}
        for triple, action in sorted(self._actions.items()):
            by_node.setdefault(triple[1], []).append((triple, action))
        for at in sorted(by_node):
            uf = OffsetUnionFind()
            for (prev, _, nxt), action in by_node[at]:
                existing = uf.relation(prev, nxt)
                if existing is not None and existing != _delta(action):
                    conflicts.append(
                        MapConflict(
                            self._names[at],
                            self._display((prev, at, nxt)),
                            _action_from_delta(existing),
                            action,
                        )
                    )
                    break
                uf.union(prev, nxt, _delta(action))
        return conflicts

    def iter_triples(self) -> Iterator[tuple[str, str, str]]:
        """Every (prev, at, next) with both edges present, prev != next."""
        for at in sorted(self._adjacent):
            nbrs = sorted(self._adjacent[at])
            for prev in nbrs:
                for nxt in nbrs:
                    if prev != nxt:
                        yield self._display((prev, at, nxt))

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": MAP_FORMAT_VERSION,
            "nodes": self.nodes,
            "edges": [list(e) for e in self.edges],
            "actions": [
                {"prev": p, "at": i, "next": n, "action": a.value}
                for (p, i, n), a in self.stored_actions.items()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> TopoMap:
        """Load a map file as written, without rejecting contradictions.

        Use :meth:`check_consistency` afterwards; a file edited by hand can
        hold conflicting actions that ``add_path`` would have refused.
        """
        if data.get("version") != MAP_FORMAT_VERSION:
            raise ValueError(f"unsupported map version {data.get('version')!r}")
        topo = cls()
        for name in data.get("nodes", []):
            topo._add_node(name)
        for a, b in data.get("edges", []):
            ka, kb = topo._add_node(a), topo._add_node(b)
            if ka == kb:
                raise ValueError(f"self-loop edge on {a!r}")
            topo._adjacent[ka].add(kb)
            topo._adjacent[kb].add(ka)
        for entry in data.get("actions", []):
            e = _Entry(entry["prev"], entry["at"], entry["next"], Action.parse(entry["action"]))
            keys = (node_key(e.prev), node_key(e.at), node_key(e.next))
            for a, b in (keys[:2], keys[1:]):
                if b not in topo._adjacent.get(a, ()):
                    raise ValueError(f"action ({e.prev}, {e.at}, {e.next}) uses a missing edge")
            topo._actions[keys] = e.action
            topo._relations.setdefault(keys[1], OffsetUnionFind()).union(keys[0], keys[2], _delta(e.action))
        return topo

    @classmethod
    def from_json(cls, text: str) -> TopoMap:
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_paths(cls, paths: Iterable[CanonicalPath]) -> TopoMap:
        topo = cls()
        for path in paths:
            topo.add_path(path)
        return topo
