"""Route queries over a topological map: fewest edges, then action inference."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .canonical import CanonicalPath, node_key
from .topomap import TopoMap

UNKNOWN_NODE = "unknown-node"
NO_PATH = "no-path"
INSUFFICIENT = "insufficient-information"


class RouteFailure(Exception):
    def __init__(self, kind: str, detail: str | tuple[str, ...]):
        self.kind = kind
        self.detail = detail
        if isinstance(detail, tuple):
            shown = " -> ".join(detail)
        else:
            shown = detail
        super().__init__(f"{kind}: {shown}")


@dataclass(frozen=True)
class RouteQuery:
    start: str
    goal: str

    def __post_init__(self) -> None:
        if node_key(self.start) == node_key(self.goal):
            raise ValueError(f"start and goal are the same place: {self.start!r}")


def hop_distances(adjacency: Mapping[str, Sequence[str]], source: str) -> dict[str, int]:
    """Uniform-cost search with unit edge weights from ``source``."""
    dist = {source: 0}
    frontier = [(0, source)]
    while frontier:
        d, node = heapq.heappop(frontier)
        if d > dist[node]:
            continue
        for nbr in adjacency.get(node, ()):
            if d + 1 < dist.get(nbr, d + 2):
                dist[nbr] = d + 1
                heapq.heappush(frontier, (d + 1, nbr))
    return dist


def shortest_paths(adjacency: Mapping[str, Sequence[str]], start: str, goal: str) -> Iterator[list[str]]:
    """Yield every minimum-hop path from ``start`` to ``goal`` in
    lexicographic order of the node sequence.  Nothing if unreachable."""
    to_goal = hop_distances(adjacency, goal)
    if start not in to_goal:
        return

    def extend(prefix: list[str]) -> Iterator[list[str]]:
        here = prefix[-1]
        if here == goal:
            yield list(prefix)
            return
        remaining = to_goal[here]
        for nbr in sorted(adjacency.get(here, ())):
            if to_goal.get(nbr) == remaining - 1:
                prefix.append(nbr)
                yield from extend(prefix)
                prefix.pop()

    yield from extend([start])


def find_route(topo: TopoMap, query: RouteQuery) -> CanonicalPath:
    """Shortest route whose every turn can be inferred from the map.

    Equal-length candidates are tried in lexicographic order; a longer
    route is never returned.  Raises RouteFailure otherwise.
    """
    start, goal = topo.resolve(query.start), topo.resolve(query.goal)
    for asked, found in ((query.start, start), (query.goal, goal)):
        if found is None:
            raise RouteFailure(UNKNOWN_NODE, asked)
    assert start is not None and goal is not None

    first_block: tuple[str, str, str] | None = None
    found_any = False
    for keys in shortest_paths(topo.adjacency(), node_key(start), node_key(goal)):
        found_any = True
        names = [topo.resolve(k) for k in keys]
        actions = []
        for prev, at, nxt in zip(names, names[1:], names[2:]):
            action = topo.infer_action(prev, at, nxt)
            if action is None:
                if first_block is None:
                    first_block = (prev, at, nxt)
                break
            actions.append(action)
        else:
            return CanonicalPath(names, actions)
    if not found_any:
        raise RouteFailure(NO_PATH, (start, goal))
    assert first_block is not None
    raise RouteFailure(INSUFFICIENT, first_block)
