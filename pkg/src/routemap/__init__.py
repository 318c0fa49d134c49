"""Topological maps compiled from route instructions.

Instructions are translated into canonical paths (waypoints plus the turn
taken at each interior waypoint), merged into a map, and new start/goal
queries are answered by shortest-path search with turn inference.
"""

from .actions import DEFAULT_THETA, Action, compose, from_angle, from_quarter_turns, inverse, to_quarter_turns
from .canonical import CanonicalPath, PathValidationError, reverse, validate
from .instructions import (
    BackendError,
    ExtractionError,
    ExtractionRecord,
    ParseError,
    extract_canonical,
    generate_instruction,
    parse_instruction,
)
from .router import RouteFailure, RouteQuery, find_route
from .topomap import MapConflict, TopoMap

__all__ = [
    "DEFAULT_THETA",
    "Action",
    "BackendError",
    "CanonicalPath",
    "ExtractionError",
    "ExtractionRecord",
    "MapConflict",
    "ParseError",
    "PathValidationError",
    "RouteFailure",
    "RouteQuery",
    "TopoMap",
    "compose",
    "extract_canonical",
    "find_route",
    "from_angle",
    "from_quarter_turns",
    "generate_instruction",
    "inverse",
    "parse_instruction",
    "reverse",
    "to_quarter_turns",
    "validate",
]
