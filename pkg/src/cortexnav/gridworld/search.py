"""Breadth-first search on the 8-connected free space."""

from __future__ import annotations

from collections import deque
from typing import Callable, Iterable

from .maps import GridMap
from .motion import DIRECTIONS, Cell

UNREACHABLE = -1


class SearchError(ValueError):
    pass


def distance_field(grid: GridMap, source: Cell) -> dict[Cell, int]:
    """Geodesic distance from ``source`` to every reachable free cell."""
    if not grid.is_free(source):
        raise SearchError(f"{source} is not a free cell")
    dist = {source: 0}
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        d = dist[cell] + 1
        for nxt in grid.neighbors(cell):
            if nxt not in dist:
                dist[nxt] = d
                queue.append(nxt)
    return dist


def geodesic(grid: GridMap, a: Cell, b: Cell) -> int:
    """Shortest 8-connected path length in cells, or ``UNREACHABLE``."""
    if not grid.is_free(a) or not grid.is_free(b):
        raise SearchError(f"geodesic endpoints must be free: {a}, {b}")
    if a == b:
        return 0
    return distance_field(grid, a).get(b, UNREACHABLE)


class GeodesicCache:
    """Memoised distance fields for one immutable map."""

    def __init__(self, grid: GridMap):
        self.grid = grid
        self._fields: dict[Cell, dict[Cell, int]] = {}

    def field(self, target: Cell) -> dict[Cell, int]:
        if target not in self._fields:
            self._fields[target] = distance_field(self.grid, target)
        return self._fields[target]

    def distance(self, a: Cell, b: Cell) -> int:
        return self.field(b).get(a, UNREACHABLE)

    def nearest(self, a: Cell, targets: Iterable[Cell]) -> int:
        best = UNREACHABLE
        for t in targets:
            d = self.distance(a, t)
            if d != UNREACHABLE and (best == UNREACHABLE or d < best):
                best = d
        return best


def bfs_path(
    start: Cell,
    is_goal: Callable[[Cell], bool],
    passable: Callable[[Cell], bool],
    limit: int | None = None,
) -> list[Cell] | None:
    """Shortest cell path from ``start`` to the first goal cell found.

    Neighbours are expanded in the fixed direction order, so ties between
    equally short paths resolve deterministically.
    """
    if is_goal(start):
        return [start]
    parent: dict[Cell, Cell | None] = {start: None}
    queue = deque([(start, 0)])
    while queue:
        cell, depth = queue.popleft()
        if limit is not None and depth >= limit:
            continue
        for dx, dy in DIRECTIONS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if nxt in parent or not passable(nxt):
                continue
            parent[nxt] = cell
            if is_goal(nxt):
                path = [nxt]
                while parent[path[-1]] is not None:
                    path.append(parent[path[-1]])
                return path[::-1]
            queue.append((nxt, depth + 1))
    return None
