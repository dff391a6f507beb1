"""Occupancy-grid maps: generation, connectivity, and a plain-text format."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .motion import DIRECTIONS, Cell

FREE = "."
WALL = "#"

ROOM_NAMES = (
    "kitchen",
    "bedroom",
    "bathroom",
    "living_room",
    "office",
    "hallway",
    "dining_room",
    "laundry",
    "garage",
    "study",
)
CATEGORIES = ("chair", "table", "sofa", "bed", "plant", "tv", "lamp", "sink", "shelf", "fridge")
COLORS = ("red", "blue", "green", "yellow", "white", "black", "brown", "gray")

MIN_ROOM_SIDE = 3
FORMAT_HEADER = "# cortexnav map v1"


class MapError(ValueError):
    pass


@dataclass(frozen=True)
class Room:
    label: str
    x0: int
    y0: int
    x1: int
    y1: int

    def contains(self, cell: Cell) -> bool:
        x, y = cell
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1


@dataclass(frozen=True)
class MapObject:
    category: str
    color: str


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    rows: tuple[str, ...]
    objects: dict[Cell, MapObject] = field(default_factory=dict, hash=False, compare=True)
    rooms: tuple[Room, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.rows) != self.height or any(len(r) != self.width for r in self.rows):
            raise MapError("row data does not match declared size")

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.rows[cell[1]][cell[0]] == FREE

    def occupancy(self, cell: Cell) -> str:
        return self.rows[cell[1]][cell[0]]

    def free_cells(self) -> list[Cell]:
        return [
            (x, y) for y in range(self.height) for x in range(self.width) if self.rows[y][x] == FREE
        ]

    def neighbors(self, cell: Cell):
        x, y = cell
        for dx, dy in DIRECTIONS:
            nxt = (x + dx, y + dy)
            if self.is_free(nxt):
                yield nxt

    def room_of(self, cell: Cell) -> str | None:
        for room in self.rooms:
            if room.contains(cell):
                return room.label
        return None

    def is_connected(self) -> bool:
        free = self.free_cells()
        if not free:
            return False
        return len(flood_fill(self, free[0])) == len(free)


def flood_fill(grid: GridMap, start: Cell) -> set[Cell]:
    seen = {start}
    queue = deque([start])
    while queue:
        cell = queue.popleft()
        for nxt in grid.neighbors(cell):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def _blank(width: int, height: int) -> list[list[str]]:
    cells = [[FREE] * width for _ in range(height)]
    for x in range(width):
        cells[0][x] = cells[height - 1][x] = WALL
    for y in range(height):
        cells[y][0] = cells[y][width - 1] = WALL
    return cells


def _split_rooms(rng: random.Random, cells, n_rooms: int, width: int, height: int):
    rects = [(1, 1, width - 2, height - 2)]
    doors: set[Cell] = set()
    while len(rects) < n_rooms:
        # largest splittable rectangle first; ties by position keep it deterministic
        order = sorted(
            range(len(rects)),
            key=lambda i: (-(rects[i][2] - rects[i][0] + 1) * (rects[i][3] - rects[i][1] + 1), i),
        )
        for i in order:
            x0, y0, x1, y1 = rects[i]
            w, h = x1 - x0 + 1, y1 - y0 + 1
            vertical = w >= h
            span = w if vertical else h
            if span < 2 * MIN_ROOM_SIDE + 1:
                vertical = not vertical
                span = w if vertical else h
                if span < 2 * MIN_ROOM_SIDE + 1:
                    continue
            lo = (x0 if vertical else y0) + MIN_ROOM_SIDE
            hi = (x1 if vertical else y1) - MIN_ROOM_SIDE
            choices = [
                s
                for s in range(lo, hi + 1)
                if not (
                    ((s, y0 - 1) in doors or (s, y1 + 1) in doors)
                    if vertical
                    else ((x0 - 1, s) in doors or (x1 + 1, s) in doors)
                )
            ]
            if not choices:
                continue
            s = rng.choice(choices)
            if vertical:
                wall = [(s, y) for y in range(y0, y1 + 1)]
                rects[i : i + 1] = [(x0, y0, s - 1, y1), (s + 1, y0, x1, y1)]
            else:
                wall = [(x, s) for x in range(x0, x1 + 1)]
                rects[i : i + 1] = [(x0, y0, x1, s - 1), (x0, s + 1, x1, y1)]
            door = rng.choice(wall[1:-1] if len(wall) > 2 else wall)
            for x, y in wall:
                cells[y][x] = WALL
            cells[door[1]][door[0]] = FREE
            doors.add(door)
            break
        else:
            raise MapError(f"cannot fit {n_rooms} rooms in a {width}x{height} map")
    return rects, doors


def generate_map(
    seed: int,
    width: int,
    height: int,
    n_rooms: int = 1,
    n_objects: int = 0,
    clutter: float = 0.0,
) -> GridMap:
    """Build a deterministic room-partitioned map for ``seed``.

    Rooms come from recursive wall splits, each wall pierced by one door, so
    the free space is connected by construction. ``clutter`` is the fraction
    of interior cells turned into pillars; pillars that would disconnect
    the map are skipped.
    """
    if width < 8 or height < 8:
        raise MapError("map dimensions must be >= 8")
    if n_rooms < 1 or n_objects < 0 or not 0.0 <= clutter < 0.5:
        raise MapError("invalid room/object/clutter parameters")
    rng = random.Random(seed)
    cells = _blank(width, height)
    rects, doors = _split_rooms(rng, cells, n_rooms, width, height)

    names = list(ROOM_NAMES)
    rng.shuffle(names)
    rooms = tuple(
        Room(names[i % len(names)] + ("" if i < len(names) else f"_{i}"), *rect)
        for i, rect in enumerate(rects)
    )

    near_door = {(d[0] + dx, d[1] + dy) for d in doors for dx in (-1, 0, 1) for dy in (-1, 0, 1)}
    interior = [
        (x, y)
        for y in range(1, height - 1)
        for x in range(1, width - 1)
        if cells[y][x] == FREE and (x, y) not in near_door
    ]
    n_pillars = int(round(clutter * len(interior)))
    rng.shuffle(interior)
    placed = 0
    for x, y in list(interior):
        if placed >= n_pillars:
            break
        cells[y][x] = WALL
        probe = GridMap(width, height, tuple("".join(r) for r in cells))
        if probe.is_connected():
            placed += 1
        else:
            cells[y][x] = FREE

    free = [(x, y) for y in range(height) for x in range(width) if cells[y][x] == FREE]
    candidates = [c for c in free if c not in near_door]
    if n_objects > len(candidates) // 2:
        raise MapError(f"cannot place {n_objects} objects on {len(candidates)} free cells")
    object_cells = rng.sample(candidates, n_objects)
    objects = {
        cell: MapObject(rng.choice(CATEGORIES), rng.choice(COLORS)) for cell in sorted(object_cells)
    }
    grid = GridMap(width, height, tuple("".join(r) for r in cells), objects, rooms, seed)
    if not grid.is_connected():
        raise MapError("generated map is not connected")
    return grid


def dumps_map(grid: GridMap) -> str:
    lines = [FORMAT_HEADER, f"size\t{grid.width}\t{grid.height}", f"seed\t{grid.seed}", "grid"]
    lines.extend(grid.rows)
    for room in grid.rooms:
        lines.append(f"room\t{room.label}\t{room.x0}\t{room.y0}\t{room.x1}\t{room.y1}")
    for (x, y), obj in sorted(grid.objects.items()):
        lines.append(f"object\t{x}\t{y}\t{obj.category}\t{obj.color}")
    return "\n".join(lines) + "\n"


def loads_map(text: str) -> GridMap:
    lines = text.splitlines()
    if not lines or lines[0] != FORMAT_HEADER:
        raise MapError("missing map header")
    try:
        _, w, h = lines[1].split("\t")
        width, height = int(w), int(h)
        _, seed = lines[2].split("\t")
        if lines[3] != "grid":
            raise MapError("expected 'grid' section")
        rows = tuple(lines[4 : 4 + height])
        rooms, objects = [], {}
        for lineno, line in enumerate(lines[4 + height :], start=5 + height):
            parts = line.split("\t")
            if parts[0] == "room" and len(parts) == 6:
                rooms.append(Room(parts[1], *map(int, parts[2:])))
            elif parts[0] == "object" and len(parts) == 5:
                objects[(int(parts[1]), int(parts[2]))] = MapObject(parts[3], parts[4])
            else:
                raise MapError(f"line {lineno}: unrecognised record {line!r}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, MapError):
            raise
        raise MapError(f"malformed map text: {exc}") from exc
    return GridMap(width, height, rows, objects, tuple(rooms), int(seed))


def load_map(path: str | Path) -> GridMap:
    return loads_map(Path(path).read_text())
