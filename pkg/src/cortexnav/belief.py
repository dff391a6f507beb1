"""What the agent has observed so far in the current episode."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .gridworld import Cell, Observation
from .gridworld.maps import FREE, WALL
from .gridworld.motion import DIRECTIONS, N_HEADINGS
from .gridworld.vision import UNKNOWN, VIEW_RANGE, line_cells

# a 90-degree cone spans the heading bin and two bins either side
FOV_HALF_BINS = 2


def bearing_bin(origin: Cell, cell: Cell) -> int:
    dx, dy = cell[0] - origin[0], cell[1] - origin[1]
    bearing = math.degrees(math.atan2(dx, -dy)) % 360.0
    return int(round(bearing / (360.0 / N_HEADINGS))) % N_HEADINGS


@dataclass
class BeliefState:
    width: int
    height: int
    known: dict[Cell, str] = field(default_factory=dict)
    objects: dict[Cell, tuple[str, str]] = field(default_factory=dict)
    covered: dict[Cell, set[int]] = field(default_factory=dict)
    scans: list[Cell] = field(default_factory=list)
    visited_targets: list[Cell] = field(default_factory=list)
    tabu: set[Cell] = field(default_factory=set)
    last_direction: int | None = None
    start_cell: Cell | None = None

    def update(self, obs: Observation) -> int:
        """Fold an observation in; returns the number of newly observed cells."""
        new = 0
        for cell, occ in obs.visible_cells:
            if cell not in self.known:
                new += 1
            self.known[cell] = occ
        for cell, category, color in obs.visible_objects:
            if category != UNKNOWN or cell not in self.objects:
                self.objects[cell] = (category, color)
        pose = obs.agent_pose
        if self.start_cell is None:
            self.start_cell = pose.cell
        bins = self.covered.setdefault(pose.cell, set())
        for offset in range(-FOV_HALF_BINS, FOV_HALF_BINS + 1):
            bins.add((pose.heading + offset) % N_HEADINGS)
        return new

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def passable(self, cell: Cell) -> bool:
        """Optimistic: unobserved in-bounds cells are assumed free."""
        return self.in_bounds(cell) and self.known.get(cell, FREE) == FREE

    def known_free(self, cell: Cell) -> bool:
        return self.known.get(cell) == FREE

    def frontiers(self) -> list[Cell]:
        out = []
        for cell, occ in self.known.items():
            if occ != FREE:
                continue
            for dx, dy in DIRECTIONS:
                nxt = (cell[0] + dx, cell[1] + dy)
                if self.in_bounds(nxt) and nxt not in self.known:
                    out.append(cell)
                    break
        return sorted(out)

    def unseen_in_uncovered_bins(self, cell: Cell) -> dict[int, int]:
        """Unobserved cells in range, per heading bin not yet looked at from ``cell``.

        Only cells whose straight line from ``cell`` crosses no known wall
        are counted, since the rest could not be seen by turning.
        """
        covered = self.covered.get(cell, set())
        reach = int(VIEW_RANGE)
        counts: dict[int, int] = {}
        for dy in range(-reach, reach + 1):
            for dx in range(-reach, reach + 1):
                target = (cell[0] + dx, cell[1] + dy)
                if (dx, dy) == (0, 0) or target in self.known or not self.in_bounds(target):
                    continue
                if math.hypot(dx, dy) > VIEW_RANGE + 1e-9:
                    continue
                b = bearing_bin(cell, target)
                if b in covered:
                    continue
                if any(
                    self.known.get((cell[0] + bx, cell[1] + by)) == WALL for bx, by in line_cells(dx, dy)
                ):
                    continue
                counts[b] = counts.get(b, 0) + 1
        return counts

    def snapshot(self) -> dict:
        return {
            "known": len(self.known),
            "frontiers": len(self.frontiers()),
            "tabu": sorted(self.tabu),
            "visited_targets": self.visited_targets[-3:],
        }
