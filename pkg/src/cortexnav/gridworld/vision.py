"""Egocentric observations: a 90-degree ray-cast cone of range 6 cells."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

from .maps import GridMap
from .motion import N_HEADINGS, Cell, Pose

FOV_DEGREES = 90.0
VIEW_RANGE = 6.0
# objects further away than this are seen but not recognised
RECOGNITION_RANGE = 3.0
UNKNOWN = "unknown"


@dataclass(frozen=True)
class Observation:
    visible_cells: tuple[tuple[Cell, str], ...]
    visible_objects: tuple[tuple[Cell, str, str], ...]
    agent_pose: Pose
    step: int = 0

    @property
    def cells(self) -> dict[Cell, str]:
        return dict(self.visible_cells)

    def digest(self) -> str:
        h = hashlib.blake2b(digest_size=8)
        h.update(repr((self.agent_pose.to_list(), self.visible_cells, self.visible_objects)).encode())
        return h.hexdigest()

    def to_dict(self) -> dict:
        return {
            "pose": self.agent_pose.to_list(),
            "step": self.step,
            "cells": [[c[0], c[1], occ] for c, occ in self.visible_cells],
            "objects": [[c[0], c[1], cat, col] for c, cat, col in self.visible_objects],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Observation":
        return cls(
            visible_cells=tuple(((x, y), occ) for x, y, occ in data["cells"]),
            visible_objects=tuple(((x, y), cat, col) for x, y, cat, col in data["objects"]),
            agent_pose=Pose.from_list(data["pose"]),
            step=int(data["step"]),
        )


def line_cells(dx: int, dy: int) -> tuple[Cell, ...]:
    """Cells strictly between the origin and (dx, dy), Bresenham order."""
    cells = []
    x, y = 0, 0
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1
    adx, ady = abs(dx), abs(dy)
    err = adx - ady
    while (x, y) != (dx, dy):
        e2 = 2 * err
        if e2 > -ady:
            err -= ady
            x += sx
        if e2 < adx:
            err += adx
            y += sy
        if (x, y) != (dx, dy):
            cells.append((x, y))
    return tuple(cells)


@lru_cache(maxsize=N_HEADINGS)
def view_cone(heading: int) -> tuple[tuple[int, int, tuple[Cell, ...]], ...]:
    """Relative cells inside the view cone of ``heading``, nearest first."""
    centre = heading * 360.0 / N_HEADINGS
    half = FOV_DEGREES / 2.0
    reach = int(VIEW_RANGE)
    cone = []
    for dy in range(-reach, reach + 1):
        for dx in range(-reach, reach + 1):
            dist = math.hypot(dx, dy)
            if dist > VIEW_RANGE + 1e-9:
                continue
            if (dx, dy) != (0, 0):
                bearing = math.degrees(math.atan2(dx, -dy)) % 360.0
                offset = (bearing - centre + 180.0) % 360.0 - 180.0
                if abs(offset) > half + 1e-9:
                    continue
            cone.append((dist, dx, dy))
    cone.sort()
    return tuple((dx, dy, line_cells(dx, dy)) for _, dx, dy in cone)


def visible_cells(grid: GridMap, pose: Pose) -> list[Cell]:
    out = []
    for dx, dy, between in view_cone(pose.heading):
        cell = (pose.x + dx, pose.y + dy)
        if not grid.in_bounds(cell):
            continue
        blocked = False
        for bx, by in between:
            probe = (pose.x + bx, pose.y + by)
            if not grid.in_bounds(probe) or not grid.is_free(probe):
                blocked = True
                break
        if not blocked:
            out.append(cell)
    return out


def observe(grid: GridMap, pose: Pose, step: int = 0) -> Observation:
    cells = visible_cells(grid, pose)
    objects = []
    for cell in cells:
        obj = grid.objects.get(cell)
        if obj is None:
            continue
        if math.dist(cell, pose.cell) <= RECOGNITION_RANGE + 1e-9:
            objects.append((cell, obj.category, obj.color))
        else:
            objects.append((cell, UNKNOWN, UNKNOWN))
    return Observation(
        visible_cells=tuple((c, grid.occupancy(c)) for c in cells),
        visible_objects=tuple(objects),
        agent_pose=pose,
        step=step,
    )
