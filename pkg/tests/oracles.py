"""Independent brute-force references used by the unit and acceptance tests."""

from __future__ import annotations

import itertools
import math
from collections import deque


def bfs_moves(grid, a, b):
    """8-connected breadth-first distance over free cells."""
    dist, queue = {a: 0}, deque([a])
    while queue:
        x, y = queue.popleft()
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                c = (x + dx, y + dy)
                if c not in dist and grid.is_free(c):
                    dist[c] = dist[(x, y)] + 1
                    queue.append(c)
    return dist.get(b)


def euclid(u, v):
    return math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(u, v)))


def best_spread(vectors, m):
    """Largest achievable minimum pairwise distance over all m-subsets."""
    best = -1.0
    for subset in itertools.combinations(range(len(vectors)), m):
        spread = min(euclid(vectors[i], vectors[j]) for i, j in itertools.combinations(subset, 2))
        best = max(best, spread)
    return best


def spread_of(vectors, chosen):
    return min(euclid(vectors[i], vectors[j]) for i, j in itertools.combinations(chosen, 2))


def expected_successes(entries, m):
    """Ids kept when any success exists: the m shortest, ties by id."""
    wins = sorted((steps, eid) for eid, ok, steps in entries if ok)
    return {eid for _, eid in wins[:m]}


def cosine(u, v):
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0 or nv == 0:
        return 0.0
    return sum(a * b for a, b in zip(u, v)) / (nu * nv)


def spl_by_hand(rows):
    """rows: (success, shortest, path). Returns (SR, SPL, mean path)."""
    n = len(rows)
    sr = sum(1 for ok, _, _ in rows if ok) / n
    total = 0.0
    for ok, s, p in rows:
        if ok:
            total += 1.0 if max(s, p) == 0 else s / max(s, p)
    return sr, total / n, sum(p for _, _, p in rows) / n
