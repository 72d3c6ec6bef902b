"""Topology generators and distance -> link-quality curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from ..simnet import Topology

MAX_NODES = 254

QualityFn = Callable[[float], int]


@dataclass(frozen=True)
class DistanceDecay:
    """100 up to ``full_ft``, linear down to ``floor_q`` at ``edge_ft``, 0 beyond."""

    full_ft: float = 6.0
    edge_ft: float = 18.0
    floor_q: int = 30

    def __call__(self, d: float) -> int:
        if d <= self.full_ft + 1e-9:
            return 100
        if d > self.edge_ft + 1e-9:
            return 0
        frac = (d - self.full_ft) / (self.edge_ft - self.full_ft)
        return int(round(100 - frac * (100 - self.floor_q)))


@dataclass(frozen=True)
class Lossless:
    """Perfect links within ``range_ft``, nothing (not even carrier) beyond."""

    range_ft: float = 3.0

    def __call__(self, d: float) -> int:
        return 100 if d <= self.range_ft + 1e-9 else 0


def quality_model(name: str, range_ft: float = 3.0) -> QualityFn:
    if name == "lossless":
        return Lossless(range_ft)
    if name == "distance-decay":
        return DistanceDecay()
    raise ValueError(f"unknown loss model {name!r}")


def from_positions(positions: list[tuple[float, float]], quality_fn: QualityFn) -> Topology:
    n = len(positions)
    if n > MAX_NODES:
        raise ValueError(f"{n} nodes exceeds the {MAX_NODES}-node id space")
    q = [[100] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = math.dist(positions[i], positions[j])
            v = int(quality_fn(d))
            q[i][j] = q[j][i] = v
    return Topology(list(positions), q)


def grid_positions(rows: int, cols: int, spacing_ft: float, count: int | None = None,
                   base_at: tuple[int, int] = (0, 0)):
    """Row-major grid positions, translated so the base station sits at (0, 0).

    ``base_at`` is the (row, col) cell holding the base station; it becomes
    node 0 and the remaining cells keep row-major order.
    """
    cells = [(r, c) for r in range(rows) for c in range(cols)]
    if count is not None:
        cells = cells[:count]
    if base_at not in cells:
        raise ValueError(f"base cell {base_at} is outside the grid")
    cells.remove(base_at)
    cells.insert(0, base_at)
    br, bc = base_at
    return [((c - bc) * spacing_ft, (r - br) * spacing_ft) for r, c in cells]


def gen_grid(rows: int, cols: int, spacing_ft: float, quality_fn: QualityFn,
             count: int | None = None, base_at: tuple[int, int] = (0, 0)) -> Topology:
    if rows < 1 or cols < 1 or spacing_ft <= 0:
        raise ValueError("grid needs positive dimensions and spacing")
    if rows * cols > MAX_NODES:
        raise ValueError(f"{rows}x{cols} grid exceeds {MAX_NODES} nodes")
    if count is not None and not 1 <= count <= rows * cols:
        raise ValueError("count must fit inside the grid")
    return from_positions(grid_positions(rows, cols, spacing_ft, count, base_at), quality_fn)


def grid_for(n_total: int, spacing_ft: float, quality_fn: QualityFn, cols: int | None = None) -> Topology:
    """Near-square grid holding ``n_total`` nodes (last row possibly partial)."""
    cols = cols or math.ceil(math.sqrt(n_total))
    rows = math.ceil(n_total / cols)
    return gen_grid(rows, cols, spacing_ft, quality_fn, count=n_total)


def two_arm_line(per_arm: int, spacing_ft: float, quality_fn: QualityFn) -> Topology:
    """Base station in the middle of a straight line with ``per_arm`` nodes each side."""
    return gen_grid(1, 2 * per_arm + 1, spacing_ft, quality_fn, base_at=(0, per_arm))


# Reconstruction of the 21-node lossy layout: three rows of seven at 8 ft with
# the base station in the middle, so nodes sit left and right of it and up
# to four hops out.  Its curve is steeper than the default one: grid
# neighbours get q = 94 (calibrated so the baseline's streaming rate matches
# the reported simulation), diagonals and anything farther are out of carrier
# range, so interference and communication ranges coincide.
LOSSY21_ROWS, LOSSY21_COLS, LOSSY21_SPACING = 3, 7, 8.0
LOSSY21_CURVE = DistanceDecay(full_ft=7.7, edge_ft=11.0, floor_q=30)


def lossy21(quality_fn: QualityFn | None = None) -> Topology:
    return gen_grid(LOSSY21_ROWS, LOSSY21_COLS, LOSSY21_SPACING, quality_fn or LOSSY21_CURVE,
                    base_at=(1, 3))


def read_positions(path) -> list[tuple[float, float]]:
    """Whitespace-separated ``x y`` per line; '#' starts a comment; first line is the base."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            x, y = line.split()[:2]
            out.append((float(x), float(y)))
    return out
