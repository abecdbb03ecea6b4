#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Maze
--------------
Maze geometry: parsing, cell lookup and wall queries
"""

import math
from pathlib import Path

import numpy as np

from core.constants import (
    CELL_FREE,
    CELL_GOAL,
    CELL_START,
    CELL_WALL,
    MAZE_CHARS,
    MAZES_DIR,
)
from core.errors import MazeParseError
from utils.logger import get_logger

HEADER_PREFIX = "cellsize="

logger = get_logger("hiernav.env")


class Maze:
    """Rectangular grid of Wall / Free / Start / GoalCandidate cells"""

    def __init__(self, rows, cell_size=1.0, name="maze"):
        """
        Create a maze from validated character rows

        Args:
            rows (list[str]): Grid rows, row 0 first; all the same length
            cell_size (float): Side of one cell in meters
            name (str): Maze name
        """
        self.rows = list(rows)
        self.height = len(self.rows)
        self.width = len(self.rows[0]) if self.rows else 0
        self.cell_size = float(cell_size)
        self.name = name
        self.walls = np.array(
            [[ch == CELL_WALL for ch in row] for row in self.rows], dtype=bool
        )

    def __repr__(self):
        return f"Maze({self.name!r}, {self.height}x{self.width}, cell_size={self.cell_size})"

    def char_at(self, row, col):
        return self.rows[row][col]

    def in_bounds(self, row, col):
        return 0 <= row < self.height and 0 <= col < self.width

    def is_wall_cell(self, row, col):
        """Cells outside the grid count as walls"""
        if not self.in_bounds(row, col):
            return True
        return bool(self.walls[row, col])

    def cell_of(self, x, y):
        """
        Cell containing a world point

        Args:
            x (float): World x in meters
            y (float): World y in meters

        Returns:
            tuple: (row, col); cell (row, col) is centred at (col*cell_size, row*cell_size)
        """
        # Points on a shared boundary belong to the lower cell, like graph association
        col = math.ceil(x / self.cell_size - 0.5)
        row = math.ceil(y / self.cell_size - 0.5)
        return row, col

    def is_free(self, x, y):
        row, col = self.cell_of(x, y)
        return not self.is_wall_cell(row, col)

    def cell_center(self, row, col):
        return np.array([col * self.cell_size, row * self.cell_size])

    def _cells_with(self, chars):
        return [
            (r, c)
            for r in range(self.height)
            for c in range(self.width)
            if self.rows[r][c] in chars
        ]

    def free_cells(self):
        """Every non-wall cell (Start and GoalCandidate included), row-major"""
        return self._cells_with((CELL_FREE, CELL_START, CELL_GOAL))

    def goal_cells(self):
        return self._cells_with((CELL_GOAL,))

    @property
    def start_cell(self):
        return self._cells_with((CELL_START,))[0]

    def start_xy(self):
        return self.cell_center(*self.start_cell)

    def bounds(self):
        """World extent of the cell centres: (x_min, x_max, y_min, y_max)"""
        return (
            0.0,
            (self.width - 1) * self.cell_size,
            0.0,
            (self.height - 1) * self.cell_size,
        )

    def segment_hits_wall(self, a, b, resolution=20):
        """
        Check whether the straight segment a -> b passes through a wall cell

        Args:
            a (array-like): Segment start (x, y)
            b (array-like): Segment end (x, y)
            resolution (int): Samples per cell length

        Returns:
            bool: True if any sample lies in a wall cell
        """
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        length = float(np.linalg.norm(b - a))
        samples = max(2, int(math.ceil(length / self.cell_size * resolution)) + 1)
        for t in np.linspace(0.0, 1.0, samples):
            point = a + t * (b - a)
            if not self.is_free(point[0], point[1]):
                return True
        return False

    def to_text(self):
        return "\n".join([f"{HEADER_PREFIX}{self.cell_size}"] + self.rows) + "\n"


def load_maze(text, name="maze"):
    """
    Parse a maze document

    The first line may be a "cellsize=<float>" header (default 1.0); the rest is
    the character grid using '#', '.', 'S' and 'G'.

    Args:
        text (str): Maze document
        name (str): Name given to the maze

    Returns:
        Maze: Parsed maze
    """
    lines = text.splitlines()
    cell_size = 1.0
    first = 0
    while first < len(lines) and not lines[first].strip():
        first += 1
    if first < len(lines) and lines[first].strip().startswith(HEADER_PREFIX):
        raw = lines[first].strip()[len(HEADER_PREFIX):]
        try:
            cell_size = float(raw)
        except ValueError:
            raise MazeParseError(f"invalid cell size {raw!r}", line=first + 1) from None
        if not cell_size > 0 or not math.isfinite(cell_size):
            raise MazeParseError(f"cell size must be positive, got {raw}", line=first + 1)
        first += 1

    numbered = [(i + 1, line.rstrip()) for i, line in enumerate(lines) if i >= first]
    while numbered and not numbered[-1][1]:
        numbered.pop()
    if not numbered:
        raise MazeParseError("maze grid is empty")

    width = len(numbered[0][1])
    starts = []
    for line_no, row in numbered:
        if len(row) != width:
            raise MazeParseError(
                f"ragged row: expected {width} cells, found {len(row)}",
                line=line_no,
                column=min(len(row), width) + 1,
            )
        for col, ch in enumerate(row):
            if ch not in MAZE_CHARS:
                raise MazeParseError(f"unknown cell character {ch!r}", line=line_no, column=col + 1)
            if ch == CELL_START:
                starts.append((line_no, col + 1))

    if not starts:
        raise MazeParseError("maze has no Start cell")
    if len(starts) > 1:
        line_no, col = starts[1]
        raise MazeParseError("maze has more than one Start cell", line=line_no, column=col)

    last = len(numbered) - 1
    for r, (line_no, row) in enumerate(numbered):
        for col, ch in enumerate(row):
            on_border = r in (0, last) or col in (0, width - 1)
            if on_border and ch != CELL_WALL:
                raise MazeParseError("border cells must be walls", line=line_no, column=col + 1)

    maze = Maze([row for _, row in numbered], cell_size=cell_size, name=name)
    logger.debug(
        f"Loaded maze {name}: {maze.height}x{maze.width}, "
        f"{len(maze.free_cells())} free cells, {len(maze.goal_cells())} goals"
    )
    return maze


def load_maze_file(path):
    path = Path(path)
    return load_maze(path.read_text(encoding="utf-8"), name=path.stem)


def bundled_maze(name):
    """Load one of the mazes shipped in assets/mazes"""
    path = MAZES_DIR / f"{name}.txt"
    if not path.exists():
        available = sorted(p.stem for p in MAZES_DIR.glob("*.txt"))
        raise FileNotFoundError(f"no bundled maze {name!r}; available: {available}")
    return load_maze_file(path)
