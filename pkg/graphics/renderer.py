#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
HierNav - Graph Renderer
------------------------
Draw maze walls, node and edge statuses and the agent trajectory for each
graph snapshot of a run; export SVG maps, a coverage table and an animated GIF
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
from PIL import Image  # noqa: E402

from core.constants import (  # noqa: E402
    EDGE_BLOCKED,
    EDGE_FEASIBLE,
    EDGE_UNKNOWN,
    RUN_INFO_FILE,
    TRACE_FILE,
)
from core.crawler import read_trace_csv  # noqa: E402
from core.errors import ExportError  # noqa: E402
from core.graph import NavGraph, wall_crossing_edges  # noqa: E402
from core.maze import bundled_maze, load_maze_file  # noqa: E402
from utils.logger import get_logger  # noqa: E402

logger = get_logger("hiernav.graphics")

SNAPSHOT_GLOB = "graph_*.json"
COVERAGE_FILE = "coverage.csv"
EVOLUTION_FILE = "evolution.gif"

EDGE_STYLE = {
    EDGE_UNKNOWN: {"color": "#c8c8c8", "linewidth": 0.6, "linestyle": ":"},
    EDGE_FEASIBLE: {"color": "#2e8b57", "linewidth": 2.0, "linestyle": "-"},
    EDGE_BLOCKED: {"color": "#d62728", "linewidth": 1.2, "linestyle": "--"},
}
WALL_COLOR = "#3b3b3b"
VISITED_COLOR = "#1f77b4"
UNVISITED_COLOR = "#ffffff"
TRAJECTORY_COLOR = "#ff7f0e"


@dataclass
class Snapshot:
    index: int
    step: int
    graph: NavGraph


@dataclass
class ExportSummary:
    svg_files: list = field(default_factory=list)
    coverage_file: Path = None
    gif_file: Path = None
    wall_crossings: list = field(default_factory=list)


def load_snapshots(run_dir):
    """
    Read graph_<k>.json files of a run directory in index order

    Raises:
        ExportError: When the directory is missing or holds no snapshot
    """
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ExportError(f"run directory not found: {run_dir}")
    paths = sorted(run_dir.glob(SNAPSHOT_GLOB))
    if not paths:
        raise ExportError(f"no graph snapshots in {run_dir}")

    snapshots = []
    for path in paths:
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            graph = NavGraph.from_snapshot(data["graph"])
        except (ValueError, KeyError, TypeError) as e:
            raise ExportError(f"malformed snapshot {path.name}: {e}") from e
        snapshots.append(Snapshot(int(data.get("index", len(snapshots))), int(data.get("step", 0)), graph))
    snapshots.sort(key=lambda s: s.index)
    return snapshots


def load_run_maze(run_dir):
    """Maze named in run.json (file path first, bundled name second), or None"""
    info_path = Path(run_dir) / RUN_INFO_FILE
    if not info_path.exists():
        return None
    info = json.loads(info_path.read_text(encoding="utf-8"))
    maze_file = info.get("maze_file")
    if maze_file and Path(maze_file).exists():
        return load_maze_file(maze_file)
    name = info.get("maze")
    if name:
        try:
            return bundled_maze(name)
        except FileNotFoundError:
            logger.warning(f"maze {name} named in {info_path} not found; drawing without walls")
    return None


class MapRenderer:
    """Draw one graph snapshot over the maze with the trajectory so far"""

    def __init__(self, maze=None, figsize=(6.0, 6.0), dpi=100):
        """
        Args:
            maze (Maze, optional): Walls to draw underneath the graph
            figsize (tuple): Figure size in inches
            dpi (int): Raster resolution for GIF frames
        """
        self.maze = maze
        self.figsize = figsize
        self.dpi = dpi

    def _draw_walls(self, ax):
        cs = self.maze.cell_size
        extent = (
            -cs / 2.0,
            (self.maze.width - 0.5) * cs,
            -cs / 2.0,
            (self.maze.height - 0.5) * cs,
        )
        ax.imshow(
            self.maze.walls,
            cmap=ListedColormap(["#ffffff", WALL_COLOR]),
            origin="lower",
            extent=extent,
            interpolation="nearest",
            zorder=0,
        )

    def _draw_graph(self, ax, graph):
        for status, style in EDGE_STYLE.items():
            segments = [
                (graph.node_xy(a), graph.node_xy(b))
                for a, b in graph.lattice_edges()
                if graph.status(a, b) == status
            ]
            if segments:
                ax.add_collection(LineCollection(segments, zorder=1, label=status, **style))

        nodes = graph.nodes
        xy = np.array([graph.node_xy(n) for n in nodes])
        colors = [VISITED_COLOR if n in graph.visited else UNVISITED_COLOR for n in nodes]
        ax.scatter(xy[:, 0], xy[:, 1], s=18, c=colors, edgecolors="#555555", linewidths=0.5, zorder=2)

    def draw(self, graph, positions=None, title=None):
        """
        Build a figure for one snapshot

        Args:
            graph (NavGraph): Graph state to draw
            positions (np.ndarray, optional): (T, 2) trajectory up to this snapshot
            title (str, optional): Axes title

        Returns:
            matplotlib.figure.Figure: Caller closes it
        """
        fig, ax = plt.subplots(figsize=self.figsize, dpi=self.dpi)
        if self.maze is not None:
            self._draw_walls(ax)
        self._draw_graph(ax, graph)
        if positions is not None and len(positions):
            ax.plot(positions[:, 0], positions[:, 1], color=TRAJECTORY_COLOR, linewidth=0.8, zorder=3)
            ax.scatter(positions[-1, 0], positions[-1, 1], color=TRAJECTORY_COLOR, marker="^", s=40, zorder=4)

        ax.set_aspect("equal")
        ax.autoscale_view()
        ax.set_xticks([])
        ax.set_yticks([])
        if title:
            ax.set_title(title)
        return fig

    def save_svg(self, graph, path, positions=None, title=None):
        fig = self.draw(graph, positions, title)
        try:
            fig.savefig(path, format="svg", bbox_inches="tight")
        finally:
            plt.close(fig)
        return Path(path)

    def frame(self, graph, positions=None, title=None):
        """Raster copy of the figure, as a PIL image"""
        fig = self.draw(graph, positions, title)
        try:
            fig.canvas.draw()
            pixels = np.asarray(fig.canvas.buffer_rgba())
            return Image.fromarray(pixels[:, :, :3].copy())
        finally:
            plt.close(fig)


def write_coverage_csv(snapshots, path):
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["snapshot", "step", "visited", "feasible", "blocked"])
        for snap in snapshots:
            counts = snap.graph.counts()
            writer.writerow([snap.index, snap.step, counts["visited"], counts["feasible"], counts["blocked"]])
    return Path(path)


def export_plots(run_dir, out_dir, maze=None, gif=True, frame_ms=400):
    """
    Export one SVG per snapshot, coverage.csv and evolution.gif

    Args:
        run_dir (str | Path): Directory holding graph_<k>.json and trace.csv
        out_dir (str | Path): Destination directory
        maze (Maze, optional): Overrides the maze recorded in run.json
        gif (bool): Also write the animated evolution
        frame_ms (int): GIF frame duration

    Returns:
        ExportSummary: Written files and any Feasible edge that crosses a wall
    """
    run_dir = Path(run_dir)
    snapshots = load_snapshots(run_dir)
    maze = maze if maze is not None else load_run_maze(run_dir)

    trace_path = run_dir / TRACE_FILE
    records = read_trace_csv(trace_path) if trace_path.exists() else []
    steps = np.array([r.step for r in records], dtype=np.int64)
    positions = np.array([[r.x, r.y] for r in records]).reshape(-1, 2)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    renderer = MapRenderer(maze)
    summary = ExportSummary()
    frames = []

    for snap in snapshots:
        upto = positions[steps <= snap.step]
        title = f"snapshot {snap.index} - step {snap.step}"
        path = out_dir / f"graph_{snap.index:04d}.svg"
        summary.svg_files.append(renderer.save_svg(snap.graph, path, upto, title))
        if gif:
            frames.append(renderer.frame(snap.graph, upto, title))

    summary.coverage_file = write_coverage_csv(snapshots, out_dir / COVERAGE_FILE)
    if gif and frames:
        summary.gif_file = out_dir / EVOLUTION_FILE
        frames[0].save(
            summary.gif_file,
            save_all=True,
            append_images=frames[1:],
            duration=frame_ms,
            loop=0,
        )

    if maze is not None:
        summary.wall_crossings = wall_crossing_edges(snapshots[-1].graph, maze)
        if summary.wall_crossings:
            logger.warning(f"{len(summary.wall_crossings)} feasible edges cross a wall: {summary.wall_crossings}")

    logger.info(f"Exported {len(summary.svg_files)} maps from {run_dir} to {out_dir}")
    return summary
