"""
Manhattan Routing Module
Rectilinear pipe routing on an occupancy grid with bend-penalised A*
"""

import heapq
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from .geometry import BoxGeometry, Point, Segment
from .graph_model import BBox, ProcessGraph

logger = logging.getLogger(__name__)

Cell = Tuple[int, int]  # (row, col)

# x moves first, then y; fixes the tie-break among equal-cost paths
MOVES: Tuple[Tuple[int, int], ...] = ((0, 1), (0, -1), (1, 0), (-1, 0))


class RouteResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: List[Point]
    cells: List[Cell] = []
    fallback: bool = False


class OccupancyGrid:
    """Boolean obstacle mask over the canvas; True means blocked"""

    def __init__(self, width: int, height: int, cell: int):
        self.cell = cell
        self.cols = max(1, math.ceil(width / cell))
        self.rows = max(1, math.ceil(height / cell))
        self.mask = np.zeros((self.rows, self.cols), dtype=bool)

    @classmethod
    def from_boxes(cls, width: int, height: int, cell: int, boxes: Sequence[BBox]) -> "OccupancyGrid":
        grid = cls(width, height, cell)
        for box in boxes:
            grid.mask[grid.region(box)] = True
        return grid

    def region(self, box: BBox) -> Tuple[slice, slice]:
        """Cells covered by a box, inflated by one cell on every side"""
        c0 = max(0, math.floor(box.x1 / self.cell) - 1)
        c1 = min(self.cols - 1, math.ceil(box.x2 / self.cell))
        r0 = max(0, math.floor(box.y1 / self.cell) - 1)
        r1 = min(self.rows - 1, math.ceil(box.y2 / self.cell))
        return slice(r0, r1 + 1), slice(c0, c1 + 1)

    def cell_of(self, x: float, y: float) -> Cell:
        row = min(max(int(y // self.cell), 0), self.rows - 1)
        col = min(max(int(x // self.cell), 0), self.cols - 1)
        return row, col

    def center_of(self, cell: Cell) -> Point:
        row, col = cell
        return ((col + 0.5) * self.cell, (row + 0.5) * self.cell)


class ManhattanRouter:
    """
    Routes edges as axis-parallel polylines between node box boundaries
    """

    def __init__(self, width: int, height: int, cell: int = 10, bend_penalty: float = 2.0):
        self.width = width
        self.height = height
        self.cell = cell
        self.bend_penalty = bend_penalty

    def build_grid(self, boxes: Sequence[BBox]) -> OccupancyGrid:
        return OccupancyGrid.from_boxes(self.width, self.height, self.cell, boxes)

    def search(self, blocked: np.ndarray, start: Cell, goal: Cell) -> Optional[List[Cell]]:
        """
        A* over (cell, heading) states; cost = steps + bend_penalty per turn

        Args:
            blocked: Obstacle mask
            start: Start cell
            goal: Goal cell

        Returns:
            Cell path from start to goal inclusive, or None when unreachable
        """
        rows, cols = blocked.shape

        def heuristic(cell: Cell) -> float:
            return abs(cell[0] - goal[0]) + abs(cell[1] - goal[1])

        start_state = (start[0], start[1], -1)
        best = {start_state: 0.0}
        came_from: Dict[Tuple[int, int, int], Tuple[int, int, int]] = {}
        sequence = 0
        frontier = [(heuristic(start), sequence, 0.0, start_state)]
        closed = set()

        while frontier:
            _, _, cost, state = heapq.heappop(frontier)
            if state in closed:
                continue
            closed.add(state)
            row, col, heading = state
            if (row, col) == goal:
                path = [(row, col)]
                while state in came_from:
                    state = came_from[state]
                    path.append((state[0], state[1]))
                return path[::-1]

            for move_index, (dr, dc) in enumerate(MOVES):
                nr, nc = row + dr, col + dc
                if not (0 <= nr < rows and 0 <= nc < cols) or blocked[nr, nc]:
                    continue
                step = 1.0
                if heading != -1 and heading != move_index:
                    step += self.bend_penalty
                next_state = (nr, nc, move_index)
                next_cost = cost + step
                if next_cost < best.get(next_state, math.inf):
                    best[next_state] = next_cost
                    came_from[next_state] = state
                    sequence += 1
                    heapq.heappush(frontier, (next_cost + heuristic((nr, nc)), sequence, next_cost, next_state))
        return None

    def route(self, grid: OccupancyGrid, source: BBox, target: BBox) -> RouteResult:
        """
        Route one edge between two boxes

        Args:
            grid: Occupancy grid of all node boxes
            source: Source node box
            target: Target node box

        Returns:
            RouteResult; fallback=True when the L-shaped route was used
        """
        blocked = grid.mask.copy()
        blocked[grid.region(source)] = False
        blocked[grid.region(target)] = False
        start = grid.cell_of(*source.center)
        goal = grid.cell_of(*target.center)

        cells = self.search(blocked, start, goal)
        if cells is None:
            return RouteResult(points=self.l_route(source, target), fallback=True)

        points = simplify([grid.center_of(c) for c in cells])
        if len(points) < 2:
            return RouteResult(points=self.l_route(source, target), cells=cells)
        return RouteResult(points=trim_to_boxes(points, source, target), cells=cells)

    @staticmethod
    def l_route(source: BBox, target: BBox) -> List[Point]:
        (ux, uy), (vx, vy) = source.center, target.center
        points = simplify([(ux, uy), (vx, uy), (vx, vy)])
        if len(points) < 2:
            return [(ux, uy), (vx, vy)]
        return trim_to_boxes(points, source, target)

    def route_graph(self, graph: ProcessGraph) -> Dict[Tuple[str, str], RouteResult]:
        """Route every edge of a placed graph, keyed by edge key"""
        nodes = graph.node_map()
        grid = self.build_grid([n.box for n in graph.nodes])
        routes = {}
        for edge in graph.edges:
            routes[edge.key] = self.route(grid, nodes[edge.source].box, nodes[edge.target].box)
        fallbacks = sum(1 for r in routes.values() if r.fallback)
        if fallbacks:
            logger.warning(f"⚠️ {fallbacks} of {len(routes)} edges fell back to L routes")
        return routes


def simplify(points: Sequence[Point]) -> List[Point]:
    """Drop repeated and collinear interior vertices"""
    out: List[Point] = []
    for point in points:
        if out and out[-1] == point:
            continue
        if len(out) >= 2:
            (ax, ay), (bx, by) = out[-2], out[-1]
            if (ax == bx == point[0]) or (ay == by == point[1]):
                out[-1] = point
                continue
        out.append(point)
    return out


def _strictly_inside(box: BBox, point: Point) -> bool:
    return box.x1 < point[0] < box.x2 and box.y1 < point[1] < box.y2


def _trim_start(points: List[Point], box: BBox) -> List[Point]:
    for index in range(len(points) - 1):
        if _strictly_inside(box, points[index + 1]):
            continue
        if not _strictly_inside(box, points[index]):
            return points[index:]
        crossings = BoxGeometry.segment_window_exit(Segment(start=points[index], end=points[index + 1]), box)
        exit_point = crossings[-1][0] if crossings else points[index]
        return [exit_point] + points[index + 1:]
    return points


def trim_to_boxes(points: List[Point], source: BBox, target: BBox) -> List[Point]:
    """Cut a polyline so it starts on the source boundary and ends on the target boundary"""
    trimmed = _trim_start(list(points), source)
    trimmed = _trim_start(trimmed[::-1], target)[::-1]
    if len(trimmed) < 2:
        return list(points)
    return trimmed
