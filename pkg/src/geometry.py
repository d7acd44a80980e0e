"""
Geometry Module
Box and segment arithmetic shared by metrics, patching, stitching and generation
"""

from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .graph_model import BBox

Point = Tuple[float, float]

# clipped boxes narrower than this are discarded
MIN_CLIP_SIZE = 2.0


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    TOP = "top"
    BOTTOM = "bottom"


OPPOSITE_SIDE = {
    Side.LEFT: Side.RIGHT,
    Side.RIGHT: Side.LEFT,
    Side.TOP: Side.BOTTOM,
    Side.BOTTOM: Side.TOP,
}


class Segment(BaseModel):
    start: Point
    end: Point


class BoxGeometry:
    """Axis-aligned box and segment operations"""

    @staticmethod
    def intersection_area(a: BBox, b: BBox) -> float:
        w = min(a.x2, b.x2) - max(a.x1, b.x1)
        h = min(a.y2, b.y2) - max(a.y1, b.y1)
        if w <= 0 or h <= 0:
            return 0.0
        return w * h

    @staticmethod
    def iou(a: BBox, b: BBox) -> float:
        """
        Intersection over union

        Args:
            a: First box
            b: Second box

        Returns:
            IoU in [0, 1]
        """
        inter = BoxGeometry.intersection_area(a, b)
        union = a.area + b.area - inter
        if union <= 0:
            return 0.0
        return inter / union

    @staticmethod
    def giou(a: BBox, b: BBox) -> float:
        """
        Generalized IoU: IoU minus the empty share of the enclosing hull

        Args:
            a: First box
            b: Second box

        Returns:
            gIoU in [-1, 1]
        """
        inter = BoxGeometry.intersection_area(a, b)
        union = a.area + b.area - inter
        hull = (max(a.x2, b.x2) - min(a.x1, b.x1)) * (max(a.y2, b.y2) - min(a.y1, b.y1))
        if union <= 0 or hull <= 0:
            return 0.0
        return inter / union - (hull - union) / hull

    @staticmethod
    def pairwise_iou(boxes_a: Sequence[BBox], boxes_b: Sequence[BBox]) -> np.ndarray:
        """IoU matrix of shape (len(a), len(b))"""
        if not boxes_a or not boxes_b:
            return np.zeros((len(boxes_a), len(boxes_b)))
        a = np.array([box.as_tuple() for box in boxes_a], dtype=float)
        b = np.array([box.as_tuple() for box in boxes_b], dtype=float)
        iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
        ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
        inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
        area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
        area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
        union = area_a[:, None] + area_b[None, :] - inter
        return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)

    @staticmethod
    def clip_box(box: BBox, window: BBox) -> Optional[BBox]:
        """
        Intersect a box with a window

        Args:
            box: Box to clip
            window: Clipping window

        Returns:
            Clipped box, or None when the result is empty or under MIN_CLIP_SIZE
        """
        x1, y1 = max(box.x1, window.x1), max(box.y1, window.y1)
        x2, y2 = min(box.x2, window.x2), min(box.y2, window.y2)
        if x2 - x1 < MIN_CLIP_SIZE or y2 - y1 < MIN_CLIP_SIZE:
            return None
        return BBox(x1=x1, y1=y1, x2=x2, y2=y2)

    @staticmethod
    def contains_point(window: BBox, x: float, y: float) -> bool:
        """Half-open membership: left/top edges belong to the window, right/bottom do not"""
        return window.x1 <= x < window.x2 and window.y1 <= y < window.y2

    @staticmethod
    def segment_window_exit(segment: Segment, window: BBox) -> List[Tuple[Point, Side]]:
        """
        Points where a segment crosses the window boundary (Liang-Barsky)

        Args:
            segment: Segment to test
            window: Window box

        Returns:
            Crossings ordered from segment start, each tagged with the window side;
            empty when the segment lies entirely inside or outside
        """
        (x0, y0), (x1, y1) = segment.start, segment.end
        dx, dy = x1 - x0, y1 - y0
        checks = (
            (-dx, x0 - window.x1, Side.LEFT),
            (dx, window.x2 - x0, Side.RIGHT),
            (-dy, y0 - window.y1, Side.TOP),
            (dy, window.y2 - y0, Side.BOTTOM),
        )
        t_enter, t_exit = 0.0, 1.0
        enter_side = exit_side = None
        for p, q, side in checks:
            if p == 0:
                if q < 0:
                    return []
                continue
            r = q / p
            if p < 0:
                if r > t_exit:
                    return []
                if r > t_enter:
                    t_enter, enter_side = r, side
            else:
                if r < t_enter:
                    return []
                if r < t_exit:
                    t_exit, exit_side = r, side
        if t_enter >= t_exit:
            return []

        crossings: List[Tuple[Point, Side]] = []
        if enter_side is not None:
            crossings.append(((x0 + t_enter * dx, y0 + t_enter * dy), enter_side))
        if exit_side is not None:
            crossings.append(((x0 + t_exit * dx, y0 + t_exit * dy), exit_side))
        return crossings

    @staticmethod
    def clip_interval(start: Point, end: Point, window: BBox) -> Optional[Tuple[float, float]]:
        """Parameter range [t0, t1] of a segment inside the closed window, or None"""
        (x0, y0), (x1, y1) = start, end
        dx, dy = x1 - x0, y1 - y0
        t0, t1 = 0.0, 1.0
        for p, q in ((-dx, x0 - window.x1), (dx, window.x2 - x0), (-dy, y0 - window.y1), (dy, window.y2 - y0)):
            if p == 0:
                if q < 0:
                    return None
                continue
            r = q / p
            if p < 0:
                if r > t1:
                    return None
                t0 = max(t0, r)
            else:
                if r < t0:
                    return None
                t1 = min(t1, r)
        return t0, t1

    @staticmethod
    def polyline_exits(points: Sequence[Point], window: BBox) -> List[Tuple[Point, Side]]:
        """
        Every point where a polyline leaves the half-open window

        Args:
            points: Polyline vertices
            window: Window box; right and bottom edges lie outside

        Returns:
            Exit points in path order, each tagged with the nearest window side
        """
        exits: List[Tuple[Point, Side]] = []
        if not points:
            return exits

        def at(start: Point, end: Point, t: float) -> Point:
            return (start[0] + t * (end[0] - start[0]), start[1] + t * (end[1] - start[1]))

        inside = BoxGeometry.contains_point(window, *points[0])
        for start, end in zip(points, points[1:]):
            if start == end:
                continue
            interval = BoxGeometry.clip_interval(start, end, window)
            if interval is None:
                inside = False
                continue
            t0, t1 = interval
            if not inside:
                # grazing contact along or at a boundary is no entry
                if t1 <= t0 or not BoxGeometry.contains_point(window, *at(start, end, (t0 + t1) / 2)):
                    inside = t1 >= 1.0 and BoxGeometry.contains_point(window, *end)
                    continue
            if t1 < 1.0:
                point = at(start, end, t1)
            elif BoxGeometry.contains_point(window, *end):
                inside = True
                continue
            else:
                point = end
            exits.append((point, BoxGeometry.nearest_side(point[0], point[1], window)))
            inside = False
        return exits

    @staticmethod
    def boundary_distance(box: BBox, window: BBox, open_sides: Iterable[Side] = ()) -> float:
        """
        Smallest gap between a box and the window sides, ignoring open sides

        Args:
            box: Box inside the window
            window: Window box
            open_sides: Sides that never crop (e.g. lying on the canvas edge)

        Returns:
            Distance in px, never negative; inf when every side is open
        """
        skip = set(open_sides)
        gaps = {
            Side.LEFT: box.x1 - window.x1,
            Side.RIGHT: window.x2 - box.x2,
            Side.TOP: box.y1 - window.y1,
            Side.BOTTOM: window.y2 - box.y2,
        }
        remaining = [gap for side, gap in gaps.items() if side not in skip]
        if not remaining:
            return float("inf")
        return max(0.0, min(remaining))

    @staticmethod
    def nearest_side(x: float, y: float, window: BBox) -> Side:
        """Window side closest to a point; ties resolve in left, right, top, bottom order"""
        gaps = [
            (abs(x - window.x1), Side.LEFT),
            (abs(window.x2 - x), Side.RIGHT),
            (abs(y - window.y1), Side.TOP),
            (abs(window.y2 - y), Side.BOTTOM),
        ]
        return min(gaps, key=lambda item: item[0])[1]

    @staticmethod
    def manhattan_length(points: Sequence[Point]) -> float:
        return float(sum(abs(bx - ax) + abs(by - ay) for (ax, ay), (bx, by) in zip(points, points[1:])))
