"""
Unit tests for box and segment geometry
"""

import unittest

from hypothesis import given, settings
from hypothesis import strategies as st

from src.geometry import BoxGeometry, MIN_CLIP_SIZE, Segment, Side
from src.graph_model import BBox


@st.composite
def boxes(draw, limit: float = 1000.0):
    x1 = draw(st.floats(min_value=0, max_value=limit, allow_nan=False))
    y1 = draw(st.floats(min_value=0, max_value=limit, allow_nan=False))
    w = draw(st.floats(min_value=1, max_value=200, allow_nan=False))
    h = draw(st.floats(min_value=1, max_value=200, allow_nan=False))
    return BBox(x1=x1, y1=y1, x2=x1 + w, y2=y1 + h)


class TestOverlap(unittest.TestCase):
    """IoU and gIoU"""

    def test_identical_boxes(self):
        b = BBox(x1=10, y1=10, x2=50, y2=30)
        self.assertEqual(BoxGeometry.iou(b, b), 1.0)
        self.assertEqual(BoxGeometry.giou(b, b), 1.0)

    def test_half_overlap(self):
        a = BBox(x1=0, y1=0, x2=10, y2=10)
        b = BBox(x1=5, y1=0, x2=15, y2=10)
        self.assertAlmostEqual(BoxGeometry.iou(a, b), 50 / 150)
        self.assertAlmostEqual(BoxGeometry.giou(a, b), 50 / 150)

    def test_disjoint_boxes_have_negative_giou(self):
        a = BBox(x1=0, y1=0, x2=10, y2=10)
        b = BBox(x1=20, y1=0, x2=30, y2=10)
        self.assertEqual(BoxGeometry.iou(a, b), 0.0)
        self.assertAlmostEqual(BoxGeometry.giou(a, b), -100 / 300)

    @given(boxes(), boxes())
    @settings(max_examples=200)
    def test_bounds_and_symmetry(self, a, b):
        iou = BoxGeometry.iou(a, b)
        giou = BoxGeometry.giou(a, b)
        self.assertTrue(0.0 <= iou <= 1.0)
        self.assertTrue(-1.0 <= giou <= iou + 1e-12)
        self.assertAlmostEqual(iou, BoxGeometry.iou(b, a))
        self.assertAlmostEqual(giou, BoxGeometry.giou(b, a))

    @given(st.lists(boxes(), min_size=1, max_size=5), st.lists(boxes(), min_size=1, max_size=5))
    @settings(max_examples=50)
    def test_pairwise_matrix_matches_scalar(self, left, right):
        matrix = BoxGeometry.pairwise_iou(left, right)
        self.assertEqual(matrix.shape, (len(left), len(right)))
        for i, a in enumerate(left):
            for j, b in enumerate(right):
                self.assertAlmostEqual(matrix[i, j], BoxGeometry.iou(a, b))

    def test_pairwise_empty(self):
        self.assertEqual(BoxGeometry.pairwise_iou([], [BBox(x1=0, y1=0, x2=1, y2=1)]).shape, (0, 1))


class TestClipping(unittest.TestCase):
    """Window clipping and boundary crossings"""

    def test_clip_partially_outside(self):
        clipped = BoxGeometry.clip_box(BBox(x1=700, y1=700, x2=800, y2=800), BBox(x1=0, y1=0, x2=750, y2=750))
        self.assertEqual(clipped.as_tuple(), (700, 700, 750, 750))

    def test_clip_outside_or_sliver(self):
        window = BBox(x1=0, y1=0, x2=100, y2=100)
        self.assertIsNone(BoxGeometry.clip_box(BBox(x1=200, y1=0, x2=300, y2=50), window))
        sliver = BBox(x1=100 - MIN_CLIP_SIZE / 2, y1=0, x2=150, y2=50)
        self.assertIsNone(BoxGeometry.clip_box(sliver, window))

    def test_segment_exit_right(self):
        exits = BoxGeometry.segment_window_exit(
            Segment(start=(100, 100), end=(2000, 100)), BBox(x1=0, y1=0, x2=1500, y2=1500)
        )
        self.assertEqual(len(exits), 1)
        (x, y), side = exits[0]
        self.assertAlmostEqual(x, 1500)
        self.assertAlmostEqual(y, 100)
        self.assertEqual(side, Side.RIGHT)

    def test_segment_through_window_enters_and_exits(self):
        exits = BoxGeometry.segment_window_exit(
            Segment(start=(-100, 50), end=(300, 50)), BBox(x1=0, y1=0, x2=200, y2=100)
        )
        self.assertEqual([side for _, side in exits], [Side.LEFT, Side.RIGHT])

    def test_segment_inside_or_outside_has_no_exit(self):
        window = BBox(x1=0, y1=0, x2=100, y2=100)
        self.assertEqual(BoxGeometry.segment_window_exit(Segment(start=(10, 10), end=(90, 90)), window), [])
        self.assertEqual(BoxGeometry.segment_window_exit(Segment(start=(200, 10), end=(300, 90)), window), [])

    def test_half_open_membership(self):
        window = BBox(x1=0, y1=0, x2=100, y2=100)
        self.assertTrue(BoxGeometry.contains_point(window, 0, 0))
        self.assertFalse(BoxGeometry.contains_point(window, 100, 50))

    def test_polyline_ending_on_the_right_line_exits_there(self):
        window = BBox(x1=0, y1=0, x2=1500, y2=1500)
        self.assertEqual(BoxGeometry.polyline_exits([(100, 100), (1500, 100)], window), [((1500, 100), Side.RIGHT)])
        self.assertEqual(BoxGeometry.polyline_exits([(100, 100), (1499, 100)], window), [])

    def test_polyline_leaving_from_the_left_line(self):
        window = BBox(x1=0, y1=0, x2=1500, y2=1500)
        self.assertEqual(BoxGeometry.polyline_exits([(0, 100), (-50, 100)], window), [((0, 100), Side.LEFT)])

    def test_polyline_grazing_the_boundary_never_enters(self):
        window = BBox(x1=0, y1=0, x2=1500, y2=1500)
        path = [(1600, 100), (1500, 100), (1500, 900), (1600, 900)]
        self.assertEqual(BoxGeometry.polyline_exits(path, window), [])

    def test_polyline_re_entering_exits_twice(self):
        window = BBox(x1=0, y1=0, x2=200, y2=100)
        path = [(50, 50), (300, 50), (300, 80), (100, 80), (100, 200)]
        exits = BoxGeometry.polyline_exits(path, window)
        self.assertEqual([side for _, side in exits], [Side.RIGHT, Side.BOTTOM])
        for (x, y), (ex, ey) in zip([point for point, _ in exits], [(200, 50), (100, 100)]):
            self.assertAlmostEqual(x, ex)
            self.assertAlmostEqual(y, ey)

    def test_boundary_distance_ignores_open_sides(self):
        window = BBox(x1=0, y1=0, x2=100, y2=100)
        b = BBox(x1=5, y1=40, x2=20, y2=60)
        self.assertEqual(BoxGeometry.boundary_distance(b, window), 5)
        self.assertEqual(BoxGeometry.boundary_distance(b, window, [Side.LEFT]), 40)
        self.assertEqual(BoxGeometry.boundary_distance(b, window, list(Side)), float("inf"))

    def test_nearest_side(self):
        window = BBox(x1=0, y1=0, x2=1500, y2=1500)
        self.assertEqual(BoxGeometry.nearest_side(1500, 700, window), Side.RIGHT)
        self.assertEqual(BoxGeometry.nearest_side(700, 2, window), Side.TOP)

    def test_manhattan_length(self):
        self.assertEqual(BoxGeometry.manhattan_length([(0, 0), (10, 0), (10, 5)]), 15.0)


if __name__ == "__main__":
    unittest.main()
