import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from classpulse.errors import DimensionError, LayoutError
from classpulse.gaze import (
    AttentionHeatmap, GazeHeatmap, UNCLASSIFIED,
    accumulate_heatmap, argmax_to_target, classify_attention,
    dead_zone_report, merge_heatmaps, normalize_pixel_gaze,
)
from classpulse.model import ClassroomLayout, GazeTarget, Region


class TestArgmax:
    def test_single_cell(self):
        t = argmax_to_target(GazeHeatmap(1, 1, (0.8,)))
        assert (t.gx, t.gy, t.score) == (0.5, 0.5, 0.8)

    def test_peak_position(self):
        values = [0.0] * 16
        values[1 * 4 + 2] = 0.9  # row 1, col 2 on a 4x4 grid
        t = argmax_to_target(GazeHeatmap(4, 4, tuple(values)))
        assert (t.gx, t.gy) == (0.625, 0.375)

    def test_uniform_ties_to_first_cell(self):
        t = argmax_to_target(GazeHeatmap(3, 2, (0.5,) * 6))
        assert (t.gx, t.gy) == pytest.approx((0.5 / 3, 0.25))

    def test_score_clamped(self):
        t = argmax_to_target(GazeHeatmap(1, 1, (7.5,)))
        assert t.score == 1.0

    def test_empty_grid_rejected(self):
        with pytest.raises(DimensionError):
            GazeHeatmap(0, 4, ())

    def test_agrees_with_exhaustive_scan(self):
        rng = random.Random(11)
        for _ in range(300):
            w, h = rng.randint(1, 12), rng.randint(1, 12)
            values = tuple(rng.random() for _ in range(w * h))
            t = argmax_to_target(GazeHeatmap(w, h, values))
            best = max(range(w * h), key=lambda i: (values[i], -i))
            row, col = divmod(best, w)
            assert t.gx == (col + 0.5) / w
            assert t.gy == (row + 0.5) / h


class TestNormalize:
    def test_midpoint(self):
        assert normalize_pixel_gaze(640, 360, 1280, 720) == (0.5, 0.5)

    def test_corner(self):
        assert normalize_pixel_gaze(1280, 720, 1280, 720) == (1.0, 1.0)

    def test_clamp_negative(self):
        gx, gy = normalize_pixel_gaze(-5, 10, 1280, 720)
        assert gx == 0.0
        assert gy == pytest.approx(10 / 720)

    def test_bad_dims(self):
        with pytest.raises(DimensionError):
            normalize_pixel_gaze(1, 1, 0, 720)


class TestAccumulate:
    def test_empty(self):
        hm = accumulate_heatmap([], 4, 4)
        assert hm.total() == 0
        assert all(c == 0 for c in hm.counts)

    def test_center_sample_on_2x2(self):
        hm = accumulate_heatmap([GazeTarget(0.5, 0.5, 1.0)], 2, 2)
        assert hm.counts == [0, 0, 0, 1]  # bin (1, 1)

    def test_edge_sample_clamped_into_grid(self):
        hm = accumulate_heatmap([GazeTarget(1.0, 1.0, 1.0)], 4, 4)
        assert hm.counts[4 * 4 - 1] == 1

    def test_conservation_random(self):
        rng = random.Random(5)
        samples = [GazeTarget(rng.random(), rng.random(), 1.0)
                   for _ in range(1000)]
        hm = accumulate_heatmap(samples, 32, 18)
        assert hm.total() == 1000

    def test_order_independence(self):
        rng = random.Random(6)
        samples = [GazeTarget(rng.random(), rng.random(), 1.0)
                   for _ in range(200)]
        a = accumulate_heatmap(samples, 8, 8)
        shuffled = samples[:]
        rng.shuffle(shuffled)
        b = accumulate_heatmap(shuffled, 8, 8)
        assert a.counts == b.counts

    def test_merge_matches_joint_accumulation(self):
        rng = random.Random(8)
        samples = [GazeTarget(rng.random(), rng.random(), 1.0)
                   for _ in range(300)]
        joint = accumulate_heatmap(samples, 8, 8, window=(0, 300))
        a = accumulate_heatmap(samples[:120], 8, 8, window=(0, 120))
        b = accumulate_heatmap(samples[120:], 8, 8, window=(120, 300))
        merged = merge_heatmaps(a, b)
        assert merged.counts == joint.counts
        assert merged.window == (0, 300)
        # commutative
        assert merge_heatmaps(b, a).counts == merged.counts


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1, allow_nan=False),
                          st.floats(0, 1, allow_nan=False)), max_size=60),
       st.integers(1, 24), st.integers(1, 24))
def test_accumulate_conservation_property(points, w, h):
    samples = [GazeTarget(gx, gy, 1.0) for gx, gy in points]
    hm = accumulate_heatmap(samples, w, h)
    assert hm.total() == len(samples)
    assert all(c >= 0 for c in hm.counts)


class TestClassifyAttention:
    def test_board_hit(self, layout):
        assert classify_attention(GazeTarget(0.2, 0.1, 1.0), layout) == "board"

    def test_unclassified_corner(self, layout):
        assert classify_attention(GazeTarget(0.99, 0.99, 1.0),
                                  layout) == UNCLASSIFIED

    def test_overlap_first_listed_wins(self):
        layout = ClassroomLayout("x", (
            Region("a", (0.0, 0.0, 0.6, 0.6)),
            Region("b", (0.3, 0.3, 1.0, 1.0)),
        ))
        assert classify_attention(GazeTarget(0.4, 0.4, 1.0), layout) == "a"

    def test_half_open_boundary(self):
        layout = ClassroomLayout("x", (
            Region("left", (0.0, 0.0, 0.5, 1.0)),
            Region("right", (0.5, 0.0, 1.0, 1.0)),
        ))
        assert classify_attention(GazeTarget(0.5, 0.2, 1.0), layout) == "right"

    def test_totality_random(self, layout):
        rng = random.Random(13)
        names = set(layout.region_names()) | {UNCLASSIFIED}
        for _ in range(500):
            region = classify_attention(
                GazeTarget(rng.random(), rng.random(), 1.0), layout)
            assert region in names


class TestDeadZones:
    def _layout(self):
        return ClassroomLayout("x", (
            Region("seating", (0.0, 0.0, 1.0, 1.0)),
        ))

    def test_full_coverage(self):
        hm = AttentionHeatmap(grid_w=4, grid_h=4, counts=[1] * 16)
        report = dead_zone_report(hm, self._layout())
        assert report.cells == ()
        assert report.coverage == 1.0
        assert not report.flagged

    def test_all_zero(self):
        hm = AttentionHeatmap(grid_w=4, grid_h=4)
        report = dead_zone_report(hm, self._layout())
        assert len(report.cells) == 16
        assert report.coverage == 0.0
        assert report.flagged

    def test_half_coverage(self):
        counts = [1 if (i % 4) < 2 else 0 for i in range(16)]
        hm = AttentionHeatmap(grid_w=4, grid_h=4, counts=counts)
        report = dead_zone_report(hm, self._layout(), min_coverage=0.8)
        assert report.coverage == 0.5
        assert report.flagged
        assert set(report.cells) == {(col, row)
                                     for row in range(4) for col in (2, 3)}

    def test_only_seating_cells_count(self):
        layout = ClassroomLayout("x", (
            Region("seating", (0.0, 0.5, 1.0, 1.0)),
        ))
        hm = AttentionHeatmap(grid_w=2, grid_h=2, counts=[0, 0, 1, 1])
        report = dead_zone_report(hm, layout)
        assert report.seating_cells == 2
        assert report.coverage == 1.0

    def test_missing_seating_region(self):
        layout = ClassroomLayout("x", (Region("board", (0.0, 0.0, 1.0, 0.5)),))
        with pytest.raises(LayoutError):
            dead_zone_report(AttentionHeatmap(grid_w=2, grid_h=2), layout)
