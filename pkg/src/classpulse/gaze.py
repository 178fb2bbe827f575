"""Gaze-target normalization, spatial attention heatmaps, and dead zones."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DimensionError, LayoutError
from .model import ClassroomLayout, GazeTarget

UNCLASSIFIED = "unclassified"
DEFAULT_GRID_W = 32
DEFAULT_GRID_H = 18


@dataclass(frozen=True)
class GazeHeatmap:
    """Raw upstream activation grid, row-major, non-negative."""

    width: int
    height: int
    values: tuple[float, ...]

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DimensionError("heatmap grid dimensions must be positive")
        if self.width * self.height != len(self.values):
            raise DimensionError(
                f"grid {self.width}x{self.height} does not match "
                f"{len(self.values)} values"
            )
        if any(v < 0 for v in self.values):
            raise DimensionError("heatmap activations must be non-negative")


@dataclass
class AttentionHeatmap:
    """Accumulated gaze-target counts on a fixed grid over a time window."""

    grid_w: int = DEFAULT_GRID_W
    grid_h: int = DEFAULT_GRID_H
    counts: list[int] = field(default_factory=list)
    window: tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.grid_w <= 0 or self.grid_h <= 0:
            raise DimensionError("grid dimensions must be positive")
        if not self.counts:
            self.counts = [0] * (self.grid_w * self.grid_h)
        elif len(self.counts) != self.grid_w * self.grid_h:
            raise DimensionError("counts length does not match grid")

    def total(self) -> int:
        return sum(self.counts)

    def to_json_dict(self) -> dict:
        return {
            "grid_w": self.grid_w,
            "grid_h": self.grid_h,
            "window": list(self.window),
            "counts": list(self.counts),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "AttentionHeatmap":
        return AttentionHeatmap(
            grid_w=doc["grid_w"],
            grid_h=doc["grid_h"],
            counts=list(doc["counts"]),
            window=tuple(doc.get("window", (0, 0))),
        )


@dataclass(frozen=True)
class AttentionEvent:
    track_id: int
    frame_index: int
    region: str


@dataclass(frozen=True)
class DeadZoneReport:
    """Zero-coverage cells within the seating region."""

    cells: tuple[tuple[int, int], ...]  # (col, row) pairs
    coverage: float
    seating_cells: int
    flagged: bool

    def to_json_dict(self) -> dict:
        return {
            "cells": [list(c) for c in self.cells],
            "coverage": self.coverage,
            "seating_cells": self.seating_cells,
            "flagged": self.flagged,
        }


def argmax_to_target(hm: GazeHeatmap) -> GazeTarget:
    """Cell-center of the maximum activation; ties break at the lowest
    row-major index."""
    best = 0
    for i in range(1, len(hm.values)):
        if hm.values[i] > hm.values[best]:
            best = i
    row, col = divmod(best, hm.width)
    score = min(1.0, max(0.0, hm.values[best]))
    return GazeTarget(
        gx=(col + 0.5) / hm.width,
        gy=(row + 0.5) / hm.height,
        score=score,
    )


def normalize_pixel_gaze(px: float, py: float, w: int, h: int) -> tuple[float, float]:
    """Pixel -> normalized [0,1]^2, clamping slightly out-of-frame targets."""
    if w <= 0 or h <= 0:
        raise DimensionError("frame dimensions must be positive")
    gx = min(1.0, max(0.0, px / w))
    gy = min(1.0, max(0.0, py / h))
    return gx, gy


def _bin_index(g: float, n: int) -> int:
    return min(n - 1, int(g * n))


def accumulate_heatmap(samples: list[GazeTarget],
                       grid_w: int = DEFAULT_GRID_W,
                       grid_h: int = DEFAULT_GRID_H,
                       window: tuple[int, int] = (0, 0)) -> AttentionHeatmap:
    """Each sample increments exactly one bin, so counts sum to len(samples)."""
    hm = AttentionHeatmap(grid_w=grid_w, grid_h=grid_h, window=window)
    for s in samples:
        col = _bin_index(s.gx, grid_w)
        row = _bin_index(s.gy, grid_h)
        hm.counts[row * grid_w + col] += 1
    return hm


def merge_heatmaps(a: AttentionHeatmap, b: AttentionHeatmap) -> AttentionHeatmap:
    """Element-wise sum; commutative and associative over the same grid."""
    if (a.grid_w, a.grid_h) != (b.grid_w, b.grid_h):
        raise DimensionError("cannot merge heatmaps with different grids")
    window = (min(a.window[0], b.window[0]), max(a.window[1], b.window[1]))
    return AttentionHeatmap(
        grid_w=a.grid_w,
        grid_h=a.grid_h,
        counts=[x + y for x, y in zip(a.counts, b.counts)],
        window=window,
    )


def classify_attention(sample: GazeTarget, layout: ClassroomLayout) -> str:
    """Name of the first region containing the sample, else "unclassified"."""
    for region in layout.regions:
        if region.contains(sample.gx, sample.gy):
            return region.name
    return UNCLASSIFIED


def dead_zone_report(hm: AttentionHeatmap, layout: ClassroomLayout,
                     min_coverage: float = 0.8) -> DeadZoneReport:
    """Zero-count cells whose center lies in the seating region.

    Coverage is the fraction of seating cells with any count; the session is
    flagged when coverage < min_coverage.
    """
    seating = layout.find("seating")
    if seating is None:
        raise LayoutError("layout has no seating region")

    dead: list[tuple[int, int]] = []
    total = 0
    covered = 0
    for row in range(hm.grid_h):
        cy = (row + 0.5) / hm.grid_h
        for col in range(hm.grid_w):
            cx = (col + 0.5) / hm.grid_w
            if not seating.contains(cx, cy):
                continue
            total += 1
            if hm.counts[row * hm.grid_w + col] > 0:
                covered += 1
            else:
                dead.append((col, row))
    coverage = covered / total if total else 0.0
    return DeadZoneReport(
        cells=tuple(dead),
        coverage=coverage,
        seating_cells=total,
        flagged=coverage < min_coverage,
    )
