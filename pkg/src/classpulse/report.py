"""Figure and delimited-file rendering for the CLI report path.

Figures are written only to the user-chosen output directory, never into
the service data directory, so the persisted store stays free of image
bytes (the privacy tripwire scans for container signatures).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .gaze import AttentionHeatmap  # noqa: E402
from .model import ClassroomLayout  # noqa: E402
from .posture import LABEL_ORDER, PostureLabel  # noqa: E402

# One color per posture; Unknown is a neutral gray so it never reads as a
# judgment.
LABEL_COLORS = {
    PostureLabel.UPRIGHT: "#2a9d8f",
    PostureLabel.LEANING_FORWARD: "#457b9d",
    PostureLabel.SLOUCHING: "#e9c46a",
    PostureLabel.SLEEPING: "#e76f51",
    PostureLabel.STANDING: "#8338ec",
    PostureLabel.UNKNOWN: "#9e9e9e",
}


def render_heatmap_png(hm: AttentionHeatmap, layout: ClassroomLayout | None,
                       path: str | Path) -> None:
    grid = np.asarray(hm.counts, dtype=float).reshape(hm.grid_h, hm.grid_w)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    im = ax.imshow(grid, cmap="viridis", origin="upper",
                   extent=(0, 1, 1, 0), aspect="auto")
    fig.colorbar(im, ax=ax, label="gaze targets")
    if layout is not None:
        for region in layout.regions:
            x0, y0, x1, y1 = region.rect
            ax.add_patch(plt.Rectangle((x0, y0), x1 - x0, y1 - y0,
                                       fill=False, edgecolor="white",
                                       linewidth=1.0, linestyle="--"))
            ax.text(x0 + 0.005, y0 + 0.03, region.name, color="white",
                    fontsize=8)
    ax.set_title("Attention heatmap")
    ax.set_xlabel("x (normalized)")
    ax.set_ylabel("y (normalized)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_posture_histogram_png(bins: list[dict], bin_s: float,
                                 path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(9, 4))
    if bins:
        starts = [b["t_start_ms"] / 60000.0 for b in bins]
        width = bin_s / 60.0
        bottom = np.zeros(len(bins))
        for label in LABEL_ORDER:
            counts = np.array([b["counts"].get(label.value, 0) for b in bins],
                              dtype=float)
            ax.bar(starts, counts, width=width * 0.9, bottom=bottom,
                   align="edge", label=label.value,
                   color=LABEL_COLORS[label])
            bottom += counts
    ax.set_xlabel("minute")
    ax.set_ylabel("observations")
    ax.set_title("Posture over the session")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_histogram_csv(bins: list[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t_start_ms"] + [l.value for l in LABEL_ORDER])
        for b in bins:
            writer.writerow([b["t_start_ms"]] +
                            [b["counts"].get(l.value, 0) for l in LABEL_ORDER])


def write_engagement_csv(chunks: list[dict], path: str | Path) -> None:
    """Per-chunk per-track engagement, for spreadsheet digestion."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["chunk_index", "t_start_ms", "track_id", "engagement",
                         "dominant_posture"])
        for chunk in chunks:
            t_start = chunk["chunk_index"] * 60000
            for tr in chunk["tracks"]:
                writer.writerow([chunk["chunk_index"], t_start,
                                 tr["track_id"], tr["engagement"],
                                 tr["dominant_posture"]])
