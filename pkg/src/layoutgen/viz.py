"""Matplotlib rendering of layouts, sample grids, and metric heatmaps."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .graphs import Graph, SENPartition  # noqa: E402

_PALETTE = plt.get_cmap("tab10")


def sen_colors(part: SENPartition) -> list:
    """One color per nontrivial class (largest class first), gray singletons."""
    ordered = sorted(part.nontrivial_classes(), key=len, reverse=True)
    class_color = {}
    for i, members in enumerate(ordered):
        class_color[members] = _PALETTE(i % 10)
    colors = []
    for v in range(len(part.class_of)):
        members = part.classes[part.class_of[v]]
        colors.append(class_color.get(members, (0.6, 0.6, 0.6, 1.0)))
    return colors


def draw_layout(ax, g: Graph, positions: np.ndarray, part: SENPartition | None = None,
                node_size: float = 12.0) -> None:
    pos = np.asarray(positions)
    for u, v in g.edges:
        ax.plot([pos[u, 0], pos[v, 0]], [pos[u, 1], pos[v, 1]],
                color="0.75", linewidth=0.5, zorder=1)
    colors = sen_colors(part) if part is not None else "tab:blue"
    ax.scatter(pos[:, 0], pos[:, 1], s=node_size, c=colors, zorder=2)
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])


def save_layout_figure(g: Graph, positions, path, part=None) -> None:
    fig, ax = plt.subplots(figsize=(4, 4))
    draw_layout(ax, g, positions, part)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_grid_figure(g: Graph, layouts, resolution: int, path, part=None) -> None:
    """Small-multiples rendering of a decoded latent grid."""
    fig, axes = plt.subplots(resolution, resolution,
                             figsize=(1.4 * resolution, 1.4 * resolution))
    for idx, layout in enumerate(layouts):
        ax = axes[idx // resolution, idx % resolution]
        draw_layout(ax, g, layout.positions, part, node_size=3.0)
    fig.tight_layout(pad=0.3)
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_heatmap_figure(grid: np.ndarray, metric: str, path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    im = ax.imshow(grid, extent=(-1, 1, -1, 1), cmap="viridis", origin="upper")
    ax.set_xlabel("latent dim 1")
    ax.set_ylabel("latent dim 2")
    ax.set_title(metric)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_metrics_figure(report_rows: list[dict], path) -> None:
    """Histogram panel per metric across a set of layouts."""
    names = ["crossings", "crosslessness", "shape"]
    fig, axes = plt.subplots(1, len(names), figsize=(4 * len(names), 3))
    for ax, name in zip(axes, names):
        vals = [row[name] for row in report_rows]
        ax.hist(vals, bins=30, color="tab:blue")
        ax.set_title(name)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
