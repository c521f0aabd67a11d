"""Layout quality metrics: crossings, crosslessness, shape similarity, heatmaps."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy import stats

from .engines import Layout
from .graphs import Graph, build_graph
from .model import ModelParams, decode_batch


def _orient(ax, ay, bx, by, cx, cy) -> int:
    """Sign of the cross product (b - a) x (c - a), exact over rationals."""
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (v > 0) - (v < 0)


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_cross(p, q, r, s) -> bool:
    """Proper or overlapping intersection of open segments pq and rs.

    Inputs are coordinate pairs of exact Fractions. Touching at a single
    shared interior/endpoint point counts; the caller excludes edge pairs
    sharing a graph endpoint.
    """
    o1 = _orient(*p, *q, *r)
    o2 = _orient(*p, *q, *s)
    o3 = _orient(*r, *s, *p)
    o4 = _orient(*r, *s, *q)
    if o1 != o2 and o3 != o4:
        return True
    # collinear contacts: count overlap (one crossing) or an endpoint on the
    # other segment's interior
    if o1 == 0 and _on_segment(*p, *q, *r):
        return True
    if o2 == 0 and _on_segment(*p, *q, *s):
        return True
    if o3 == 0 and _on_segment(*r, *s, *p):
        return True
    if o4 == 0 and _on_segment(*r, *s, *q):
        return True
    return False


def count_crossings(g: Graph, l: Layout) -> int:
    """Number of unordered edge pairs whose segments intersect.

    Pairs sharing a graph endpoint are excluded. Orientation tests are exact
    (floats converted to rationals), so near-degenerate geometry cannot
    miscount. Collinear overlapping segments count as one crossing.
    """
    pos = l.positions
    pts = [(Fraction(float(x)), Fraction(float(y))) for x, y in pos]
    edges = g.edges
    # coarse bounding-box prefilter in floats before the exact test
    ea = np.array([[min(pos[u][0], pos[v][0]), min(pos[u][1], pos[v][1]),
                    max(pos[u][0], pos[v][0]), max(pos[u][1], pos[v][1])]
                   for u, v in edges]) if edges else np.zeros((0, 4))
    count = 0
    m = len(edges)
    for i in range(m):
        u1, v1 = edges[i]
        for j in range(i + 1, m):
            u2, v2 = edges[j]
            if u1 in (u2, v2) or v1 in (u2, v2):
                continue
            if ea[i, 2] < ea[j, 0] or ea[j, 2] < ea[i, 0] \
                    or ea[i, 3] < ea[j, 1] or ea[j, 3] < ea[i, 1]:
                continue
            if _segments_cross(pts[u1], pts[v1], pts[u2], pts[v2]):
                count += 1
    return count


def max_crossings(g: Graph) -> int:
    """Upper bound on crossings: all pairs minus pairs forced to share a node."""
    m = g.m
    deg = g.degrees()
    return m * (m - 1) // 2 - int(np.sum(deg * (deg - 1)) // 2)


def crosslessness(g: Graph, l: Layout) -> float:
    """1 - sqrt(c / c_max); 1 when no crossing is possible at all."""
    cmax = max_crossings(g)
    if cmax <= 0:
        return 1.0
    c = count_crossings(g, l)
    return 1.0 - float(np.sqrt(c / cmax))


def gabriel_graph(l: Layout) -> Graph:
    """Edge (u, v) iff no third point lies strictly inside the disk with the
    segment uv as diameter. Boundary ties keep the edge."""
    pos = np.asarray(l.positions, dtype=np.float64)
    n = len(pos)
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    dup = np.argwhere(np.triu(d2 <= 0.0, k=1))
    if len(dup):
        raise ValueError(f"duplicate points at indices {sorted(set(dup.reshape(-1).tolist()))}")
    edges = []
    for u in range(n):
        # strict inequality excludes; <= keeps boundary ties
        inside = d2[u][:, None] + d2 < d2[u][None, :]  # inside[w, v]
        for v in range(u + 1, n):
            if not np.any(inside[:, v] & (np.arange(n) != u) & (np.arange(n) != v)):
                edges.append((u, v))
    return build_graph(n, edges)


def shape_based_metric(g: Graph, l: Layout) -> float:
    """Mean node-wise Jaccard similarity between the graph's neighborhoods and
    the Gabriel graph's neighborhoods of the layout."""
    shape = gabriel_graph(l)
    total = 0.0
    for v in range(g.n):
        a = set(g.adjacency[v])
        b = set(shape.adjacency[v])
        union = a | b
        total += (len(a & b) / len(union)) if union else 1.0
    return total / g.n


METRIC_FNS = {
    "crossings": lambda g, l: float(count_crossings(g, l)),
    "crosslessness": crosslessness,
    "shape": shape_based_metric,
}


def latent_grid(resolution: int) -> np.ndarray:
    """Cell-center latent codes of a uniform resolution^2 grid over [-1, 1]^2,
    row-major (row = second latent component, top row = +1 side)."""
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    centers = -1.0 + (2.0 * np.arange(resolution) + 1.0) / resolution
    zs = np.empty((resolution * resolution, 2))
    for r in range(resolution):
        for c in range(resolution):
            zs[r * resolution + c] = (centers[c], centers[resolution - 1 - r])
    return zs


def decode_grid(g: Graph, params: ModelParams, resolution: int) -> list[Layout]:
    zs = latent_grid(resolution)
    out = []
    for lo in range(0, len(zs), 256):
        chunk = zs[lo:lo + 256]
        pos = decode_batch(g, chunk, params, mode="eval").value
        for i, z in enumerate(chunk):
            out.append(Layout(pos[i], provenance={"engine": "model",
                                                  "params": {"z": z.tolist()}, "seed": None}))
    return out


def metric_heatmap(g: Graph, params: ModelParams, metric: str, resolution: int,
                   progress=None) -> np.ndarray:
    """Evaluate ``metric`` on the decoded layout at every grid cell center."""
    if metric not in METRIC_FNS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {sorted(METRIC_FNS)}")
    fn = METRIC_FNS[metric]
    layouts = decode_grid(g, params, resolution)
    grid = np.empty((resolution, resolution))
    for idx, layout in enumerate(layouts):
        grid[idx // resolution, idx % resolution] = fn(g, layout)
        if progress is not None:
            progress(idx + 1, len(layouts))
    return grid


def loss_metric_correlation(losses, metrics) -> tuple[float, float]:
    """Pearson r with two-sided p-value between per-layout losses and metrics."""
    losses = np.asarray(losses, dtype=np.float64)
    metrics = np.asarray(metrics, dtype=np.float64)
    if losses.shape != metrics.shape or losses.ndim != 1 or len(losses) < 3:
        raise ValueError("need two equal-length vectors of at least 3 values")
    if np.std(losses) == 0.0 or np.std(metrics) == 0.0:
        raise ValueError("correlation undefined: zero variance input")
    r, p = stats.pearsonr(losses, metrics)
    return float(r), float(p)


def write_heatmap_csv(grid: np.ndarray, path) -> None:
    np.savetxt(path, grid, delimiter=",", fmt="%.10g")


def write_heatmap_pgm(grid: np.ndarray, path) -> None:
    """8-bit grayscale PGM, min-max scaled."""
    lo, hi = float(grid.min()), float(grid.max())
    span = hi - lo if hi > lo else 1.0
    img = np.round((grid - lo) / span * 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
