"""Graph representation, ingestion, and structural-equivalence detection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class GraphParseError(ValueError):
    """Raised when a graph file cannot be parsed."""


@dataclass(frozen=True)
class Graph:
    """Immutable undirected simple graph with dense node indices.

    Edges are canonical (u < v), deduplicated, self-loop free.
    ``orig_index`` maps the current indices back to the indices of the graph
    this one was induced from (identity for freshly loaded graphs).
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    adjacency: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...] | None = None
    orig_index: tuple[int, ...] | None = None
    dropped_self_loops: int = field(default=0, compare=False)

    @property
    def m(self) -> int:
        return len(self.edges)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adjacency[v]

    def edge_array(self) -> np.ndarray:
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array(self.edges, dtype=np.int64)

    def adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a


@dataclass(frozen=True)
class SENPartition:
    """Partition of nodes into structural-equivalence classes.

    ``nontrivial_count`` is the total number of nodes living in classes of
    size >= 2 (nodes that are interchangeable with at least one other node).
    """

    class_of: tuple[int, ...]
    classes: tuple[tuple[int, ...], ...]
    nontrivial_count: int

    def nontrivial_classes(self) -> list[tuple[int, ...]]:
        return [c for c in self.classes if len(c) >= 2]


def build_graph(n: int, edge_pairs, labels=None, orig_index=None) -> Graph:
    """Canonicalize raw edge pairs into a Graph.

    Reversed duplicates are collapsed, self-loops dropped (counted).
    """
    if n <= 0:
        raise GraphParseError("empty graph")
    seen: set[tuple[int, int]] = set()
    dropped = 0
    for u, v in edge_pairs:
        u, v = int(u), int(v)
        if u < 0 or v < 0 or u >= n or v >= n:
            raise GraphParseError(f"edge ({u}, {v}) out of range for n={n}")
        if u == v:
            dropped += 1
            continue
        seen.add((min(u, v), max(u, v)))
    edges = tuple(sorted(seen))
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    adjacency = tuple(tuple(sorted(a)) for a in adj)
    return Graph(
        n=n,
        edges=edges,
        adjacency=adjacency,
        labels=tuple(labels) if labels is not None else None,
        orig_index=tuple(orig_index) if orig_index is not None else None,
        dropped_self_loops=dropped,
    )


def _parse_edge_list(text: str) -> Graph:
    pairs = []
    max_idx = -1
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) < 2:
            raise GraphParseError(f"line {lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise GraphParseError(f"line {lineno}: non-integer node id in {raw!r}") from exc
        if u < 0 or v < 0:
            raise GraphParseError(f"line {lineno}: negative node id in {raw!r}")
        pairs.append((u, v))
        max_idx = max(max_idx, u, v)
    if max_idx < 0:
        raise GraphParseError("empty graph")
    return build_graph(max_idx + 1, pairs)


def _parse_matrix_market(text: str) -> Graph:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise GraphParseError("line 1: missing MatrixMarket header")
    header = lines[0].lower().split()
    # coordinate pattern/real, general/symmetric only
    if "coordinate" not in header:
        raise GraphParseError("line 1: only coordinate format supported")
    body = [(i, ln) for i, ln in enumerate(lines[1:], start=2) if ln.strip() and not ln.startswith("%")]
    if not body:
        raise GraphParseError("missing size line")
    size_lineno, size_line = body[0]
    try:
        rows, cols, _nnz = (int(x) for x in size_line.split()[:3])
    except ValueError as exc:
        raise GraphParseError(f"line {size_lineno}: bad size line {size_line!r}") from exc
    n = max(rows, cols)
    pairs = []
    for lineno, ln in body[1:]:
        parts = ln.split()
        try:
            u, v = int(parts[0]) - 1, int(parts[1]) - 1
        except (ValueError, IndexError) as exc:
            raise GraphParseError(f"line {lineno}: bad entry {ln!r}") from exc
        pairs.append((u, v))
    return build_graph(n, pairs)


def _parse_json_graph(text: str) -> Graph:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"line {exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict) or "nodes" not in obj or "edges" not in obj:
        raise GraphParseError('expected {"nodes": int, "edges": [[u,v],...]}')
    return build_graph(int(obj["nodes"]), [(int(e[0]), int(e[1])) for e in obj["edges"]])


_PARSERS = {
    "edge-list": _parse_edge_list,
    "matrix-market": _parse_matrix_market,
    "json": _parse_json_graph,
}


def load_graph(source, fmt: str = "edge-list") -> Graph:
    """Load a graph from a path, text, or binary stream in the given format."""
    if fmt not in _PARSERS:
        raise GraphParseError(f"unknown format {fmt!r}; expected one of {sorted(_PARSERS)}")
    if hasattr(source, "read"):
        data = source.read()
    else:
        with open(source, "rb") as fh:
            data = fh.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return _PARSERS[fmt](data)


def guess_format(path: str) -> str:
    p = str(path).lower()
    if p.endswith(".mtx"):
        return "matrix-market"
    if p.endswith(".json"):
        return "json"
    return "edge-list"


def connected_components(g: Graph) -> list[list[int]]:
    seen = [False] * g.n
    comps = []
    for start in range(g.n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v)
            for u in g.adjacency[v]:
                if not seen[u]:
                    seen[u] = True
                    stack.append(u)
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return len(connected_components(g)) == 1


def largest_component(g: Graph) -> Graph:
    """Induced subgraph of the largest connected component, indices re-densified.

    The original indices are retained in ``orig_index``.
    """
    comps = connected_components(g)
    if len(comps) == 1:
        return g
    best = max(comps, key=len)
    remap = {old: new for new, old in enumerate(best)}
    keep = set(best)
    edges = [(remap[u], remap[v]) for u, v in g.edges if u in keep and v in keep]
    labels = [g.labels[i] for i in best] if g.labels is not None else None
    return build_graph(len(best), edges, labels=labels, orig_index=best)


def _twins(g: Graph, u: int, v: int, neigh: list[set[int]]) -> bool:
    # u == v iff N(u)\{v} = N(v)\{u}: covers both non-adjacent nodes with equal
    # neighbor sets and mutually adjacent groups sharing all other neighbors.
    return (neigh[u] - {v}) == (neigh[v] - {u})


def structural_equivalence(g: Graph) -> SENPartition:
    """Partition nodes into twin classes (interchangeable nodes)."""
    neigh = [set(a) for a in g.adjacency]
    parent = list(range(g.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    # Group by (degree) first to cut the pairwise comparisons.
    by_deg: dict[int, list[int]] = {}
    for v in range(g.n):
        by_deg.setdefault(len(neigh[v]), []).append(v)
    for group in by_deg.values():
        for i, u in enumerate(group):
            for v in group[i + 1:]:
                if find(u) != find(v) and _twins(g, u, v, neigh):
                    parent[find(u)] = find(v)

    roots: dict[int, list[int]] = {}
    for v in range(g.n):
        roots.setdefault(find(v), []).append(v)
    classes = tuple(tuple(sorted(c)) for c in sorted(roots.values()))
    class_of = [0] * g.n
    for cid, members in enumerate(classes):
        for v in members:
            class_of[v] = cid
    nontrivial = sum(len(c) for c in classes if len(c) >= 2)
    return SENPartition(class_of=tuple(class_of), classes=classes, nontrivial_count=nontrivial)


def one_hot_features(g: Graph) -> np.ndarray:
    """n x n identity: one-hot identity feature per node."""
    return np.eye(g.n, dtype=np.float64)
