"""Model bundle persistence: graph + SEN classes + weights + sample grid."""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph, SENPartition, build_graph, structural_equivalence
from .metrics import decode_grid
from .model import ModelParams, load_model, save_model

GLB_MAGIC = b"GLB1"
DEFAULT_GRID_RES = 8


class BundleError(ValueError):
    """Version mismatch or checksum failure on a bundle file."""


@dataclass
class ModelBundle:
    graph: Graph
    partition: SENPartition
    params: ModelParams
    grid: np.ndarray                      # (res*res, n, 2) precomputed sample layouts
    grid_resolution: int = DEFAULT_GRID_RES
    heatmaps: dict = field(default_factory=dict)  # (metric, res) -> grid

    @classmethod
    def build(cls, graph: Graph, params: ModelParams,
              grid_resolution: int = DEFAULT_GRID_RES) -> "ModelBundle":
        part = structural_equivalence(graph)
        layouts = decode_grid(graph, params, grid_resolution)
        grid = np.stack([l.positions for l in layouts])
        return cls(graph=graph, partition=part, params=params, grid=grid,
                   grid_resolution=grid_resolution)


def save_bundle(b: ModelBundle, path) -> None:
    model_buf = io.BytesIO()
    save_model(b.params, model_buf)
    model_blob = model_buf.getvalue()
    header = {
        "format": "GLB1",
        "version": 1,
        "graph": {
            "n": b.graph.n,
            "edges": [list(e) for e in b.graph.edges],
            "labels": list(b.graph.labels) if b.graph.labels is not None else None,
        },
        "sen_classes": [list(c) for c in b.partition.classes],
        "grid_resolution": b.grid_resolution,
        "grid_shape": list(b.grid.shape),
        "model_bytes": len(model_blob),
    }
    blob = json.dumps(header).encode("utf-8")
    body = io.BytesIO()
    body.write(GLB_MAGIC)
    body.write(struct.pack("<I", len(blob)))
    body.write(blob)
    body.write(model_blob)
    body.write(b.grid.astype("<f4").tobytes())
    payload = body.getvalue()
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as fh:
        fh.write(payload)
        fh.write(digest)


def load_bundle(path) -> ModelBundle:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 40:
        raise BundleError("bundle file truncated")
    payload, digest = data[:-32], data[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise BundleError("bundle checksum mismatch")
    buf = io.BytesIO(payload)
    magic = buf.read(4)
    if magic != GLB_MAGIC:
        raise BundleError(f"bad bundle magic {magic!r}; expected {GLB_MAGIC!r}")
    (hlen,) = struct.unpack("<I", buf.read(4))
    header = json.loads(buf.read(hlen).decode("utf-8"))
    if header.get("version") != 1:
        raise BundleError(f"unsupported bundle version {header.get('version')}")
    graph = build_graph(header["graph"]["n"], header["graph"]["edges"],
                        labels=header["graph"].get("labels"))
    model_blob = buf.read(header["model_bytes"])
    params = load_model(io.BytesIO(model_blob))
    shape = tuple(header["grid_shape"])
    raw = buf.read(int(np.prod(shape)) * 4)
    grid = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
    part = structural_equivalence(graph)
    return ModelBundle(graph=graph, partition=part, params=params, grid=grid,
                       grid_resolution=int(header["grid_resolution"]))
