"""HTTP/JSON inference service over a frozen model bundle."""

from __future__ import annotations

import os
import threading

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .bundle import ModelBundle
from .engines import Layout
from .features import layout_feature
from .metrics import METRIC_FNS, decode_grid, latent_grid, metric_heatmap
from .model import decode_batch, encode_batch


def normalize_positions(pos: np.ndarray) -> np.ndarray:
    """Fit positions into [0, 1]^2 preserving aspect ratio."""
    lo = pos.min(axis=0)
    span = pos.max(axis=0) - lo
    scale = float(span.max())
    if scale <= 0.0:
        return np.full_like(pos, 0.5)
    out = (pos - lo) / scale
    return out + (1.0 - (span / scale)) / 2.0


class DecodeRequest(BaseModel):
    z: list[float]


class EncodeRequest(BaseModel):
    positions: list[list[float]]


class _HeatmapJob:
    def __init__(self):
        self.progress = 0.0
        self.grid = None
        self.error = None
        self.cancelled = threading.Event()
        self.thread: threading.Thread | None = None

    @property
    def done(self) -> bool:
        return self.grid is not None or self.error is not None


def _check_z(z: list[float]) -> np.ndarray:
    if len(z) != 2 or not all(np.isfinite(z)):
        raise HTTPException(status_code=400, detail="z must be two finite numbers")
    arr = np.asarray(z, dtype=np.float64)
    if np.any(np.abs(arr) > 1.0):
        clamped = np.clip(arr, -1.0, 1.0).tolist()
        raise HTTPException(status_code=400,
                            detail={"error": "z outside [-1, 1]^2", "clamped": clamped})
    return arr


def create_app(bundle: ModelBundle) -> FastAPI:
    app = FastAPI(title="layoutgen service")
    g = bundle.graph
    params = bundle.params
    jobs: dict[tuple[str, int], _HeatmapJob] = {}
    jobs_lock = threading.Lock()

    def layout_payload(pos: np.ndarray) -> dict:
        return {
            "positions": normalize_positions(pos).tolist(),
            "raw_positions": pos.tolist(),
        }

    @app.get("/graph")
    def graph():
        return {
            "n": g.n,
            "edges": [list(e) for e in g.edges],
            "labels": list(g.labels) if g.labels is not None else None,
            "sen_classes": [list(c) for c in bundle.partition.classes],
            "sen_class_of": list(bundle.partition.class_of),
        }

    @app.post("/decode")
    def decode_endpoint(req: DecodeRequest):
        z = _check_z(req.z)
        pos = decode_batch(g, z.reshape(1, 2), params, mode="eval").value[0]
        return {"z": z.tolist(), **layout_payload(pos)}

    @app.post("/encode")
    def encode_endpoint(req: EncodeRequest):
        pos = np.asarray(req.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape != (g.n, 2):
            raise HTTPException(status_code=400,
                                detail=f"positions must be {g.n} pairs of coordinates")
        spread = pos.max(axis=0) - pos.min(axis=0)
        if float(spread.max()) <= 1e-12:
            raise HTTPException(status_code=400, detail="degenerate layout: all points coincide")
        z = encode_batch(g, layout_feature(pos)[None, ...], params, mode="eval").value[0]
        return {"z": z.tolist()}

    @app.get("/grid")
    def grid_endpoint(res: int = bundle.grid_resolution):
        if res < 2 or res > 64:
            raise HTTPException(status_code=400, detail="res must be in [2, 64]")
        zs = latent_grid(res)
        if res == bundle.grid_resolution:
            layouts = [Layout(p) for p in bundle.grid]
        else:
            layouts = decode_grid(g, params, res)
        return {
            "resolution": res,
            "cells": [{"z": z.tolist(), **layout_payload(l.positions)}
                      for z, l in zip(zs, layouts)],
        }

    @app.get("/metrics")
    def metrics_endpoint(z: str):
        try:
            vals = [float(t) for t in z.split(",")]
        except ValueError:
            raise HTTPException(status_code=400, detail="z must be 'x,y'")
        arr = _check_z(vals)
        pos = decode_batch(g, arr.reshape(1, 2), params, mode="eval").value[0]
        layout = Layout(pos)
        return {"z": arr.tolist(),
                **{name: fn(g, layout) for name, fn in METRIC_FNS.items()}}

    def run_heatmap(metric: str, res: int, job: _HeatmapJob):
        try:
            def progress(done, total):
                if job.cancelled.is_set():
                    raise InterruptedError
                job.progress = done / total
            grid = metric_heatmap(g, params, metric, res, progress=progress)
            job.grid = grid.tolist()
        except InterruptedError:
            job.error = "cancelled"
        except Exception as exc:  # surfaced to the poller
            job.error = str(exc)

    @app.get("/heatmap")
    def heatmap_endpoint(metric: str = "crosslessness", res: int = 16):
        if metric not in METRIC_FNS:
            raise HTTPException(status_code=400,
                                detail=f"metric must be one of {sorted(METRIC_FNS)}")
        if res < 2 or res > 128:
            raise HTTPException(status_code=400, detail="res must be in [2, 128]")
        key = (metric, res)
        cached = bundle.heatmaps.get(key)
        if cached is not None:
            return {"status": "done", "metric": metric, "resolution": res,
                    "grid": np.asarray(cached).tolist()}
        with jobs_lock:
            job = jobs.get(key)
            if job is None or job.error == "cancelled":
                job = _HeatmapJob()
                jobs[key] = job
                job.thread = threading.Thread(target=run_heatmap, args=(metric, res, job),
                                              daemon=True)
                job.thread.start()
        job.thread.join(timeout=2.0)
        if job.grid is not None:
            bundle.heatmaps[key] = job.grid
            return {"status": "done", "metric": metric, "resolution": res, "grid": job.grid}
        if job.error:
            raise HTTPException(status_code=500, detail=job.error)
        return {"status": "pending", "metric": metric, "resolution": res,
                "progress": job.progress}

    @app.delete("/heatmap")
    def heatmap_cancel(metric: str = "crosslessness", res: int = 16):
        with jobs_lock:
            job = jobs.get((metric, res))
            if job is not None and not job.done:
                job.cancelled.set()
                return {"status": "cancelling"}
        return {"status": "idle"}

    return app


def serve(bundle: ModelBundle, host: str = "127.0.0.1", port: int = 8080) -> None:
    import uvicorn

    workers_cap = os.environ.get("LAYOUTGEN_THREADS")
    if workers_cap:
        os.environ.setdefault("OMP_NUM_THREADS", workers_cap)
    uvicorn.run(create_app(bundle), host=host, port=port, log_level="warning")
