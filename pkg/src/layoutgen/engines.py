"""Force-directed layout engines and random-search corpus generation."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .graphs import Graph, is_connected

ITERATION_CAP = 500
_EPS = 1e-9


class LayoutError(RuntimeError):
    """Raised when a layout run produces non-finite positions."""


@dataclass
class Layout:
    """N x 2 node positions plus provenance (engine, parameters, seed)."""

    positions: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64)
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError(f"positions must be (n, 2), got {self.positions.shape}")

    @property
    def n(self) -> int:
        return self.positions.shape[0]


# Numeric ranges: (low, high, low_open). Booleans listed under "flags".
PARAM_SPECS: dict[str, dict] = {
    "spring": {
        "numeric": {
            "edge_length": (1.0, 100.0, False),
            "repulsion": (1.0, 100.0, False),
            "velocity_decay": (0.1, 0.7, False),
        },
        "flags": [],
    },
    "linlog-gravity": {
        "numeric": {
            "gravity": (1.0, 10.0, False),
            "scaling": (1.0, 10.0, False),
        },
        "flags": ["linlog", "strong_gravity"],
    },
    "exponent-force": {
        "numeric": {
            "rep_strength": (0.0, 5.0, True),
            "rep_exponent": (0.0, 5.0, False),
            "att_strength": (0.0, 5.0, True),
            "att_exponent": (0.0, 5.0, False),
        },
        "flags": [],
    },
}

ENGINES = tuple(PARAM_SPECS)


@dataclass
class LayoutParams:
    """Engine id plus a parameter record validated against PARAM_SPECS."""

    engine: str
    values: dict

    def __post_init__(self):
        if self.engine not in PARAM_SPECS:
            raise ValueError(f"unknown engine {self.engine!r}; expected one of {ENGINES}")
        spec = PARAM_SPECS[self.engine]
        for name, (lo, hi, lo_open) in spec["numeric"].items():
            if name not in self.values:
                raise ValueError(f"{self.engine}: missing parameter {name!r}")
            v = float(self.values[name])
            ok = (lo < v if lo_open else lo <= v) and v <= hi
            if not ok:
                bra = "(" if lo_open else "["
                raise ValueError(f"{self.engine}: {name}={v} outside {bra}{lo}, {hi}]")
        for name in spec["flags"]:
            if not isinstance(self.values.get(name), bool):
                raise ValueError(f"{self.engine}: {name} must be a boolean")


def sample_params(engine: str, rng: np.random.Generator) -> LayoutParams:
    """Draw each numeric parameter uniformly over its range, each flag uniformly."""
    spec = PARAM_SPECS[engine]
    values = {}
    for name, (lo, hi, lo_open) in spec["numeric"].items():
        u = rng.random()
        # (lo, hi] for low-open intervals, [lo, hi) otherwise
        values[name] = hi - u * (hi - lo) if lo_open else lo + u * (hi - lo)
    for name in spec["flags"]:
        values[name] = bool(rng.integers(0, 2))
    return LayoutParams(engine=engine, values=values)


def _run_forces(g: Graph, seed: int, step, t0: float, velocity_decay: float = 0.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pos = rng.random((g.n, 2))
    if g.n == 1:
        return pos
    vel = np.zeros_like(pos)
    for it in range(ITERATION_CAP):
        temp = t0 * (1.0 - it / ITERATION_CAP)
        disp = step(pos)
        vel = (vel + disp) * (1.0 - velocity_decay)
        norms = np.sqrt(np.sum(vel * vel, axis=1, keepdims=True))
        capped = vel * np.minimum(1.0, temp / np.maximum(norms, _EPS))
        pos = pos + capped
        if not np.all(np.isfinite(pos)):
            raise LayoutError(f"non-finite positions at iteration {it}")
    return pos


def _pair_geometry(pos: np.ndarray):
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    np.fill_diagonal(dist, 1.0)  # self-pairs are masked out by callers
    unit = diff / np.maximum(dist, _EPS)[..., None]
    return diff, dist, unit


def spring_layout(g: Graph, p: LayoutParams, seed: int) -> Layout:
    """Fruchterman-Reingold-style springs with tunable repulsion and damping."""
    if p.engine != "spring":
        raise ValueError(f"expected spring params, got {p.engine!r}")
    k = float(p.values["edge_length"])
    rep = float(p.values["repulsion"])
    decay = float(p.values["velocity_decay"])
    eu, ev = _edge_index(g)

    def step(pos):
        _, dist, unit = _pair_geometry(pos)
        mag = rep * (k * k) / np.maximum(dist, _EPS)
        np.fill_diagonal(mag, 0.0)
        disp = np.sum(unit * mag[..., None], axis=1)
        if len(eu):
            d = dist[eu, ev]
            pull = (d * d / k)[:, None] * unit[eu, ev]
            np.add.at(disp, eu, -pull)
            np.add.at(disp, ev, pull)
        return disp

    pos = _run_forces(g, seed, step, t0=k, velocity_decay=decay)
    return Layout(pos, provenance={"engine": p.engine, "params": dict(p.values), "seed": int(seed)})


def linlog_gravity_layout(g: Graph, p: LayoutParams, seed: int) -> Layout:
    """Degree-weighted repulsion with linear or log attraction and gravity."""
    if p.engine != "linlog-gravity":
        raise ValueError(f"expected linlog-gravity params, got {p.engine!r}")
    if not is_connected(g):
        raise ValueError("linlog-gravity requires a connected graph")
    grav = float(p.values["gravity"])
    scaling = float(p.values["scaling"])
    linlog = bool(p.values["linlog"])
    strong = bool(p.values["strong_gravity"])
    mass = g.degrees().astype(np.float64) + 1.0
    mm = mass[:, None] * mass[None, :]
    eu, ev = _edge_index(g)

    def step(pos):
        _, dist, unit = _pair_geometry(pos)
        mag = scaling * mm / np.maximum(dist, _EPS)
        np.fill_diagonal(mag, 0.0)
        disp = np.sum(unit * mag[..., None], axis=1)
        if len(eu):
            d = dist[eu, ev]
            amag = np.log1p(d) if linlog else d
            pull = amag[:, None] * unit[eu, ev]
            np.add.at(disp, eu, -pull)
            np.add.at(disp, ev, pull)
        center = pos.mean(axis=0)
        to_c = center[None, :] - pos
        dc = np.sqrt(np.sum(to_c * to_c, axis=1))
        gmag = grav * mass if strong else grav * mass / np.maximum(dc, 1.0)
        disp = disp + to_c / np.maximum(dc, _EPS)[:, None] * gmag[:, None]
        return disp

    pos = _run_forces(g, seed, step, t0=1.0 + np.sqrt(g.n) / 4.0)
    return Layout(pos, provenance={"engine": p.engine, "params": dict(p.values), "seed": int(seed)})


def exponent_force_layout(g: Graph, p: LayoutParams, seed: int) -> Layout:
    """Power-law forces: repulsion C * d^-p, edge attraction mu * d^mu_p."""
    if p.engine != "exponent-force":
        raise ValueError(f"expected exponent-force params, got {p.engine!r}")
    c = float(p.values["rep_strength"])
    pexp = float(p.values["rep_exponent"])
    mu = float(p.values["att_strength"])
    mu_p = float(p.values["att_exponent"])
    eu, ev = _edge_index(g)

    def step(pos):
        _, dist, unit = _pair_geometry(pos)
        mag = c * np.maximum(dist, _EPS) ** (-pexp)
        np.fill_diagonal(mag, 0.0)
        disp = np.sum(unit * mag[..., None], axis=1)
        if len(eu):
            d = dist[eu, ev]
            amag = mu * np.maximum(d, _EPS) ** mu_p
            pull = amag[:, None] * unit[eu, ev]
            np.add.at(disp, eu, -pull)
            np.add.at(disp, ev, pull)
        return disp

    pos = _run_forces(g, seed, step, t0=1.0)
    return Layout(pos, provenance={"engine": p.engine, "params": dict(p.values), "seed": int(seed)})


_ENGINE_FNS = {
    "spring": spring_layout,
    "linlog-gravity": linlog_gravity_layout,
    "exponent-force": exponent_force_layout,
}


def run_engine(g: Graph, p: LayoutParams, seed: int) -> Layout:
    return _ENGINE_FNS[p.engine](g, p, seed)


def _edge_index(g: Graph):
    e = g.edge_array()
    return e[:, 0], e[:, 1]


def graph_key(g: Graph) -> str:
    h = hashlib.sha256(repr((g.n, g.edges)).encode()).hexdigest()[:16]
    return f"n{g.n}-m{g.m}-{h}"


@dataclass
class TrainingCorpus:
    """A collection of layouts of one graph, with optional fold assignments."""

    graph_id: str
    records: list[Layout]
    folds: np.ndarray | None = None
    failures: int = 0

    def __len__(self) -> int:
        return len(self.records)


def _is_degenerate(positions: np.ndarray) -> bool:
    if not np.all(np.isfinite(positions)):
        return True
    spread = positions.max(axis=0) - positions.min(axis=0)
    return float(np.max(spread)) <= 1e-9


def _record_seed(master: int, index: int, attempt: int, salt: int) -> int:
    ss = np.random.SeedSequence(entropy=master, spawn_key=(index, attempt, salt))
    return int(ss.generate_state(1)[0])


def generate_corpus(g: Graph, count: int, engines=ENGINES, seed: int = 0, sink=None) -> TrainingCorpus:
    """Produce ``count`` layouts, an equal share per engine, via random search.

    Each record is streamed to ``sink`` (a callable) as soon as it is produced,
    so training can consume layouts while generation is still running.
    Degenerate or non-finite results are resampled with the next seed.
    """
    engines = tuple(engines)
    if count % max(len(engines), 1) != 0:
        raise ValueError(f"count={count} not divisible by {len(engines)} engines")
    share = count // len(engines) if engines else 0
    records: list[Layout] = []
    failures = 0
    index = 0
    for engine in engines:
        for _ in range(share):
            layout = None
            for attempt in range(25):
                prng = np.random.default_rng(_record_seed(seed, index, attempt, 0))
                params = sample_params(engine, prng)
                lseed = _record_seed(seed, index, attempt, 1)
                try:
                    cand = run_engine(g, params, lseed)
                except LayoutError:
                    failures += 1
                    continue
                if _is_degenerate(cand.positions):
                    failures += 1
                    continue
                layout = cand
                break
            if layout is None:
                raise LayoutError(f"engine {engine} failed 25 consecutive samples")
            records.append(layout)
            if sink is not None:
                sink(layout)
            index += 1
    return TrainingCorpus(graph_id=graph_key(g), records=records, failures=failures)


# ---------------------------------------------------------------------------
# Corpus persistence: JSONL (one record per line) and LGC1 binary.

LGC_MAGIC = b"LGC1"


def write_corpus_jsonl(corpus_or_records, path) -> None:
    records = getattr(corpus_or_records, "records", corpus_or_records)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({
                "engine": rec.provenance.get("engine"),
                "params": rec.provenance.get("params"),
                "seed": rec.provenance.get("seed"),
                "positions": rec.positions.tolist(),
            }) + "\n")


def read_corpus_jsonl(path, graph_id: str = "") -> TrainingCorpus:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            records.append(Layout(
                np.asarray(obj["positions"], dtype=np.float64),
                provenance={"engine": obj.get("engine"), "params": obj.get("params"),
                            "seed": obj.get("seed")},
            ))
    return TrainingCorpus(graph_id=graph_id, records=records)


def write_corpus_lgc1(corpus_or_records, path) -> None:
    records = getattr(corpus_or_records, "records", corpus_or_records)
    with open(path, "wb") as fh:
        fh.write(LGC_MAGIC)
        for rec in records:
            meta = json.dumps({
                "engine": rec.provenance.get("engine"),
                "params": rec.provenance.get("params"),
                "seed": rec.provenance.get("seed"),
                "n": rec.n,
            }).encode("utf-8")
            fh.write(struct.pack("<I", len(meta)))
            fh.write(meta)
            fh.write(rec.positions.astype("<f4").tobytes())


def read_corpus_lgc1(path, graph_id: str = "") -> TrainingCorpus:
    records = []
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != LGC_MAGIC:
            raise ValueError(f"bad corpus magic {magic!r}; expected {LGC_MAGIC!r}")
        while True:
            head = fh.read(4)
            if not head:
                break
            (mlen,) = struct.unpack("<I", head)
            meta = json.loads(fh.read(mlen).decode("utf-8"))
            n = int(meta["n"])
            raw = fh.read(n * 2 * 4)
            if len(raw) != n * 2 * 4:
                raise ValueError("truncated corpus record")
            pos = np.frombuffer(raw, dtype="<f4").reshape(n, 2).astype(np.float64)
            records.append(Layout(pos, provenance={
                "engine": meta.get("engine"), "params": meta.get("params"),
                "seed": meta.get("seed")}))
    return TrainingCorpus(graph_id=graph_id, records=records)


def read_corpus(path, graph_id: str = "") -> TrainingCorpus:
    """Dispatch on the LGC1 magic, falling back to JSONL."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == LGC_MAGIC:
        return read_corpus_lgc1(path, graph_id)
    return read_corpus_jsonl(path, graph_id)
