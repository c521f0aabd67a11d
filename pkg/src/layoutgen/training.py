"""Optimization loop, streaming training, and cross-validation."""

from __future__ import annotations

import csv
import queue
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engines import Layout, TrainingCorpus
from .features import layout_feature
from .graphs import Graph, SENPartition, structural_equivalence
from .model import (
    LossState,
    ModelConfig,
    ModelParams,
    align_inputs,
    decode_batch,
    encode_batch,
    reconstruction_loss,
    save_model,
    total_loss,
    variational_loss,
)
from .transport import FAST_GW, GWConfig, sliced_wasserstein


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 50
    batch_size: int = 100
    seed: int = 0
    shuffle: bool = True
    checkpoint_dir: str | None = None
    checkpoint_every: int = 1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch size must be >= 2 (batch norm)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainHistory:
    epoch: list[int] = field(default_factory=list)
    batch: list[int] = field(default_factory=list)
    reconstruction: list[float] = field(default_factory=list)
    variational: list[float] = field(default_factory=list)
    total: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    epoch_latent_sw: list[float] = field(default_factory=list)
    checkpoints: list[str] = field(default_factory=list)
    skipped_layouts: int = 0

    def record(self, epoch: int, batch: int, lx: float, lz: float, lt: float) -> None:
        self.epoch.append(epoch)
        self.batch.append(batch)
        self.reconstruction.append(lx)
        self.variational.append(lz)
        self.total.append(lt)

    def __len__(self) -> int:
        return len(self.total)

    def epoch_mean_loss(self, epoch: int) -> float:
        vals = [t for e, t in zip(self.epoch, self.total) if e == epoch]
        return float(np.mean(vals)) if vals else float("nan")

    def epoch_mean_reconstruction(self, epoch: int) -> float:
        vals = [t for e, t in zip(self.epoch, self.reconstruction) if e == epoch]
        return float(np.mean(vals)) if vals else float("nan")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "batch", "reconstruction", "variational", "total"])
            for row in zip(self.epoch, self.batch, self.reconstruction,
                           self.variational, self.total):
                w.writerow(row)


class AdamState:
    """First/second moment estimates per parameter, with a shared step counter."""

    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0


def adam_step(named_params, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One standard Adam update over (name, DiffArray) pairs, reading .grad."""
    state.t += 1
    t = state.t
    for name, p in named_params:
        g = p.grad
        if g is None:
            g = np.zeros_like(p.value)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        state.v[name] = beta2 * state.v[name] + (1 - beta2) * (g * g)
        mhat = state.m[name] / (1 - beta1 ** t)
        vhat = state.v[name] / (1 - beta2 ** t)
        p.value = p.value - lr * mhat / (np.sqrt(vhat) + eps)


def _variational_seed(base: int, step: int) -> int:
    return int(np.random.SeedSequence(entropy=base, spawn_key=(step,)).generate_state(1)[0])


def _usable_positions(records: list[Layout]) -> tuple[np.ndarray, int]:
    kept = []
    skipped = 0
    for rec in records:
        spread = rec.positions.max(axis=0) - rec.positions.min(axis=0)
        if not np.all(np.isfinite(rec.positions)) or float(spread.max()) <= 1e-9:
            skipped += 1
            continue
        kept.append(rec.positions)
    if not kept:
        raise ValueError("no usable layouts in corpus")
    return np.stack(kept), skipped


def _train_step(g, part, params, mc, tc, adam, loss_state, positions, step_index):
    feats = layout_feature(positions)
    z = encode_batch(g, feats, params, mode="train")
    recon = decode_batch(g, z, params, mode="train")
    lx = reconstruction_loss(g, part, positions, recon, mc.use_gw,
                             gw_config=FAST_GW, loss_state=loss_state)
    lz = variational_loss(z, seed=_variational_seed(tc.seed, step_index), slices=mc.slices)
    loss = total_loss(lx, lz, mc.beta)
    named = params.named_params()
    for _, p in named:
        p.zero_grad()
    loss.backward()
    adam_step(named, adam, tc.learning_rate, tc.adam_beta1, tc.adam_beta2, tc.adam_eps)
    return float(lx.value), float(lz.value), float(loss.value)


def _latent_sw(g, part, params, positions, cap: int = 500) -> float:
    sub = positions[:cap]
    feats = layout_feature(sub)
    z = encode_batch(g, feats, params, mode="eval").value
    rng = np.random.default_rng(12345)
    ref = rng.uniform(-1, 1, size=(len(sub), 2))
    return sliced_wasserstein(z, ref, slices=64, seed=999)


def train(
    g: Graph,
    corpus: TrainingCorpus,
    mc: ModelConfig,
    tc: TrainConfig,
    params: ModelParams | None = None,
    part: SENPartition | None = None,
    track_latent: bool = True,
) -> tuple[ModelParams, TrainHistory]:
    """Mini-batch training over a fixed corpus, seeded shuffle per epoch."""
    if len(corpus) == 0:
        raise ValueError("corpus is empty")
    positions, skipped = _usable_positions(corpus.records)
    if part is None:
        part = structural_equivalence(g)
    if params is None:
        params = ModelParams.init(mc, g.n)
    history = TrainHistory(skipped_layouts=skipped)
    adam = AdamState()
    loss_state = LossState()
    rng = np.random.default_rng(tc.seed)
    step_index = 0
    count = len(positions)
    for epoch in range(tc.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(count) if tc.shuffle else np.arange(count)
        chunks = [order[i:i + tc.batch_size] for i in range(0, count, tc.batch_size)]
        if len(chunks) > 1 and len(chunks[-1]) < 2:
            chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
            chunks.pop()
        for bi, chunk in enumerate(chunks):
            lx, lz, lt = _train_step(g, part, params, mc, tc, adam, loss_state,
                                     positions[chunk], step_index)
            history.record(epoch, bi, lx, lz, lt)
            step_index += 1
        history.epoch_seconds.append(time.perf_counter() - t0)
        if track_latent:
            history.epoch_latent_sw.append(_latent_sw(g, part, params, positions))
        if tc.checkpoint_dir and (epoch + 1) % tc.checkpoint_every == 0:
            path = str(Path(tc.checkpoint_dir) / f"epoch{epoch + 1:03d}.glm")
            save_model(params, path)
            history.checkpoints.append(path)
    params.quantize()
    return params, history


def train_streaming(
    g: Graph,
    layout_source,
    mc: ModelConfig,
    tc: TrainConfig,
    cap: int | None = None,
    timeout: float | None = None,
    params: ModelParams | None = None,
    part: SENPartition | None = None,
) -> tuple[ModelParams, TrainHistory]:
    """Consume layouts as they arrive and train on each full batch.

    ``layout_source`` is an iterable of Layout, or a queue.Queue; a queue that
    stays empty past ``timeout`` seconds stops training cleanly with the
    parameters learned so far. Batch math is identical to ``train``.
    """
    if part is None:
        part = structural_equivalence(g)
    if params is None:
        params = ModelParams.init(mc, g.n)
    history = TrainHistory()
    adam = AdamState()
    loss_state = LossState()
    buffer: list[np.ndarray] = []
    step_index = 0
    consumed = 0

    def layouts():
        nonlocal consumed
        if isinstance(layout_source, queue.Queue):
            while cap is None or consumed < cap:
                try:
                    item = layout_source.get(timeout=timeout)
                except queue.Empty:
                    return
                if item is None:
                    return
                consumed += 1
                yield item
        else:
            for item in layout_source:
                if cap is not None and consumed >= cap:
                    return
                consumed += 1
                yield item

    for rec in layouts():
        pos = rec.positions if isinstance(rec, Layout) else np.asarray(rec, dtype=np.float64)
        spread = pos.max(axis=0) - pos.min(axis=0)
        if not np.all(np.isfinite(pos)) or float(spread.max()) <= 1e-9:
            history.skipped_layouts += 1
            continue
        buffer.append(pos)
        if len(buffer) == tc.batch_size:
            lx, lz, lt = _train_step(g, part, params, mc, tc, adam, loss_state,
                                     np.stack(buffer), step_index)
            history.record(0, step_index, lx, lz, lt)
            step_index += 1
            buffer.clear()
    if len(buffer) >= 2:
        lx, lz, lt = _train_step(g, part, params, mc, tc, adam, loss_state,
                                 np.stack(buffer), step_index)
        history.record(0, step_index, lx, lz, lt)
    params.quantize()
    return params, history


def eval_reconstruction(
    g: Graph,
    params: ModelParams,
    layouts,
    part: SENPartition | None = None,
    use_gw: bool | None = None,
    batch_size: int = 200,
    gw_config: GWConfig = GWConfig(),
) -> np.ndarray:
    """Per-layout eval-mode reconstruction loss (encode -> decode -> L1)."""
    if part is None:
        part = structural_equivalence(g)
    if use_gw is None:
        use_gw = params.config.use_gw
    records = getattr(layouts, "records", layouts)
    positions = np.stack([r.positions if isinstance(r, Layout) else np.asarray(r)
                          for r in records])
    out = np.empty(len(positions))
    for lo in range(0, len(positions), batch_size):
        chunk = positions[lo:lo + batch_size]
        feats = layout_feature(chunk)
        z = encode_batch(g, feats, params, mode="eval").value
        recon = decode_batch(g, z, params, mode="eval").value
        targets = align_inputs(g, part, chunk, recon, use_gw, gw_config)
        rec_feats = []
        for i in range(len(chunk)):
            spread = recon[i].max(axis=0) - recon[i].min(axis=0)
            if float(spread.max()) <= 1e-9:
                rec_feats.append(None)
            else:
                rec_feats.append(layout_feature(recon[i]))
        for i in range(len(chunk)):
            if rec_feats[i] is None:
                out[lo + i] = 10.0
            else:
                out[lo + i] = float(np.mean(np.abs(targets[i] - rec_feats[i])))
    return out


def assign_folds(count: int, k: int, seed: int) -> np.ndarray:
    """Seeded shuffle then contiguous blocks; returns fold id per record."""
    if count % k != 0:
        raise ValueError(f"corpus size {count} not divisible by k={k}")
    order = np.random.default_rng(seed).permutation(count)
    folds = np.empty(count, dtype=np.int64)
    block = count // k
    for f in range(k):
        folds[order[f * block:(f + 1) * block]] = f
    return folds


def cross_validate(
    g: Graph,
    corpus: TrainingCorpus,
    mc: ModelConfig,
    tc: TrainConfig,
    k: int = 5,
    repeats: int = 1,
) -> np.ndarray:
    """k-fold cross-validation, repeated with fresh fold seeds and fresh
    weight initializations; returns mean test losses of shape (repeats, k)."""
    part = structural_equivalence(g)
    results = np.empty((repeats, k))
    for r in range(repeats):
        folds = assign_folds(len(corpus), k, seed=tc.seed + 7919 * r)
        corpus.folds = folds
        for f in range(k):
            train_recs = [rec for rec, fl in zip(corpus.records, folds) if fl != f]
            test_recs = [rec for rec, fl in zip(corpus.records, folds) if fl == f]
            sub = TrainingCorpus(graph_id=corpus.graph_id, records=train_recs)
            mc_rf = ModelConfig(gnn=mc.gnn, use_gw=mc.use_gw, layers=mc.layers,
                                hidden=mc.hidden, latent_dim=mc.latent_dim,
                                beta=mc.beta, slices=mc.slices,
                                seed=mc.seed + 1000 * r + f)
            params, _ = train(g, sub, mc_rf, tc, part=part, track_latent=False)
            losses = eval_reconstruction(g, params, test_recs, part=part)
            results[r, f] = float(losses.mean())
    return results
