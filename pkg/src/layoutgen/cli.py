"""Command-line interface tying the pipeline together."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import engines as eng
from .bundle import ModelBundle, load_bundle, save_bundle
from .graphs import guess_format, largest_component, load_graph, structural_equivalence
from .metrics import (
    METRIC_FNS,
    decode_grid,
    latent_grid,
    metric_heatmap,
    write_heatmap_csv,
    write_heatmap_pgm,
)
from .model import ModelConfig, batch_size_for, hidden_width_for, load_model, save_model
from .service import normalize_positions
from .training import TrainConfig, cross_validate, train

MODEL_CHOICES = ("mlp", "gcn", "gin1", "ginmlp")


def _load_graph_arg(path: str):
    g = load_graph(path, guess_format(path))
    return largest_component(g)


def _cmd_gen(args) -> int:
    g = _load_graph_arg(args.graph)
    corpus = eng.generate_corpus(g, args.count, seed=args.seed)
    if args.out.endswith(".lgc"):
        eng.write_corpus_lgc1(corpus, args.out)
    else:
        eng.write_corpus_jsonl(corpus, args.out)
    print(f"wrote {len(corpus)} layouts to {args.out} "
          f"({corpus.failures} resampled failures)")
    return 0


def _model_config(args, n: int) -> ModelConfig:
    hidden = args.hidden or hidden_width_for(n)
    return ModelConfig(gnn=args.model, use_gw=args.gw, hidden=hidden, seed=args.seed,
                       beta=args.beta)


def _train_config(args, n: int) -> TrainConfig:
    batch = args.batch or batch_size_for(n)
    return TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=batch,
                       seed=args.seed, checkpoint_dir=args.checkpoint_dir)


def _cmd_train(args) -> int:
    g = _load_graph_arg(args.graph)
    corpus = eng.read_corpus(args.corpus)
    mc = _model_config(args, g.n)
    tc = _train_config(args, g.n)
    params, history = train(g, corpus, mc, tc)
    if args.out.endswith(".glb"):
        save_bundle(ModelBundle.build(g, params), args.out)
    else:
        save_model(params, args.out)
    if args.history:
        history.to_csv(args.history)
    final = history.epoch_mean_loss(tc.epochs - 1)
    print(f"trained {mc.name} for {tc.epochs} epochs; "
          f"final epoch mean loss {final:.5f}; saved to {args.out}")
    return 0


def _cmd_xval(args) -> int:
    g = _load_graph_arg(args.graph)
    corpus = eng.read_corpus(args.corpus)
    mc = _model_config(args, g.n)
    tc = _train_config(args, g.n)
    results = cross_validate(g, corpus, mc, tc, k=args.k, repeats=args.repeats)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["repeat", "fold", "test_loss"])
            for r in range(results.shape[0]):
                for f in range(results.shape[1]):
                    w.writerow([r, f, f"{results[r, f]:.8f}"])
    print(f"{mc.name}: mean test loss {results.mean():.6f} "
          f"over {args.repeats}x{args.k} folds")
    return 0


def _cmd_metrics(args) -> int:
    from .viz import save_metrics_figure

    g = _load_graph_arg(args.graph)
    corpus = eng.read_corpus(args.layouts)
    rows = []
    for i, rec in enumerate(corpus.records):
        layout = rec
        rows.append({
            "index": i,
            "crossings": int(METRIC_FNS["crossings"](g, layout)),
            "crosslessness": METRIC_FNS["crosslessness"](g, layout),
            "shape": METRIC_FNS["shape"](g, layout),
        })
    with open(args.report, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["index", "crossings", "crosslessness", "shape"])
        w.writeheader()
        w.writerows(rows)
    figure = args.figure or str(Path(args.report).with_suffix(".png"))
    save_metrics_figure(rows, figure)
    print(f"wrote metric report for {len(rows)} layouts to {args.report} "
          f"and figure to {figure}")
    return 0


def _cmd_heatmap(args) -> int:
    from .viz import save_heatmap_figure

    bundle = load_bundle(args.model)
    grid = metric_heatmap(bundle.graph, bundle.params, args.metric, args.res)
    out = Path(args.out)
    write_heatmap_csv(grid, out.with_suffix(".csv"))
    write_heatmap_pgm(grid, out.with_suffix(".pgm"))
    save_heatmap_figure(grid, args.metric, out.with_suffix(".png"))
    print(f"wrote {args.res}x{args.res} {args.metric} heatmap to "
          f"{out.with_suffix('.csv')}, {out.with_suffix('.pgm')}, {out.with_suffix('.png')}")
    return 0


def _cmd_grid(args) -> int:
    bundle = load_bundle(args.model)
    layouts = decode_grid(bundle.graph, bundle.params, args.res)
    zs = latent_grid(args.res)
    cells = [{"z": z.tolist(),
              "positions": normalize_positions(l.positions).tolist()}
             for z, l in zip(zs, layouts)]
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump({"resolution": args.res, "cells": cells}, fh)
    if args.figure:
        from .viz import save_grid_figure

        save_grid_figure(bundle.graph, layouts, args.res, args.figure, bundle.partition)
    print(f"wrote {len(cells)} decoded layouts to {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    bundle = load_bundle(args.model)
    host, _, port = args.addr.partition(":")
    serve(bundle, host=host or "127.0.0.1", port=int(port or 8080))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layoutgen",
                                     description="graph layout latent-space toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a layout corpus by random search")
    p.add_argument("--graph", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen)

    for name, fn in (("train", _cmd_train), ("xval", _cmd_xval)):
        p = sub.add_parser(name)
        p.add_argument("--graph", required=True)
        p.add_argument("--corpus", required=True)
        p.add_argument("--model", choices=MODEL_CHOICES, default="ginmlp")
        p.add_argument("--gw", action="store_true")
        p.add_argument("--epochs", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--lr", type=float, default=0.001)
        p.add_argument("--beta", type=float, default=10.0)
        p.add_argument("--batch", type=int, default=0)
        p.add_argument("--hidden", type=int, default=0)
        p.add_argument("--checkpoint-dir", default=None)
        if name == "train":
            p.add_argument("--out", required=True)
            p.add_argument("--history", default=None)
        else:
            p.add_argument("--k", type=int, default=5)
            p.add_argument("--repeats", type=int, default=1)
            p.add_argument("--out", default=None)
        p.set_defaults(fn=fn)

    p = sub.add_parser("metrics", help="per-layout quality metrics report")
    p.add_argument("--graph", required=True)
    p.add_argument("--layouts", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--figure", default=None)
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("heatmap", help="latent-space metric heatmap")
    p.add_argument("--model", required=True)
    p.add_argument("--metric", choices=sorted(METRIC_FNS), default="crosslessness")
    p.add_argument("--res", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_heatmap)

    p = sub.add_parser("grid", help="decode a grid of latent codes")
    p.add_argument("--model", required=True)
    p.add_argument("--res", type=int, default=8)
    p.add_argument("--out", required=True)
    p.add_argument("--figure", default=None)
    p.set_defaults(fn=_cmd_grid)

    p = sub.add_parser("serve", help="run the HTTP inference service")
    p.add_argument("--model", required=True)
    p.add_argument("--addr", default="127.0.0.1:8080")
    p.set_defaults(fn=_cmd_serve)

    return parser


def cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli())
