"""Command-line entry point: ``graphite <command> [options]``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from graphite import io, serialize
from graphite.graph import GraphError, check_assumptions
from graphite.homophily import homophily_report, improvement_ratio, transformed_homophily_report
from graphite.model import ModelConfig, init_params, save_params
from graphite.training import RATIOS, STANDARD_MODEL, STANDARD_TRAIN, TrainConfig, make_splits, train
from graphite.transform import TransformOptions, TransformedGraph, graphite_transform, nhb_transform, size_report


def _transform_options(args) -> TransformOptions:
    if args.zero_graph_features and args.row_normalize:
        raise GraphError("--zero-graph-features and --row-normalize are mutually exclusive")
    return TransformOptions(
        drop_unused_features=not args.keep_unused,
        zero_graph_node_features=args.zero_graph_features,
        row_normalize_graph_node_features=args.row_normalize,
    )


def _load(args):
    return io.load_dataset(args.input, binarize=args.binarize)


def cmd_transform(args) -> int:
    g = _load(args)
    t = graphite_transform(g, _transform_options(args))
    io.save_transformed(t, args.out)
    print(serialize.dumps(size_report(g, t).as_dict()))
    return 0


def cmd_nhb(args) -> int:
    g = _load(args)
    d = nhb_transform(g, max_nodes=args.max_nodes)
    io.save_dataset(d, args.out)
    report = {"nodes": g.num_nodes, "edges_before": g.num_edges, "edges_after": d.num_edges}
    io.write_json(Path(args.out) / "size_report.json", report)
    print(serialize.dumps(report))
    return 0


def cmd_homophily(args) -> int:
    g = io.load_dataset(args.dataset, binarize=args.binarize)
    before = homophily_report(g, "E")
    after = transformed_homophily_report(graphite_transform(g, _transform_options(args)))
    out = {
        "dataset": Path(args.dataset).name,
        "before": before.as_dict(),
        "after": after.as_dict(),
        "improvement": asdict(improvement_ratio(before, after)),
    }
    if args.nhb:
        out["nhb"] = homophily_report(nhb_transform(g, max_nodes=args.max_nodes), "E-dagger").as_dict()
    for key in ("h_feature", "h_edge", "h_adjusted", "h_and"):
        print(f"{key}\t{serialize.fmt_float(getattr(before, key))}\t{serialize.fmt_float(getattr(after, key))}")
    if args.out:
        io.write_json(args.out, out)
    if args.svg:
        rows = [(k, getattr(before, k), getattr(after, k)) for k in ("h_feature", "h_adjusted", "h_and")]
        Path(args.svg).write_text(io.homophily_svg(rows), encoding="utf-8")
    return 0


def cmd_synth(args) -> int:
    if args.standard:
        p = replace(io.STANDARD_FIXTURE, seed=args.seed)
    else:
        p = io.SynthParams(
            num_nodes=args.nodes, num_classes=args.classes, num_features=args.features,
            p_in=args.p_in, p_out=args.p_out, features_per_class=args.features_per_class,
            feature_noise_prob=args.noise, background_prob=args.background, seed=args.seed,
        )
    g = io.synth_heterophilic(p)
    io.save_dataset(g, args.out)
    a = check_assumptions(g)
    print(serialize.dumps({"nodes": g.num_nodes, "edges": g.num_edges, "features": g.num_features,
                           "heterophilic": a.heterophilic}))
    return 0


def _model_config(args) -> ModelConfig:
    return ModelConfig(w_x=args.wx, w_0=args.w0, tau=args.tau, num_layers=args.layers,
                       hidden_dim=args.hidden, dropout_rate=args.dropout)


def cmd_train(args) -> int:
    g = io.standard_fixture() if args.dataset is None else io.load_dataset(args.dataset, binarize=args.binarize)
    t = TransformedGraph.identity(g) if args.no_transform else graphite_transform(g, _transform_options(args))
    model_cfg = _model_config(args)
    train_cfg = TrainConfig(learning_rate=args.lr, steps=args.steps, seed=args.seed, metric=args.metric)
    splits = make_splits(g, args.ratio, seed=args.seed, replicates=args.splits)
    lines, scores, best = [], [], None
    for split in splits:
        r = train(t, split, model_cfg, train_cfg)
        lines += r.to_lines()
        scores.append(r.best_test)
        if best is None or r.best_val > best.best_val:
            best = r
    summary = {"kind": "aggregate", "metric": args.metric, "mean_best_test": float(np.mean(scores)),
               "std_best_test": float(np.std(scores)), "replicates": len(scores)}
    lines.append(serialize.dumps(summary))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if args.checkpoint:
        save_params(args.checkpoint, best.best_params)
    print(serialize.dumps(summary))
    return 0


def cmd_gradcheck(args) -> int:
    from graphite.gradcheck import check_model_gradients

    g = io.synth_heterophilic(replace(io.GRADCHECK_FIXTURE, seed=args.seed))
    t = graphite_transform(g)
    cfg = ModelConfig(w_x=args.wx, w_0=args.w0, tau=args.tau, num_layers=args.layers,
                      hidden_dim=args.hidden, dropout_rate=args.dropout)
    params = init_params(t.x_star.shape[1], g.num_classes, cfg, seed=args.seed)
    res = check_model_gradients(t, params, cfg, np.arange(g.num_nodes), step=args.step, seed=args.seed)
    ok = res.max_rel_error < args.tol
    print(f"{'PASS' if ok else 'FAIL'} gradcheck: {res.num_checked} values, max relative error "
          f"{res.max_rel_error:.3e} at {res.worst_param}{list(res.worst_index)}")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    from graphite.verify import verify_theorems

    results = verify_theorems(trials=args.trials, seed=args.seed, witness_graphs=args.witness_graphs,
                              mean_cases=args.mean_cases)
    for r in results:
        print(r.line())
        for ex in r.examples:
            print(f"  counterexample: {ex}", file=sys.stderr)
    return 0 if all(r.ok for r in results) else 1


def _add_transform_flags(p) -> None:
    p.add_argument("--binarize", choices=("threshold", "onehot"), help="convert non-binary feature values")
    p.add_argument("--zero-graph-features", action="store_true", help="zero graph-node rows of the new features")
    p.add_argument("--row-normalize", action="store_true", help="row-normalize graph-node rows of the new features")
    p.add_argument("--keep-unused", action="store_true", help="fail instead of dropping unused feature columns")


def _add_model_flags(p, layers=STANDARD_MODEL.num_layers, hidden=STANDARD_MODEL.hidden_dim) -> None:
    p.add_argument("--wx", type=float, default=STANDARD_MODEL.w_x)
    p.add_argument("--w0", type=float, default=STANDARD_MODEL.w_0)
    p.add_argument("--tau", type=float, default=STANDARD_MODEL.tau)
    p.add_argument("--layers", type=int, default=layers)
    p.add_argument("--hidden", type=int, default=hidden)
    p.add_argument("--dropout", type=float, default=STANDARD_MODEL.dropout_rate)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphite", description="feature-node graph transformation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="add feature nodes and write the transformed graph")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_transform_flags(p)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("nhb", help="connect all node pairs sharing a feature")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--binarize", choices=("threshold", "onehot"))
    p.add_argument("--max-nodes", type=int, default=10_000)
    p.set_defaults(func=cmd_nhb)

    p = sub.add_parser("homophily", help="homophily before and after the transformation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--svg", help="bar chart path")
    p.add_argument("--nhb", action="store_true", help="also report the all-pairs baseline")
    p.add_argument("--max-nodes", type=int, default=10_000)
    _add_transform_flags(p)
    p.set_defaults(func=cmd_homophily)

    p = sub.add_parser("synth", help="write a seeded heterophilic synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--standard", action="store_true", help="use the standard fixture parameters")
    d = io.SynthParams()
    p.add_argument("--nodes", type=int, default=d.num_nodes)
    p.add_argument("--classes", type=int, default=d.num_classes)
    p.add_argument("--features", type=int, default=d.num_features)
    p.add_argument("--features-per-class", type=int, default=d.features_per_class)
    p.add_argument("--p-in", type=float, default=d.p_in)
    p.add_argument("--p-out", type=float, default=d.p_out)
    p.add_argument("--noise", type=float, default=d.feature_noise_prob)
    p.add_argument("--background", type=float, default=d.background_prob)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the gated GNN over seeded splits")
    p.add_argument("--dataset", help="dataset directory (default: standard synthetic fixture)")
    p.add_argument("--no-transform", action="store_true", help="train on the original graph")
    p.add_argument("--lr", type=float, default=STANDARD_TRAIN.learning_rate)
    p.add_argument("--steps", type=int, default=STANDARD_TRAIN.steps)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--ratio", choices=sorted(RATIOS), default="48/32/20")
    p.add_argument("--metric", choices=("accuracy", "roc_auc"), default="accuracy")
    p.add_argument("--out", help="JSONL training log")
    p.add_argument("--checkpoint", help="write best-validation parameters here")
    _add_model_flags(p)
    _add_transform_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5)
    _add_model_flags(p, layers=2, hidden=8)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("verify-theorems", help="randomized checks of the homophily guarantees")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--witness-graphs", type=int, default=100)
    p.add_argument("--mean-cases", type=int, default=100_000)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GraphError, ValueError, OSError) as exc:
        print(f"graphite: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
