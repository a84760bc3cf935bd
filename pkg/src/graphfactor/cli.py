"""Command-line front end.

Subcommands mirror the pipeline stages (build-knn, decompose, embed,
evaluate, interpret, reconstruct) plus the orchestrated `run` and the
parameter `sweep`. Exit codes: 0 success, 1 usage error, 2 data error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .cpals import AlsConfig, decompose, load_model, save_model
from .dataio import (
    load_edge_list,
    load_embeddings,
    load_features,
    load_labels,
    save_embeddings,
    save_matrix,
)
from .embedding import EMBEDDING_SOURCES, extract_embeddings, prune_dimensions
from .errors import DataError, NumericalError, PipelineError
from .evaluate import evaluate
from .interpret import pruning_report, view_weights, write_weights_csv
from .knn import build_knn_view, load_directed_edge_list, save_knn_edge_list
from .pipeline import PipelineConfig, run_pipeline, sweep
from .tensor import reconstruct_view, stack_views

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; we reserve that for
    data errors, so remap usage failures to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _cmd_build_knn(args) -> int:
    features = load_features(args.features)
    view = build_knn_view(features, args.k)
    save_knn_edge_list(view, args.out)
    deficient = len(view.deficient_nodes())
    print(
        f"wrote {args.out}: {view.directed_edge_count} directed edges "
        f"({view.num_nodes} nodes, k={args.k}, {deficient} nodes below k)"
    )
    return EXIT_OK


def _load_two_views(adj_path, knn_path):
    graph = load_edge_list(adj_path)
    z = None
    num_nodes = graph.num_nodes
    if knn_path is not None:
        z = load_directed_edge_list(knn_path)
        num_nodes = max(num_nodes, z.shape[0])
        if z.shape[0] != num_nodes:
            z.resize((num_nodes, num_nodes))
    graph = dataclasses.replace(graph, num_nodes=num_nodes)
    return stack_views(graph, z)


def _cmd_decompose(args) -> int:
    tensor = _load_two_views(args.adj, args.knn)
    config = AlsConfig(
        rank=args.rank,
        max_iters=args.max_iters,
        tol=args.tol,
        seed=args.seed,
        init=args.init,
    )
    model = decompose(tensor, config)
    save_model(model, args.out, config)
    status = "converged" if model.converged else "did not converge"
    print(
        f"wrote {args.out}: rank {model.rank}, fit {model.fit_history[-1]:.6f} "
        f"after {model.iterations} iterations ({status})"
    )
    return EXIT_OK


def _cmd_embed(args) -> int:
    model = load_model(args.model)
    emb = extract_embeddings(model, args.source)
    removed: list = []
    if args.prune_threshold is not None:
        emb, removed = prune_dimensions(emb, model, args.prune_threshold)
    save_embeddings(emb, args.out)
    note = f", pruned dimensions {removed}" if removed else ""
    print(f"wrote {args.out}: {emb.num_nodes} nodes x {emb.dim} dims{note}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    emb = load_embeddings(args.embeddings)
    labels = load_labels(args.labels, num_nodes=emb.num_nodes)
    report = evaluate(
        emb,
        labels,
        train_fraction=args.train_fraction,
        repeats=args.repeats,
        seed=args.seed,
        l2_strength=args.l2,
    )
    Path(args.out).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(
        f"wrote {args.out}: micro-F1 {report.micro_f1_mean:.4f} "
        f"macro-F1 {report.macro_f1_mean:.4f} "
        f"({args.repeats} repeats at fraction {args.train_fraction})"
    )
    return EXIT_OK


def _cmd_interpret(args) -> int:
    model = load_model(args.model)
    table = view_weights(model, threshold=args.threshold)
    write_weights_csv(table, args.out)
    print(f"wrote {args.out}: {table.num_dims} dimensions x {table.num_views} views")
    if not args.prune_eval:
        return EXIT_OK
    missing = [
        flag
        for flag, value in (
            ("--threshold", args.threshold),
            ("--embeddings", args.embeddings),
            ("--labels", args.labels),
            ("--report-out", args.report_out),
        )
        if value is None
    ]
    if missing:
        return _usage_error(f"--prune-eval requires {', '.join(missing)}")
    emb = load_embeddings(args.embeddings)
    labels = load_labels(args.labels, num_nodes=emb.num_nodes)
    report = pruning_report(
        model,
        emb,
        labels,
        args.threshold,
        eval_config={
            "train_fraction": args.train_fraction,
            "repeats": args.repeats,
            "seed": args.seed,
            "l2_strength": args.l2,
        },
    )
    Path(args.report_out).write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"wrote {args.report_out}: removed {len(report['removed_dimensions'])} "
        f"dimensions, micro-F1 {report['micro_f1_before']:.4f} -> "
        f"{report['micro_f1_after']:.4f}"
    )
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    model = load_model(args.model)
    matrix = reconstruct_view(model, args.view)
    save_matrix(matrix, args.out)
    print(f"wrote {args.out}: view {args.view} as {matrix.shape[0]}x{matrix.shape[1]}")
    return EXIT_OK


def _pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        edges=args.edges,
        features=args.features,
        labels=args.labels,
        k=args.k,
        rank=args.rank,
        seed=args.seed,
        tol=args.tol,
        max_iters=args.max_iters,
        train_fractions=tuple(args.train_fractions),
        repeats=args.repeats,
        l2_strength=args.l2,
        prune_threshold=args.prune_threshold,
        embedding_source=args.source,
        init=args.init,
        use_knn_view=not args.no_knn_view,
    )


def _cmd_run(args) -> int:
    config = _pipeline_config(args)
    run_dir = run_pipeline(config, args.out)
    print(f"run complete: {run_dir}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _pipeline_config(args)
    result = sweep(config, args.param, args.values, run_root=args.run_root)
    Path(args.out).write_text(result.to_csv(), encoding="utf-8")
    print(f"wrote {args.out}: {len(result.rows)} values of {args.param}")
    return EXIT_OK


def _add_dataset_args(parser, labels_required: bool) -> None:
    parser.add_argument("--edges", required=True, help="undirected edge list file")
    parser.add_argument("--features", required=True, help="node feature file")
    parser.add_argument(
        "--labels",
        required=labels_required,
        default=None,
        help="node label file (evaluation aborts without it)",
    )
    parser.add_argument("--k", type=int, required=True, help="neighbors per node")
    parser.add_argument("--rank", type=int, required=True, help="decomposition rank d")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tol", type=float, default=1e-6)
    parser.add_argument("--max-iters", type=int, default=100)
    parser.add_argument(
        "--train-fractions", type=float, nargs="+", default=[0.5], metavar="F"
    )
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--l2", type=float, default=1.0, help="inverse L2 strength")
    parser.add_argument("--prune-threshold", type=float, default=None)
    parser.add_argument("--source", choices=EMBEDDING_SOURCES, default="A")
    parser.add_argument("--init", choices=("uniform", "normal"), default="uniform")
    parser.add_argument(
        "--no-knn-view",
        action="store_true",
        help="drop the feature-similarity view (adjacency-only ablation)",
    )


def build_parser() -> _Parser:
    parser = _Parser(
        prog="graphfactor",
        description=(
            "Node embeddings from a two-view graph tensor: build a "
            "feature-similarity view, factorize it jointly with the "
            "adjacency view, then evaluate and interpret the embeddings."
        ),
    )
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("build-knn", help="nearest-neighbor view from features")
    p.add_argument("--features", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_build_knn)

    p = sub.add_parser("decompose", help="factorize the stacked view tensor")
    p.add_argument("--adj", required=True, help="undirected edge list")
    p.add_argument("--knn", default=None, help="directed edge list (omit for 1 view)")
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--init", choices=("uniform", "normal"), default="uniform")
    p.add_argument("--out", required=True, help="model output directory")
    p.set_defaults(handler=_cmd_decompose)

    p = sub.add_parser("embed", help="node embeddings from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--source", choices=EMBEDDING_SOURCES, default="A")
    p.add_argument("--prune-threshold", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_embed)

    p = sub.add_parser("evaluate", help="classification quality of embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("interpret", help="view weights and pruning analysis")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", required=True, help="weights CSV path")
    p.add_argument("--prune-eval", action="store_true")
    p.add_argument("--embeddings", default=None)
    p.add_argument("--labels", default=None)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--report-out", default=None)
    p.set_defaults(handler=_cmd_interpret)

    p = sub.add_parser("reconstruct", help="dense view matrix from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--view", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_reconstruct)

    p = sub.add_parser("run", help="full pipeline into a run directory")
    _add_dataset_args(p, labels_required=False)
    p.add_argument("--out", default=None, help="run directory (default: timestamped)")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("sweep", help="pipeline once per parameter value")
    _add_dataset_args(p, labels_required=True)
    p.add_argument("--param", choices=("k", "d"), required=True)
    p.add_argument("--values", type=int, nargs="+", required=True)
    p.add_argument("--run-root", default=None)
    p.add_argument("--out", required=True, help="sensitivity CSV path")
    p.set_defaults(handler=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, NumericalError):
            return EXIT_NUMERICAL
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
