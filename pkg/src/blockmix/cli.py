"""Command-line front end: stats, fit, generate, eval.

Every command is a pure function of its input files and flags, so
repeating an invocation reproduces its output byte for byte.  Exit
codes: 0 on success, 1 for data errors (unreadable or inconsistent
input files), 2 for usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from blockmix.evaluate import rand_index
from blockmix.generate import GenConfig, sample_sbm
from blockmix.graph import (
    EdgeListError,
    Network,
    density,
    discretize_weights,
    load_edge_list,
    load_labels,
    load_weighted_edge_list,
    to_edge_list_text,
)
from blockmix.mcem import McemConfig, mcem_fit
from blockmix.models import BlockParams, Partition
from blockmix.results import from_json, to_json
from blockmix.switch import SwitchConfig, switch_fit
from blockmix.vem import VemConfig, vem_fit

MODELS = ("bernoulli", "poisson", "dc_poisson")
METHODS = ("vem", "switch", "mcem")


def _add_input_flags(sub: argparse.ArgumentParser):
    sub.add_argument("edgelist", help="edge-list file: 'src dst [value]' lines, '#' comments")
    sub.add_argument("--directed", action="store_true", help="treat edges as directed")
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--count", action="store_true", help="values are integer counts")
    group.add_argument(
        "--bins",
        type=int,
        metavar="N",
        help="input carries [0,1] weights; discretize into N count bins (floor rule, top bin closed)",
    )


def _load_network(args) -> Network:
    text = Path(args.edgelist).read_text(encoding="utf-8")
    if args.bins is not None:
        weights, labels = load_weighted_edge_list(text, directed=args.directed)
        return discretize_weights(
            weights, args.bins, n_nodes=len(labels), directed=args.directed, node_labels=labels
        )
    kind = "count" if args.count else "binary"
    return load_edge_list(text, directed=args.directed, value_kind=kind)


def cmd_stats(args, parser) -> int:
    net = _load_network(args)
    print(f"nodes\t{net.n_nodes}")
    print(f"edges\t{net.n_edges}")
    print(f"density\t{density(net):.3f}")
    return 0


def cmd_fit(args, parser) -> int:
    if args.method == "mcem" and args.model != "bernoulli":
        parser.error("the mcem method supports the bernoulli model only")
    if args.method == "vem" and args.model == "dc_poisson":
        parser.error("the vem method supports the bernoulli and poisson models")
    if args.trace_out and args.method != "mcem":
        parser.error("--trace-out applies to the mcem method only")
    net = _load_network(args)
    if args.K > net.n_nodes:
        parser.error("K cannot exceed the number of nodes")

    if args.method == "vem":
        cfg = VemConfig(K=args.K, restarts=args.restarts or 10, seed=args.seed)
        result = vem_fit(net, cfg, kind=args.model)
    elif args.method == "switch":
        cfg = SwitchConfig(K=args.K, restarts=args.restarts or 20, seed=args.seed, kind=args.model)
        result = switch_fit(net, cfg)
    else:
        cfg = McemConfig(K=args.K, restarts=args.restarts or 10, seed=args.seed)
        result = mcem_fit(net, cfg)

    Path(args.out).write_text(to_json(result), encoding="utf-8")
    if args.trace_out:
        lines = []
        for it, u_hat in enumerate(result.extras.get("u_trace", []), start=1):
            for node, value in zip(result.node_labels, u_hat):
                lines.append(f"{it}\t{node}\t{format(float(value), '.17g')}")
        Path(args.trace_out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _parse_vector(text: str, what: str, parser) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        parser.error(f"could not parse {what}: {text!r}")


def _parse_matrix(text: str, parser) -> np.ndarray:
    rows = [_parse_vector(row, "--block-matrix row", parser) for row in text.split(";")]
    if any(r.size != len(rows) for r in rows):
        parser.error("--block-matrix must be square: rows ';'-separated, entries ','-separated")
    return np.vstack(rows)


def cmd_generate(args, parser) -> int:
    K = args.K
    pi = np.full(K, 1.0 / K) if args.pi is None else _parse_vector(args.pi, "--pi", parser)
    if pi.size != K:
        parser.error("--pi length must equal K")
    if pi.min() < 0 or abs(pi.sum() - 1.0) > 1e-9:
        parser.error("--pi must be a simplex vector")
    matrix = _parse_matrix(args.block_matrix, parser)
    if matrix.shape != (K, K):
        parser.error("--block-matrix must be K x K")
    gamma = None
    if args.model == "dc_poisson":
        if args.gamma is None:
            parser.error("--gamma is required for the dc_poisson model")
        gamma = _parse_vector(args.gamma, "--gamma", parser)
        if gamma.size != args.n:
            parser.error("--gamma length must equal --n")
    elif args.gamma is not None:
        parser.error("--gamma applies to the dc_poisson model only")
    try:
        params = BlockParams(args.model, K, pi, matrix, gamma=gamma)
        cfg = GenConfig(n=args.n, params=params, directed=args.directed, seed=args.seed)
    except ValueError as exc:
        parser.error(str(exc))
    net, part = sample_sbm(cfg)
    labels = net.labels()
    edge_path = Path(args.out_prefix + ".edges")
    label_path = Path(args.out_prefix + ".labels")
    edge_path.write_text(to_edge_list_text(net), encoding="utf-8")
    label_lines = [f"{labels[i]} {part.labels[i]}" for i in range(net.n_nodes)]
    label_path.write_text("\n".join(label_lines) + "\n", encoding="utf-8")
    print(f"wrote {edge_path} and {label_path}")
    return 0


def _labels_from_file(path: str):
    """Node -> group mapping plus node order, from a fit file or label file."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        result = from_json(text)
        order = list(result.node_labels)
        mapping = {node: str(result.labels[i]) for i, node in enumerate(order)}
        return mapping, order, result
    mapping = load_labels(text)
    return mapping, list(mapping), None


def _to_partition(order, mapping) -> Partition:
    groups: dict[str, int] = {}
    labels = []
    for node in order:
        g = mapping[node]
        if g not in groups:
            groups[g] = len(groups) + 1
        labels.append(groups[g])
    return Partition(np.array(labels), max(len(groups), 1))


def cmd_eval(args, parser) -> int:
    pred_map, order, result = _labels_from_file(args.predicted)
    truth_map = load_labels(Path(args.truth).read_text(encoding="utf-8"))
    for node in order:
        if node not in truth_map:
            raise EdgeListError(f"node {node!r} missing from the truth labels")
    for node in truth_map:
        if node not in pred_map:
            raise EdgeListError(f"node {node!r} missing from the predicted labels")

    pred = _to_partition(order, pred_map)
    truth = _to_partition(order, truth_map)
    cmp = rand_index(pred, truth)
    print(f"rand_index\t{cmp.rand_index:.4f}")
    print(f"adjusted_rand\t{cmp.adjusted_rand:.4f}")
    print(f"agreements\t{cmp.agreements}")
    print(f"pairs\t{cmp.total_pairs}")
    print("confusion:")
    for row in cmp.confusion:
        print("\t".join(str(int(v)) for v in row))

    if result is not None and result.posterior is not None:
        post = result.posterior
        count = min(args.uncertain, len(order))
        ranked = sorted(range(len(order)), key=lambda i: (post.gini[i], i))[:count]
        print("most_uncertain:")
        for i in ranked:
            freqs = " ".join(f"{v:.4f}" for v in post.freq[i])
            print(f"{order[i]}\t{post.gini[i]:.4f}\t{freqs}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockmix",
        description="Fit stochastic blockmodels to networks and score the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="print node, edge, and density statistics")
    _add_input_flags(p_stats)
    p_stats.set_defaults(func=cmd_stats)

    p_fit = sub.add_parser("fit", help="fit a blockmodel and write a result file")
    _add_input_flags(p_fit)
    p_fit.add_argument("--model", choices=MODELS, default="bernoulli")
    p_fit.add_argument("--method", choices=METHODS, required=True)
    p_fit.add_argument("--K", type=int, required=True, help="number of blocks")
    p_fit.add_argument("--restarts", type=int, default=None, help="override the engine default")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--out", required=True, help="output path for the result JSON")
    p_fit.add_argument(
        "--trace-out",
        default=None,
        help="mcem only: write per-iteration (iteration, node, position) lines",
    )
    p_fit.set_defaults(func=cmd_fit)

    p_gen = sub.add_parser("generate", help="sample a synthetic network with known blocks")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--K", type=int, required=True)
    p_gen.add_argument("--pi", default=None, help="comma-separated mixing weights (default uniform)")
    p_gen.add_argument(
        "--block-matrix",
        required=True,
        help="rows ';'-separated, entries ','-separated; probabilities, or log-rates for poisson kinds",
    )
    p_gen.add_argument("--model", choices=MODELS, default="bernoulli")
    p_gen.add_argument("--gamma", default=None, help="dc_poisson only: comma-separated node offsets")
    p_gen.add_argument("--directed", action="store_true")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out-prefix", required=True, help="writes <prefix>.edges and <prefix>.labels")
    p_gen.set_defaults(func=cmd_generate)

    p_eval = sub.add_parser("eval", help="compare a fit or label file against truth labels")
    p_eval.add_argument("predicted", help="fit result JSON or 'node group' label file")
    p_eval.add_argument("truth", help="'node group' label file")
    p_eval.add_argument(
        "--uncertain", type=int, default=3, help="how many lowest-confidence nodes to print"
    )
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except EdgeListError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
