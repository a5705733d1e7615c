"""Command-line pipeline: ingest, scale, generate, propagate, evaluate, report.

Each run validates its parameters, writes its outputs, and drops a
manifest (resolved parameters, input hashes, library versions) next to
them so results can be reproduced byte for byte. Defaults can come from a
JSON config file ({"global": {...}, "<subcommand>": {...}}); explicit
flags win over the config file, which wins over environment variables
(COHPROP_OUTDIR, COHPROP_THREADS).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .evaluation import (
    CSV_COLUMNS,
    kfold_eval_method_b,
    spatial_uniform_sample,
    sweep_method_a,
)
from .features import (
    read_features_csv,
    write_features_csv,
    write_labeled_features_csv,
)
from .graph import DirectedGraph, Direction, load_edge_list
from .method_a import run_method_a
from .method_b import run_method_b
from .scaling import (
    bipartite_from_graph,
    correspondence_analysis,
    filter_bipartite,
    seed_features_from_scaling,
)
from .synthetic import PlantedConfig, generate_planted

ENV_OUTDIR = "COHPROP_OUTDIR"
ENV_THREADS = "COHPROP_THREADS"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _resolve(out_dir: Path, path: str) -> Path:
    p = Path(path)
    return p if p.is_absolute() else out_dir / p


def write_manifest(out_dir: Path, subcommand: str, params: dict, inputs: dict[str, Path]) -> Path:
    manifest = {
        "subcommand": subcommand,
        "parameters": params,
        "inputs": {
            name: {"path": str(path), "sha256": _sha256(path)}
            for name, path in inputs.items()
        },
        "versions": {
            "cohprop": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
    }
    path = out_dir / f"manifest_{subcommand}.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _public_params(args: argparse.Namespace) -> dict:
    skip = {"func", "config"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        out[key] = str(value) if isinstance(value, Path) else value
    return out


def _read_label_file(path: Path) -> list[str]:
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                labels.append(line)
    if not labels:
        raise ValueError(f"{path}: no labels found")
    return labels


def _load_graph(args) -> DirectedGraph:
    return load_edge_list(args.graph, sep=args.sep)


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args, out_dir: Path) -> int:
    g = _load_graph(args)
    labels_path = _resolve(out_dir, args.out_labels)
    g.write_label_map(labels_path)
    stats = {
        "nodes": g.node_count,
        "edges": g.edge_count,
        "self_loops_dropped": g.self_loops_dropped,
        "duplicate_records_collapsed": g.duplicates_collapsed,
    }
    if args.stats:
        with open(_resolve(out_dir, args.stats), "w", encoding="utf-8") as fh:
            json.dump(stats, fh, indent=2, sort_keys=True)
            fh.write("\n")
    write_manifest(out_dir, "ingest", _public_params(args), {"graph": Path(args.graph)})
    print(json.dumps(stats))
    return 0


def cmd_scale(args, out_dir: Path) -> int:
    g = _load_graph(args)
    elites = [g.id_of(label) for label in _read_label_file(Path(args.elites))]
    adj = bipartite_from_graph(g, elites)
    filtered, dedup = filter_bipartite(adj, min_degree=args.min_degree)
    result = correspondence_analysis(filtered, n_dims=args.dims, seed=args.svd_seed)

    store = seed_features_from_scaling(result, dedup, g)
    rows = [(g.label_of(v), vec) for v, vec in store.items()]
    write_labeled_features_csv(_resolve(out_dir, args.out_rows), rows, result.n_dims)
    write_labeled_features_csv(
        _resolve(out_dir, args.out_cols),
        zip(result.col_labels, result.col_coords),
        result.n_dims,
    )
    if args.report:
        payload = {
            "n_dims": result.n_dims,
            "rows": len(result.row_labels),
            "cols": len(result.col_labels),
            "duplicates_reassigned": len(dedup),
            "singular_values": [float(s) for s in result.singular_values],
            "inertia_fractions": [float(f) for f in result.inertia_fractions],
            "total_inertia": result.total_inertia,
        }
        with open(_resolve(out_dir, args.report), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    write_manifest(
        out_dir, "scale", _public_params(args),
        {"graph": Path(args.graph), "elites": Path(args.elites)},
    )
    return 0


def cmd_generate(args, out_dir: Path) -> int:
    cfg = PlantedConfig.from_json(args.config)
    g, truth, elites = generate_planted(cfg)
    edges_path = _resolve(out_dir, args.out_edges)
    with open(edges_path, "w", encoding="utf-8") as fh:
        for u in range(g.node_count):
            for v in g.neighbors(u, Direction.UP).tolist():
                fh.write(f"{g.label_of(u)},{g.label_of(v)}\n")
    write_features_csv(_resolve(out_dir, args.out_features), truth, g)
    with open(_resolve(out_dir, args.out_elites), "w", encoding="utf-8") as fh:
        for e in elites.tolist():
            fh.write(g.label_of(e) + "\n")
    write_manifest(
        out_dir, "generate", _public_params(args), {"config": Path(args.config)}
    )
    return 0


def cmd_propagate(args, out_dir: Path) -> int:
    g = _load_graph(args)
    store = read_features_csv(args.seed_features, g)
    seed = store.nodes()
    direction = Direction.from_string(args.direction)
    runner = run_method_a if args.method == "a" else run_method_b
    result = runner(g, store, seed, direction, args.epsilon, args.max_steps, p=args.p)

    write_features_csv(_resolve(out_dir, args.out), result.store, g, include_provenance=True)
    if args.log:
        with open(_resolve(out_dir, args.log), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "added", "excluded"])
            for rec in result.history:
                writer.writerow([rec.step, rec.added, rec.excluded])
    if args.method == "b" and args.log_pivots:
        with open(_resolve(out_dir, args.log_pivots), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "pivots"])
            for rec in result.history:
                writer.writerow([rec.step, rec.pivots])
    write_manifest(
        out_dir, "propagate", _public_params(args),
        {"graph": Path(args.graph), "seed_features": Path(args.seed_features)},
    )
    return 0


def cmd_evaluate(args, out_dir: Path) -> int:
    g = _load_graph(args)
    truth = read_features_csv(args.features, g)
    direction = Direction.from_string(args.direction)
    grid = [float(x) for x in args.epsilon_grid.split(",") if x.strip()]
    if not grid:
        raise ValueError("--epsilon-grid must list at least one value")

    if args.seed_set:
        pool = np.array(
            [g.id_of(label) for label in _read_label_file(Path(args.seed_set))],
            dtype=np.int64,
        )
    else:
        pool = spatial_uniform_sample(
            truth, truth.nodes(), args.sample_size, grid_bins=args.grid_bins, seed=args.seed
        )

    if args.protocol == "sweep-a":
        report = sweep_method_a(g, truth, pool, direction, grid, p=args.p)
    else:
        report = kfold_eval_method_b(
            g, truth, pool, args.k, direction, grid, seed=args.seed, p=args.p
        )
    report.to_csv(_resolve(out_dir, args.out))
    if args.out_json:
        report.to_json(_resolve(out_dir, args.out_json))
    write_manifest(
        out_dir, "evaluate", _public_params(args),
        {"graph": Path(args.graph), "features": Path(args.features)},
    )
    return 0


def cmd_report(args, out_dir: Path) -> int:
    header = list(CSV_COLUMNS)
    merged: list[list[str]] = []
    for path in args.inputs:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            head = next(reader, None)
            if head != header:
                raise ValueError(f"{path}: unexpected report header {head}")
            merged.extend(reader)
    out_path = _resolve(out_dir, args.out)
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(merged)
    write_manifest(
        out_dir, "report", _public_params(args),
        {f"input_{i}": Path(p) for i, p in enumerate(args.inputs)},
    )
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cohprop",
        description="Latent feature scaling and coherence-gated propagation on follow graphs.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    base = argparse.ArgumentParser(add_help=False)
    base.add_argument("--out-dir", default=None, help="directory for outputs and manifest")
    base.add_argument("--threads", type=int, default=None,
                      help="advisory worker count, recorded in the manifest")

    common = argparse.ArgumentParser(add_help=False, parents=[base])
    common.add_argument("--config", default=None, help="JSON config file with defaults")

    graphy = argparse.ArgumentParser(add_help=False)
    graphy.add_argument("--graph", required=True, help="edge-list file (follower,followee)")
    graphy.add_argument("--sep", default=",", help="edge-list field separator")

    p_ingest = sub.add_parser("ingest", parents=[common, graphy],
                              help="parse an edge list and export the label map")
    p_ingest.add_argument("--out-labels", required=True)
    p_ingest.add_argument("--stats", default=None, help="write counts as JSON")
    p_ingest.set_defaults(func=cmd_ingest)

    p_scale = sub.add_parser("scale", parents=[common, graphy],
                             help="correspondence analysis of the follower/elite sub-graph")
    p_scale.add_argument("--elites", required=True, help="file with one elite label per line")
    p_scale.add_argument("--min-degree", type=int, default=3)
    p_scale.add_argument("--dims", type=int, default=2)
    p_scale.add_argument("--svd-seed", type=int, default=0)
    p_scale.add_argument("--out-rows", required=True, help="follower coordinates CSV")
    p_scale.add_argument("--out-cols", required=True, help="elite coordinates CSV")
    p_scale.add_argument("--report", default=None, help="singular values and inertia as JSON")
    p_scale.set_defaults(func=cmd_scale)

    # generate's --config is the planted-graph configuration itself
    p_gen = sub.add_parser("generate", parents=[base],
                           help="sample a planted graph with ground-truth features")
    p_gen.add_argument("--config", required=True, metavar="JSON",
                       help="planted-graph configuration")
    p_gen.add_argument("--out-edges", required=True)
    p_gen.add_argument("--out-features", required=True)
    p_gen.add_argument("--out-elites", required=True)
    p_gen.set_defaults(func=cmd_generate)

    p_prop = sub.add_parser("propagate", parents=[common, graphy],
                            help="propagate seed features through the graph")
    p_prop.add_argument("--method", choices=["a", "b"], required=True)
    p_prop.add_argument("--direction", choices=["up", "down"], required=True)
    p_prop.add_argument("--epsilon", type=float, required=True)
    p_prop.add_argument("--max-steps", type=int, required=True)
    p_prop.add_argument("--seed-features", required=True, help="known features CSV")
    p_prop.add_argument("--p", type=float, default=2.0, help="feature-space norm order")
    p_prop.add_argument("--out", required=True, help="output features CSV")
    p_prop.add_argument("--log", default=None, help="per-step sizes CSV")
    p_prop.add_argument("--log-pivots", default=None, help="per-step pivot counts CSV (method b)")
    p_prop.set_defaults(func=cmd_propagate)

    p_eval = sub.add_parser("evaluate", parents=[common, graphy],
                            help="accuracy/coverage protocols over a threshold grid")
    p_eval.add_argument("--protocol", choices=["sweep-a", "kfold-b"], required=True)
    p_eval.add_argument("--features", required=True, help="ground-truth features CSV")
    p_eval.add_argument("--direction", choices=["up", "down"], default="up")
    p_eval.add_argument("--epsilon-grid", required=True, help="comma-separated thresholds")
    p_eval.add_argument("--k", type=int, default=20)
    p_eval.add_argument("--p", type=float, default=2.0)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--seed-set", default=None, help="file of pool labels (one per line)")
    p_eval.add_argument("--sample-size", type=int, default=500,
                        help="pool size when --seed-set is not given")
    p_eval.add_argument("--grid-bins", type=int, default=20,
                        help="cells per axis for the spatial sample")
    p_eval.add_argument("--out", required=True, help="report CSV")
    p_eval.add_argument("--out-json", default=None)
    p_eval.set_defaults(func=cmd_evaluate)

    p_rep = sub.add_parser("report", parents=[common],
                           help="merge evaluation reports into one CSV")
    p_rep.add_argument("--inputs", nargs="+", required=True)
    p_rep.add_argument("--out", required=True)
    p_rep.set_defaults(func=cmd_report)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    if "--config" not in argv:
        return
    subcommand = next((a for a in argv if not a.startswith("-")), None)
    if subcommand == "generate":
        return  # generate's --config is the planted-graph settings, not run defaults
    cfg_path = argv[argv.index("--config") + 1]
    with open(cfg_path, "r", encoding="utf-8") as fh:
        config = json.load(fh)
    defaults = dict(config.get("global", {}))
    defaults.update(config.get(subcommand, {}) if subcommand else {})
    if not defaults:
        return
    for action in parser._subparsers._group_actions:  # noqa: SLF001 - argparse has no public walk
        subparser = action.choices.get(subcommand)
        if subparser is None:
            continue
        valid = {a.dest for a in subparser._actions}
        unknown = set(defaults) - valid
        if unknown:
            raise ValueError(f"unknown config keys for {subcommand!r}: {sorted(unknown)}")
        subparser.set_defaults(**defaults)


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    _apply_config(parser, argv)
    args = parser.parse_args(argv)

    out_dir = args.out_dir or os.environ.get(ENV_OUTDIR) or "."
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.threads is None and os.environ.get(ENV_THREADS):
        args.threads = int(os.environ[ENV_THREADS])
    return args.func(args, out_dir)


def main(argv: list[str] | None = None) -> int:
    try:
        return dispatch(argv)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
