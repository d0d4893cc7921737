"""Command-line entry point: ``hiertree <subcommand> ...``.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numeric or degenerate input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from hiertree import __version__
from hiertree.cooccur import CooccurrenceStats, count_cooccurrences, distance_matrix
from hiertree.diagnose import cluster_profile, late_merger_report
from hiertree.errors import HiertreeError, ValidationError
from hiertree.evaluate import EvalSet, accuracy_curve
from hiertree.hclust import EXPORT_FORMATS, LINKAGES, Dendrogram, agglomerate, export_tree
from hiertree.ingest import FORMATS, PredictionDataset, coverage_report, parse_predictions, serialize_jsonl
from hiertree.io import distance_from_csv, distance_to_csv, load_cache, save_cache, write_text
from hiertree.pipeline import build_config, load_config, parse_ks, run_grid
from hiertree.synth import PlantedConfig, generate_planted, partition_json

log = logging.getLogger("hiertree")


def _open_text(path):
    if path in (None, "-"):
        return sys.stdin
    return open(path, encoding="utf-8")


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        write_text(out, text)


def _read_dataset(path, fmt, k, pad_short, labels=None) -> PredictionDataset:
    fh = _open_text(path)
    try:
        return parse_predictions(fh, fmt, k, pad_short=pad_short, labels=labels)
    finally:
        if fh is not sys.stdin:
            fh.close()


def _load_stats(path) -> CooccurrenceStats:
    obj = load_cache(path)
    return obj if isinstance(obj, CooccurrenceStats) else count_cooccurrences(obj)


def _load_tree(path) -> Dendrogram:
    return Dendrogram.from_json(Path(path).read_text(encoding="utf-8"))


# -- subcommands --------------------------------------------------------------

def cmd_ingest(args) -> None:
    labels = None
    if args.labels:
        labels = [ln.strip() for ln in Path(args.labels).read_text(encoding="utf-8").splitlines() if ln.strip()]
    ds = _read_dataset(args.input, args.format, args.k, args.pad_short, labels)
    save_cache(ds, args.out)
    cov = coverage_report(ds)
    missing = cov.uncovered
    log.info("ingested %d records over %d labels (k=%d)", len(ds.records), ds.n_labels, ds.k)
    if missing:
        log.warning("%d label(s) never appear in any top-%d set: %s", len(missing), ds.k, ", ".join(missing[:20]))
    if args.coverage_out:
        doc = {"hiertree_version": __version__, "counts": cov.as_dict(), "uncovered": missing}
        write_text(args.coverage_out, json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    if args.jsonl_out:
        write_text(args.jsonl_out, serialize_jsonl(ds))


def cmd_distance(args) -> None:
    obj = load_cache(args.input)
    stats = obj if isinstance(obj, CooccurrenceStats) else count_cooccurrences(obj)
    options = {"laplace": args.laplace, "uncovered": "drop" if args.drop_uncovered else "error"}
    if args.measure == "lift":
        options["norm"] = args.lift_norm
    D = distance_matrix(stats, args.measure, **options)
    _emit(distance_to_csv(D), args.out)
    if args.stats_out:
        save_cache(stats, args.stats_out)


def cmd_cluster(args) -> None:
    D = distance_from_csv(Path(args.input).read_text(encoding="utf-8"))
    tree = agglomerate(D, args.linkage)
    _emit(tree.to_json(), args.out)


def cmd_cut(args) -> None:
    tree = _load_tree(args.input)
    _emit(cluster_profile(tree, args.k).to_json(), args.out)


def cmd_accuracy(args) -> None:
    tree = _load_tree(args.tree)
    eval_ds = _read_dataset(args.eval, args.format, args.topm, True)
    if args.mined_from:
        mined = load_cache(args.mined_from)
        if isinstance(mined, PredictionDataset):
            overlap = {r.video_id for r in mined.records} & {r.video_id for r in eval_ds.records}
            if overlap:
                log.warning("%d evaluation video ids were also used to build the hierarchy", len(overlap))
    evalset = EvalSet.from_dataset(eval_ds, tree.leaf_names())
    curve = accuracy_curve(tree, evalset, parse_ks(args.ks, tree.n_leaves), topm=args.topm)
    _emit(curve.to_csv(), args.out)


def cmd_diagnose(args) -> None:
    tree = _load_tree(args.tree)
    report = late_merger_report(tree, _load_stats(args.stats), args.m, min(args.q, tree.n_leaves))
    _emit(report.to_json(), args.out)


def cmd_export(args) -> None:
    _emit(export_tree(_load_tree(args.input), format=args.format), args.out)


def cmd_synth(args) -> None:
    cfg = PlantedConfig(
        groups=args.groups,
        labels_per_group=args.labels_per_group,
        videos_per_label=args.videos,
        k=args.k,
        p_in=args.p_in,
        seed=args.seed,
        p_top1=args.p_top1,
        scarce_labels=tuple(args.scarce),
        scarcity=args.scarcity,
        video_prefix=args.video_prefix,
    )
    ds, group = generate_planted(cfg)
    _emit(serialize_jsonl(ds), args.out)
    if args.truth_out:
        write_text(args.truth_out, partition_json(cfg, group))


def cmd_grid(args) -> None:
    file_values = load_config(args.config) if args.config else {}
    overrides = {
        "input": args.input,
        "eval": args.eval,
        "out_dir": args.out_dir,
        "format": args.format,
        "k": args.k,
        "measures": args.measures,
        "linkages": args.linkages,
        "ks": args.ks,
        "topm": args.topm,
        "pad_short": args.pad_short,
        "lift_norm": args.lift_norm,
        "laplace": args.laplace,
        "drop_uncovered": args.drop_uncovered,
        "m": args.m,
        "q": args.q,
        "jobs": args.jobs,
    }
    out = run_grid(build_config(file_values, overrides))
    log.info("grid artifacts written to %s", out)


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hiertree",
        description="Induce, evaluate and diagnose label hierarchies from top-k prediction co-occurrence.",
    )
    parser.add_argument("--version", action="version", version=f"hiertree {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a prediction log into a binary dataset cache")
    p.add_argument("--in", dest="input", default="-", help="JSONL/CSV prediction log (default: stdin)")
    p.add_argument("--format", choices=FORMATS, default="jsonl")
    p.add_argument("--k", type=int, default=5, help="prediction set size")
    p.add_argument("--out", required=True, help="dataset cache to write")
    p.add_argument("--pad-short", action="store_true", help="accept records with fewer than k predictions")
    p.add_argument("--labels", help="file with the full label universe, one name per line")
    p.add_argument("--coverage-out", help="write per-label appearance counts as JSON")
    p.add_argument("--jsonl-out", help="also write the truncated dataset back out as JSONL")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("distance", help="label-to-label distance matrix from co-occurrence")
    p.add_argument("--measure", choices=("confidence", "lift"), default="confidence")
    p.add_argument("--in", dest="input", required=True, help="dataset or stats cache")
    p.add_argument("--out", default="-", help="distance CSV (default: stdout)")
    p.add_argument("--lift-norm", choices=("off-diagonal", "include-diagonal"), default="off-diagonal")
    p.add_argument("--laplace", type=float, default=0.0, metavar="EPS", help="add EPS to every pair count")
    p.add_argument("--drop-uncovered", action="store_true", help="drop labels that occur in no set")
    p.add_argument("--stats-out", help="also write the co-occurrence counts cache")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("cluster", help="agglomerative clustering of a distance CSV")
    p.add_argument("--linkage", choices=LINKAGES, default="single")
    p.add_argument("--in", dest="input", required=True, help="distance CSV")
    p.add_argument("--out", default="-", help="tree JSON (default: stdout)")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("cut", help="flat partition of a tree into k clusters")
    p.add_argument("--in", dest="input", required=True, help="tree JSON")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_cut)

    p = sub.add_parser("accuracy", help="accuracy-vs-k curve of a tree on an evaluation set")
    p.add_argument("--tree", required=True)
    p.add_argument("--eval", required=True, help="evaluation predictions (truth required)")
    p.add_argument("--format", choices=FORMATS, default="jsonl")
    p.add_argument("--ks", default="1..N", help="k grid, e.g. 1..N, 1..N:10, 1,5,10")
    p.add_argument("--topm", type=int, default=1,
                   help="credit a record if any of its top-m predictions co-clusters with the truth "
                        "(extension; default 1 = top-1 scoring)")
    p.add_argument("--mined-from", help="dataset cache used to build the tree; warns on shared video ids")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("diagnose", help="late-merging / under-identified label report")
    p.add_argument("--tree", required=True)
    p.add_argument("--stats", required=True, help="stats or dataset cache")
    p.add_argument("--m", type=int, default=3, help="smallest meaningful cluster size")
    p.add_argument("--q", type=int, default=50, help="labels per reported group")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("export", help="render a tree as Newick, DOT or JSON")
    p.add_argument("--format", choices=EXPORT_FORMATS, default="newick")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="synthetic predictions with a planted label grouping")
    p.add_argument("--groups", type=int, default=4)
    p.add_argument("--labels-per-group", type=int, default=5)
    p.add_argument("--videos", type=int, default=50, help="videos per label")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--p-in", type=float, default=0.9)
    p.add_argument("--p-top1", type=float, default=0.75, help="probability the truth is ranked first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scarce", type=int, nargs="*", default=[], metavar="LABEL_ID",
                   help="label ids that get fewer videos")
    p.add_argument("--scarcity", type=int, default=10, help="video-count divisor for --scarce labels")
    p.add_argument("--video-prefix", default="")
    p.add_argument("--out", default="-")
    p.add_argument("--truth-out", help="write the planted partition as JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("grid", help="run the full measure x linkage grid")
    p.add_argument("--config", help="TOML file of settings; flags override it")
    p.add_argument("--in", dest="input")
    p.add_argument("--eval")
    p.add_argument("--out-dir")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--k", type=int)
    p.add_argument("--measures", help="comma-separated, e.g. confidence,lift")
    p.add_argument("--linkages", help="comma-separated, e.g. single,ward")
    p.add_argument("--ks")
    p.add_argument("--topm", type=int)
    p.add_argument("--pad-short", action="store_true", default=None)
    p.add_argument("--lift-norm", choices=("off-diagonal", "include-diagonal"))
    p.add_argument("--laplace", type=float)
    p.add_argument("--drop-uncovered", action="store_true", default=None)
    p.add_argument("--m", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="hiertree: %(levelname)s: %(message)s",
    )
    try:
        args.func(args)
    except HiertreeError as exc:
        print(f"hiertree {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"hiertree {args.command}: I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
