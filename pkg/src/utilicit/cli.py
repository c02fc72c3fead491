"""Command-line entry point: generate data, cluster, build trees, elicit, evaluate, serve."""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .cluster import hac
from .corpus import generate, load_database, load_spec, save_database
from .evaluate import holdout_error, learning_curve, loocv_over_k
from .model import DecisionModel, best_strategy, load_model
from .tree import DEFAULT_GAMMA, FEATURE, build_tree, classify
from .utility import UtilityDatabase


def bundled_path(name: str) -> Path:
    """Path of a bundled data file (mini_panda.json, corpus_4type.json, ...)."""
    return Path(resources.files("utilicit") / "data" / name)


def _load_inputs(args) -> tuple[DecisionModel, UtilityDatabase]:
    model = load_model(args.model)
    db = load_database(args.db, model=model)
    dropped = db.metadata.get("rows_dropped", 0)
    if dropped:
        print(f"note: dropped {dropped} rows with missing values "
              f"({len(db)} of {db.metadata['rows_total']} loaded)", file=sys.stderr)
    return model, db


def cmd_gen(args) -> int:
    spec = load_spec(args.spec)
    db, truth = generate(spec)
    save_database(db, args.out)
    print(f"wrote {len(db)} utility functions to {args.out}")
    if args.labels_out:
        with open(args.labels_out, "w") as fh:
            fh.write("id,archetype\n")
            for f, t in zip(db, truth):
                fh.write(f"{f.id},{t}\n")
        print(f"wrote ground-truth archetypes to {args.labels_out}")
    return 0


def cmd_cluster(args) -> int:
    model, db = _load_inputs(args)
    clustering = hac(db, model, args.history, args.k)
    out = args.out or f"clustering_h{args.history}_k{args.k}.json"
    clustering.save(out)
    print(f"history {args.history}: {len(clustering.clusters)} clusters -> {out}")
    for i, c in enumerate(clustering.clusters):
        print(f"  cluster {i}: {len(c.member_ids)} members, prototype {c.prototype_id} "
              f"(score {c.prototype_score:.6f})")
    return 0


def cmd_tree(args) -> int:
    model, db = _load_inputs(args)
    clustering = hac(db, model, args.history, args.k)
    tree = build_tree(db, clustering, model, args.gamma)
    out = args.out or f"tree_h{args.history}_k{args.k}.json"
    tree.save(out)
    print(f"history {args.history}: depth {tree.depth} tree -> {out}")
    return 0


def cmd_elicit(args) -> int:
    model, db = _load_inputs(args)
    clustering = hac(db, model, args.history, args.k)
    tree = build_tree(db, clustering, model, args.gamma)
    print(f"history: {model.histories[args.history].label} "
          f"(at most {tree.depth} questions)")

    def ask(question) -> bool:
        while True:
            print(f"Q: {question.text}")
            reply = input("[y/n/why] > ").strip().lower()
            if reply in ("y", "yes"):
                return True
            if reply in ("n", "no"):
                return False
            if reply == "why":
                _explain(model, question)
            else:
                print("please answer y, n, or why")

    result = classify(tree, ask)
    proto = db[db.index_of(result.prototype_id)]
    sid, eu = best_strategy(model, proto, args.history)
    strategy = model.strategies[sid]
    print(f"\ncluster: {result.label}  prototype: {result.prototype_id}  "
          f"({result.questions_asked} questions)")
    print(f"recommended strategy [{strategy.id}] {strategy.label}")
    print(f"  {strategy.description}")
    print(f"  expected utility under the prototype: {eu:.4f}")
    return 0


def _explain(model, question):
    oi = model.outcomes[question.outcome_i]
    if question.kind == FEATURE:
        c = question.threshold
        best = model.outcomes[model.best_anchor]
        worst = model.outcomes[model.worst_anchor]
        print(f"  outcome: {oi.label}")
        print(f"  the lottery: {c:.6g} chance of “{best.label}”, "
              f"{1 - c:.6g} chance of “{worst.label}”")
        print("  answer y if you would rather have the outcome for certain than the lottery")
    else:
        oj = model.outcomes[question.outcome_j]
        print(f"  first outcome:  {oi.label}")
        print(f"  second outcome: {oj.label}")
        print("  answer y if you strictly prefer the first outcome")


def cmd_eval(args) -> int:
    model, db = _load_inputs(args)
    if args.protocol == "holdout":
        report = holdout_error(db, model, args.history, args.k, args.gamma,
                               args.train_fraction, args.runs, args.seed)
    elif args.protocol == "learning-curve":
        sizes = [int(s) for s in args.train_sizes.split(",")]
        report = learning_curve(db, model, args.history, args.k, args.gamma,
                                sizes, args.runs, args.seed)
    else:
        lo, hi = args.k_range.split("..")
        report = loocv_over_k(db, model, args.history, range(int(lo), int(hi) + 1),
                              args.gamma)
    print(report.summary())
    if args.out:
        report.to_csv(args.out)
        print(f"wrote {args.out}")
    if args.plot:
        _plot(report, args.plot)
        print(f"wrote {args.plot}")
    return 0


def _plot(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [p.x for p in report.points]
    ys = [p.mean_error for p in report.points]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel({"learning_curve": "training-set size",
                   "loocv_over_k": "number of clusters"}.get(report.protocol, "x"))
    ax.set_ylabel("mean utility loss")
    ax.set_title(f"{report.protocol} (history {report.history_id})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model, db = _load_inputs(args)
    app = create_app(model, db, k=args.k, gamma=args.gamma, warm=args.warm,
                     snapshot_path=args.snapshot, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="utilicit",
        description="cluster utility functions and elicit a new user's cluster "
                    "with a short yes/no questionnaire")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, history=True):
        p.add_argument("--model", required=True, help="decision model JSON")
        p.add_argument("--db", required=True, help="utility database CSV")
        if history:
            p.add_argument("--history", type=int, required=True, help="history id")
        p.add_argument("--k", type=int, default=4, help="cluster count")
        p.add_argument("--gamma", type=float, default=DEFAULT_GAMMA,
                       help="minimum value gap for lottery questions")

    p = sub.add_parser("gen", help="synthesize a utility database from a generator spec")
    p.add_argument("--spec", required=True, help="generator spec JSON")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--labels-out", help="optional ground-truth archetype CSV")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("cluster", help="cluster the database for one history")
    add_common(p)
    p.add_argument("--out", help="clustering export path")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("tree", help="build and export the question tree")
    add_common(p)
    p.add_argument("--out", help="tree export path")
    p.set_defaults(func=cmd_tree)

    p = sub.add_parser("elicit", help="interactive questionnaire on stdin/stdout")
    add_common(p)
    p.set_defaults(func=cmd_elicit)

    p = sub.add_parser("eval", help="run an evaluation protocol")
    p.add_argument("protocol", choices=["holdout", "learning-curve", "loocv"])
    add_common(p)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--train-sizes", default="10,20,30,40",
                   help="comma-separated sizes for learning-curve")
    p.add_argument("--k-range", default="1..8", help="lo..hi cluster counts for loocv")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--plot", help="optional PNG plot path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="start the HTTP session service")
    add_common(p, history=False)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--warm", action="store_true",
                   help="build clusterings and trees for every history up front")
    p.add_argument("--snapshot", help="session snapshot file")
    p.add_argument("--static-dir", help="serve a static frontend bundle from this directory")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
