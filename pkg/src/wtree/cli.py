"""Command-line front end: dataset generation, projection, training,
evaluation, and a benchmark harness over all distance methods.

Every command is deterministic given an explicit --seed; each output table is
accompanied by a JSON sidecar recording the full configuration that produced
it.  Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 I/O
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import NumericalError, ParseError, ValidationError
from .exact_ot import exact_wasserstein, sinkhorn
from .metric_core import (
    TrainSample,
    euclidean_matrix,
    mean_relative_error,
    read_distributions_csv,
    read_matrix_csv,
    read_points_csv,
    read_samples_jsonl,
    write_distributions_csv,
    write_matrix_csv,
    write_points_csv,
    write_samples_jsonl,
)
from .optimizer import TrainConfig, save_checkpoint, train, train_skip_mst
from .quadtree import build_quadtree, flowtree_distance, quadtree_wasserstein
from .synth import (
    gen_distributions,
    gen_gaussian_points,
    gen_pair_indices,
    gen_random_tree,
    gen_uniform_points,
    label_samples,
    perturb_matrix,
)
from .tree_ot import tree_wasserstein
from .ultra_tree import linfty_shift, load_tree, project_to_ultrametric, save_tree


def _sidecar(path, payload):
    with open(str(path) + ".meta.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _pool_map(fn, items, threads):
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# gen


def cmd_gen(args):
    os.makedirs(args.out, exist_ok=True)
    paths = {}

    if args.kind == "random-tree":
        _, matrix = gen_random_tree(args.n, seed=args.seed)
        init = perturb_matrix(matrix, args.sigma, seed=args.seed + 1)
        paths["init"] = os.path.join(args.out, "init.csv")
        write_matrix_csv(paths["init"], init)
    else:
        gen = gen_uniform_points if args.kind == "uniform" else gen_gaussian_points
        if args.kind == "uniform":
            points = gen(args.n, args.dim, args.lo, args.hi, seed=args.seed)
        else:
            points = gen(args.n, args.dim, seed=args.seed)
        matrix = euclidean_matrix(points)
        paths["points"] = os.path.join(args.out, "points.csv")
        write_points_csv(paths["points"], points)

    paths["matrix"] = os.path.join(args.out, "matrix.csv")
    write_matrix_csv(paths["matrix"], matrix)

    dists = gen_distributions(matrix.n, args.count, args.sparsity, seed=args.seed + 2)
    paths["dists"] = os.path.join(args.out, "dists.csv")
    write_distributions_csv(paths["dists"], dists)

    pairs = gen_pair_indices(args.pairs, args.count, seed=args.seed + 3)
    samples = label_samples(matrix, dists, pairs, exact_wasserstein)
    paths["samples"] = os.path.join(args.out, "samples.jsonl")
    write_samples_jsonl(paths["samples"], samples)

    manifest = {
        "generator": args.kind,
        "version": __version__,
        "seed": args.seed,
        "parameters": {
            "n": args.n,
            "dim": args.dim,
            "lo": args.lo,
            "hi": args.hi,
            "count": args.count,
            "sparsity": args.sparsity,
            "sigma": args.sigma,
            "pairs": args.pairs,
        },
        "files": paths,
    }
    with open(os.path.join(args.out, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote dataset to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# project


def cmd_project(args):
    d = read_matrix_csv(args.matrix)
    tree, u = project_to_ultrametric(d)
    shift, _ = linfty_shift(d, u)
    save_tree(args.out + ".tree.json", tree)
    write_matrix_csv(args.out + ".ultra.csv", u)
    _sidecar(args.out, {
        "command": "project",
        "matrix": args.matrix,
        "n": d.n,
        "linfty_shift": shift,
    })
    print(f"projected {d.n}x{d.n} matrix; l-infinity shift {shift:.6g}")
    return 0


# ---------------------------------------------------------------------------
# train


def _load_training_inputs(args):
    d0 = read_matrix_csv(args.matrix)
    dists = read_distributions_csv(args.dists, n=d0.n)
    samples = read_samples_jsonl(args.samples)
    return d0, dists, samples


def cmd_train(args):
    d0, dists, samples = _load_training_inputs(args)
    cfg = TrainConfig(alpha=args.alpha, max_iters=args.iters,
                      batch_size=args.batch, seed=args.seed,
                      log_every=args.log_every)
    run = train_skip_mst if args.skip_mst else train
    t0 = time.perf_counter()
    tree, matrix, history = run(d0, dists, samples, cfg)
    elapsed = time.perf_counter() - t0

    save_checkpoint(args.out + ".ckpt.json", tree, matrix, history, cfg)
    with open(args.out + ".loss.csv", "w") as f:
        f.write("iteration,loss\n")
        for k, v in enumerate(history):
            f.write(f"{k},{format(v, '.17g')}\n")
    _sidecar(args.out, {
        "command": "train",
        "matrix": args.matrix,
        "dists": args.dists,
        "samples": args.samples,
        "skip_mst": args.skip_mst,
        "alpha": args.alpha,
        "iters": args.iters,
        "batch": args.batch,
        "seed": args.seed,
        "iterations_run": len(history),
        "final_loss": history[-1],
        "train_seconds": elapsed,
    })
    print(f"trained {len(history)} iterations; final loss {history[-1]:.6e}")
    return 0


# ---------------------------------------------------------------------------
# eval


def cmd_eval(args):
    tree = load_tree(args.tree)
    dists = read_distributions_csv(args.dists, n=tree.n_leaves)
    samples = read_samples_jsonl(args.samples)

    def one(s):
        return tree_wasserstein(tree, dists[s.mu], dists[s.rho])

    approx = _pool_map(one, samples, args.threads)
    exact = [s.w1 for s in samples]
    mean, std = mean_relative_error(approx, exact)

    with open(args.out, "w") as f:
        f.write("mu,rho,approx,exact,rel_error\n")
        for s, a in zip(samples, approx):
            rel = abs(a - s.w1) / s.w1
            f.write(f"{s.mu},{s.rho},{format(a, '.17g')},"
                    f"{format(s.w1, '.17g')},{format(rel, '.17g')}\n")
    _sidecar(args.out, {
        "command": "eval",
        "tree": args.tree,
        "dists": args.dists,
        "samples": args.samples,
        "pairs": len(samples),
        "mean_rel_error": mean,
        "std_rel_error": std,
    })
    print(f"mean relative error {mean:.6f} +/- {std:.6f} over {len(samples)} pairs")
    return 0


# ---------------------------------------------------------------------------
# bench

BENCH_METHODS = ("ulttree", "skipmst", "quadtree", "flowtree", "sinkhorn", "exact")


def cmd_bench(args):
    points = read_points_csv(args.points)
    d = euclidean_matrix(points)
    dists = read_distributions_csv(args.dists, n=points.n)
    if args.samples:
        samples = read_samples_jsonl(args.samples)
    else:
        pairs = gen_pair_indices(args.pairs, len(dists), seed=args.seed)
        samples = label_samples(d, dists, pairs, exact_wasserstein)

    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in BENCH_METHODS]
    if bad:
        raise ValidationError(f"unknown methods: {bad}; choose from {BENCH_METHODS}")

    rows = []
    for method in methods:
        setup = 0.0
        if method in ("ulttree", "skipmst"):
            cfg = TrainConfig(alpha=args.alpha, max_iters=args.iters,
                              batch_size=args.batch, seed=args.seed)
            run = train if method == "ulttree" else train_skip_mst
            t0 = time.perf_counter()
            tree, _, _ = run(d, dists, samples, cfg)
            setup = time.perf_counter() - t0
            fn = lambda s, t=tree: tree_wasserstein(t, dists[s.mu], dists[s.rho])
        elif method in ("quadtree", "flowtree"):
            t0 = time.perf_counter()
            qt = build_quadtree(points, seed=args.seed)
            setup = time.perf_counter() - t0
            if method == "quadtree":
                fn = lambda s, q=qt: quadtree_wasserstein(q, dists[s.mu], dists[s.rho])
            else:
                fn = lambda s, q=qt: flowtree_distance(q, points, dists[s.mu], dists[s.rho])
        elif method == "sinkhorn":
            fn = lambda s: sinkhorn(d, dists[s.mu], dists[s.rho], lam=args.lam).cost
        else:
            fn = lambda s: exact_wasserstein(d, dists[s.mu], dists[s.rho]).cost

        t0 = time.perf_counter()
        approx = _pool_map(fn, samples, args.threads)
        eval_sec = time.perf_counter() - t0
        mean, std = mean_relative_error(approx, [s.w1 for s in samples])
        rows.append((method, mean, std, setup, eval_sec))
        print(f"{method:10s} mean_rel_err {mean:.6f} +/- {std:.6f} "
              f"setup {setup:.3f}s eval {eval_sec:.3f}s")

    with open(args.out, "w") as f:
        f.write("method,mean_rel_error,std_rel_error,setup_seconds,eval_seconds\n")
        for method, mean, std, setup, eval_sec in rows:
            f.write(f"{method},{format(mean, '.17g')},{format(std, '.17g')},"
                    f"{format(setup, '.17g')},{format(eval_sec, '.17g')}\n")
    _sidecar(args.out, {
        "command": "bench",
        "points": args.points,
        "dists": args.dists,
        "samples": args.samples,
        "methods": methods,
        "pairs": len(samples),
        "alpha": args.alpha,
        "iters": args.iters,
        "batch": args.batch,
        "lambda": args.lam,
        "seed": args.seed,
        "threads": args.threads,
    })
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wtree", description="Ultrametric-tree Wasserstein toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset with exact labels")
    p.add_argument("--kind", choices=("uniform", "gaussian", "random-tree"),
                   default="uniform")
    p.add_argument("--n", type=int, default=100,
                   help="points (uniform/gaussian) or tree nodes (random-tree)")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--lo", type=float, default=0.0)
    p.add_argument("--hi", type=float, default=1.0)
    p.add_argument("--count", type=int, default=60, help="number of distributions")
    p.add_argument("--sparsity", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0,
                   help="noise level for the random-tree init matrix")
    p.add_argument("--pairs", type=int, default=250)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("project", help="single-linkage ultrametric projection")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(fn=cmd_project)

    p = sub.add_parser("train", help="fit an ultrametric tree to labeled pairs")
    p.add_argument("--matrix", required=True, help="initial semimetric CSV")
    p.add_argument("--dists", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--skip-mst", action="store_true",
                   help="freeze topology; project once at the end")
    p.add_argument("--log-every", type=int, default=0)
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="per-pair error report for a tree")
    p.add_argument("--tree", required=True)
    p.add_argument("--dists", required=True)
    p.add_argument("--samples", required=True)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.add_argument("--out", required=True, help="report CSV path")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="compare methods on one dataset")
    p.add_argument("--points", required=True)
    p.add_argument("--dists", required=True)
    p.add_argument("--samples", default=None,
                   help="labeled pairs; exact labels are computed when omitted")
    p.add_argument("--methods", default=",".join(BENCH_METHODS))
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.add_argument("--out", required=True, help="table CSV path")
    p.set_defaults(fn=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
