"""Command-line entry point.

Exit codes: 0 success, 1 runtime or input failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import gc
import json
import logging
import math
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .apps import (
    PopularityParams,
    build_rating_graph,
    build_tripartite_graph,
    load_comments,
    load_counts,
    load_triples,
    predict_popularity,
    recommend,
    trirank_alphas,
)
from .errors import BiRankError, GraphError
from .evaluation import hit_ratio_at_k, ndcg_at_k, spearman
from .generators import GenSpec, generate
from .graph import load_edge_list, write_edge_list
from .normalize import Scheme, normalize
from .rank_core import NPartiteConfig, RankConfig, birank

logger = logging.getLogger("birank")


def _unit_interval(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{s!r} is not a number") from None
    if not (0.0 <= v <= 1.0):
        raise argparse.ArgumentTypeError(f"{v} is outside [0, 1]")
    return v


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{s!r} is not a number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{v} must be > 0")
    return v


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{s!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{v} must be >= 1")
    return v


def _csv_list(conv):
    def parse(s: str):
        items = [x for x in s.split(",") if x.strip()]
        try:
            return [conv(x.strip()) for x in items]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _size(s: str) -> tuple[int, int]:
    try:
        u, p = s.lower().split("x")
        u, p = int(u), int(p)
    except ValueError:
        raise ValueError(f"size {s!r} must look like 1000x2000") from None
    if u < 1 or p < 1:
        raise ValueError(f"size {s!r} must be positive")
    return u, p


def _fmt(x: float, precision: int) -> str:
    return f"{x:.{precision}g}"


def write_ranking(path, ranked, precision: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r, (i, s) in enumerate(ranked, start=1):
            fh.write(f"{r}\t{i}\t{_fmt(s, precision)}\n")


def _sorted(ids, scores):
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
    return [(ids[j], float(scores[j])) for j in order]


def read_scores(path, ids, default=0.0) -> np.ndarray:
    """``id<TAB>score`` file aligned to ``ids``; unknown ids are ignored, missing ones get ``default``."""
    pos = {k: n for n, k in enumerate(ids)}
    v = np.full(len(ids), default, dtype=np.float64)
    seen = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.startswith("#"):
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) != 2 or not parts[0]:
                raise GraphError("expected id<TAB>score", path, lineno)
            try:
                s = float(parts[1])
            except ValueError:
                raise GraphError(f"score {parts[1]!r} is not a number", path, lineno) from None
            if not math.isfinite(s) or s < 0:
                raise GraphError(f"score {parts[1]!r} must be finite and >= 0", path, lineno)
            seen += 1
            if parts[0] in pos:
                v[pos[parts[0]]] = s
            else:
                logger.warning("%s:%d: id %r not in graph, ignored", path, lineno, parts[0])
    if not seen:
        raise GraphError("no scores found", path)
    return v


def _write_manifest(path, args, extra) -> None:
    params = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {"subcommand": args.command, "version": __version__, "parameters": params}
    manifest.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _timing(times):
    if not times:
        return {"iterations": 0}
    return {
        "iterations": len(times),
        "per_iteration_seconds": times,
        "median_seconds": statistics.median(times),
        "total_seconds": sum(times),
    }


def cmd_rank(args) -> int:
    graph = load_edge_list(args.graph)
    p0 = read_scores(args.p0, graph.p_ids) if args.p0 else np.full(graph.p_count, 1.0 / graph.p_count)
    u0 = read_scores(args.u0, graph.u_ids) if args.u0 else np.full(graph.u_count, 1.0 / graph.u_count)
    cfg = RankConfig(alpha=args.alpha, beta=args.beta, max_iters=args.max_iters, tol=args.tol, init=args.init)
    tp = normalize(graph, args.scheme)
    res = birank(tp, p0, u0, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ranking(f"{out}.u.tsv", _sorted(graph.u_ids, res.u), args.precision)
    write_ranking(f"{out}.p.tsv", _sorted(graph.p_ids, res.p), args.precision)
    outputs = [f"{out}.u.tsv", f"{out}.p.tsv"]
    if args.trace:
        with open(f"{out}.trace.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "vector_diff"])
            for k, d in enumerate(res.diff_trace):
                obj = res.objective_trace[k] if k < len(res.objective_trace) else ""
                w.writerow([k + 1, repr(obj) if obj != "" else "", repr(d)])
        outputs.append(f"{out}.trace.csv")
    _write_manifest(f"{out}.manifest.json", args, {
        "inputs": [str(x) for x in (args.graph, args.p0, args.u0) if x],
        "outputs": outputs,
        "converged": res.converged,
        "timing": _timing(res.iter_times),
    })
    if not res.converged:
        logger.warning("did not converge within %d iterations", args.max_iters)
    return 0


def cmd_generate(args) -> int:
    if args.kind == "random" and args.density is None:
        raise _Usage("--density is required for --kind random")
    if args.kind == "powerlaw" and args.lam is None:
        raise _Usage("--lambda is required for --kind powerlaw")
    spec = GenSpec(args.u, args.p, args.kind, density=args.density or 0.01, lam=args.lam or 2.0, seed=args.seed)
    t0 = time.perf_counter()
    graph = generate(spec)
    elapsed = time.perf_counter() - t0
    write_edge_list(graph, args.out)
    _write_manifest(f"{args.out}.manifest.json", args, {
        "outputs": [str(args.out)], "edges": graph.n_edges, "timing": {"generation_seconds": elapsed},
    })
    return 0


def cmd_predict_popularity(args) -> int:
    comments = load_comments(args.comments)
    friends = load_counts(args.friends)
    views = load_counts(args.views)
    params = PopularityParams(t0=args.t0, delta=args.delta, a=args.a, b=args.b, time_unit=args.time_unit)
    cfg = RankConfig(alpha=args.alpha, beta=args.beta, max_iters=args.max_iters, tol=args.tol)
    ranked = predict_popularity(comments, friends, views, params, cfg)
    _emit(ranked, args)
    return 0


def cmd_recommend(args) -> int:
    triples = load_triples(args.triples)
    if args.aspects:
        graph = build_tripartite_graph(triples)
        cfg = NPartiteConfig(_trirank_matrix(args), max_iters=args.max_iters, tol=args.tol)
    else:
        graph = build_rating_graph(triples)
        cfg = RankConfig(alpha=args.alpha, beta=args.beta, max_iters=args.max_iters, tol=args.tol)
    try:
        rec = recommend(args.user, args.k, graph, cfg)
    except KeyError as exc:
        raise GraphError(str(exc.args[0]), args.triples) from None
    _emit(rec.items, args, extra={"aspects": rec.aspects})
    return 0


def _trirank_matrix(args):
    """Split the item and user damping between their two neighbour types."""
    share = args.aspect_share
    a, b, c = args.alpha, args.beta, args.aspect_alpha
    return trirank_alphas(
        item_from_user=a * (1 - share), item_from_aspect=a * share,
        user_from_item=b * (1 - share), user_from_aspect=b * share,
        aspect_from_item=c / 2, aspect_from_user=c / 2,
    )


def _emit(ranked, args, extra=None) -> None:
    if args.out:
        write_ranking(args.out, ranked, args.precision)
        _write_manifest(f"{args.out}.manifest.json", args, {"outputs": [str(args.out)], **(extra or {})})
    else:
        for r, (i, s) in enumerate(ranked, start=1):
            sys.stdout.write(f"{r}\t{i}\t{_fmt(s, args.precision)}\n")


def read_ranking(path) -> list[tuple[str, float]]:
    """Read ``rank<TAB>id<TAB>score`` (or ``id<TAB>score``) lines in file order."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.startswith("#"):
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) not in (2, 3):
                raise GraphError("expected [rank<TAB>]id<TAB>score", path, lineno)
            try:
                out.append((parts[-2], float(parts[-1])))
            except ValueError:
                raise GraphError(f"score {parts[-1]!r} is not a number", path, lineno) from None
    if not out:
        raise GraphError("no ranked items found", path)
    return out


def read_truth(path) -> dict[str, float]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.startswith("#"):
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) == 1:
                out[parts[0]] = 1.0
                continue
            if len(parts) != 2 or not parts[0]:
                raise GraphError("expected id[<TAB>value]", path, lineno)
            try:
                out[parts[0]] = float(parts[1])
            except ValueError:
                raise GraphError(f"value {parts[1]!r} is not a number", path, lineno) from None
    if not out:
        raise GraphError("no truth entries found", path)
    return out


def cmd_eval(args) -> int:
    predicted = read_ranking(args.predicted)
    truth = read_truth(args.truth)
    lines = []
    for m in args.metrics:
        if m == "spearman":
            try:
                v = spearman(predicted, truth)
            except KeyError as exc:
                raise GraphError(f"predicted id missing from truth: {exc.args[0]}", args.truth) from None
            lines.append(("spearman", v))
        elif m == "hr":
            lines.append((f"hit_ratio@{args.k}", hit_ratio_at_k(predicted, truth, args.k)))
        elif m == "ndcg":
            lines.append((f"ndcg@{args.k}", ndcg_at_k(predicted, truth, args.k)))
    for name, v in lines:
        sys.stdout.write(f"{name}\t{_fmt(v, args.precision)}\n")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for name, v in lines:
                fh.write(f"{name}\t{_fmt(v, args.precision)}\n")
        _write_manifest(f"{args.out}.manifest.json", args, {"outputs": [str(args.out)]})
    return 0


def bench_one(spec: GenSpec, iters: int, alpha=0.85, beta=0.85, seed=0, stat="median") -> tuple[int, float]:
    """Seconds per solver iteration on the graph described by ``spec``.

    ``stat`` is ``"median"`` or ``"min"`` over the timed sweeps; the minimum
    is the steadier choice on a busy machine.
    """
    reduce = {"median": statistics.median, "min": min}[stat]
    graph = generate(spec)
    tp = normalize(graph, Scheme.BIRANK)
    rng = np.random.default_rng(seed)
    p0 = rng.random(graph.p_count)
    u0 = rng.random(graph.u_count)
    cfg = RankConfig(alpha, beta, max_iters=iters + 1, tol=np.finfo(float).tiny, track_objective=False)
    gc.collect()
    res = birank(tp, p0 / p0.sum(), u0 / u0.sum(), cfg)
    times = res.iter_times[1:] or res.iter_times  # first sweep pays cache warm-up
    return graph.n_edges, reduce(times)


def cmd_bench(args) -> int:
    params = args.densities if args.kind == "random" else args.lambdas
    if not args.sizes or not params or not args.seeds:
        raise _Usage("empty sweep: --sizes, --densities/--lambdas and --seeds must each be non-empty")
    rows = []
    for (u, p) in args.sizes:
        for x in params:
            for s in args.seeds:
                if args.kind == "random":
                    spec = GenSpec(u, p, "random", density=x, seed=s)
                else:
                    spec = GenSpec(u, p, "powerlaw", lam=x, seed=s)
                edges, sec = bench_one(spec, args.iters, seed=s)
                rows.append((args.kind, u, p, x, s, edges, sec))
                logger.info("%s %dx%d param=%g seed=%d: %d edges, %.3g s/iter", args.kind, u, p, x, s, edges, sec)
    out = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["kind", "u", "p", "param", "seed", "edges", "seconds_per_iteration"])
        for r in rows:
            w.writerow([*r[:-1], f"{r[-1]:.6g}"])
    finally:
        if args.out:
            out.close()
    if args.out:
        _write_manifest(f"{args.out}.manifest.json", args, {
            "outputs": [str(args.out)],
            "timing": {"per_iteration_seconds": [r[-1] for r in rows]},
        })
    return 0


class _Usage(Exception):
    pass


def _add_rank_flags(p, alpha=0.85):
    p.add_argument("--alpha", type=_unit_interval, default=alpha)
    p.add_argument("--beta", type=_unit_interval, default=alpha)
    p.add_argument("--tol", type=_positive_float, default=1e-4)
    p.add_argument("--max-iters", type=_positive_int, default=200)


def build_parser() -> argparse.ArgumentParser:
    def global_flags(suppress: bool) -> argparse.ArgumentParser:
        # sub-commands repeat the global flags without defaults so a value given
        # before the sub-command name is not overwritten
        g = argparse.ArgumentParser(add_help=False)
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g.add_argument("--seed", type=int, default=d(0))
        g.add_argument("--threads", type=_positive_int, default=d(1),
                       help="recorded in the manifest; sparse products run single-threaded")
        g.add_argument("--precision", type=_positive_int, default=d(6), help="significant digits in score output")
        g.add_argument("-v", "--verbose", action="store_true", default=d(False))
        return g

    common = global_flags(True)
    parser = argparse.ArgumentParser(prog="birank", description="Ranking on bipartite graphs.",
                                     parents=[global_flags(False)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rank", parents=[common], help="rank both sides of a bipartite graph")
    p.add_argument("--graph", required=True, help="edge list: u_id<TAB>p_id<TAB>weight")
    p.add_argument("--p0", help="P-side query vector: id<TAB>score")
    p.add_argument("--u0", help="U-side query vector: id<TAB>score")
    p.add_argument("--scheme", type=Scheme.parse, default=Scheme.BIRANK,
                   metavar="{hits,cohits,bger,bgrm,birank}")
    p.add_argument("--init", choices=["uniform", "query"], default="uniform")
    p.add_argument("--trace", action="store_true", help="write objective/diff traces as CSV")
    p.add_argument("--out", required=True, help="output prefix")
    _add_rank_flags(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic bipartite graph")
    p.add_argument("--kind", choices=["random", "powerlaw"], required=True)
    p.add_argument("--u", type=_positive_int, required=True)
    p.add_argument("--p", type=_positive_int, required=True)
    p.add_argument("--density", type=_positive_float)
    p.add_argument("--lambda", dest="lam", type=_positive_float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("predict-popularity", parents=[common], help="rank items by predicted popularity")
    p.add_argument("--comments", required=True, help="user<TAB>item<TAB>time")
    p.add_argument("--friends", required=True, help="user<TAB>friend count")
    p.add_argument("--views", required=True, help="item<TAB>view count")
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.85)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--time-unit", type=_positive_float, default=1.0)
    p.add_argument("--out")
    _add_rank_flags(p)
    p.set_defaults(func=cmd_predict_popularity)

    p = sub.add_parser("recommend", parents=[common], help="top-K items for one user")
    p.add_argument("--triples", required=True, help="user<TAB>item[<TAB>aspect]<TAB>rating")
    p.add_argument("--user", required=True)
    p.add_argument("--k", type=_positive_int, default=10)
    p.add_argument("--aspects", action="store_true", help="rank on the user-item-aspect graph")
    p.add_argument("--aspect-share", type=_unit_interval, default=0.5,
                   help="fraction of item/user damping drawn from aspects")
    p.add_argument("--aspect-alpha", type=_unit_interval, default=0.85)
    p.add_argument("--out")
    _add_rank_flags(p)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("eval", parents=[common], help="score a ranking against ground truth")
    p.add_argument("--predicted", required=True, help="rank<TAB>id<TAB>score")
    p.add_argument("--truth", required=True, help="id<TAB>value, or one held-out id per line")
    p.add_argument("--metrics", type=_csv_list(str), default=["spearman", "hr", "ndcg"])
    p.add_argument("--k", type=_positive_int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="seconds per iteration across a sweep of graphs")
    p.add_argument("--kind", choices=["random", "powerlaw"], default="random")
    p.add_argument("--sizes", type=_csv_list(_size), required=True, help="e.g. 1000x2000,2000x4000")
    p.add_argument("--densities", type=_csv_list(_positive_float), default=[0.01])
    p.add_argument("--lambdas", type=_csv_list(_positive_float), default=[2.0])
    p.add_argument("--seeds", type=_csv_list(int), default=[0])
    p.add_argument("--iters", type=_positive_int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "eval":
        bad = [m for m in args.metrics if m not in ("spearman", "hr", "ndcg")]
        if bad or not args.metrics:
            parser.error(f"unknown or empty --metrics {bad}")
    try:
        return args.func(args)
    except _Usage as exc:
        parser.error(str(exc))
    except (BiRankError, ValueError, OSError) as exc:
        print(f"birank {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
