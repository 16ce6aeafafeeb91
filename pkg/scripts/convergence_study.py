"""Objective and step size per iteration, and iterations-to-converge vs damping.

Writes two CSV files:

* ``<out>_trace.csv``: kind, iteration, objective, vector_diff, optimum
* ``<out>_rate.csv``: kind, alpha, iterations

The optimum column comes from the direct solve and is only filled when both
sides fit the dense limit.

    python scripts/convergence_study.py --u 1000 --p 2000 --out results/conv
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from birank.generators import GenSpec, generate
from birank.normalize import normalize
from birank.rank_core import DENSE_LIMIT, RankConfig, birank, closed_form, hyperparam_map, objective


def run(kind, u, p, seed, alpha, tol):
    spec = GenSpec(u, p, kind=kind, density=0.01, lam=2.0, seed=seed)
    g = generate(spec)
    tp = normalize(g)
    rng = np.random.default_rng(seed)
    p0, u0 = rng.random(p), rng.random(u)
    init = (rng.random(p), rng.random(u))
    res = birank(tp, p0, u0, RankConfig(alpha, alpha, tol=tol, max_iters=1000, init=init))
    optimum = None
    if max(u, p) <= DENSE_LIMIT:
        ps, us = closed_form(tp, p0, u0, alpha, alpha)
        optimum = objective(g, ps, us, *hyperparam_map(alpha, alpha), p0, u0)
    rates = []
    for a in np.round(np.arange(0.1, 1.0, 0.1), 2):
        r = birank(tp, p0, u0, RankConfig(a, a, tol=tol, max_iters=1000, init=init, track_objective=False))
        rates.append((kind, a, r.iterations))
    return g.n_edges, res, optimum, rates


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--u", type=int, default=1000)
    ap.add_argument("--p", type=int, default=2000)
    ap.add_argument("--alpha", type=float, default=0.85)
    ap.add_argument("--tol", type=float, default=1e-4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/convergence")
    args = ap.parse_args(argv)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    traces, rates = [], []
    for kind in ("random", "powerlaw"):
        edges, res, optimum, r = run(kind, args.u, args.p, args.seed, args.alpha, args.tol)
        print(f"{kind}: {edges} edges, {res.iterations} iterations, final objective {res.objective_trace[-1]:.6g}"
              + (f", optimum {optimum:.6g}" if optimum is not None else ""))
        for k, (obj, d) in enumerate(zip(res.objective_trace, res.diff_trace), start=1):
            traces.append((kind, k, obj, d, "" if optimum is None else optimum))
        rates.extend(r)

    with open(f"{out}_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "iteration", "objective", "vector_diff", "optimum"])
        w.writerows(traces)
    with open(f"{out}_rate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "alpha", "iterations"])
        w.writerows(rates)
    for kind, a, n in rates:
        print(f"{kind}\talpha=beta={a}\t{n} iterations")


if __name__ == "__main__":
    main()
