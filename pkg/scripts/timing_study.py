"""Seconds per iteration across an edge-count sweep, with a least-squares line.

Sizes are timed in interleaved rounds and the fastest sweep per size is kept,
which keeps bursts of background load from bending the curve.

    python scripts/timing_study.py --u 10000 --p 20000 --out results/timing.csv
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from birank.generators import GenSpec, gen_random
from birank.normalize import normalize
from birank.rank_core import RankConfig, birank


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--u", type=int, default=10_000)
    ap.add_argument("--p", type=int, default=20_000)
    ap.add_argument("--min-density", type=float, default=0.001)
    ap.add_argument("--max-density", type=float, default=0.01)
    ap.add_argument("--steps", type=int, default=10)
    ap.add_argument("--rounds", type=int, default=6)
    ap.add_argument("--iters", type=int, default=8, help="sweeps per round")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/timing.csv")
    args = ap.parse_args(argv)

    densities = np.linspace(args.min_density, args.max_density, args.steps)
    rng = np.random.default_rng(args.seed)
    problems = []
    for d in densities:
        g = gen_random(GenSpec(args.u, args.p, density=float(d), seed=args.seed))
        problems.append((g.n_edges, normalize(g), rng.random(g.p_count), rng.random(g.u_count)))
    cfg = RankConfig(0.85, 0.85, tol=np.finfo(float).tiny, max_iters=args.iters + 1, track_objective=False)
    best = np.full(len(problems), np.inf)
    for _ in range(args.rounds):
        for k, (_, tp, p0, u0) in enumerate(problems):
            best[k] = min(best[k], min(birank(tp, p0, u0, cfg).iter_times[1:]))

    e = np.array([p[0] for p in problems], float)
    for d, n, t in zip(densities, e, best):
        print(f"density {d:.4f}: {int(n)} edges, {t * 1e3:.3f} ms/iteration")
    slope, icept = np.polyfit(e, best, 1)
    r2 = 1 - np.sum((best - slope * e - icept) ** 2) / np.sum((best - best.mean()) ** 2)
    print(f"fit: {slope * 1e6:.4f} s per million edges + {icept * 1e3:.3f} ms, R^2 = {r2:.4f}")

    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["density", "edges", "seconds_per_iteration"])
        w.writerows(zip(densities, e.astype(int), best))


if __name__ == "__main__":
    main()
