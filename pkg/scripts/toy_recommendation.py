"""Item scores for the three-user toy rating graph across damping values.

u1 rated p1; p1 is tied more strongly to u2 than to u3, and u2-p2 and u3-p3
carry equal weight, so p2 should outscore p3 for every damping value.

    python scripts/toy_recommendation.py --out results/toy.csv
"""

import argparse
import csv
from pathlib import Path

from birank.apps import RatingTriple, build_rating_graph, recommend
from birank.rank_core import RankConfig

TRIPLES = [
    RatingTriple("u1", "p1", None, 5.0),
    RatingTriple("u2", "p1", None, 4.0),
    RatingTriple("u3", "p1", None, 2.0),
    RatingTriple("u2", "p2", None, 3.0),
    RatingTriple("u3", "p3", None, 3.0),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/toy.csv")
    args = ap.parse_args(argv)

    g = build_rating_graph(TRIPLES)
    rows = []
    for a in (0.1, 0.3, 0.5, 0.7, 0.85, 0.95):
        rec = recommend("u1", 2, g, RankConfig(a, a, tol=1e-16, max_iters=5000))
        s = dict(rec.items)
        rows.append((a, s["p2"], s["p3"]))
        print(f"alpha=beta={a}: p2={s['p2']:.6g} p3={s['p3']:.6g}")

    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "p2", "p3"])
        w.writerows(rows)


if __name__ == "__main__":
    main()
