"""Application pipelines: comment-based popularity prediction and personalized recommendation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .graph import (
    BipartiteGraph,
    GraphError,
    NPartiteGraph,
    QueryVector,
    from_matrix,
    npartite_from_matrices,
)
from .normalize import Scheme, normalize
from .rank_core import NPartiteConfig, RankConfig, birank, npartite_rank

logger = logging.getLogger(__name__)

# partition layout of the tripartite review graph; items first so that the
# sweep order matches the bipartite solver (P before U)
ITEM, USER, ASPECT = 0, 1, 2


@dataclass(frozen=True)
class CommentRecord:
    user_id: str
    item_id: str
    time: float


@dataclass(frozen=True)
class PopularityParams:
    """Decay ``delta ** (a * (t0 - t) + b)`` with ``t`` in ``time_unit`` units (default days)."""

    t0: float
    delta: float = 0.85
    a: float = 1.0
    b: float = 0.0
    time_unit: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not self.time_unit > 0:
            raise ValueError("time_unit must be > 0")


@dataclass(frozen=True)
class RatingTriple:
    user_id: str
    item_id: str
    aspect_id: str | None
    rating: float

    def __post_init__(self):
        if not (self.rating > 0 and math.isfinite(self.rating)):
            raise GraphError(f"rating must be finite and > 0, got {self.rating!r}")


def temporal_edge_weight(t0: float, t: float, params: PopularityParams) -> float:
    if t > t0:
        raise ValueError(f"comment time {t} is after the ranking time {t0}")
    age = (t0 - t) / params.time_unit
    return params.delta ** (params.a * age + params.b)


def _rank_items(ids: Sequence[str], scores: np.ndarray) -> list[tuple[str, float]]:
    order = sorted(range(len(ids)), key=lambda j: (-scores[j], ids[j]))
    return [(ids[j], float(scores[j])) for j in order]


def build_popularity_graph(comments: Iterable[CommentRecord], params: PopularityParams, items: Iterable[str] = ()) -> BipartiteGraph:
    """User x item graph whose edge weight sums the decayed weight of every comment on the pair.

    ``items`` adds item ids with no comments as isolated vertices.
    """
    users: dict[str, int] = {}
    item_ix: dict[str, int] = {}
    weights: dict[tuple[int, int], float] = {}
    n = 0
    for c in comments:
        n += 1
        i = users.setdefault(c.user_id, len(users))
        j = item_ix.setdefault(c.item_id, len(item_ix))
        weights[(i, j)] = weights.get((i, j), 0.0) + temporal_edge_weight(params.t0, c.time, params)
    if n == 0:
        raise GraphError("no comments given")
    for it in items:
        item_ix.setdefault(it, len(item_ix))
    keys = list(weights)
    W = sp.csr_matrix(
        ([weights[k] for k in keys], ([k[0] for k in keys], [k[1] for k in keys])),
        shape=(len(users), len(item_ix)),
    )
    return from_matrix(W, u_ids=tuple(users), p_ids=tuple(item_ix))


def user_prior(friend_counts: Mapping[str, int], ids: Sequence[str] | None = None) -> QueryVector:
    """``log(1 + g_i)`` normalized to sum 1; uniform if every user has no friends.

    ``ids`` fixes the output order; users absent from ``friend_counts`` count as 0.
    """
    ids = list(friend_counts) if ids is None else list(ids)
    g = np.array([friend_counts.get(i, 0) for i in ids], dtype=np.float64)
    if np.any(g < 0):
        raise ValueError("friend counts must be >= 0")
    s = np.log1p(g)
    total = s.sum()
    if total <= 0:
        return QueryVector(1, np.full(len(ids), 1.0 / len(ids)) if ids else np.zeros(0))
    return QueryVector(1, s / total)


def item_prior(view_counts: Mapping[str, int], ids: Sequence[str] | None = None) -> QueryVector:
    """``log(v_j)`` normalized to sum 1.

    Counts below 1 (or missing items) are clamped to 1 and logged. When all
    mass is zero the result is uniform.
    """
    ids = list(view_counts) if ids is None else list(ids)
    v = np.array([view_counts.get(i, 0) for i in ids], dtype=np.float64)
    low = int(np.sum(v < 1))
    if low:
        logger.warning("%d item(s) with view count < 1 treated as 1", low)
    s = np.log(np.maximum(v, 1.0))
    total = s.sum()
    if total <= 0:
        return QueryVector(0, np.full(len(ids), 1.0 / len(ids)) if ids else np.zeros(0))
    return QueryVector(0, s / total)


def predict_popularity(comments, friend_counts, view_counts, params: PopularityParams,
                       cfg: RankConfig | None = None, include_uncommented: bool = True) -> list[tuple[str, float]]:
    """Items ranked by predicted popularity, best first (ties by id)."""
    comments = list(comments)
    extra = view_counts.keys() if include_uncommented else ()
    graph = build_popularity_graph(comments, params, items=extra)
    u0 = user_prior(friend_counts, graph.u_ids)
    p0 = item_prior(view_counts, graph.p_ids)
    res = birank(normalize(graph, Scheme.BIRANK), p0, u0, cfg or RankConfig())
    return _rank_items(graph.p_ids, res.p)


# ---------------------------------------------------------------------------
# recommendation


def _dedupe_ratings(triples: Iterable[RatingTriple]):
    users: dict[str, int] = {}
    items: dict[str, int] = {}
    ratings: dict[tuple[int, int], float] = {}
    for t in triples:
        i = users.setdefault(t.user_id, len(users))
        j = items.setdefault(t.item_id, len(items))
        ratings[(i, j)] = float(t.rating)  # latest wins
    return users, items, ratings


def build_rating_graph(triples: Iterable[RatingTriple]) -> BipartiteGraph:
    """User x item graph weighted by rating; a repeated pair keeps its last rating."""
    users, items, ratings = _dedupe_ratings(triples)
    if not ratings:
        raise GraphError("no ratings given")
    keys = list(ratings)
    W = sp.csr_matrix(
        ([ratings[k] for k in keys], ([k[0] for k in keys], [k[1] for k in keys])),
        shape=(len(users), len(items)),
    )
    return from_matrix(W, u_ids=tuple(users), p_ids=tuple(items))


def build_tripartite_graph(triples: Iterable[RatingTriple]) -> NPartiteGraph:
    """Item/user/aspect graph from review triples.

    User-item edges carry the rating. User-aspect (item-aspect) edges carry
    ``log(1 + f)``, with ``f`` the number of that user's (item's) reviews
    mentioning the aspect; a review is one user-item pair.
    """
    triples = list(triples)
    users, items, ratings = _dedupe_ratings(triples)
    if not ratings:
        raise GraphError("no ratings given")
    aspects: dict[str, int] = {}
    mentions: set[tuple[int, int, int]] = set()
    for t in triples:
        if t.aspect_id is None:
            continue
        k = aspects.setdefault(t.aspect_id, len(aspects))
        mentions.add((users[t.user_id], items[t.item_id], k))
    ua: dict[tuple[int, int], int] = {}
    ia: dict[tuple[int, int], int] = {}
    for i, j, k in mentions:
        ua[(i, k)] = ua.get((i, k), 0) + 1
        ia[(j, k)] = ia.get((j, k), 0) + 1

    def mat(entries, shape, f=lambda x: x):
        keys = list(entries)
        return sp.csr_matrix(
            ([f(entries[key]) for key in keys], ([key[0] for key in keys], [key[1] for key in keys])),
            shape=shape,
        )

    nu, ni, na = len(users), len(items), len(aspects)
    matrices = {(USER, ITEM): mat(ratings, (nu, ni))}
    if na:
        matrices[(USER, ASPECT)] = mat(ua, (nu, na), math.log1p)
        matrices[(ITEM, ASPECT)] = mat(ia, (ni, na), math.log1p)
    return npartite_from_matrices(
        matrices, partition_sizes=(ni, nu, na), ids=(tuple(items), tuple(users), tuple(aspects))
    )


def _l1(v: np.ndarray) -> np.ndarray:
    s = v.sum()
    return v / s if s > 0 else v


def _row(m: sp.csr_matrix, i: int) -> np.ndarray:
    return m.getrow(i).toarray().ravel()


def personalization_vectors(target_user: str, graph):
    """Query vectors for one target user, each L1-normalized.

    Returns ``(p0, a0, u0)``; ``a0`` is ``None`` for a bipartite rating graph.
    """
    if isinstance(graph, BipartiteGraph):
        try:
            i = graph.u_ids.index(target_user)
        except ValueError:
            raise KeyError(f"unknown user {target_user!r}") from None
        u0 = np.zeros(graph.u_count)
        u0[i] = 1.0
        return _l1(_row(graph.W, i)), None, u0
    user_ids = graph.ids[USER]
    try:
        i = user_ids.index(target_user)
    except ValueError:
        raise KeyError(f"unknown user {target_user!r}") from None
    p0 = _row(graph.relations[(USER, ITEM)], i)
    if (USER, ASPECT) in graph.relations:
        a0 = _row(graph.relations[(USER, ASPECT)], i)
    else:
        a0 = np.zeros(graph.partition_sizes[ASPECT])
    u0 = np.zeros(len(user_ids))
    u0[i] = 1.0
    return _l1(p0), _l1(a0), u0


def trirank_alphas(item_from_user=0.85, user_from_item=0.85, item_from_aspect=0.0,
                   user_from_aspect=0.0, aspect_from_item=0.0, aspect_from_user=0.0) -> np.ndarray:
    """Assemble the 3x3 damping matrix in ``(ITEM, USER, ASPECT)`` order."""
    a = np.zeros((3, 3))
    a[ITEM, USER] = item_from_user
    a[ITEM, ASPECT] = item_from_aspect
    a[USER, ITEM] = user_from_item
    a[USER, ASPECT] = user_from_aspect
    a[ASPECT, ITEM] = aspect_from_item
    a[ASPECT, USER] = aspect_from_user
    return a


DEFAULT_TRIRANK_ALPHAS = trirank_alphas(0.425, 0.425, 0.425, 0.425, 0.425, 0.425)


@dataclass
class Recommendation:
    items: list[tuple[str, float]]
    aspects: list[tuple[str, float]]
    iterations: int


def recommend(target_user: str, k: int, graph, cfg=None, n_aspects: int = 5) -> Recommendation:
    """Top-``k`` unrated items for ``target_user``.

    ``graph`` is a rating graph (ranked with the bipartite solver) or a
    tripartite review graph (ranked with the n-partite solver, which also
    yields the top aspects). Items the user already rated are excluded.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    p0, a0, u0 = personalization_vectors(target_user, graph)
    if isinstance(graph, BipartiteGraph):
        cfg = cfg or RankConfig()
        res = birank(normalize(graph, Scheme.BIRANK), p0, u0, cfg)
        scores, item_ids, aspect_list, iters = res.p, graph.p_ids, [], res.iterations
        rated = graph.W.getrow(graph.u_ids.index(target_user)).indices
    else:
        cfg = cfg or NPartiteConfig(DEFAULT_TRIRANK_ALPHAS)
        res = npartite_rank(graph, [p0, u0, a0], cfg)
        scores, item_ids, iters = res.vectors[ITEM], graph.ids[ITEM], res.iterations
        aspect_list = _rank_items(graph.ids[ASPECT], res.vectors[ASPECT])[:n_aspects]
        rated = graph.relations[(USER, ITEM)].getrow(graph.ids[USER].index(target_user)).indices
    rated = set(int(j) for j in rated)
    candidates = [j for j in range(len(item_ids)) if j not in rated]
    ranked = _rank_items([item_ids[j] for j in candidates], np.asarray(scores)[candidates])
    return Recommendation(items=ranked[:k], aspects=aspect_list, iterations=iters)


def load_triples(path) -> list[RatingTriple]:
    """Read ``user<TAB>item<TAB>rating`` or ``user<TAB>item<TAB>aspect<TAB>rating`` lines.

    An aspect field of ``-`` or empty means no aspect.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.startswith("#"):
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) not in (3, 4):
                raise GraphError(f"expected 3 or 4 tab-separated fields, got {len(parts)}", path, lineno)
            if not parts[0] or not parts[1]:
                raise GraphError("empty user or item id", path, lineno)
            aspect = parts[2] if len(parts) == 4 and parts[2] not in ("", "-") else None
            try:
                rating = float(parts[-1])
            except ValueError:
                raise GraphError(f"rating {parts[-1]!r} is not a number", path, lineno) from None
            try:
                out.append(RatingTriple(parts[0], parts[1], aspect, rating))
            except GraphError as exc:
                raise GraphError(str(exc), path, lineno) from None
    if not out:
        raise GraphError("no triples found", path)
    return out


def load_comments(path) -> list[CommentRecord]:
    """Read ``user<TAB>item<TAB>time`` comment lines."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.startswith("#"):
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) != 3 or not parts[0] or not parts[1]:
                raise GraphError("expected user<TAB>item<TAB>time", path, lineno)
            try:
                t = float(parts[2])
            except ValueError:
                raise GraphError(f"time {parts[2]!r} is not a number", path, lineno) from None
            if not math.isfinite(t):
                raise GraphError(f"time {parts[2]!r} is not finite", path, lineno)
            out.append(CommentRecord(parts[0], parts[1], t))
    if not out:
        raise GraphError("no comments found", path)
    return out


def load_counts(path) -> dict[str, int]:
    """Read ``id<TAB>count`` lines."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip() or raw.startswith("#"):
                continue
            parts = raw.rstrip("\r\n").split("\t")
            if len(parts) != 2 or not parts[0]:
                raise GraphError("expected id<TAB>count", path, lineno)
            try:
                c = int(parts[1])
            except ValueError:
                raise GraphError(f"count {parts[1]!r} is not an integer", path, lineno) from None
            if c < 0:
                raise GraphError(f"count {c} is negative", path, lineno)
            out[parts[0]] = c
    if not out:
        raise GraphError("no counts found", path)
    return out
