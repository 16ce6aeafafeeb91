"""Ranking metrics and per-user chronological splitting."""

from __future__ import annotations

import math
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata


def _as_pairs(ranked) -> list[tuple[Hashable, float]]:
    pairs = [(i, float(s)) for i, s in ranked]
    ids = [i for i, _ in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError("ranked list contains duplicate ids")
    return pairs


def spearman(predicted, truth: Mapping[Hashable, float]) -> float:
    """Spearman correlation between predicted scores and true values.

    ``predicted`` is a sequence of ``(id, score)``; ties in either ranking get
    average ranks. Returns ``nan`` when either side is constant.
    """
    pairs = _as_pairs(predicted)
    if len(pairs) < 2:
        raise ValueError("spearman needs at least two items")
    missing = [i for i, _ in pairs if i not in truth]
    if missing:
        raise KeyError(f"no truth value for {missing[:5]}")
    x = rankdata([s for _, s in pairs])
    y = rankdata([truth[i] for i, _ in pairs])
    x -= x.mean()
    y -= y.mean()
    denom = math.sqrt(float(np.dot(x, x)) * float(np.dot(y, y)))
    if denom == 0:
        return float("nan")
    return float(np.dot(x, y)) / denom


def _top_ids(recommendations, k: int) -> list:
    if k < 1:
        raise ValueError("K must be >= 1")
    ids = []
    for r in recommendations:
        ids.append(r[0] if isinstance(r, tuple) else r)
        if len(ids) == k:
            break
    return ids


def hit_ratio_at_k(recommendations, held_out: Iterable, k: int) -> float:
    """Fraction of the held-out items found in the top ``k``."""
    held = set(held_out)
    if not held:
        raise ValueError("held-out set is empty")
    top = _top_ids(recommendations, k)
    return len(held.intersection(top)) / len(held)


def ndcg_at_k(recommendations, held_out: Iterable, k: int) -> float:
    """Binary-relevance NDCG: gain ``1/log2(pos + 1)`` for each hit at 1-based ``pos <= k``."""
    held = set(held_out)
    if not held:
        raise ValueError("held-out set is empty")
    top = _top_ids(recommendations, k)
    dcg = sum(1.0 / math.log2(pos + 1) for pos, i in enumerate(top, start=1) if i in held)
    idcg = sum(1.0 / math.log2(pos + 1) for pos in range(1, min(len(held), k) + 1))
    return dcg / idcg


def evaluate_users(recommendations: Mapping, held_out: Mapping, k: int) -> dict:
    """Average HR@k and NDCG@k over users; users with nothing held out are skipped and counted."""
    hr, nd, skipped = [], [], []
    for user, recs in recommendations.items():
        held = held_out.get(user, ())
        if not held:
            skipped.append(user)
            continue
        hr.append(hit_ratio_at_k(recs, held, k))
        nd.append(ndcg_at_k(recs, held, k))
    return {
        f"hit_ratio@{k}": float(np.mean(hr)) if hr else float("nan"),
        f"ndcg@{k}": float(np.mean(nd)) if nd else float("nan"),
        "users": len(hr),
        "skipped": skipped,
    }


def split_counts(n: int) -> tuple[int, int, int]:
    """Train/validation/test sizes: floor 80%, floor 10%, remainder."""
    n_train = (n * 8) // 10
    n_val = n // 10
    return n_train, n_val, n - n_train - n_val


def chronological_split(per_user: Mapping[Hashable, Sequence], time_key=lambda r: r[0]):
    """Split each user's records by time into train/validation/test dicts.

    Records are sorted stably by ``time_key`` (default: first element).
    """
    train, val, test = {}, {}, {}
    for user, records in per_user.items():
        ordered = sorted(records, key=time_key)
        a, b, _ = split_counts(len(ordered))
        train[user] = ordered[:a]
        val[user] = ordered[a:a + b]
        test[user] = ordered[a + b:]
    return train, val, test


def filter_min_reviews(per_user: Mapping[Hashable, Sequence], min_reviews: int = 10) -> dict:
    return {u: list(r) for u, r in per_user.items() if len(r) >= min_reviews}
