import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from birank.apps import (
    ASPECT,
    ITEM,
    USER,
    CommentRecord,
    PopularityParams,
    RatingTriple,
    build_popularity_graph,
    build_rating_graph,
    build_tripartite_graph,
    item_prior,
    personalization_vectors,
    predict_popularity,
    recommend,
    temporal_edge_weight,
    user_prior,
)
from birank.errors import GraphError
from birank.graph import from_matrix
from birank.normalize import normalize
from birank.rank_core import NPartiteConfig, RankConfig, closed_form

T0 = 100.0
DEFAULTS = PopularityParams(t0=T0)
TIGHT = RankConfig(tol=1e-24, max_iters=5000)


# -- popularity ------------------------------------------------------------

@pytest.mark.parametrize("age, expected", [(0, 1.0), (1, 0.85), (2, 0.7225)])
def test_temporal_weight(age, expected):
    assert temporal_edge_weight(T0, T0 - age, DEFAULTS) == pytest.approx(expected, abs=1e-15)


def test_temporal_weight_units_and_offset():
    p = PopularityParams(t0=0.0, delta=0.5, a=2.0, b=1.0, time_unit=86400.0)
    assert temporal_edge_weight(0.0, -86400.0, p) == pytest.approx(0.5 ** 3)


def test_future_comment_rejected():
    with pytest.raises(ValueError):
        temporal_edge_weight(T0, T0 + 1, DEFAULTS)


@pytest.mark.parametrize("delta", [0.0, 1.0, 1.3])
def test_delta_must_be_in_open_interval(delta):
    with pytest.raises(ValueError):
        PopularityParams(t0=0.0, delta=delta)


def test_popularity_graph_weights():
    g = build_popularity_graph([CommentRecord("u", "i", T0)], DEFAULTS)
    assert g.W.toarray().tolist() == [[1.0]]
    g = build_popularity_graph([CommentRecord("u", "i", T0), CommentRecord("u", "i", T0 - 1)], DEFAULTS)
    assert g.W.toarray()[0, 0] == pytest.approx(1.85, abs=1e-15)
    g = build_popularity_graph([CommentRecord("u1", "i", T0), CommentRecord("u2", "i", T0)], DEFAULTS)
    assert g.W.shape == (2, 1)


def test_popularity_graph_needs_comments():
    with pytest.raises(GraphError):
        build_popularity_graph([], DEFAULTS)


def test_user_prior():
    np.testing.assert_allclose(user_prior({"a": 1, "b": 3}).scores, [1 / 3, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(user_prior({"a": math.e - 1, "b": 0}).scores, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(user_prior({"a": 4, "b": 4, "c": 4}).scores, [1 / 3] * 3, atol=1e-15)
    np.testing.assert_allclose(user_prior({"a": 0, "b": 0}).scores, [0.5, 0.5])


def test_item_prior(caplog):
    np.testing.assert_allclose(item_prior({"x": 100, "y": 10}).scores, [2 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(item_prior({"x": 10, "y": 1}).scores, [1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(item_prior({"x": 7, "y": 7}).scores, [0.5, 0.5], atol=1e-15)
    with caplog.at_level("WARNING"):
        out = item_prior({"x": 10, "y": 0})
    np.testing.assert_allclose(out.scores, [1.0, 0.0], atol=1e-15)
    assert "view count < 1" in caplog.text


def test_single_item_ranked_first():
    ranked = predict_popularity([CommentRecord("u", "only", T0)], {"u": 2}, {"only": 5}, DEFAULTS)
    assert [i for i, _ in ranked] == ["only"]


def test_tie_broken_by_id():
    comments = [CommentRecord("u1", "b", T0), CommentRecord("u2", "a", T0)]
    ranked = predict_popularity(comments, {"u1": 3, "u2": 3}, {"a": 10, "b": 10}, DEFAULTS)
    assert ranked[0][1] == ranked[1][1]
    assert [i for i, _ in ranked] == ["a", "b"]


def test_recent_comments_rank_higher():
    users = [f"u{k}" for k in range(10)]
    comments = [CommentRecord(u, "A", T0) for u in users] + [CommentRecord(u, "B", T0 - 30) for u in users]
    friends = {u: 5 for u in users}
    views = {"A": 50, "B": 50}
    ranked = predict_popularity(comments, friends, views, DEFAULTS, TIGHT)
    assert [i for i, _ in ranked] == ["A", "B"]

    g = build_popularity_graph(comments, DEFAULTS)
    p, _ = closed_form(normalize(g), item_prior(views, g.p_ids), user_prior(friends, g.u_ids), 0.85, 0.85)
    got = dict(ranked)
    np.testing.assert_allclose([got[i] for i in g.p_ids], p, atol=1e-10)
    assert p[g.p_ids.index("A")] > p[g.p_ids.index("B")]


def test_uncommented_items_are_ranked_from_views():
    ranked = predict_popularity([CommentRecord("u", "a", T0)], {"u": 1}, {"a": 10, "z": 1000}, DEFAULTS)
    assert {i for i, _ in ranked} == {"a", "z"}


@settings(max_examples=40, deadline=None)
@given(
    widths=st.lists(st.integers(1, 4), min_size=1, max_size=4),
    shift=st.integers(1, 20),
    seed=st.integers(0, 2**32 - 1),
)
def test_shifting_exclusive_commenters_never_raises_score(widths, shift, seed):
    # each item has its own commenters, so the shift scales whole blocks of W
    rng = np.random.default_rng(seed)
    comments = []
    for j, w in enumerate(widths):
        for k in range(w):
            for _ in range(rng.integers(1, 4)):
                comments.append(CommentRecord(f"u{j}_{k}", f"i{j}", float(T0 - rng.integers(0, 30))))
    friends = {c.user_id: int(rng.integers(0, 20)) for c in comments}
    views = {f"i{j}": int(rng.integers(1, 500)) for j in range(len(widths))}
    before = dict(predict_popularity(comments, friends, views, DEFAULTS, TIGHT))
    moved = [CommentRecord(c.user_id, c.item_id, c.time - shift if c.item_id == "i0" else c.time) for c in comments]
    after = dict(predict_popularity(moved, friends, views, DEFAULTS, TIGHT))
    assert after["i0"] <= before["i0"] + 1e-12


def test_shifting_shared_commenter_can_raise_score():
    """Older comments lower the commenter's degree as well, which can outweigh the lighter edge."""
    comments = [CommentRecord("u2", "i1", 90.0), CommentRecord("u0", "i0", 99.0), CommentRecord("u2", "i0", 97.0)]
    friends, views = {"u0": 4, "u2": 3}, {"i1": 99, "i0": 2}
    moved = [CommentRecord(c.user_id, c.item_id, c.time - 2 if c.item_id == "i0" else c.time) for c in comments]

    def oracle(cs):
        g = build_popularity_graph(cs, DEFAULTS, items=views)
        p, _ = closed_form(normalize(g), item_prior(views, g.p_ids), user_prior(friends, g.u_ids), 0.85, 0.85)
        return p[g.p_ids.index("i0")]

    assert oracle(moved) > oracle(comments)
    assert dict(predict_popularity(moved, friends, views, DEFAULTS, TIGHT))["i0"] == pytest.approx(oracle(moved), abs=1e-10)


# -- recommendation --------------------------------------------------------

def toy_ratings():
    """u1 rated p1 with 5; p1 ties more strongly to u2 than u3; u2-p2 and u3-p3 carry equal weight."""
    return [
        RatingTriple("u1", "p1", None, 5.0),
        RatingTriple("u2", "p1", None, 4.0),
        RatingTriple("u3", "p1", None, 2.0),
        RatingTriple("u2", "p2", None, 3.0),
        RatingTriple("u3", "p3", None, 3.0),
    ]


def test_rating_graph():
    g = build_rating_graph(toy_ratings())
    assert g.W.shape == (3, 3) and g.n_edges == 5
    assert build_rating_graph([RatingTriple("a", "b", None, 2.0)]).W.shape == (1, 1)
    g = build_rating_graph([RatingTriple("a", "b", None, 2.0), RatingTriple("a", "b", None, 4.0)])
    assert g.W.toarray().tolist() == [[4.0]]


def test_rating_must_be_positive():
    with pytest.raises(GraphError):
        RatingTriple("a", "b", None, 0.0)


@pytest.mark.parametrize("damping", [0.5, 0.7, 0.85])
def test_toy_prefers_item_of_closer_neighbour(damping):
    g = build_rating_graph(toy_ratings())
    rec = recommend("u1", 2, g, RankConfig(damping, damping, tol=1e-20, max_iters=2000))
    assert [i for i, _ in rec.items] == ["p2", "p3"]
    assert rec.items[0][1] > rec.items[1][1]


def test_tripartite_weights():
    g = build_tripartite_graph([RatingTriple("u", "i", "a", 4.0)])
    assert g.partition_sizes == (1, 1, 1)
    assert g.relations[(USER, ITEM)].toarray().tolist() == [[4.0]]
    assert g.relations[(USER, ASPECT)].toarray()[0, 0] == pytest.approx(math.log(2))
    assert g.relations[(ITEM, ASPECT)].toarray()[0, 0] == pytest.approx(math.log(2))

    triples = [RatingTriple("u", f"i{k}", "a", 4.0) for k in range(3)]
    g = build_tripartite_graph(triples)
    assert g.relations[(USER, ASPECT)].toarray()[0, 0] == pytest.approx(math.log(4))


def test_extra_triple_adds_triangle():
    base = [
        RatingTriple("u1", "p1", "a1", 5.0),
        RatingTriple("u2", "p2", "a1", 4.0),
        RatingTriple("u2", "p3", "a2", 3.0),
    ]
    before = build_tripartite_graph(base)
    after = build_tripartite_graph(base + [RatingTriple("u1", "p3", "a2", 4.0)])

    def edge(g, rel, a, b):
        (s, t) = rel
        return g.relations[rel][g.ids[s].index(a), g.ids[t].index(b)]

    for g, present in ((before, False), (after, True)):
        assert (edge(g, (USER, ITEM), "u1", "p3") > 0) == present
        assert (edge(g, (USER, ASPECT), "u1", "a2") > 0) == present
    # p3-a2 existed already; a second review raises the frequency from 1 to 2
    assert edge(before, (ITEM, ASPECT), "p3", "a2") == pytest.approx(math.log(2))
    assert edge(after, (ITEM, ASPECT), "p3", "a2") == pytest.approx(math.log(3))


def test_personalization_vectors():
    g = build_rating_graph([RatingTriple("t", "p1", None, 5.0), RatingTriple("t", "p2", None, 5.0),
                            RatingTriple("o", "p3", None, 1.0), RatingTriple("s", "p3", None, 2.0)])
    p0, a0, u0 = personalization_vectors("t", g)
    np.testing.assert_allclose(p0, [0.5, 0.5, 0.0])
    assert a0 is None
    assert u0.tolist() == [1.0, 0.0, 0.0]
    p0, _, u0 = personalization_vectors("s", g)
    assert p0.tolist() == [0.0, 0.0, 1.0] and u0.tolist() == [0.0, 0.0, 1.0]

    tg = build_tripartite_graph([RatingTriple("t", "p1", "a", 5.0), RatingTriple("t", "p2", "b", 1.0)])
    p0, a0, u0 = personalization_vectors("t", tg)
    np.testing.assert_allclose(p0, [5 / 6, 1 / 6])
    np.testing.assert_allclose(a0, [0.5, 0.5])
    with pytest.raises(KeyError):
        personalization_vectors("nobody", g)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), with_aspects=st.booleans(), k=st.integers(1, 12))
def test_rated_items_never_returned(seed, with_aspects, k):
    rng = np.random.default_rng(seed)
    triples = [
        RatingTriple(f"u{rng.integers(6)}", f"p{rng.integers(10)}",
                     f"a{rng.integers(4)}" if with_aspects else None, float(rng.integers(1, 6)))
        for _ in range(25)
    ]
    g = build_tripartite_graph(triples) if with_aspects else build_rating_graph(triples)
    target = triples[0].user_id
    rated = {t.item_id for t in triples if t.user_id == target}
    rec = recommend(target, k, g)
    ids = [i for i, _ in rec.items]
    assert not rated.intersection(ids)
    n_items = len({t.item_id for t in triples})
    assert len(ids) == min(k, n_items - len(rated))
    scores = [s for _, s in rec.items]
    assert scores == sorted(scores, reverse=True)


def test_k_larger_than_candidates():
    rec = recommend("u1", 50, build_rating_graph(toy_ratings()))
    assert [i for i, _ in rec.items] == ["p2", "p3"]
    with pytest.raises(ValueError):
        recommend("u1", 0, build_rating_graph(toy_ratings()))


def test_trirank_without_aspects_equals_birank():
    rng = np.random.default_rng(5)
    triples = [RatingTriple(f"u{rng.integers(8)}", f"p{rng.integers(12)}", None, float(rng.integers(1, 6)))
               for _ in range(40)]
    a, b = 0.8, 0.6
    bi = build_rating_graph(triples)
    tri = build_tripartite_graph(triples)
    assert tri.partition_sizes[ASPECT] == 0
    alphas = np.zeros((3, 3))
    alphas[ITEM, USER], alphas[USER, ITEM] = a, b
    for user in bi.u_ids:
        r1 = recommend(user, 5, bi, RankConfig(a, b, tol=1e-12))
        r2 = recommend(user, 5, tri, NPartiteConfig(alphas, tol=1e-12))
        assert [i for i, _ in r1.items] == [i for i, _ in r2.items]
        np.testing.assert_allclose([s for _, s in r1.items], [s for _, s in r2.items], atol=1e-15)


def test_trirank_returns_aspects():
    triples = [
        RatingTriple("u1", "p1", "bar", 5.0), RatingTriple("u2", "p1", "bar", 4.0),
        RatingTriple("u2", "p2", "bar", 4.0), RatingTriple("u3", "p3", "rice", 4.0),
        RatingTriple("u3", "p1", "rice", 2.0),
    ]
    rec = recommend("u1", 2, build_tripartite_graph(triples), n_aspects=1)
    assert [i for i, _ in rec.items] == ["p2", "p3"]
    assert [a for a, _ in rec.aspects] == ["bar"]


def test_user_without_ratings_is_deterministic():
    W = np.array([[0.0, 0.0, 0.0], [4.0, 3.0, 0.0], [2.0, 0.0, 3.0]])
    g = from_matrix(W, u_ids=("new", "u2", "u3"), p_ids=("p1", "p2", "p3"))
    assert recommend("new", 3, g) == recommend("new", 3, g)
    # nothing reaches an isolated user: the uniform start decays to zero and ties fall back to id order
    rec = recommend("new", 3, g, RankConfig(tol=1e-30, max_iters=5000))
    assert [i for i, _ in rec.items] == ["p1", "p2", "p3"]
    np.testing.assert_allclose([s for _, s in rec.items], 0.0, atol=1e-14)
