"""Rerankers: RRF, MMR, mentions, distance, cross-encoder."""

from __future__ import annotations

import random

import numpy as np
import pytest

from tkgmem.errors import ExtractorError, UnknownId, ValidationError
from tkgmem.model import EntityNode, Episode, SemanticEdge
from tkgmem.rerank import (
    JaccardScorer,
    RemoteCrossScorer,
    RerankerConfig,
    cross_encode,
    episode_mentions,
    mmr,
    node_distance,
    rrf,
)
from tkgmem.store import GraphStore

from .conftest import DIM, make_clock, ms, unit_vector


# -- RRF ---------------------------------------------------------------------


def test_rrf_double_rank_one_is_2_over_61():
    fused = rrf([["x", "y"], ["x", "z"]], k=60)
    scores = dict(fused)
    assert abs(scores["x"] - 2 / 61) < 1e-12
    assert fused[0][0] == "x"


def test_rrf_single_list_score():
    fused = dict(rrf([["a", "b", "c"]], k=60))
    assert abs(fused["a"] - 1 / 61) < 1e-12
    assert abs(fused["b"] - 1 / 62) < 1e-12
    assert abs(fused["c"] - 1 / 63) < 1e-12


def test_rrf_identity_on_single_list():
    ranked = ["q", "a", "z", "m"]
    assert [i for i, _ in rrf([ranked])] == ranked


def test_rrf_invariant_under_list_order_permutation():
    lists = [["a", "b"], ["b", "c", "a"], ["c"]]
    base = rrf(lists)
    for perm in ([lists[1], lists[2], lists[0]], [lists[2], lists[0], lists[1]]):
        assert rrf(perm) == base


def test_rrf_ties_break_by_id():
    fused = rrf([["b"], ["a"]])
    assert [i for i, _ in fused] == ["a", "b"]


def test_rrf_returns_permutation_of_inputs():
    rng = random.Random(1)
    universe = [f"id{i}" for i in range(30)]
    for _ in range(20):
        lists = [
            rng.sample(universe, rng.randint(0, len(universe)))
            for _ in range(rng.randint(1, 4))
        ]
        fused = [i for i, _ in rrf(lists)]
        assert sorted(fused) == sorted({i for lst in lists for i in lst})


# -- MMR ---------------------------------------------------------------------------


def vec(axis):
    return unit_vector(DIM, axis)


def test_mmr_lambda_one_equals_relevance_sort():
    rng = random.Random(5)
    for _ in range(100):
        n = rng.randint(1, 12)
        candidates = [
            (f"c{i}", rng.random(), vec(rng.randrange(DIM))) for i in range(n)
        ]
        expected = [
            cid
            for cid, _, _ in sorted(
                candidates, key=lambda row: (-row[1], candidates.index(row))
            )
        ]
        assert mmr(candidates, lam=1.0) == expected


def test_mmr_demotes_duplicate_embeddings():
    same = vec(3)
    out = mmr(
        [("first", 1.0, same), ("copy", 0.99, same), ("other", 0.5, vec(7))],
        lam=0.5,
    )
    assert out[0] == "first"
    # The near-duplicate of the top pick sinks below the dissimilar item.
    assert out == ["first", "other", "copy"]


def test_mmr_single_candidate():
    assert mmr([("only", 0.4, vec(0))]) == ["only"]


def test_mmr_excludes_missing_embeddings():
    out = mmr([("a", 1.0, vec(0)), ("b", 0.9, None)])
    assert out == ["a"]


def test_mmr_never_repeats_ids():
    rng = random.Random(9)
    candidates = [(f"c{i}", rng.random(), vec(i)) for i in range(20)]
    out = mmr(candidates, lam=0.3)
    assert len(out) == len(set(out)) == 20


# -- store-backed rerankers --------------------------------------------------------


def mention_fixture():
    store = GraphStore(group="r", dimension=DIM, clock=make_clock())
    eps = []
    for i in range(5):
        ep = Episode(
            id=store.new_id("episode"),
            kind="text",
            content=f"ep {i}",
            t_ref=ms("2024-01-01T00:00:00Z"),
        )
        store.add_episode(ep)
        eps.append(ep.id)
    nodes = {}
    for i, name in enumerate("ABCD"):
        node = EntityNode(
            id=store.new_id("entity"),
            name=name,
            summary=name,
            name_embedding=vec(i),
        )
        store.upsert_entity(node)
        nodes[name] = node.id
    def edge(src, tgt, fact, episodes, axis):
        e = SemanticEdge(
            id=store.new_id("edge"),
            source=nodes[src],
            target=nodes[tgt],
            predicate="REL",
            fact=fact,
            fact_embedding=vec(axis),
            t_created=store.tick(),
            episodes=tuple(episodes),
        )
        store.upsert_edge(e)
        return e.id
    return store, eps, nodes, edge


def test_episode_mentions_orders_edges_by_provenance():
    store, eps, nodes, edge = mention_fixture()
    e1 = edge("A", "B", "three mentions", eps[:3], 10)
    e2 = edge("C", "D", "one mention", eps[:1], 11)
    assert episode_mentions([e2, e1], store) == [e1, e2]


def test_episode_mentions_stable_on_equal_counts():
    store, eps, nodes, edge = mention_fixture()
    e1 = edge("A", "B", "x", eps[:2], 10)
    e2 = edge("C", "D", "y", eps[2:4], 11)
    assert episode_mentions([e2, e1], store) == [e2, e1]
    assert episode_mentions([e1, e2], store) == [e1, e2]


def test_episode_mentions_entities_by_linked_episode_count():
    store, eps, nodes, edge = mention_fixture()
    for ep in eps:
        store.link_episode(ep, nodes["A"])
    for ep in eps[:2]:
        store.link_episode(ep, nodes["B"])
    assert episode_mentions([nodes["B"], nodes["A"]], store) == [nodes["A"], nodes["B"]]


def distance_fixture():
    store, eps, nodes, edge = mention_fixture()
    # Path A - B - C; D isolated.
    e_ab = edge("A", "B", "ab", eps[:1], 10)
    e_bc = edge("B", "C", "bc", eps[:1], 11)
    return store, nodes, (e_ab, e_bc)


def test_node_distance_centroid_first_and_monotone():
    store, nodes, edges = distance_fixture()
    order = node_distance(
        [nodes["C"], nodes["B"], nodes["A"]], store, centroid=nodes["A"]
    )
    assert order == [nodes["A"], nodes["B"], nodes["C"]]


def test_node_distance_unreachable_last():
    store, nodes, edges = distance_fixture()
    order = node_distance([nodes["D"], nodes["B"]], store, centroid=nodes["A"])
    assert order == [nodes["B"], nodes["D"]]


def test_node_distance_edges_take_min_endpoint_distance():
    store, nodes, (e_ab, e_bc) = distance_fixture()
    order = node_distance([e_bc, e_ab], store, centroid=nodes["A"])
    assert order == [e_ab, e_bc]


def test_node_distance_unknown_centroid():
    store, nodes, _ = distance_fixture()
    with pytest.raises(UnknownId):
        node_distance([nodes["A"]], store, centroid="missing")


# -- cross encoder ------------------------------------------------------------------


def test_jaccard_identical_text_scores_one():
    ranked, fallback = cross_encode(
        "the exact query", [("a", "the exact query"), ("b", "unrelated words")],
        JaccardScorer(),
    )
    assert ranked[0] == "a" and not fallback
    assert JaccardScorer().score("the exact query", ["the exact query"])[0] == 1.0


def test_jaccard_zero_overlap_scores_zero():
    assert JaccardScorer().score("alpha beta", ["gamma delta"])[0] == 0.0


def test_jaccard_ordering_matches_hand_computed_overlaps():
    scorer = JaccardScorer()
    query = "a b c"
    texts = ["a b x", "a y z", "p q r"]
    scores = scorer.score(query, texts)
    # |{a,b}|/|{a,b,c,x}| = 2/4, |{a}|/|{a,b,c,y,z}| = 1/5, 0
    assert abs(scores[0] - 0.5) < 1e-12
    assert abs(scores[1] - 0.2) < 1e-12
    assert scores[2] == 0.0
    ranked, _ = cross_encode(query, list(zip("xyz", texts)), scorer)
    assert ranked == ["x", "y", "z"]


def test_jaccard_two_thirds_one_third_zero():
    scorer = JaccardScorer()
    query = "alpha beta"
    # |{alpha,beta}|/|{alpha,beta,gamma}| = 2/3, |{alpha}|/|{alpha,beta,delta}| = 1/3, 0
    scores = scorer.score(query, ["alpha beta gamma", "alpha delta", "omega psi"])
    assert abs(scores[0] - 2 / 3) < 1e-12
    assert abs(scores[1] - 1 / 3) < 1e-12
    assert scores[2] == 0.0
    ranked, _ = cross_encode(
        query,
        [("a", "alpha beta gamma"), ("b", "alpha delta"), ("c", "omega psi")],
        scorer,
    )
    assert ranked == ["a", "b", "c"]


def test_cross_encode_falls_back_on_scorer_failure():
    class Broken:
        def score(self, query, texts):
            raise ExtractorError("offline")

    ranked, fallback = cross_encode("q", [("a", "t1"), ("b", "t2")], Broken())
    assert ranked == ["a", "b"]
    assert fallback


def test_remote_cross_scorer_contract():
    import httpx

    def handler(request):
        import json

        body = json.loads(request.read())
        return httpx.Response(200, json={"scores": [0.1 * len(t) for t in body["texts"]]})

    scorer = RemoteCrossScorer("http://scorer.test", transport=httpx.MockTransport(handler))
    assert scorer.score("q", ["ab", "abcd"]) == [pytest.approx(0.2), pytest.approx(0.4)]


# -- config + permutation properties -----------------------------------------------


def test_reranker_config_validation():
    with pytest.raises(ValidationError):
        RerankerConfig(method="teleport").validate()
    with pytest.raises(ValidationError):
        RerankerConfig(method="node_distance").validate()
    with pytest.raises(ValidationError):
        RerankerConfig(method="mmr", mmr_lambda=1.5).validate()
    RerankerConfig(method="node_distance", centroid="n1").validate()


def test_every_reranker_returns_permutation():
    store, nodes, (e_ab, e_bc) = distance_fixture()
    ids = [nodes["A"], nodes["B"], nodes["C"]]
    assert sorted(episode_mentions(ids, store)) == sorted(ids)
    assert sorted(node_distance(ids, store, centroid=nodes["A"])) == sorted(ids)
    fused = [i for i, _ in rrf([ids, ids[::-1]])]
    assert sorted(fused) == sorted(ids)
    ranked, _ = cross_encode("q", [(i, f"text {i}") for i in ids], JaccardScorer())
    assert sorted(ranked) == sorted(ids)
