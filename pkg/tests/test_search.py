"""Candidate search: cosine exactness, BM25 behavior, BFS, union, as-of."""

from __future__ import annotations

import numpy as np
import pytest

from tkgmem.config import EngineConfig
from tkgmem.embedding import HashingEmbedder
from tkgmem.errors import DimensionMismatch, UnknownId, ValidationError
from tkgmem.model import EntityNode, Episode, SemanticEdge
from tkgmem.search import Query, Searcher
from tkgmem.store import GraphStore
from tkgmem.synth import clique_graph

from .conftest import DIM, make_clock, ms, unit_vector


def make_searcher(store=None, **cfg):
    store = store or GraphStore(group="s", dimension=DIM, clock=make_clock())
    config = EngineConfig(dimension=DIM, **cfg)
    return store, Searcher(store, HashingEmbedder(DIM), config)


def add_fact(store, src_name, tgt_name, fact, embedding=None, names=None, **edge_kw):
    """Create endpoints on demand and wire one edge."""
    names = names if names is not None else {}
    embedder = HashingEmbedder(DIM)
    if "_ep" not in names:
        ep = Episode(
            id=store.new_id("episode"),
            kind="text",
            content="fixture",
            t_ref=ms("2024-01-01T00:00:00Z"),
        )
        store.add_episode(ep)
        names["_ep"] = ep.id
    for name in (src_name, tgt_name):
        if name not in names:
            node = EntityNode(
                id=store.new_id("entity"),
                name=name,
                summary=f"{name} summary",
                name_embedding=embedder.embed(name),
            )
            store.upsert_entity(node)
            names[name] = node.id
    edge = SemanticEdge(
        id=store.new_id("edge"),
        source=names[src_name],
        target=names[tgt_name],
        predicate="REL",
        fact=fact,
        fact_embedding=embedding if embedding is not None else embedder.embed(fact),
        t_created=store.tick(),
        episodes=(names["_ep"],),
        **edge_kw,
    )
    store.upsert_edge(edge)
    names[fact] = edge.id
    return names


# -- Query validation ------------------------------------------------------


def test_query_requires_positive_limit():
    with pytest.raises(ValidationError):
        Query(text="x", limit=0)


def test_query_requires_methods():
    with pytest.raises(ValidationError):
        Query(text="x", methods=())
    with pytest.raises(ValidationError):
        Query(text="x", methods=("teleport",))


# -- cosine ----------------------------------------------------------------


def test_cosine_self_similarity_ranks_first():
    store, searcher = make_searcher()
    embedder = HashingEmbedder(DIM)
    names = add_fact(store, "A", "B", "alpha fact")
    add_fact(store, "C", "D", "beta fact", names=names)
    query = Query(text="ignored", embedding=embedder.embed("alpha fact"), methods=("cosine",))
    results = searcher.search_cosine(query)
    top_id, top_score = results.edges[0]
    assert top_id == names["alpha fact"]
    assert abs(top_score - 1.0) < 1e-6


def test_cosine_empty_graph():
    store, searcher = make_searcher()
    results = searcher.search_cosine(Query(text="anything"))
    assert results.edges == [] and results.entities == [] and results.communities == []


def test_cosine_orthogonal_scores_zero_with_id_tiebreak():
    store, searcher = make_searcher()
    names = {}
    add_fact(store, "A", "B", "f1", embedding=unit_vector(DIM, 1), names=names)
    add_fact(store, "C", "D", "f2", embedding=unit_vector(DIM, 2), names=names)
    query = Query(text="x", embedding=unit_vector(DIM, 0), methods=("cosine",))
    results = searcher.search_cosine(query)
    ids = [i for i, _ in results.edges]
    assert ids == sorted(ids)
    assert all(abs(s) < 1e-12 for _, s in results.edges)


def test_cosine_dimension_mismatch():
    store, searcher = make_searcher()
    with pytest.raises(DimensionMismatch):
        searcher.search_cosine(Query(text="x", embedding=np.ones(DIM + 1)))


def test_cosine_exactness_against_linear_scan():
    store, searcher = make_searcher()
    rng = np.random.default_rng(7)
    names = {}
    vectors = {}
    for i in range(300):
        v = rng.standard_normal(DIM)
        v /= np.linalg.norm(v)
        add_fact(store, f"S{i}", f"T{i}", f"fact number {i}", embedding=v, names=names)
        vectors[names[f"fact number {i}"]] = v
    for trial in range(10):
        q = rng.standard_normal(DIM)
        q /= np.linalg.norm(q)
        got = searcher.search_cosine(Query(text="x", embedding=q, limit=15)).edges
        oracle = sorted(
            ((i, float(np.dot(v, q))) for i, v in vectors.items()),
            key=lambda kv: (-kv[1], kv[0]),
        )[:15]
        assert [i for i, _ in got] == [i for i, _ in oracle]


# -- bm25 ----------------------------------------------------------------------


def test_bm25_single_doc_hit():
    store, searcher = make_searcher()
    add_fact(store, "Alice", "Acme", "alice works at acme")
    results = searcher.search_bm25(Query(text="acme"))
    assert len(results.edges) == 1
    assert results.edges[0][1] > 0


def test_bm25_absent_token_empty():
    store, searcher = make_searcher()
    add_fact(store, "Alice", "Acme", "alice works at acme")
    assert searcher.search_bm25(Query(text="zebra")).edges == []


def test_bm25_searches_entity_names_not_summaries():
    store, searcher = make_searcher()
    embedder = HashingEmbedder(DIM)
    node = EntityNode(
        id=store.new_id("entity"),
        name="Turbine",
        summary="a secret keyword xyzzy lives here",
        name_embedding=embedder.embed("Turbine"),
    )
    store.upsert_entity(node)
    assert searcher.search_bm25(Query(text="Turbine")).entities
    assert searcher.search_bm25(Query(text="xyzzy")).entities == []


# -- bfs --------------------------------------------------------------------------


def path_graph(store):
    """A - B - C via semantic edges."""
    names = {}
    add_fact(store, "A", "B", "A knows B", names=names)
    add_fact(store, "B", "C", "B knows C", names=names)
    return names


def test_bfs_depth_zero_returns_seeds():
    store, searcher = make_searcher(bfs_depth=0)
    names = path_graph(store)
    results = searcher.search_bfs(Query(text="x", seeds=(names["A"],)))
    assert results.entities == [(names["A"], 1.0)]
    assert results.edges == []


def test_bfs_path_distances_decay():
    store, searcher = make_searcher(bfs_depth=2)
    names = path_graph(store)
    results = searcher.search_bfs(Query(text="x", seeds=(names["A"],)))
    scores = dict(results.entities)
    assert scores[names["A"]] == 1.0
    assert scores[names["B"]] == 0.5
    assert abs(scores[names["C"]] - 1 / 3) < 1e-12
    assert scores[names["B"]] > scores[names["C"]]
    edge_scores = dict(results.edges)
    assert edge_scores[names["A knows B"]] == 0.5
    assert abs(edge_scores[names["B knows C"]] - 1 / 3) < 1e-12


def test_bfs_barbell_depth_one_stays_in_clique():
    store, searcher = make_searcher(bfs_depth=1)
    embedder = HashingEmbedder(DIM)
    ids = clique_graph(
        store,
        [["A1", "A2", "A3", "A4"], ["B1", "B2", "B3", "B4"], ["A4", "B1"]],
        embedder,
    )
    results = searcher.search_bfs(Query(text="x", seeds=(ids["A1"],)))
    reached = {i for i, _ in results.entities}
    assert reached == {ids["A1"], ids["A2"], ids["A3"], ids["A4"]}
    # Oracle: brute-force BFS over the same adjacency.
    snapshot = store.snapshot()
    frontier, seen = {ids["A1"]}, {ids["A1"]}
    for _ in range(1):
        frontier = {
            n for f in frontier for n in snapshot.neighbors(f) if n not in seen
        }
        seen |= frontier
    assert reached == seen


def test_bfs_unknown_seed():
    store, searcher = make_searcher()
    path_graph(store)
    with pytest.raises(UnknownId):
        searcher.search_bfs(Query(text="x", seeds=("missing",)))


def test_bfs_recency_seeding_uses_recent_episode_entities():
    store, searcher = make_searcher(recency_seed_episodes=1)
    names = path_graph(store)
    ep = Episode(
        id=store.new_id("episode"),
        kind="text",
        content="recent",
        t_ref=ms("2024-02-01T00:00:00Z"),
    )
    store.add_episode(ep)
    store.link_episode(ep.id, names["C"])
    results = searcher.search_bfs(Query(text="x"))
    scores = dict(results.entities)
    assert scores[names["C"]] == 1.0  # seed from the most recent episode


def test_bfs_episode_seed_resolves_to_linked_entities():
    store, searcher = make_searcher()
    names = path_graph(store)
    ep_id = names["_ep"]
    store.link_episode(ep_id, names["A"])
    results = searcher.search_bfs(Query(text="x", seeds=(ep_id,)))
    assert dict(results.entities)[names["A"]] == 1.0


def test_bfs_never_exceeds_depth():
    store, searcher = make_searcher(bfs_depth=2)
    names = {}
    add_fact(store, "A", "B", "ab", names=names)
    add_fact(store, "B", "C", "bc", names=names)
    add_fact(store, "C", "D", "cd", names=names)
    results = searcher.search_bfs(Query(text="x", seeds=(names["A"],)))
    reached = {i for i, _ in results.entities}
    assert names["D"] not in reached
    assert all(score >= 1 / 3 for _, score in results.entities)


# -- combined search ------------------------------------------------------------------


def test_single_method_equals_that_method():
    store, searcher = make_searcher()
    add_fact(store, "Alice", "Acme", "alice works at acme")
    combined = searcher.search(Query(text="acme", methods=("bm25",)))
    direct = searcher.search_bm25(Query(text="acme", methods=("bm25",)))
    assert combined.per_method["bm25"].edges == direct.edges
    assert set(combined.per_method) == {"bm25"}


def test_as_of_filter_excludes_not_yet_valid_edges():
    store, searcher = make_searcher()
    names = {}
    add_fact(
        store, "Alice", "Acme", "alice works at acme",
        names=names, t_valid=ms("2020-01-01T00:00:00Z"),
    )
    result_2019 = searcher.search(
        Query(text="acme", methods=("bm25",), as_of=ms("2019-06-01T00:00:00Z"))
    )
    result_2021 = searcher.search(
        Query(text="acme", methods=("bm25",), as_of=ms("2021-06-01T00:00:00Z"))
    )
    assert result_2019.per_method["bm25"].edges == []
    assert len(result_2021.per_method["bm25"].edges) == 1


def test_union_contains_each_methods_top_hit():
    store, searcher = make_searcher()
    embedder = HashingEmbedder(DIM)
    names = {}
    add_fact(store, "Alice", "Acme", "alice works at acme", names=names)
    add_fact(store, "Bob", "Globex", "bob runs globex", names=names)
    query = Query(
        text="alice works at acme",
        embedding=embedder.embed("bob runs globex"),
        seeds=(names["Alice"],),
    )
    out = searcher.search(query)
    union = out.union_ids("edges")
    assert names["alice works at acme"] in union  # bm25 top hit
    assert names["bob runs globex"] in union  # cosine top hit
    bfs_edges = [i for i, _ in out.per_method["bfs"].edges]
    assert set(bfs_edges).issubset(set(union))


def test_index_store_coherence_after_mutations():
    store, searcher = make_searcher()
    names = add_fact(store, "Alice", "Acme", "unique marker fact")
    assert searcher.search_bm25(Query(text="marker")).edges
    from tkgmem.model import replace

    edge = store.edge(names["unique marker fact"])
    store.upsert_edge(replace(edge, fact="completely different now"))
    assert searcher.search_bm25(Query(text="marker")).edges == []
    assert searcher.search_bm25(Query(text="completely different")).edges
