"""Label propagation, dynamic extension, summaries, refresh policy."""

from __future__ import annotations

from tkgmem.communities import CommunityManager, label_propagation
from tkgmem.config import EngineConfig
from tkgmem.embedding import HashingEmbedder
from tkgmem.errors import ExtractorError
from tkgmem.extraction import MockExtractor
from tkgmem.store import GraphStore
from tkgmem.synth import clique_graph

from .conftest import DIM, make_clock


def make_manager(store=None, extractor=None, **cfg):
    store = store or GraphStore(group="test", dimension=DIM, clock=make_clock())
    config = EngineConfig(dimension=DIM, **cfg)
    manager = CommunityManager(store, extractor or MockExtractor(), HashingEmbedder(DIM), config)
    return store, manager


def names_of(store, member_ids):
    return {store.entity(m).name for m in member_ids}


# -- label propagation (pure) -----------------------------------------------


def oracle_connected_components(adjacency):
    """Independent oracle for disjoint cliques: connected components."""
    seen = set()
    components = []
    for start in sorted(adjacency):
        if start in seen:
            continue
        stack, comp = [start], set()
        while stack:
            node = stack.pop()
            if node in comp:
                continue
            comp.add(node)
            stack.extend(adjacency[node] - comp)
        seen |= comp
        components.append(comp)
    return components


def test_empty_graph():
    assert label_propagation({}) == {}


def test_single_triangle_one_community():
    adjacency = {"a": {"b", "c"}, "b": {"a", "c"}, "c": {"a", "b"}}
    labels = label_propagation(adjacency)
    assert len(set(labels.values())) == 1
    # Converges within two label-changing iterations.
    assert label_propagation(adjacency, max_iters=2) == labels


def test_barbell_two_communities():
    # Two 4-cliques joined by one bridge edge (d-e).
    cliques = [set("abcd"), set("efgh")]
    adjacency = {}
    for clique in cliques:
        for node in clique:
            adjacency[node] = clique - {node}
    adjacency["d"] = adjacency["d"] | {"e"}
    adjacency["e"] = adjacency["e"] | {"d"}
    labels = label_propagation(adjacency)
    groups = {}
    for node, label in labels.items():
        groups.setdefault(label, set()).add(node)
    assert len(groups) == 2
    assert set(map(frozenset, groups.values())) == {frozenset("abcd"), frozenset("efgh")}


def test_isolated_nodes_become_singletons():
    adjacency = {"a": set(), "b": set(), "c": {"d"}, "d": {"c"}}
    labels = label_propagation(adjacency)
    assert labels["a"] == "a"
    assert labels["b"] == "b"


def test_disjoint_cliques_match_connected_components():
    import random

    rng = random.Random(3)
    for k in (1, 2, 5, 8):
        adjacency = {}
        node = 0
        for _ in range(k):
            size = rng.randint(3, 6)
            members = [f"n{node + i:03d}" for i in range(size)]
            node += size
            for m in members:
                adjacency[m] = set(members) - {m}
        labels = label_propagation(adjacency)
        groups = {}
        for n, label in labels.items():
            groups.setdefault(label, set()).add(n)
        oracle = oracle_connected_components(adjacency)
        assert len(groups) == k == len(oracle)
        assert set(map(frozenset, groups.values())) == set(map(frozenset, oracle))


def test_deterministic_given_snapshot():
    adjacency = {"a": {"b", "c"}, "b": {"a"}, "c": {"a"}, "d": set()}
    assert label_propagation(adjacency) == label_propagation(adjacency)


# -- full detection over a store ------------------------------------------------


def test_detect_on_barbell_store():
    store, manager = make_manager()
    ids = clique_graph(
        store,
        [["A1", "A2", "A3", "A4"], ["B1", "B2", "B3", "B4"], ["A4", "B1"]],
        HashingEmbedder(DIM),
    )
    groups = manager.detect_communities(store.snapshot())
    assert len(groups) == 2
    member_names = {frozenset(names_of(store, members)) for members in groups.values()}
    assert member_names == {
        frozenset({"A1", "A2", "A3", "A4"}),
        frozenset({"B1", "B2", "B3", "B4"}),
    }


def test_full_refresh_builds_community_nodes():
    store, manager = make_manager()
    clique_graph(store, [["A1", "A2", "A3"], ["B1", "B2", "B3"]], HashingEmbedder(DIM))
    count = manager.full_refresh()
    assert count == 2
    communities = store.all_communities()
    assert len(communities) == 2
    for community in communities:
        assert community.members
        assert not community.dirty
        assert community.summary
        for member in community.members:
            assert store.entity(member).community == community.id


def test_empty_graph_zero_communities():
    store, manager = make_manager()
    assert manager.full_refresh() == 0


# -- dynamic extension ------------------------------------------------------------


def extension_fixture():
    store, manager = make_manager()
    embedder = HashingEmbedder(DIM)
    ids = clique_graph(store, [["A1", "A2", "A3"], ["B1", "B2"]], embedder)
    manager.full_refresh()
    return store, manager, embedder, ids


def test_extend_plurality():
    store, manager, embedder, ids = extension_fixture()
    # New node wired to A1, A2 (community A) and B1 (community B).
    new_ids = clique_graph(store, [["New", "A1"], ["New", "A2"], ["New", "B1"]], embedder, ids=ids)
    community_id = manager.extend_with_node(new_ids["New"])
    a_community = store.entity(ids["A1"]).community
    assert community_id == a_community
    assert new_ids["New"] in store.community(community_id).members
    assert store.community(community_id).dirty


def test_extend_tie_breaks_to_smallest_community_id():
    store, manager, embedder, ids = extension_fixture()
    new_ids = clique_graph(store, [["New", "A1"], ["New", "B1"]], embedder, ids=ids)
    community_id = manager.extend_with_node(new_ids["New"])
    a_comm = store.entity(ids["A1"]).community
    b_comm = store.entity(ids["B1"]).community
    assert community_id == min(a_comm, b_comm)


def test_extend_isolated_node_gets_singleton():
    store, manager, embedder, ids = extension_fixture()
    from tkgmem.model import EntityNode

    node = EntityNode(
        id=store.new_id("entity"),
        name="Loner",
        summary="alone",
        name_embedding=embedder.embed("Loner"),
    )
    store.upsert_entity(node)
    community_id = manager.extend_with_node(node.id)
    community = store.community(community_id)
    assert community.members == frozenset({node.id})
    assert store.entity(node.id).community == community_id


def test_extend_bumps_staleness():
    store, manager, embedder, ids = extension_fixture()
    before = store.staleness
    new_ids = clique_graph(store, [["New", "A1"]], embedder, ids=ids)
    manager.extend_with_node(new_ids["New"])
    assert store.staleness == before + 1


def test_assignment_total_and_nonempty_after_extensions():
    store, manager, embedder, ids = extension_fixture()
    new_ids = clique_graph(store, [["X", "A1"], ["Y", "B1"], ["Z"]], embedder, ids=ids)
    for name in ("X", "Y", "Z"):
        manager.extend_with_node(new_ids[name])
    for node in store.all_entities():
        assert node.community is not None
    for community in store.all_communities():
        assert community.members


# -- summaries -------------------------------------------------------------------


class CountingExtractor(MockExtractor):
    def __init__(self):
        super().__init__()
        self.summarize_calls = 0

    def summarize(self, texts):
        self.summarize_calls += 1
        return super().summarize(texts)


def test_single_member_one_summarize_call():
    extractor = CountingExtractor()
    store, manager = make_manager(extractor=extractor)
    ids = clique_graph(store, [["Solo"]], HashingEmbedder(DIM))
    community_id = manager.extend_with_node(ids["Solo"])
    extractor.summarize_calls = 0
    manager.refresh_summaries(community_id)
    assert extractor.summarize_calls == 1


def test_45_members_chunked_into_4_calls():
    extractor = CountingExtractor()
    store, manager = make_manager(extractor=extractor)
    members = [[f"M{i:02d}" for i in range(45)]]
    clique_graph(store, members, HashingEmbedder(DIM))
    manager.full_refresh()
    community = store.all_communities()[0]
    extractor.summarize_calls = 0
    manager.refresh_summaries(community.id)
    # ceil(45/20) = 3 leaf calls, then one reduce over the 3 partials.
    assert extractor.summarize_calls == 4


def test_summarizer_failure_keeps_previous_summary_and_dirty():
    class FailingSummaries(MockExtractor):
        def __init__(self):
            super().__init__()
            self.fail = False

        def summarize(self, texts):
            if self.fail:
                raise ExtractorError("summary backend down")
            return super().summarize(texts)

    extractor = FailingSummaries()
    store, manager = make_manager(extractor=extractor)
    ids = clique_graph(store, [["A1", "A2", "A3"]], HashingEmbedder(DIM))
    manager.full_refresh()
    community = store.all_communities()[0]
    # Dirty it via extension, then fail the refresh.
    new_ids = clique_graph(store, [["New", "A1"]], HashingEmbedder(DIM), ids=ids)
    manager.extend_with_node(new_ids["New"])
    dirty = store.community(community.id)
    assert dirty.dirty
    extractor.fail = True
    result = manager.refresh_summaries(community.id)
    assert result.summary == dirty.summary
    assert store.community(community.id).dirty


# -- refresh policy ------------------------------------------------------------------


def test_below_threshold_no_refresh():
    store, manager = make_manager(staleness_threshold=5)
    clique_graph(store, [["A1", "A2"]], HashingEmbedder(DIM))
    assert manager.maybe_full_refresh() is False


def test_threshold_triggers_refresh_and_counter_reset():
    extractor = MockExtractor()
    store, manager = make_manager(extractor=extractor, staleness_threshold=3)
    embedder = HashingEmbedder(DIM)
    ids = clique_graph(store, [["A1", "A2", "A3"], ["B1", "B2", "B3"]], embedder)
    for name in ("A1", "A2", "A3"):
        manager.extend_with_node(ids[name])
    assert store.staleness == 3
    assert manager.maybe_full_refresh() is True
    assert store.staleness == 0

    # Post-refresh assignment equals a direct full run on the snapshot.
    groups = manager.detect_communities(store.snapshot())
    expected = {frozenset(members) for members in groups.values()}
    actual = {frozenset(c.members) for c in store.all_communities()}
    assert actual == expected


def test_refresh_resets_counter_to_zero_each_time():
    store, manager = make_manager(staleness_threshold=1)
    embedder = HashingEmbedder(DIM)
    ids = clique_graph(store, [["A1", "A2"]], embedder)
    manager.extend_with_node(ids["A1"])
    assert manager.maybe_full_refresh() is True
    assert store.staleness == 0
    assert manager.maybe_full_refresh() is False
