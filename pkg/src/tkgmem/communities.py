"""Community detection and maintenance.

Full runs use synchronous label propagation over the entity graph
(semantic edges, unweighted, parallel edges collapsed): every node starts
with its own label and simultaneously adopts the plurality label of its
neighbors, ties broken by smallest label, until a fixed point or the
iteration cap. Single nodes are extended dynamically with one propagation
step; a staleness counter triggers periodic full refreshes.

Summaries are built map-reduce style from member summaries and are
refreshed lazily: dynamic extension only marks the community dirty.
"""

from __future__ import annotations

import logging

from .config import EngineConfig
from .errors import ExtractorError
from .extraction import Extractor
from .model import CommunityNode, replace
from .store import GraphSnapshot, GraphStore

logger = logging.getLogger(__name__)


def label_propagation(
    adjacency: dict[str, set[str]], max_iters: int = 100
) -> dict[str, str]:
    """Synchronous label propagation; returns node -> final label.

    Deterministic: updates are simultaneous; a tied plurality keeps the
    node's current label when it is among the tied set, otherwise takes
    the smallest (pure smallest-label updates oscillate with period 2 on
    symmetric graphs and never reach a fixed point). If the synchronous
    pass still cycles (a lone connected pair does), a sequential sweep
    in ascending node order settles the leftovers.
    """
    labels = {node: node for node in adjacency}
    nodes = sorted(adjacency)
    seen_states: set[tuple[str, ...]] = set()
    cycled = False
    for _ in range(max_iters):
        state = tuple(labels[n] for n in nodes)
        if state in seen_states:
            cycled = True
            break
        seen_states.add(state)
        updated: dict[str, str] = {}
        changed = False
        for node in nodes:
            winner = _plurality(adjacency[node], labels, labels[node])
            if winner != labels[node]:
                changed = True
            updated[node] = winner
        labels = updated
        if not changed:
            return labels
    if cycled:
        for _ in range(max_iters):
            changed = False
            for node in nodes:
                winner = _plurality(adjacency[node], labels, labels[node])
                if winner != labels[node]:
                    labels[node] = winner
                    changed = True
            if not changed:
                break
    return labels


def _plurality(neighbors: set[str], labels: dict[str, str], current: str) -> str:
    if not neighbors:
        return current
    counts: dict[str, int] = {}
    for other in neighbors:
        label = labels[other]
        counts[label] = counts.get(label, 0) + 1
    top = max(counts.values())
    tied = [label for label, count in counts.items() if count == top]
    if current in tied:
        return current
    return min(tied)


class CommunityManager:
    def __init__(
        self,
        store: GraphStore,
        extractor: Extractor,
        embedder,
        config: EngineConfig,
    ) -> None:
        self.store = store
        self.extractor = extractor
        self.embedder = embedder
        self.config = config

    # -- full detection -----------------------------------------------

    def detect_communities(self, snapshot: GraphSnapshot) -> dict[str, list[str]]:
        """Group entity ids by propagated label; keys are representative
        labels (isolated nodes form singletons)."""
        adjacency = {
            node_id: set(snapshot.neighbors(node_id)) for node_id in snapshot.entities
        }
        labels = label_propagation(adjacency, self.config.community_max_iters)
        groups: dict[str, list[str]] = {}
        for node_id in sorted(labels):
            groups.setdefault(labels[node_id], []).append(node_id)
        return groups

    def full_refresh(self) -> int:
        """Re-run detection, rebuild every community node (summaries
        included), reset the staleness counter. Returns community count."""
        snapshot = self.store.snapshot()
        groups = self.detect_communities(snapshot)
        with self.store.transaction():
            for community in self.store.all_communities():
                self.store.remove_community(community.id)
            count = 0
            # Iterate groups by smallest member so ids allocate deterministically.
            for label in sorted(groups, key=lambda lbl: min(groups[lbl])):
                members = groups[label]
                community_id = self.store.new_id("community")
                placeholder = self._placeholder(community_id, members)
                self.store.upsert_community(placeholder)
                for member in members:
                    node = self.store.entity(member)
                    if node.community != community_id:
                        self.store.upsert_entity(replace(node, community=community_id))
                self.refresh_summaries(community_id)
                count += 1
            self.store.reset_staleness()
        return count

    def _placeholder(self, community_id: str, members: list[str]) -> CommunityNode:
        first = self.store.entity(min(members))
        name = first.name
        return CommunityNode(
            id=community_id,
            name=name,
            summary=first.summary or first.name,
            name_embedding=self.embedder.embed(name),
            members=frozenset(members),
            dirty=True,
        )

    # -- dynamic extension ------------------------------------------------

    def extend_with_node(self, node_id: str) -> str:
        """One propagation step for a new node: adopt the plurality
        community of its neighbors (ties to smallest community id), or
        start a singleton. Marks the community dirty; bumps staleness."""
        node = self.store.entity(node_id)  # raises UnknownId
        counts: dict[str, int] = {}
        for neighbor_id in self.store.neighbors(node_id):
            community_id = self.store.entity(neighbor_id).community
            if community_id is not None:
                counts[community_id] = counts.get(community_id, 0) + 1
        if counts:
            top = max(counts.values())
            community_id = min(c for c, n in counts.items() if n == top)
            community = self.store.community(community_id)
            self.store.upsert_community(
                replace(
                    community,
                    members=community.members | {node_id},
                    dirty=True,
                )
            )
        else:
            community_id = self.store.new_id("community")
            self.store.upsert_community(self._placeholder(community_id, [node_id]))
        self.store.upsert_entity(replace(node, community=community_id))
        self.store.bump_staleness()
        return community_id

    # -- summaries -------------------------------------------------------

    def refresh_summaries(self, community_id: str) -> CommunityNode:
        """Map-reduce the member summaries into one, then have the
        summarizer produce key terms as the community name. On summarizer
        failure the previous summary is kept and the node stays dirty."""
        community = self.store.community(community_id)
        member_nodes = sorted(
            (self.store.entity(m) for m in community.members),
            key=lambda n: (n.name, n.id),
        )
        texts = [n.summary or n.name for n in member_nodes]
        try:
            summary = self._reduce(texts)
            name = self.extractor.key_terms(summary) or summary[:60]
        except ExtractorError as exc:
            logger.warning("summarizer failed for community %s: %s", community_id, exc)
            return community
        updated = replace(
            community,
            name=name,
            summary=summary,
            name_embedding=self.embedder.embed(name),
            dirty=False,
        )
        self.store.upsert_community(updated)
        return updated

    def _reduce(self, texts: list[str]) -> str:
        chunk = self.config.summary_chunk_size
        level = list(texts)
        if not level:
            return ""
        while True:
            partials = [
                self.extractor.summarize(level[i : i + chunk])
                for i in range(0, len(level), chunk)
            ]
            if len(partials) == 1:
                return partials[0]
            level = partials

    # -- refresh policy -------------------------------------------------------

    def maybe_full_refresh(self) -> bool:
        """Full refresh once the extension count reaches the threshold."""
        if self.store.staleness < self.config.staleness_threshold:
            return False
        self.full_refresh()
        return True
