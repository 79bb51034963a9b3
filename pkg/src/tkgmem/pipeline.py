"""Episode ingestion: extract, resolve, annotate, invalidate.

One episode moves through the stages in a fixed order: entity
extraction (two passes), entity resolution against retrieved candidates,
fact extraction constrained to resolved entities, pair-scoped fact
deduplication, temporal annotation, contradiction invalidation, and
community extension for new nodes. The whole episode is one transaction:
an extractor failure rolls every mutation back.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .communities import CommunityManager
from .config import EngineConfig
from .errors import AlreadyIngested
from .extraction import EpisodeContext, Extractor, FactProposal
from .model import EntityNode, Episode, SemanticEdge, replace
from .store import GraphStore
from .timeutil import parse_iso

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IngestReport:
    episode_id: str
    entities_added: int = 0
    entities_merged: int = 0
    edges_added: int = 0
    edges_invalidated: int = 0


class IngestPipeline:
    def __init__(
        self,
        store: GraphStore,
        extractor: Extractor,
        embedder,
        communities: CommunityManager,
        config: EngineConfig,
    ) -> None:
        self.store = store
        self.extractor = extractor
        self.embedder = embedder
        self.communities = communities
        self.config = config

    # -- entry point -----------------------------------------------------

    def ingest(self, episode: Episode) -> IngestReport:
        """Process one episode atomically; returns mutation counts."""
        if self.store.has_episode(episode.id):
            raise AlreadyIngested(f"episode {episode.id} was already ingested")
        with self.store.transaction():
            previous = self.store.recent_episodes(self.config.previous_messages)
            self.store.add_episode(episode)
            episode = self.store.episode(episode.id)  # t_ingested now set
            ctx = EpisodeContext(current=episode, previous=tuple(previous))

            resolved, created, merged = self.extract_and_resolve_entities(ctx)
            for node_id in resolved:
                self.store.link_episode(episode.id, node_id)

            new_edges = self.extract_and_resolve_facts(ctx, resolved)
            for edge_id in new_edges:
                self.annotate_temporal(edge_id, ctx)
            invalidated: set[str] = set()
            for edge_id in new_edges:
                invalidated.update(self.invalidate_contradicted(edge_id))

            for node_id in created:
                self.communities.extend_with_node(node_id)

            return IngestReport(
                episode_id=episode.id,
                entities_added=len(created),
                entities_merged=merged,
                edges_added=len(new_edges),
                edges_invalidated=len(invalidated),
            )

    # -- entities ----------------------------------------------------------

    def extract_and_resolve_entities(
        self, ctx: EpisodeContext
    ) -> tuple[list[str], list[str], int]:
        """Returns (resolved node ids, newly created subset, merge count).

        Extraction runs twice (initial pass plus a verification pass whose
        additions are unioned in). Each proposal gathers duplicate
        candidates from both the name-vector index and the name+summary
        full-text index before the extractor decides.
        """
        proposals = list(self.extractor.extract_entities(ctx))
        for extra in self.extractor.reflect_entities(ctx, proposals):
            if extra.name.casefold() not in {p.name.casefold() for p in proposals}:
                proposals.append(extra)

        resolved: list[str] = []
        created: list[str] = []
        merged = 0
        for proposal in proposals:
            if not proposal.name.strip():
                logger.warning("extractor returned empty entity name; skipped")
                continue
            candidates = self._entity_candidates(proposal.name)
            decision = self.extractor.resolve_entity(candidates, proposal)
            if decision.duplicate and decision.id and self.store.has_entity(decision.id):
                node_id = self._merge_entity(decision.id, decision.merged_name, proposal.summary)
                merged += 1
                if node_id not in resolved:
                    resolved.append(node_id)
                continue
            node = EntityNode(
                id=self.store.new_id("entity"),
                name=proposal.name.strip(),
                summary=proposal.summary.strip(),
                name_embedding=self.embedder.embed(proposal.name.strip()),
            )
            self.store.upsert_entity(node)
            resolved.append(node.id)
            created.append(node.id)
        return resolved, created, merged

    def _entity_candidates(self, name: str) -> list[EntityNode]:
        k = self.config.candidate_k
        with self.store.read_lock():
            by_vector = self.store.entity_vectors.search(self.embedder.embed(name), k)
            by_text = self.store.entity_fulltext_index.search(name, k)
        ordered = [nid for nid, _ in by_vector]
        seen = set(ordered)
        for nid, _ in by_text:
            if nid not in seen:
                seen.add(nid)
                ordered.append(nid)
        return [self.store.entity(nid) for nid in ordered]

    def _merge_entity(self, node_id: str, merged_name: Optional[str], new_summary: str) -> str:
        node = self.store.entity(node_id)
        name = (merged_name or node.name).strip() or node.name
        summary = node.summary
        if new_summary.strip() and new_summary.strip() != node.summary:
            summary = self.extractor.summarize([node.summary, new_summary])
        embedding = node.name_embedding
        if name != node.name:
            embedding = self.embedder.embed(name)
        if name != node.name or summary != node.summary:
            self.store.upsert_entity(
                replace(node, name=name, summary=summary, name_embedding=embedding)
            )
        return node_id

    # -- facts --------------------------------------------------------------

    def extract_and_resolve_facts(
        self, ctx: EpisodeContext, entity_ids: Sequence[str]
    ) -> list[str]:
        """Create deduplicated edges for the episode; returns new edge ids.

        Deduplication candidates come only from edges already between the
        same unordered entity pair. A fact text spanning more than two
        entities is lowered to one edge per pair, all sharing a fact group.
        """
        names = {}
        for node_id in entity_ids:
            node = self.store.entity(node_id)
            names[node.name.casefold()] = node_id
        proposals = self.extractor.extract_facts(
            ctx, [self.store.entity(nid).name for nid in entity_ids]
        )

        valid: list[FactProposal] = []
        for prop in proposals:
            src = names.get(prop.source.casefold())
            tgt = names.get(prop.target.casefold())
            if src is None or tgt is None:
                logger.warning(
                    "fact references entity outside the resolved list; skipped: %r",
                    prop.fact,
                )
                continue
            if src == tgt:
                logger.warning("fact would self-loop; skipped: %r", prop.fact)
                continue
            valid.append(prop)

        new_edge_ids: list[str] = []
        for group in self._lower_hyper_edges(valid):
            fact_group_id = (
                self.store.new_id("factgroup") if len(group) > 1 else None
            )
            for prop in group:
                edge_id = self._resolve_or_create_edge(ctx, prop, names, fact_group_id)
                if edge_id is not None:
                    new_edge_ids.append(edge_id)
        return new_edge_ids

    def _lower_hyper_edges(
        self, proposals: list[FactProposal]
    ) -> list[list[FactProposal]]:
        """Group proposals by fact text; expand >2-entity groups to all pairs."""
        by_fact: dict[str, list[FactProposal]] = {}
        order: list[str] = []
        for prop in proposals:
            key = " ".join(prop.fact.split()).casefold()
            if key not in by_fact:
                by_fact[key] = []
                order.append(key)
            by_fact[key].append(prop)

        groups: list[list[FactProposal]] = []
        for key in order:
            members = by_fact[key]
            participants: list[str] = []
            for prop in members:
                for name in (prop.source, prop.target):
                    if name not in participants:
                        participants.append(name)
            if len(participants) <= 2:
                groups.append([members[0]])
                continue
            template = members[0]
            groups.append(
                [
                    FactProposal(source=a, target=b, predicate=template.predicate, fact=template.fact)
                    for a, b in itertools.combinations(participants, 2)
                ]
            )
        return groups

    def _resolve_or_create_edge(
        self,
        ctx: EpisodeContext,
        prop: FactProposal,
        names: dict[str, str],
        fact_group_id: Optional[str],
    ) -> Optional[str]:
        src = names[prop.source.casefold()]
        tgt = names[prop.target.casefold()]
        existing = self.store.edges_between(src, tgt)
        decision = self.extractor.resolve_fact(existing, prop)
        if decision.duplicate and decision.id and self.store.has_edge(decision.id):
            old = self.store.edge(decision.id)
            if ctx.current.id not in old.episodes:
                self.store.upsert_edge(
                    replace(old, episodes=old.episodes + (ctx.current.id,))
                )
            return None
        edge = SemanticEdge(
            id=self.store.new_id("edge"),
            source=src,
            target=tgt,
            predicate=prop.predicate,
            fact=prop.fact,
            fact_embedding=self.embedder.embed(prop.fact),
            fact_group=fact_group_id,
            t_created=self.store.tick(),
            episodes=(ctx.current.id,),
        )
        self.store.upsert_edge(edge)
        return edge.id

    # -- temporal annotation ---------------------------------------------------

    def annotate_temporal(self, edge_id: str, ctx: EpisodeContext) -> SemanticEdge:
        """Attach t_valid / t_invalid from the extractor; malformed or
        inverted timestamps leave the edge without temporal fields."""
        edge = self.store.edge(edge_id)
        hints = self.extractor.extract_temporal(ctx, ctx.current.t_ref, edge.fact)
        t_valid = t_invalid = None
        try:
            if hints.valid_at is not None:
                t_valid = parse_iso(hints.valid_at)
            if hints.invalid_at is not None:
                t_invalid = parse_iso(hints.invalid_at)
        except ValueError as exc:
            logger.warning(
                "extractor returned invalid timestamp for %r (%s); stored without "
                "temporal fields",
                edge.fact,
                exc,
            )
            return edge
        if t_valid is not None and t_invalid is not None and t_valid > t_invalid:
            logger.warning(
                "extractor returned inverted interval for %r; stored without "
                "temporal fields",
                edge.fact,
            )
            return edge
        if t_valid is None and t_invalid is None:
            return edge
        edge = replace(edge, t_valid=t_valid, t_invalid=t_invalid)
        self.store.upsert_edge(edge)
        return edge

    # -- invalidation ---------------------------------------------------------

    def invalidate_contradicted(self, new_edge_id: str) -> list[str]:
        """Close out contradicted edges that temporally overlap the new one.

        Candidates are the top-K semantically closest edges (fact-embedding
        cosine) among edges incident to either endpoint. A contradicted
        edge gets t_invalid = the new edge's t_valid (its creation instant
        when t_valid is unset; new information wins), clamped so the
        closed interval stays ordered, and t_expired = now. The new edge
        itself is never invalidated here.
        """
        new_edge = self.store.edge(new_edge_id)
        candidates = self._contradiction_candidates(new_edge)
        if not candidates:
            return []
        contradicted = self.extractor.detect_contradictions(new_edge, candidates)
        cutoff = new_edge.t_valid if new_edge.t_valid is not None else new_edge.t_created
        new_hi = new_edge.t_invalid  # None = open
        invalidated: list[str] = []
        for edge_id in contradicted:
            if edge_id == new_edge.id or not self.store.has_edge(edge_id):
                continue
            old = self.store.edge(edge_id)
            old_lo = old.t_valid
            old_hi = old.t_invalid
            overlaps = (old_lo is None or new_hi is None or old_lo < new_hi) and (
                old_hi is None or cutoff < old_hi
            )
            if not overlaps:
                continue
            t_invalid = cutoff
            if old_lo is not None and t_invalid < old_lo:
                # The contradiction predates the old edge's own start; the
                # old fact never held; collapse its interval to empty.
                t_invalid = old_lo
            self.store.upsert_edge(
                replace(old, t_invalid=t_invalid, t_expired=self.store.tick())
            )
            invalidated.append(edge_id)
        return invalidated

    def _contradiction_candidates(self, new_edge: SemanticEdge) -> list[SemanticEdge]:
        incident: dict[str, SemanticEdge] = {}
        for node_id in (new_edge.source, new_edge.target):
            for edge in self.store.incident_edges(node_id):
                if edge.id != new_edge.id:
                    incident[edge.id] = edge
        if not incident:
            return []
        scored = sorted(
            (
                (-float(np.dot(edge.fact_embedding, new_edge.fact_embedding)), edge.id)
                for edge in incident.values()
            ),
        )
        top = scored[: self.config.contradiction_k]
        return [incident[edge_id] for _, edge_id in top]
