"""Engine facade: one graph, full ingestion and retrieval pipeline.

Retrieval is the three-stage composition (candidate search, rerank,
context construction) with wall-clock timings per stage. Ingestion is
serial per graph; an optional journal path makes every committed episode
durable as appended records.
"""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Callable, Optional

from . import context as context_mod
from . import store as store_mod
from .communities import CommunityManager
from .config import EngineConfig
from .embedding import Embedder, HashingEmbedder
from .errors import ValidationError
from .extraction import Extractor, MockExtractor
from .model import (
    CommunityNode,
    EntityNode,
    Episode,
    SemanticEdge,
    replace,
)
from .pipeline import IngestPipeline, IngestReport
from .rerank import (
    JaccardScorer,
    RerankerConfig,
    cross_encode,
    episode_mentions,
    mmr,
    node_distance,
    rrf,
)
from .search import CandidateSet, Query, Searcher
from .store import GraphStore
from .timeutil import utc_now_ms

logger = logging.getLogger(__name__)


@dataclass
class RetrievalResult:
    edges: list[SemanticEdge]
    entities: list[EntityNode]
    communities: list[CommunityNode]
    context: str
    timings: dict[str, float] = dataclass_field(default_factory=dict)
    rerank_fallback: bool = False

    def to_json(self, include_timings: bool = True) -> dict[str, Any]:
        from .model import community_view, edge_view, entity_view

        body: dict[str, Any] = {
            "edges": [edge_view(e) for e in self.edges],
            "entities": [entity_view(n) for n in self.entities],
            "communities": [community_view(c) for c in self.communities],
            "context": self.context,
            "rerank_fallback": self.rerank_fallback,
        }
        if include_timings:
            body["timings"] = self.timings
        return body


class Engine:
    """A single graph plus its extraction, search, and rerank stack."""

    def __init__(
        self,
        config: Optional[EngineConfig] = None,
        group: str = "default",
        extractor: Optional[Extractor] = None,
        embedder: Optional[Embedder] = None,
        cross_scorer=None,
        clock: Callable[[], int] = utc_now_ms,
        journal_path: Optional[str] = None,
        store: Optional[GraphStore] = None,
    ) -> None:
        self.config = config or EngineConfig()
        self.config.validate()
        self.store = store or GraphStore(
            group=group, dimension=self.config.dimension, clock=clock
        )
        self.extractor = extractor or MockExtractor()
        self.embedder = embedder or HashingEmbedder(self.store.dimension)
        if self.embedder.dimension != self.store.dimension:
            raise ValidationError(
                "embedder dimension does not match the graph dimension"
            )
        self.cross_scorer = cross_scorer or JaccardScorer()
        self.communities = CommunityManager(
            self.store, self.extractor, self.embedder, self.config
        )
        self.pipeline = IngestPipeline(
            self.store, self.extractor, self.embedder, self.communities, self.config
        )
        self.searcher = Searcher(self.store, self.embedder, self.config)
        self.journal_path = journal_path
        self._ingest_count = 0

    # -- lifecycle -------------------------------------------------------

    @classmethod
    def open(
        cls,
        path: str,
        config: Optional[EngineConfig] = None,
        journal: bool = True,
        **kwargs,
    ) -> "Engine":
        """Load a persisted graph; missing file starts empty. With
        journal=True, committed episodes are appended to the same file."""
        cfg = config or EngineConfig()
        if os.path.exists(path):
            store = GraphStore.load(path, clock=kwargs.pop("clock", utc_now_ms))
            cfg.dimension = store.dimension
            engine = cls(config=cfg, store=store, **kwargs)
        else:
            engine = cls(config=cfg, **kwargs)
        if journal:
            engine.journal_path = path
            if not os.path.exists(path):
                store_mod.append_records(path, [engine.store._meta_record()])
        return engine

    def save(self, path: Optional[str] = None) -> None:
        target = path or self.journal_path
        if target is None:
            raise ValidationError("no path to persist to")
        self.store.persist(target)

    # -- ingestion -------------------------------------------------------------

    def ingest_episode(
        self,
        kind: str,
        content: str,
        t_ref: int,
        actor: Optional[str] = None,
        episode_id: Optional[str] = None,
    ) -> IngestReport:
        episode = Episode(
            id=episode_id or "",
            kind=kind,
            content=content,
            actor=actor,
            t_ref=t_ref,
            group=self.store.group,
        )
        return self.ingest(episode)

    def ingest(self, episode: Episode) -> IngestReport:
        with self.store.write_lock():
            self.store.begin()
            try:
                if not episode.id:
                    # Allocated under the transaction so a rollback also
                    # restores the id sequence (byte-identical guarantee).
                    episode = replace(episode, id=self.store.new_id("episode"))
                report = self.pipeline.ingest(episode)
            except BaseException:
                self.store.rollback()
                raise
            records = self.store.commit()
            if self.journal_path and records:
                store_mod.append_records(self.journal_path, records)
            self._ingest_count += 1
            if self.communities.maybe_full_refresh() and self.journal_path:
                # Full refresh rewrites community state wholesale; compact.
                self.store.persist(self.journal_path)
            return report

    # -- retrieval ----------------------------------------------------------------

    def retrieve(
        self,
        query: Query,
        rerank: Optional[RerankerConfig] = None,
    ) -> RetrievalResult:
        """search -> rerank -> construct, with per-stage timings (ms)."""
        rerank = rerank or RerankerConfig(
            method=self.config.default_reranker,
            rrf_k=self.config.rrf_k,
            mmr_lambda=self.config.mmr_lambda,
        )
        rerank.validate()

        t0 = time.perf_counter()
        candidates = self.searcher.search(query)
        t1 = time.perf_counter()
        edge_ids, entity_ids, community_ids, fallback = self._rerank(
            query, candidates, rerank
        )
        t2 = time.perf_counter()
        edges = [self.store.edge(i) for i in edge_ids[: query.limit]]
        entities = [self.store.entity(i) for i in entity_ids[: query.limit]]
        communities = [self.store.community(i) for i in community_ids[: query.limit]]
        text = context_mod.build_context(
            edges,
            entities,
            communities,
            include_communities=self.config.include_communities,
        )
        t3 = time.perf_counter()
        return RetrievalResult(
            edges=edges,
            entities=entities,
            communities=communities,
            context=text,
            timings={
                "search_ms": (t1 - t0) * 1000.0,
                "rerank_ms": (t2 - t1) * 1000.0,
                "construct_ms": (t3 - t2) * 1000.0,
                "total_ms": (t3 - t0) * 1000.0,
            },
            rerank_fallback=fallback,
        )

    def _rerank(
        self, query: Query, candidates: CandidateSet, config: RerankerConfig
    ) -> tuple[list[str], list[str], list[str], bool]:
        """Apply the configured reranker independently per result type."""
        out: list[list[str]] = []
        fallback = False
        for kind in ("edges", "entities", "communities"):
            fused = rrf(candidates.id_lists(kind), k=config.rrf_k)
            if config.method == "rrf":
                out.append([item_id for item_id, _ in fused])
                continue
            if config.method == "mmr":
                triples = [
                    (item_id, score, self._embedding_of(kind, item_id))
                    for item_id, score in fused
                ]
                out.append(mmr(triples, lam=config.mmr_lambda))
                continue
            base = [item_id for item_id, _ in fused]
            if config.method == "episode_mentions":
                out.append(episode_mentions(base, self.store))
            elif config.method == "node_distance":
                out.append(node_distance(base, self.store, config.centroid))
            elif config.method == "cross_encoder":
                texts = [(item_id, self._text_of(kind, item_id)) for item_id in base]
                ranked, failed = cross_encode(query.text, texts, self.cross_scorer)
                fallback = fallback or failed
                out.append(ranked)
            else:  # pragma: no cover - RerankerConfig.validate rejects
                raise ValidationError(f"unknown reranker {config.method!r}")
        return out[0], out[1], out[2], fallback

    def _embedding_of(self, kind: str, item_id: str):
        if kind == "edges":
            return self.store.edge(item_id).fact_embedding
        if kind == "entities":
            return self.store.entity(item_id).name_embedding
        return self.store.community(item_id).name_embedding

    def _text_of(self, kind: str, item_id: str) -> str:
        if kind == "edges":
            return self.store.edge(item_id).fact
        if kind == "entities":
            node = self.store.entity(item_id)
            return f"{node.name}: {node.summary}"
        return self.store.community(item_id).summary

    # -- inspection -----------------------------------------------------------------

    def entity(self, node_id: str) -> EntityNode:
        return self.store.entity(node_id)

    def edge(self, edge_id: str) -> SemanticEdge:
        return self.store.edge(edge_id)

    def refresh_communities(self) -> int:
        count = self.communities.full_refresh()
        if self.journal_path:
            self.store.persist(self.journal_path)
        return count
