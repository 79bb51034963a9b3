"""Candidate retrieval: cosine, BM25, and graph BFS over one store.

Each method produces its own ranked (id, score) lists per result type
(semantic edges, entity nodes, community nodes); downstream fusion needs
the per-method ranks, so the lists stay separate. An as-of filter drops
edges that were not valid at the requested instant.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import EngineConfig
from .errors import DimensionMismatch, UnknownId, ValidationError
from .model import valid_at
from .store import GraphStore

SEARCH_METHODS = ("cosine", "bm25", "bfs")


@dataclass
class Query:
    text: str = ""
    embedding: Optional[np.ndarray] = None
    limit: int = 20
    seeds: Optional[tuple[str, ...]] = None
    as_of: Optional[int] = None
    methods: tuple[str, ...] = SEARCH_METHODS

    def __post_init__(self) -> None:
        if self.limit < 1:
            raise ValidationError("query limit must be >= 1")
        if not self.methods:
            raise ValidationError("at least one search method must be enabled")
        unknown = set(self.methods) - set(SEARCH_METHODS)
        if unknown:
            raise ValidationError(f"unknown search methods: {sorted(unknown)}")


@dataclass
class MethodResults:
    """Ranked (id, score) lists for one search method."""

    edges: list[tuple[str, float]] = field(default_factory=list)
    entities: list[tuple[str, float]] = field(default_factory=list)
    communities: list[tuple[str, float]] = field(default_factory=list)


@dataclass
class CandidateSet:
    per_method: dict[str, MethodResults] = field(default_factory=dict)

    def id_lists(self, kind: str) -> list[list[str]]:
        """Per-method ranked id lists (method order is fixed), for fusion."""
        lists = []
        for method in SEARCH_METHODS:
            results = self.per_method.get(method)
            if results is None:
                continue
            ranked = getattr(results, kind)
            if ranked:
                lists.append([item_id for item_id, _ in ranked])
        return lists

    def union_ids(self, kind: str) -> list[str]:
        seen: list[str] = []
        for id_list in self.id_lists(kind):
            for item_id in id_list:
                if item_id not in seen:
                    seen.append(item_id)
        return seen


class Searcher:
    def __init__(self, store: GraphStore, embedder, config: EngineConfig) -> None:
        self.store = store
        self.embedder = embedder
        self.config = config

    def search(self, query: Query) -> CandidateSet:
        """Run every enabled method; drop edges failing the as-of filter."""
        out = CandidateSet()
        if "cosine" in query.methods:
            out.per_method["cosine"] = self.search_cosine(query)
        if "bm25" in query.methods:
            out.per_method["bm25"] = self.search_bm25(query)
        if "bfs" in query.methods:
            out.per_method["bfs"] = self.search_bfs(query)
        if query.as_of is not None:
            for results in out.per_method.values():
                results.edges = [
                    (edge_id, score)
                    for edge_id, score in results.edges
                    if valid_at(self.store.edge(edge_id), query.as_of)
                ]
        return out

    def search_cosine(self, query: Query) -> MethodResults:
        vector = query.embedding
        if vector is None:
            vector = self.embedder.embed(query.text)
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (self.store.dimension,):
            raise DimensionMismatch(
                f"query embedding has shape {vector.shape}, graph dimension is "
                f"{self.store.dimension}"
            )
        limit = query.limit
        with self.store.read_lock():
            return MethodResults(
                edges=self.store.fact_vectors.search(vector, limit),
                entities=self.store.entity_vectors.search(vector, limit),
                communities=self.store.community_vectors.search(vector, limit),
            )

    def search_bm25(self, query: Query) -> MethodResults:
        limit = query.limit
        with self.store.read_lock():
            return MethodResults(
                edges=self.store.fact_text_index.search(query.text, limit),
                entities=self.store.entity_name_index.search(query.text, limit),
                communities=self.store.community_name_index.search(query.text, limit),
            )

    def search_bfs(self, query: Query) -> MethodResults:
        """Breadth-first expansion from seed entities.

        Seeds may be entity or episode ids (episodes seed their linked
        entities); with no explicit seeds, the entities of the most recent
        episodes are used. Traversal crosses semantic edges directly and
        episodic links through the shared episode (two hops). Hits score
        1 / (1 + hop distance); an edge's distance is the deeper of its
        endpoints.
        """
        with self.store.read_lock():
            view = self.store.adjacency_view()
            seeds = self._resolve_seeds(query, view)
            if not seeds:
                return MethodResults()
            depth = self.config.bfs_depth

            queue: deque[tuple[str, str, int]] = deque(
                ("n", entity_id, 0) for entity_id in seeds
            )
            node_dist: dict[str, int] = {e: 0 for e in seeds}
            seen: set[tuple[str, str]] = {("n", e) for e in seeds}
            while queue:
                kind, obj_id, d = queue.popleft()
                if d >= depth:
                    continue
                if kind == "n":
                    for edge_id in view.entity_edges.get(obj_id, ()):
                        edge = view.edges[edge_id]
                        other = edge.target if edge.source == obj_id else edge.source
                        if ("n", other) not in seen:
                            seen.add(("n", other))
                            node_dist[other] = d + 1
                            queue.append(("n", other, d + 1))
                    for episode_id in view.entity_episodes.get(obj_id, ()):
                        if ("e", episode_id) not in seen:
                            seen.add(("e", episode_id))
                            queue.append(("e", episode_id, d + 1))
                else:
                    for entity_id in view.episode_entities.get(obj_id, ()):
                        if ("n", entity_id) not in seen:
                            seen.add(("n", entity_id))
                            node_dist[entity_id] = d + 1
                            queue.append(("n", entity_id, d + 1))

            entities = sorted(
                ((nid, 1.0 / (1.0 + d)) for nid, d in node_dist.items()),
                key=lambda kv: (-kv[1], kv[0]),
            )[: query.limit]

            # Only edges incident to visited nodes can qualify; no full scan.
            edge_hits: list[tuple[str, float]] = []
            checked: set[str] = set()
            for node_id in node_dist:
                for edge_id in view.entity_edges.get(node_id, ()):
                    if edge_id in checked:
                        continue
                    checked.add(edge_id)
                    edge = view.edges[edge_id]
                    if edge.source in node_dist and edge.target in node_dist:
                        edge_d = max(node_dist[edge.source], node_dist[edge.target])
                        if edge_d <= depth:
                            edge_hits.append((edge_id, 1.0 / (1.0 + edge_d)))
            edge_hits.sort(key=lambda kv: (-kv[1], kv[0]))

            return MethodResults(edges=edge_hits[: query.limit], entities=entities)

    def _resolve_seeds(self, query: Query, view) -> list[str]:
        if query.seeds:
            seeds: list[str] = []
            for seed in query.seeds:
                if seed in view.entities:
                    seeds.append(seed)
                elif seed in view.episodes:
                    seeds.extend(
                        e for e in view.episode_entities.get(seed, ()) if e not in seeds
                    )
                else:
                    raise UnknownId(f"unknown BFS seed {seed}")
            return sorted(set(seeds))
        count = self.config.recency_seed_episodes
        recent = view.episode_order[-count:] if count > 0 else ()
        seeds = []
        for episode_id in recent:
            for entity_id in view.episode_entities.get(episode_id, ()):
                if entity_id not in seeds:
                    seeds.append(entity_id)
        return sorted(seeds)
