"""Rerankers: reorder candidate lists to raise precision.

All of them are pure given their inputs and return a permutation of the
ids they were handed: nothing added, nothing dropped (except MMR
candidates that lack an embedding, which are excluded with a warning).
Ties break by incoming rank, then id.
"""

from __future__ import annotations

import logging
import re
from collections import deque
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import ExtractorError, UnknownId, ValidationError
from .store import GraphStore

logger = logging.getLogger(__name__)

RERANK_METHODS = ("rrf", "mmr", "episode_mentions", "node_distance", "cross_encoder")

DEFAULT_RRF_K = 60
DEFAULT_MMR_LAMBDA = 0.5


@dataclass(frozen=True)
class RerankerConfig:
    method: str = "rrf"
    rrf_k: int = DEFAULT_RRF_K
    mmr_lambda: float = DEFAULT_MMR_LAMBDA
    centroid: Optional[str] = None

    def validate(self) -> None:
        if self.method not in RERANK_METHODS:
            raise ValidationError(f"unknown reranker {self.method!r}")
        if self.rrf_k < 1:
            raise ValidationError("rrf_k must be >= 1")
        if not 0.0 <= self.mmr_lambda <= 1.0:
            raise ValidationError("mmr_lambda must be in [0, 1]")
        if self.method == "node_distance" and not self.centroid:
            raise ValidationError("node_distance requires a centroid node")


def rrf(lists: Sequence[Sequence[str]], k: int = DEFAULT_RRF_K) -> list[tuple[str, float]]:
    """Reciprocal rank fusion: score(id) = sum over lists of 1/(k + rank),
    rank 1-based. Sorted descending, ties by id."""
    scores: dict[str, float] = {}
    for ranked in lists:
        for rank, item_id in enumerate(ranked, start=1):
            scores[item_id] = scores.get(item_id, 0.0) + 1.0 / (k + rank)
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def mmr(
    candidates: Sequence[tuple[str, float, Optional[np.ndarray]]],
    lam: float = DEFAULT_MMR_LAMBDA,
) -> list[str]:
    """Maximal marginal relevance: greedily pick
    argmax lam*rel(c) - (1-lam)*max_selected cos(c, s)."""
    pool: list[tuple[int, str, float, np.ndarray]] = []
    for rank, (item_id, rel, emb) in enumerate(candidates):
        if emb is None:
            logger.warning("mmr: candidate %s has no embedding; excluded", item_id)
            continue
        pool.append((rank, item_id, rel, np.asarray(emb, dtype=np.float64)))

    selected: list[str] = []
    selected_embs: list[np.ndarray] = []
    while pool:
        best_index = None
        best_key = None
        for i, (rank, item_id, rel, emb) in enumerate(pool):
            if selected_embs:
                redundancy = max(float(np.dot(emb, s)) for s in selected_embs)
            else:
                redundancy = 0.0
            score = lam * rel - (1.0 - lam) * redundancy
            key = (-score, rank, item_id)
            if best_key is None or key < best_key:
                best_key = key
                best_index = i
        rank, item_id, rel, emb = pool.pop(best_index)
        selected.append(item_id)
        selected_embs.append(emb)
    return selected


def episode_mentions(candidate_ids: Sequence[str], store: GraphStore) -> list[str]:
    """Most-mentioned first: provenance count for edges, linked-episode
    count for entities. Stable on ties."""
    def count(item_id: str) -> int:
        if store.has_edge(item_id):
            return len(store.edge(item_id).episodes)
        if store.has_entity(item_id):
            return len(store.episodes_of(item_id))
        return 0

    return sorted(candidate_ids, key=lambda i: -count(i))


def node_distance(
    candidate_ids: Sequence[str], store: GraphStore, centroid: str
) -> list[str]:
    """Closest to the centroid first (unweighted hops over semantic
    edges); edges take the smaller endpoint distance; unreachable sinks to
    the end. Stable on ties."""
    if not store.has_entity(centroid):
        raise UnknownId(f"unknown centroid {centroid}")
    snapshot = store.snapshot()
    dist: dict[str, float] = {centroid: 0}
    queue = deque([centroid])
    while queue:
        current = queue.popleft()
        for neighbor in snapshot.neighbors(current):
            if neighbor not in dist:
                dist[neighbor] = dist[current] + 1
                queue.append(neighbor)

    def distance(item_id: str) -> float:
        if item_id in snapshot.entities:
            return dist.get(item_id, float("inf"))
        edge = snapshot.edges.get(item_id)
        if edge is not None:
            return min(
                dist.get(edge.source, float("inf")),
                dist.get(edge.target, float("inf")),
            )
        return float("inf")

    return sorted(candidate_ids, key=distance)


class CrossScorer(Protocol):
    def score(self, query: str, texts: Sequence[str]) -> list[float]: ...


class JaccardScorer:
    """Deterministic stand-in for a cross-encoder: token-set Jaccard."""

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        q = _token_set(query)
        out = []
        for text in texts:
            t = _token_set(text)
            union = q | t
            out.append(len(q & t) / len(union) if union else 0.0)
        return out


class RemoteCrossScorer:
    """HTTP adapter: POST {"query": ..., "texts": [...]} -> {"scores": [...]}."""

    def __init__(self, base_url: str, timeout: float = 5.0, transport=None) -> None:
        import httpx

        self._url = base_url.rstrip("/") + "/score"
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def score(self, query: str, texts: Sequence[str]) -> list[float]:
        import httpx

        try:
            response = self._client.post(
                self._url, json={"query": query, "texts": list(texts)}
            )
            response.raise_for_status()
            scores = response.json()["scores"]
        except (httpx.HTTPError, KeyError, ValueError) as exc:
            raise ExtractorError(f"cross-encoder scoring failed: {exc}") from exc
        if len(scores) != len(texts):
            raise ExtractorError("cross-encoder returned wrong score count")
        return [float(s) for s in scores]


def cross_encode(
    query: str,
    candidates: Sequence[tuple[str, str]],
    scorer: CrossScorer,
) -> tuple[list[str], bool]:
    """Score (query, text) pairs and sort descending; on scorer failure
    fall back to the incoming order and flag it."""
    ids = [item_id for item_id, _ in candidates]
    try:
        scores = scorer.score(query, [text for _, text in candidates])
    except ExtractorError as exc:
        logger.warning("cross-encoder unavailable, keeping input order: %s", exc)
        return list(ids), True
    ranked = sorted(
        zip(ids, scores, range(len(ids))), key=lambda row: (-row[1], row[2])
    )
    return [item_id for item_id, _, _ in ranked], False


def _token_set(text: str) -> set[str]:
    return set(t.lower() for t in re.findall(r"\w+", text))
