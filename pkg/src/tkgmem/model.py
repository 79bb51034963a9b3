"""Domain types for the three-tier graph.

Stored values are immutable: mutations go through the store, which swaps in
replacement instances. Embeddings are numpy float64 arrays marked read-only
when they enter the store.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, replace
from typing import Any, Optional

import numpy as np

from .errors import ValidationError
from .timeutil import format_iso

NodeId = str
EdgeId = str
EpisodeId = str
CommunityId = str

EPISODE_KINDS = frozenset({"message", "text", "json"})

UNIT_NORM_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class Episode:
    """Raw ingested unit; the non-lossy source of record."""

    id: EpisodeId
    kind: str
    content: str
    t_ref: int
    actor: Optional[str] = None
    t_ingested: Optional[int] = None
    group: str = ""

    def validate(self) -> None:
        if self.kind not in EPISODE_KINDS:
            raise ValidationError(f"unknown episode kind: {self.kind!r}")
        if not self.content or not self.content.strip():
            from .errors import EmptyContent

            raise EmptyContent("episode content is empty")
        if self.kind == "message" and not self.actor:
            raise ValidationError("message episode requires an actor")


@dataclass(frozen=True, eq=False)
class EntityNode:
    """Resolved semantic entity."""

    id: NodeId
    name: str
    summary: str
    name_embedding: np.ndarray
    community: Optional[CommunityId] = None

    def validate(self, dimension: int) -> None:
        if not self.name or not self.name.strip():
            raise ValidationError("entity name is empty")
        _check_embedding(self.name_embedding, dimension, "entity name embedding")


@dataclass(frozen=True, eq=False)
class SemanticEdge:
    """A fact between two entities with bi-temporal bookkeeping.

    t_created / t_expired live on the transactional timeline (when the
    system learned / retired the fact); t_valid / t_invalid live on the
    event timeline (when the fact held in the world). The validity
    interval is half-open: [t_valid, t_invalid).
    """

    id: EdgeId
    source: NodeId
    target: NodeId
    predicate: str
    fact: str
    fact_embedding: np.ndarray
    t_created: int
    episodes: tuple[EpisodeId, ...]
    fact_group: Optional[str] = None
    t_expired: Optional[int] = None
    t_valid: Optional[int] = None
    t_invalid: Optional[int] = None

    def validate(self, dimension: int) -> None:
        from .errors import InvalidInterval, SelfLoop

        if self.source == self.target:
            raise SelfLoop(f"edge {self.id} connects {self.source} to itself")
        if not self.episodes:
            raise ValidationError("edge has no provenance episodes")
        if self.t_valid is not None and self.t_invalid is not None:
            if self.t_valid > self.t_invalid:
                raise InvalidInterval(
                    f"t_valid {self.t_valid} > t_invalid {self.t_invalid}"
                )
        if self.t_expired is not None and self.t_created > self.t_expired:
            raise InvalidInterval(
                f"t_created {self.t_created} > t_expired {self.t_expired}"
            )
        _check_embedding(self.fact_embedding, dimension, "fact embedding")

    def pair(self) -> tuple[NodeId, NodeId]:
        """Unordered endpoint pair, canonically sorted."""
        return (self.source, self.target) if self.source <= self.target else (self.target, self.source)


@dataclass(frozen=True, eq=False)
class EpisodicEdge:
    """Provenance link between an episode and an entity it mentions."""

    id: EdgeId
    episode: EpisodeId
    entity: NodeId


@dataclass(frozen=True, eq=False)
class CommunityNode:
    """Cluster of entities with a generated name (key terms) and summary."""

    id: CommunityId
    name: str
    summary: str
    name_embedding: np.ndarray
    members: frozenset[NodeId]
    dirty: bool = False

    def validate(self, dimension: int) -> None:
        if not self.members:
            raise ValidationError("community has no members")
        _check_embedding(self.name_embedding, dimension, "community name embedding")


def valid_at(edge: SemanticEdge, t_ms: int) -> bool:
    """True iff the fact held at instant t on the event timeline.

    Unset bounds are open; the interval is half-open so a fact is no
    longer true at its own t_invalid.
    """
    if edge.t_valid is not None and t_ms < edge.t_valid:
        return False
    if edge.t_invalid is not None and t_ms >= edge.t_invalid:
        return False
    return True


def _check_embedding(vec: np.ndarray, dimension: int, what: str) -> None:
    from .errors import DimensionMismatch

    if not isinstance(vec, np.ndarray) or vec.ndim != 1:
        raise ValidationError(f"{what} must be a 1-D vector")
    if vec.shape[0] != dimension:
        raise DimensionMismatch(
            f"{what} has dimension {vec.shape[0]}, graph uses {dimension}"
        )
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > UNIT_NORM_TOLERANCE:
        raise ValidationError(f"{what} is not unit-norm (||v|| = {norm})")


def freeze_vector(vec: np.ndarray) -> np.ndarray:
    """Return a read-only float64 copy (stored objects must be immutable)."""
    out = np.asarray(vec, dtype=np.float64).copy()
    out.setflags(write=False)
    return out


# --- record codec (persistence + API views) --------------------------------


def _encode_vector(vec: np.ndarray) -> str:
    return base64.b64encode(np.asarray(vec, dtype="<f8").tobytes()).decode("ascii")


def _decode_vector(data: str) -> np.ndarray:
    return freeze_vector(np.frombuffer(base64.b64decode(data), dtype="<f8"))


def episode_to_record(ep: Episode) -> dict[str, Any]:
    return {
        "t": "episode",
        "id": ep.id,
        "kind": ep.kind,
        "content": ep.content,
        "actor": ep.actor,
        "t_ref": ep.t_ref,
        "t_ingested": ep.t_ingested,
        "group": ep.group,
    }


def episode_from_record(rec: dict[str, Any]) -> Episode:
    return Episode(
        id=rec["id"],
        kind=rec["kind"],
        content=rec["content"],
        actor=rec.get("actor"),
        t_ref=rec["t_ref"],
        t_ingested=rec.get("t_ingested"),
        group=rec.get("group", ""),
    )


def entity_to_record(node: EntityNode) -> dict[str, Any]:
    return {
        "t": "entity",
        "id": node.id,
        "name": node.name,
        "summary": node.summary,
        "embedding": _encode_vector(node.name_embedding),
        "community": node.community,
    }


def entity_from_record(rec: dict[str, Any]) -> EntityNode:
    return EntityNode(
        id=rec["id"],
        name=rec["name"],
        summary=rec["summary"],
        name_embedding=_decode_vector(rec["embedding"]),
        community=rec.get("community"),
    )


def edge_to_record(edge: SemanticEdge) -> dict[str, Any]:
    return {
        "t": "edge",
        "id": edge.id,
        "source": edge.source,
        "target": edge.target,
        "predicate": edge.predicate,
        "fact": edge.fact,
        "embedding": _encode_vector(edge.fact_embedding),
        "fact_group": edge.fact_group,
        "t_created": edge.t_created,
        "t_expired": edge.t_expired,
        "t_valid": edge.t_valid,
        "t_invalid": edge.t_invalid,
        "episodes": list(edge.episodes),
    }


def edge_from_record(rec: dict[str, Any]) -> SemanticEdge:
    return SemanticEdge(
        id=rec["id"],
        source=rec["source"],
        target=rec["target"],
        predicate=rec["predicate"],
        fact=rec["fact"],
        fact_embedding=_decode_vector(rec["embedding"]),
        fact_group=rec.get("fact_group"),
        t_created=rec["t_created"],
        t_expired=rec.get("t_expired"),
        t_valid=rec.get("t_valid"),
        t_invalid=rec.get("t_invalid"),
        episodes=tuple(rec["episodes"]),
    )


def link_to_record(link: EpisodicEdge) -> dict[str, Any]:
    return {"t": "link", "id": link.id, "episode": link.episode, "entity": link.entity}


def link_from_record(rec: dict[str, Any]) -> EpisodicEdge:
    return EpisodicEdge(id=rec["id"], episode=rec["episode"], entity=rec["entity"])


def community_to_record(node: CommunityNode) -> dict[str, Any]:
    return {
        "t": "community",
        "id": node.id,
        "name": node.name,
        "summary": node.summary,
        "embedding": _encode_vector(node.name_embedding),
        "members": sorted(node.members),
        "dirty": node.dirty,
    }


def community_from_record(rec: dict[str, Any]) -> CommunityNode:
    return CommunityNode(
        id=rec["id"],
        name=rec["name"],
        summary=rec["summary"],
        name_embedding=_decode_vector(rec["embedding"]),
        members=frozenset(rec["members"]),
        dirty=rec.get("dirty", False),
    )


# --- API views (JSON-safe, ISO timestamps) ---------------------------------


def _iso_or_none(ms: Optional[int]) -> Optional[str]:
    return None if ms is None else format_iso(ms)


def episode_view(ep: Episode) -> dict[str, Any]:
    return {
        "id": ep.id,
        "kind": ep.kind,
        "content": ep.content,
        "actor": ep.actor,
        "t_ref": _iso_or_none(ep.t_ref),
        "t_ingested": _iso_or_none(ep.t_ingested),
        "group": ep.group,
    }


def entity_view(node: EntityNode, include_embedding: bool = False) -> dict[str, Any]:
    view: dict[str, Any] = {
        "id": node.id,
        "name": node.name,
        "summary": node.summary,
        "community": node.community,
    }
    if include_embedding:
        view["name_embedding"] = [float(x) for x in node.name_embedding]
    return view


def edge_view(edge: SemanticEdge, include_embedding: bool = False) -> dict[str, Any]:
    view: dict[str, Any] = {
        "id": edge.id,
        "source": edge.source,
        "target": edge.target,
        "predicate": edge.predicate,
        "fact": edge.fact,
        "fact_group": edge.fact_group,
        "t_created": _iso_or_none(edge.t_created),
        "t_expired": _iso_or_none(edge.t_expired),
        "t_valid": _iso_or_none(edge.t_valid),
        "t_invalid": _iso_or_none(edge.t_invalid),
        "episodes": list(edge.episodes),
    }
    if include_embedding:
        view["fact_embedding"] = [float(x) for x in edge.fact_embedding]
    return view


def community_view(node: CommunityNode, include_embedding: bool = False) -> dict[str, Any]:
    view: dict[str, Any] = {
        "id": node.id,
        "name": node.name,
        "summary": node.summary,
        "members": sorted(node.members),
        "dirty": node.dirty,
    }
    if include_embedding:
        view["name_embedding"] = [float(x) for x in node.name_embedding]
    return view


__all__ = [
    "NodeId",
    "EdgeId",
    "EpisodeId",
    "CommunityId",
    "EPISODE_KINDS",
    "Episode",
    "EntityNode",
    "SemanticEdge",
    "EpisodicEdge",
    "CommunityNode",
    "valid_at",
    "freeze_vector",
    "replace",
]
