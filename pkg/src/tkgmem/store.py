"""Embedded storage for the three-tier graph.

Keeps every object in memory behind a readers-writer lock, maintains
adjacency and search indexes atomically with each mutation, and persists
to a single append-only record log ("TKG1" magic, little-endian
length-prefixed JSON records, trailing CRC32 per record). Indexes are
rebuilt from the log on load.

Concurrency model: one writer at a time, any number of concurrent
readers. The write lock is reentrant so an ingest can span many
mutations; point-in-time reads go through snapshots.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
import threading
import zlib
from contextlib import contextmanager
from dataclasses import dataclass, replace
from typing import Any, Callable, Iterator, Optional

import numpy as np

from . import model
from .errors import (
    CorruptStore,
    DanglingReference,
    DuplicateId,
    UnknownId,
    ValidationError,
)
from .model import (
    CommunityNode,
    EntityNode,
    Episode,
    EpisodicEdge,
    SemanticEdge,
)
from .textindex import InvertedIndex
from .timeutil import utc_now_ms
from .vectorindex import VectorIndex

logger = logging.getLogger(__name__)

MAGIC = b"TKG1"
FORMAT_VERSION = 1

_LEN = struct.Struct("<I")


class RWLock:
    """Readers-writer lock, write side reentrant.

    The thread holding the write lock may also take read locks (ingest
    pipelines read candidate state mid-transaction). A sole reader may
    upgrade to writer.
    """

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers: dict[int, int] = {}
        self._writer: Optional[int] = None
        self._write_depth = 0

    @contextmanager
    def read(self) -> Iterator[None]:
        ident = threading.get_ident()
        with self._cond:
            while self._writer is not None and self._writer != ident:
                self._cond.wait()
            self._readers[ident] = self._readers.get(ident, 0) + 1
        try:
            yield
        finally:
            with self._cond:
                depth = self._readers.get(ident, 0) - 1
                if depth <= 0:
                    self._readers.pop(ident, None)
                else:
                    self._readers[ident] = depth
                self._cond.notify_all()

    @contextmanager
    def write(self) -> Iterator[None]:
        ident = threading.get_ident()
        with self._cond:
            if self._writer == ident:
                self._write_depth += 1
            else:
                while self._writer is not None or any(
                    t != ident for t in self._readers
                ):
                    self._cond.wait()
                self._writer = ident
                self._write_depth = 1
        try:
            yield
        finally:
            with self._cond:
                self._write_depth -= 1
                if self._write_depth == 0:
                    self._writer = None
                    self._cond.notify_all()


@dataclass
class GraphSnapshot:
    """Immutable point-in-time view; unaffected by later writes."""

    taken_at: int
    episodes: dict[str, Episode]
    entities: dict[str, EntityNode]
    edges: dict[str, SemanticEdge]
    episodic: dict[str, EpisodicEdge]
    communities: dict[str, CommunityNode]
    pair_edges: dict[tuple[str, str], tuple[str, ...]]
    entity_edges: dict[str, tuple[str, ...]]
    entity_episodes: dict[str, tuple[str, ...]]
    episode_entities: dict[str, tuple[str, ...]]
    episode_order: tuple[str, ...]

    def entity(self, node_id: str) -> EntityNode:
        try:
            return self.entities[node_id]
        except KeyError:
            raise UnknownId(f"unknown entity {node_id}") from None

    def edge(self, edge_id: str) -> SemanticEdge:
        try:
            return self.edges[edge_id]
        except KeyError:
            raise UnknownId(f"unknown edge {edge_id}") from None

    def edges_between(self, a: str, b: str) -> list[SemanticEdge]:
        if a not in self.entities or b not in self.entities:
            raise UnknownId("unknown entity in pair query")
        key = (a, b) if a <= b else (b, a)
        return [self.edges[eid] for eid in self.pair_edges.get(key, ())]

    def neighbors(self, node_id: str) -> list[str]:
        """Adjacent entities via semantic edges (parallel edges collapse)."""
        seen: set[str] = set()
        for eid in self.entity_edges.get(node_id, ()):
            edge = self.edges[eid]
            other = edge.target if edge.source == node_id else edge.source
            seen.add(other)
        return sorted(seen)


@dataclass
class AdjacencyView:
    """Zero-copy window onto the store's adjacency; read-lock only."""

    edges: dict[str, SemanticEdge]
    entities: dict[str, EntityNode]
    episodes: dict[str, Episode]
    entity_edges: dict[str, tuple[str, ...]]
    entity_episodes: dict[str, tuple[str, ...]]
    episode_entities: dict[str, tuple[str, ...]]
    episode_order: list[str]


class _Txn:
    __slots__ = ("undo", "touched", "counters")

    def __init__(self, counters: tuple[int, int, int]) -> None:
        self.undo: list[Callable[[], None]] = []
        self.touched: dict[tuple[str, str], bool] = {}
        self.counters = counters


class GraphStore:
    """One graph: objects, adjacency, full-text and vector indexes."""

    def __init__(
        self,
        group: str = "default",
        dimension: int = 1024,
        clock: Callable[[], int] = utc_now_ms,
    ) -> None:
        self.group = group
        self.dimension = dimension
        self._clock = clock
        self._lock = RWLock()

        self._episodes: dict[str, Episode] = {}
        self._entities: dict[str, EntityNode] = {}
        self._edges: dict[str, SemanticEdge] = {}
        self._episodic: dict[str, EpisodicEdge] = {}
        self._communities: dict[str, CommunityNode] = {}

        self._episode_order: list[str] = []
        self._pair_edges: dict[tuple[str, str], tuple[str, ...]] = {}
        self._entity_edges: dict[str, tuple[str, ...]] = {}
        self._entity_episodes: dict[str, tuple[str, ...]] = {}
        self._episode_entities: dict[str, tuple[str, ...]] = {}
        self._link_by_pair: dict[tuple[str, str], str] = {}

        self.fact_text_index = InvertedIndex()
        self.entity_name_index = InvertedIndex()
        self.entity_fulltext_index = InvertedIndex()
        self.community_name_index = InvertedIndex()
        self.fact_vectors = VectorIndex(dimension)
        self.entity_vectors = VectorIndex(dimension)
        self.community_vectors = VectorIndex(dimension)

        self._next_seq = 0
        self._last_tprime = 0
        self._staleness = 0
        self._txn: Optional[_Txn] = None

    # -- locking / time ------------------------------------------------

    def read_lock(self):
        return self._lock.read()

    def write_lock(self):
        return self._lock.write()

    def now(self) -> int:
        return self._clock()

    def tick(self) -> int:
        """Next transactional-timeline instant; never decreases."""
        t = max(self._clock(), self._last_tprime)
        self._last_tprime = t
        return t

    def new_id(self, kind: str) -> str:
        """Opaque 128-bit id, deterministic in (group, allocation order)."""
        seq = self._next_seq
        self._next_seq += 1
        return hashlib.blake2b(
            f"{self.group}:{kind}:{seq}".encode(), digest_size=16
        ).hexdigest()

    # -- transactions ----------------------------------------------------

    @contextmanager
    def transaction(self) -> Iterator[None]:
        """Group mutations; on exception every one is undone, leaving the
        graph byte-identical to its state at entry."""
        with self._lock.write():
            if self._txn is not None:
                # Nested scope joins the outer transaction.
                yield
                return
            self._txn = _Txn(
                (self._next_seq, self._last_tprime, self._staleness)
            )
            try:
                yield
            except BaseException:
                txn = self._txn
                self._txn = None
                for undo in reversed(txn.undo):
                    undo()
                self._next_seq, self._last_tprime, self._staleness = txn.counters
                raise
            else:
                self._txn = None

    def begin(self) -> None:
        if self._txn is not None:
            raise ValidationError("transaction already open")
        self._txn = _Txn((self._next_seq, self._last_tprime, self._staleness))

    def commit(self) -> list[dict[str, Any]]:
        """Close the open transaction; return replayable records for every
        touched object (journal appends)."""
        txn = self._txn
        if txn is None:
            raise ValidationError("no open transaction")
        self._txn = None
        records: list[dict[str, Any]] = []
        for (kind, obj_id), alive in txn.touched.items():
            records.append(self._record_for(kind, obj_id, alive))
        if records:
            records.append(self._meta_record())
        return records

    def rollback(self) -> None:
        txn = self._txn
        if txn is None:
            raise ValidationError("no open transaction")
        self._txn = None
        for undo in reversed(txn.undo):
            undo()
        self._next_seq, self._last_tprime, self._staleness = txn.counters

    def _track(self, kind: str, obj_id: str, alive: bool, undo: Callable[[], None]) -> None:
        if self._txn is not None:
            self._txn.undo.append(undo)
            self._txn.touched[(kind, obj_id)] = alive

    def _record_for(self, kind: str, obj_id: str, alive: bool) -> dict[str, Any]:
        if not alive:
            return {"t": "del", "kind": kind, "id": obj_id}
        if kind == "episode":
            return model.episode_to_record(self._episodes[obj_id])
        if kind == "entity":
            return model.entity_to_record(self._entities[obj_id])
        if kind == "edge":
            return model.edge_to_record(self._edges[obj_id])
        if kind == "link":
            return model.link_to_record(self._episodic[obj_id])
        if kind == "community":
            return model.community_to_record(self._communities[obj_id])
        raise ValidationError(f"unknown record kind {kind}")

    # -- episodes --------------------------------------------------------

    def add_episode(self, ep: Episode) -> str:
        with self._lock.write():
            ep.validate()
            if ep.id in self._episodes:
                raise DuplicateId(f"episode {ep.id} already stored")
            if ep.t_ingested is None:
                ep = replace(ep, t_ingested=self.tick())
            else:
                self._last_tprime = max(self._last_tprime, ep.t_ingested)
            if not ep.group:
                ep = replace(ep, group=self.group)
            self._episodes[ep.id] = ep
            self._episode_order.append(ep.id)
            self._episode_entities[ep.id] = ()
            eid = ep.id
            self._track("episode", eid, True, lambda: self._drop_episode(eid))
            return ep.id

    def _drop_episode(self, ep_id: str) -> None:
        self._episodes.pop(ep_id, None)
        self._episode_entities.pop(ep_id, None)
        if self._episode_order and self._episode_order[-1] == ep_id:
            self._episode_order.pop()
        else:  # pragma: no cover - undo always unwinds in reverse order
            self._episode_order = [e for e in self._episode_order if e != ep_id]

    def episode(self, ep_id: str) -> Episode:
        with self._lock.read():
            try:
                return self._episodes[ep_id]
            except KeyError:
                raise UnknownId(f"unknown episode {ep_id}") from None

    def has_episode(self, ep_id: str) -> bool:
        with self._lock.read():
            return ep_id in self._episodes

    def recent_episodes(self, count: int, exclude: Optional[str] = None) -> list[Episode]:
        """Most recent `count` episodes in ascending ingestion order."""
        with self._lock.read():
            ids = [e for e in self._episode_order if e != exclude]
            return [self._episodes[e] for e in ids[-count:]] if count > 0 else []

    # -- entities ----------------------------------------------------------

    def upsert_entity(self, node: EntityNode) -> str:
        with self._lock.write():
            node.validate(self.dimension)
            node = replace(node, name_embedding=model.freeze_vector(node.name_embedding))
            prev = self._entities.get(node.id)
            self._apply_entity(node)
            nid = node.id
            self._track("entity", nid, True, lambda: self._unapply_entity(nid, prev))
            return node.id

    def _apply_entity(self, node: EntityNode) -> None:
        self._entities[node.id] = node
        self.entity_name_index.upsert(node.id, node.name)
        self.entity_fulltext_index.upsert(node.id, f"{node.name}\n{node.summary}")
        self.entity_vectors.upsert(node.id, node.name_embedding)
        self._entity_edges.setdefault(node.id, ())
        self._entity_episodes.setdefault(node.id, ())

    def _unapply_entity(self, node_id: str, prev: Optional[EntityNode]) -> None:
        if prev is not None:
            self._apply_entity(prev)
            return
        self._entities.pop(node_id, None)
        self.entity_name_index.remove(node_id)
        self.entity_fulltext_index.remove(node_id)
        self.entity_vectors.remove(node_id)
        self._entity_edges.pop(node_id, None)
        self._entity_episodes.pop(node_id, None)

    def entity(self, node_id: str) -> EntityNode:
        with self._lock.read():
            try:
                return self._entities[node_id]
            except KeyError:
                raise UnknownId(f"unknown entity {node_id}") from None

    def has_entity(self, node_id: str) -> bool:
        with self._lock.read():
            return node_id in self._entities

    # -- semantic edges ----------------------------------------------------

    def upsert_edge(self, edge: SemanticEdge) -> str:
        with self._lock.write():
            edge.validate(self.dimension)
            if edge.source not in self._entities or edge.target not in self._entities:
                raise DanglingReference(
                    f"edge {edge.id} references missing endpoint"
                )
            for ep_id in edge.episodes:
                if ep_id not in self._episodes:
                    raise DanglingReference(
                        f"edge {edge.id} cites missing episode {ep_id}"
                    )
            prev = self._edges.get(edge.id)
            if prev is not None and (prev.source, prev.target) != (edge.source, edge.target):
                raise ValidationError("edge endpoints are immutable")
            edge = replace(edge, fact_embedding=model.freeze_vector(edge.fact_embedding))

            key = edge.pair()
            prev_pair = self._pair_edges.get(key)
            prev_src = self._entity_edges.get(edge.source)
            prev_tgt = self._entity_edges.get(edge.target)
            if prev is None:
                self._pair_edges[key] = (self._pair_edges.get(key, ())) + (edge.id,)
                self._entity_edges[edge.source] = self._entity_edges.get(edge.source, ()) + (edge.id,)
                self._entity_edges[edge.target] = self._entity_edges.get(edge.target, ()) + (edge.id,)
            self._edges[edge.id] = edge
            if prev is None or prev.fact != edge.fact:
                self.fact_text_index.upsert(edge.id, edge.fact)
            if prev is None or not np.array_equal(prev.fact_embedding, edge.fact_embedding):
                self.fact_vectors.upsert(edge.id, edge.fact_embedding)

            eid = edge.id

            def undo() -> None:
                if prev is not None:
                    self._edges[eid] = prev
                    self.fact_text_index.upsert(eid, prev.fact)
                    self.fact_vectors.upsert(eid, prev.fact_embedding)
                    return
                self._edges.pop(eid, None)
                self.fact_text_index.remove(eid)
                self.fact_vectors.remove(eid)
                if prev_pair is None:
                    self._pair_edges.pop(key, None)
                else:
                    self._pair_edges[key] = prev_pair
                if prev_src is None:
                    self._entity_edges.pop(edge.source, None)
                else:
                    self._entity_edges[edge.source] = prev_src
                if prev_tgt is None:
                    self._entity_edges.pop(edge.target, None)
                else:
                    self._entity_edges[edge.target] = prev_tgt

            self._track("edge", eid, True, undo)
            return edge.id

    def edge(self, edge_id: str) -> SemanticEdge:
        with self._lock.read():
            try:
                return self._edges[edge_id]
            except KeyError:
                raise UnknownId(f"unknown edge {edge_id}") from None

    def has_edge(self, edge_id: str) -> bool:
        with self._lock.read():
            return edge_id in self._edges

    def edges_between(self, a: str, b: str) -> list[SemanticEdge]:
        """Every edge whose endpoint set is {a, b}, either orientation."""
        with self._lock.read():
            if a not in self._entities or b not in self._entities:
                raise UnknownId("unknown entity in pair query")
            key = (a, b) if a <= b else (b, a)
            return [self._edges[eid] for eid in self._pair_edges.get(key, ())]

    def incident_edges(self, node_id: str) -> list[SemanticEdge]:
        with self._lock.read():
            if node_id not in self._entities:
                raise UnknownId(f"unknown entity {node_id}")
            return [self._edges[eid] for eid in self._entity_edges.get(node_id, ())]

    def neighbors(self, node_id: str) -> list[str]:
        with self._lock.read():
            if node_id not in self._entities:
                raise UnknownId(f"unknown entity {node_id}")
            seen: set[str] = set()
            for eid in self._entity_edges.get(node_id, ()):
                edge = self._edges[eid]
                seen.add(edge.target if edge.source == node_id else edge.source)
            return sorted(seen)

    # -- episodic links ----------------------------------------------------

    def link_episode(self, episode_id: str, node_id: str) -> str:
        """Create (or return) the provenance link episode<->entity; both
        directions become queryable."""
        with self._lock.write():
            if episode_id not in self._episodes:
                raise DanglingReference(f"unknown episode {episode_id}")
            if node_id not in self._entities:
                raise DanglingReference(f"unknown entity {node_id}")
            pair = (episode_id, node_id)
            existing = self._link_by_pair.get(pair)
            if existing is not None:
                return existing
            link = EpisodicEdge(id=self.new_id("link"), episode=episode_id, entity=node_id)
            prev_ee = self._entity_episodes.get(node_id)
            prev_pe = self._episode_entities.get(episode_id)
            self._episodic[link.id] = link
            self._link_by_pair[pair] = link.id
            self._entity_episodes[node_id] = (prev_ee or ()) + (episode_id,)
            self._episode_entities[episode_id] = (prev_pe or ()) + (node_id,)
            lid = link.id

            def undo() -> None:
                self._episodic.pop(lid, None)
                self._link_by_pair.pop(pair, None)
                if prev_ee is None:
                    self._entity_episodes.pop(node_id, None)
                else:
                    self._entity_episodes[node_id] = prev_ee
                if prev_pe is None:
                    self._episode_entities.pop(episode_id, None)
                else:
                    self._episode_entities[episode_id] = prev_pe

            self._track("link", lid, True, undo)
            return link.id

    def episodes_of(self, node_id: str) -> tuple[str, ...]:
        with self._lock.read():
            if node_id not in self._entities:
                raise UnknownId(f"unknown entity {node_id}")
            return self._entity_episodes.get(node_id, ())

    def entities_of(self, episode_id: str) -> tuple[str, ...]:
        with self._lock.read():
            if episode_id not in self._episodes:
                raise UnknownId(f"unknown episode {episode_id}")
            return self._episode_entities.get(episode_id, ())

    # -- communities ---------------------------------------------------------

    def upsert_community(self, node: CommunityNode) -> str:
        with self._lock.write():
            node.validate(self.dimension)
            for member in node.members:
                if member not in self._entities:
                    raise DanglingReference(f"community member {member} missing")
            node = replace(node, name_embedding=model.freeze_vector(node.name_embedding))
            prev = self._communities.get(node.id)
            self._apply_community(node)
            cid = node.id
            self._track("community", cid, True, lambda: self._unapply_community(cid, prev))
            return node.id

    def _apply_community(self, node: CommunityNode) -> None:
        self._communities[node.id] = node
        self.community_name_index.upsert(node.id, node.name)
        self.community_vectors.upsert(node.id, node.name_embedding)

    def _unapply_community(self, node_id: str, prev: Optional[CommunityNode]) -> None:
        if prev is not None:
            self._apply_community(prev)
            return
        self._communities.pop(node_id, None)
        self.community_name_index.remove(node_id)
        self.community_vectors.remove(node_id)

    def remove_community(self, community_id: str) -> None:
        with self._lock.write():
            prev = self._communities.get(community_id)
            if prev is None:
                return
            self._communities.pop(community_id)
            self.community_name_index.remove(community_id)
            self.community_vectors.remove(community_id)
            self._track(
                "community",
                community_id,
                False,
                lambda: self._apply_community(prev),
            )

    def community(self, community_id: str) -> CommunityNode:
        with self._lock.read():
            try:
                return self._communities[community_id]
            except KeyError:
                raise UnknownId(f"unknown community {community_id}") from None

    # -- staleness counter (community drift bookkeeping) -------------------

    @property
    def staleness(self) -> int:
        return self._staleness

    def bump_staleness(self) -> int:
        # Counter state rides in meta records; rollback restores it from
        # the transaction's counter snapshot.
        with self._lock.write():
            self._staleness += 1
            return self._staleness

    def reset_staleness(self) -> None:
        with self._lock.write():
            self._staleness = 0

    # -- bulk access ---------------------------------------------------------

    def all_episodes(self) -> list[Episode]:
        with self._lock.read():
            return [self._episodes[e] for e in self._episode_order]

    def all_entities(self) -> list[EntityNode]:
        with self._lock.read():
            return [self._entities[k] for k in sorted(self._entities)]

    def all_edges(self) -> list[SemanticEdge]:
        with self._lock.read():
            return [self._edges[k] for k in sorted(self._edges)]

    def all_communities(self) -> list[CommunityNode]:
        with self._lock.read():
            return [self._communities[k] for k in sorted(self._communities)]

    def counts(self) -> dict[str, int]:
        with self._lock.read():
            return {
                "episodes": len(self._episodes),
                "entities": len(self._entities),
                "edges": len(self._edges),
                "links": len(self._episodic),
                "communities": len(self._communities),
            }

    def adjacency_view(self) -> "AdjacencyView":
        """Direct references to the live adjacency maps, NOT copies: only
        touch them while holding the read lock (the traversal paths do)."""
        return AdjacencyView(
            edges=self._edges,
            entities=self._entities,
            episodes=self._episodes,
            entity_edges=self._entity_edges,
            entity_episodes=self._entity_episodes,
            episode_entities=self._episode_entities,
            episode_order=self._episode_order,
        )

    def snapshot(self) -> GraphSnapshot:
        with self._lock.read():
            return GraphSnapshot(
                taken_at=self._last_tprime,
                episodes=dict(self._episodes),
                entities=dict(self._entities),
                edges=dict(self._edges),
                episodic=dict(self._episodic),
                communities=dict(self._communities),
                pair_edges=dict(self._pair_edges),
                entity_edges=dict(self._entity_edges),
                entity_episodes=dict(self._entity_episodes),
                episode_entities=dict(self._episode_entities),
                episode_order=tuple(self._episode_order),
            )

    # -- persistence -----------------------------------------------------------

    def _meta_record(self) -> dict[str, Any]:
        return {
            "t": "meta",
            "group": self.group,
            "dimension": self.dimension,
            "next_seq": self._next_seq,
            "last_tprime": self._last_tprime,
            "staleness": self._staleness,
        }

    def dump_records(self) -> list[dict[str, Any]]:
        with self._lock.read():
            records: list[dict[str, Any]] = [self._meta_record()]
            records.extend(
                model.episode_to_record(self._episodes[e]) for e in self._episode_order
            )
            records.extend(
                model.entity_to_record(self._entities[k]) for k in sorted(self._entities)
            )
            records.extend(
                model.edge_to_record(self._edges[k]) for k in sorted(self._edges)
            )
            records.extend(
                model.link_to_record(self._episodic[k]) for k in sorted(self._episodic)
            )
            records.extend(
                model.community_to_record(self._communities[k])
                for k in sorted(self._communities)
            )
            return records

    def persist(self, path: str | os.PathLike[str]) -> None:
        """Write the full graph as a fresh record log (atomic replace)."""
        records = self.dump_records()
        tmp = f"{os.fspath(path)}.tmp"
        with open(tmp, "wb") as fh:
            fh.write(MAGIC)
            fh.write(_LEN.pack(FORMAT_VERSION))
            for record in records:
                fh.write(encode_record(record))
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    @classmethod
    def load(
        cls,
        path: str | os.PathLike[str],
        clock: Callable[[], int] = utc_now_ms,
    ) -> "GraphStore":
        records = read_records(path)
        if not records or records[0].get("t") != "meta":
            raise CorruptStore("store file does not start with a meta record")
        meta = records[0]
        store = cls(
            group=meta.get("group", "default"),
            dimension=int(meta["dimension"]),
            clock=clock,
        )
        try:
            store._replay(records)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptStore(f"malformed record: {exc}") from exc
        return store

    def _replay(self, records: list[dict[str, Any]]) -> None:
        for rec in records:
            kind = rec.get("t")
            if kind == "meta":
                if int(rec["dimension"]) != self.dimension:
                    raise CorruptStore("dimension changed within store file")
                self._next_seq = int(rec.get("next_seq", self._next_seq))
                self._last_tprime = int(rec.get("last_tprime", self._last_tprime))
                self._staleness = int(rec.get("staleness", self._staleness))
            elif kind == "episode":
                ep = model.episode_from_record(rec)
                if ep.id in self._episodes:
                    self._episodes[ep.id] = ep
                else:
                    self.add_episode(ep)
            elif kind == "entity":
                self.upsert_entity(model.entity_from_record(rec))
            elif kind == "edge":
                self.upsert_edge(model.edge_from_record(rec))
            elif kind == "link":
                link = model.link_from_record(rec)
                if link.episode not in self._episodes or link.entity not in self._entities:
                    raise CorruptStore("episodic link references missing object")
                pair = (link.episode, link.entity)
                if pair not in self._link_by_pair:
                    self._episodic[link.id] = link
                    self._link_by_pair[pair] = link.id
                    self._entity_episodes[link.entity] = (
                        self._entity_episodes.get(link.entity, ()) + (link.episode,)
                    )
                    self._episode_entities[link.episode] = (
                        self._episode_entities.get(link.episode, ()) + (link.entity,)
                    )
            elif kind == "community":
                self.upsert_community(model.community_from_record(rec))
            elif kind == "del":
                if rec.get("kind") == "community":
                    self.remove_community(rec["id"])
                else:
                    raise CorruptStore(f"cannot delete kind {rec.get('kind')}")
            else:
                raise CorruptStore(f"unknown record type {kind!r}")


# --- record framing ----------------------------------------------------------


def encode_record(record: dict[str, Any]) -> bytes:
    payload = json.dumps(record, separators=(",", ":"), sort_keys=True).encode()
    return _LEN.pack(len(payload)) + payload + _LEN.pack(zlib.crc32(payload))


def append_records(path: str | os.PathLike[str], records: list[dict[str, Any]]) -> None:
    """Append replayable records to an existing log (creates it with a header
    when absent)."""
    fresh = not os.path.exists(path)
    with open(path, "ab") as fh:
        if fresh:
            fh.write(MAGIC)
            fh.write(_LEN.pack(FORMAT_VERSION))
        for record in records:
            fh.write(encode_record(record))
        fh.flush()
        os.fsync(fh.fileno())


def read_records(path: str | os.PathLike[str]) -> list[dict[str, Any]]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CorruptStore(f"cannot read store file: {exc}") from exc
    if len(blob) < len(MAGIC) + _LEN.size or blob[: len(MAGIC)] != MAGIC:
        raise CorruptStore("bad magic bytes")
    version = _LEN.unpack_from(blob, len(MAGIC))[0]
    if version != FORMAT_VERSION:
        raise CorruptStore(f"unsupported store version {version}")
    offset = len(MAGIC) + _LEN.size
    records: list[dict[str, Any]] = []
    while offset < len(blob):
        if offset + _LEN.size > len(blob):
            raise CorruptStore("truncated record length")
        (length,) = _LEN.unpack_from(blob, offset)
        offset += _LEN.size
        if offset + length + _LEN.size > len(blob):
            raise CorruptStore("truncated record payload")
        payload = blob[offset : offset + length]
        offset += length
        (crc,) = _LEN.unpack_from(blob, offset)
        offset += _LEN.size
        if zlib.crc32(payload) != crc:
            raise CorruptStore("record checksum mismatch")
        try:
            records.append(json.loads(payload))
        except json.JSONDecodeError as exc:
            raise CorruptStore(f"record is not valid JSON: {exc}") from exc
    return records
