"""Synthetic fixtures: conversations with planted facts, and large random
graphs for latency benchmarking. Everything is seed-deterministic."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import EntityNode, Episode, SemanticEdge
from .store import GraphStore
from .timeutil import format_iso, parse_iso

_DAY_MS = 86_400_000

FIRST_NAMES = [
    "Alice", "Bob", "Carol", "David", "Erin", "Frank", "Grace", "Henry",
    "Irene", "Jack", "Karen", "Liam", "Mona", "Nate", "Olga", "Paul",
    "Quinn", "Rosa", "Sam", "Tara",
]
COMPANIES = [
    "Acme Corp", "Globex", "Initech", "Umbrella Labs", "Stark Industries",
    "Wayne Enterprises", "Hooli", "Vandelay Industries", "Wonka Works",
    "Tyrell Systems", "Cyberdyne Research", "Aperture Science",
]
CITIES = [
    "Boston", "Paris", "Tokyo", "Berlin", "Madrid", "Oslo", "Lisbon",
    "Dublin", "Prague", "Vienna", "Seattle", "Toronto", "Melbourne",
]
SCHOOLS = [
    "Stanford", "Oxford", "Cambridge", "Princeton", "Caltech", "Yale",
]
HOBBIES = ["Chess", "Tennis", "Cello", "Sudoku", "Badminton", "Origami"]

# (template, predicate, canonical verb phrase, object pool)
_PLANT_PATTERNS = [
    ("I work at {obj}", "WORKS_FOR", "works at", COMPANIES),
    ("I live in {obj}", "LIVES_IN", "lives in", CITIES),
    ("I studied at {obj}", "STUDIED_AT", "studied at", SCHOOLS),
    ("I visited {obj}", "VISITED", "visited", CITIES),
    ("I love {obj}", "LOVES", "loves", HOBBIES),
]

_SMALL_TALK = [
    "how was your weekend?",
    "did you sleep well?",
    "the weather has been dreadful lately.",
    "that sounds great!",
    "tell me more about that.",
    "what did you have for lunch?",
    "hope your week is going smoothly.",
    "that reminds me of something funny.",
    "have a good evening!",
    "thanks for the chat.",
]


@dataclass(frozen=True)
class PlantedFact:
    """Ground truth emitted by the generator for retrieval scoring."""

    query: str
    fact: str
    predicate: str
    subject: str
    object: str
    t_valid_ms: Optional[int]


@dataclass
class TranscriptFixture:
    messages: list[dict] = field(default_factory=list)
    planted: list[PlantedFact] = field(default_factory=list)


def synth_transcript(
    n_messages: int = 500,
    sessions: int = 5,
    planted: int = 50,
    seed: int = 7,
    start: str = "2024-01-08T09:00:00Z",
) -> TranscriptFixture:
    """A multi-session conversation with `planted` ground-truth facts
    spread across it; all other messages are small talk.

    Planted facts never share a (subject, verb) slot, so none of them
    contradicts another and all stay valid.
    """
    rng = random.Random(seed)
    fixture = TranscriptFixture()
    start_ms = parse_iso(start)
    session_len = n_messages // sessions

    slots: list[tuple[str, tuple]] = []
    for name in FIRST_NAMES:
        for pattern in _PLANT_PATTERNS:
            slots.append((name, pattern))
    rng.shuffle(slots)
    if planted > len(slots):
        raise ValueError(f"cannot plant {planted} facts; only {len(slots)} slots")
    chosen = slots[:planted]
    plant_positions = sorted(rng.sample(range(n_messages), planted))
    plants = dict(zip(plant_positions, chosen))

    for i in range(n_messages):
        session = min(i // session_len, sessions - 1)
        # Sessions a week apart, one minute between messages.
        t_ref = start_ms + session * 7 * _DAY_MS + (i % session_len) * 60_000
        if i in plants:
            speaker, (template, predicate, canonical, pool) = plants[i]
            obj = pool[rng.randrange(len(pool))]
            content = template.format(obj=obj)
            fact = f"{speaker} {canonical} {obj}"
            fixture.planted.append(
                PlantedFact(
                    query=f"{speaker} {canonical}?",
                    fact=fact,
                    predicate=predicate,
                    subject=speaker,
                    object=obj,
                    t_valid_ms=t_ref if _is_present(canonical) else None,
                )
            )
        else:
            speaker = FIRST_NAMES[rng.randrange(len(FIRST_NAMES))]
            content = _SMALL_TALK[rng.randrange(len(_SMALL_TALK))]
        fixture.messages.append(
            {"actor": speaker, "content": content, "timestamp": format_iso(t_ref)}
        )
    return fixture


def _is_present(canonical: str) -> bool:
    return canonical in {"works at", "lives in", "loves"}


def write_transcript_jsonl(path: str, fixture: TranscriptFixture) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for message in fixture.messages:
            fh.write(json.dumps(message) + "\n")


def read_transcript_jsonl(path: str) -> list[dict]:
    """Parse a JSONL transcript: one {actor|role, content, timestamp} per
    line; `kind` defaults to message."""
    messages = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            actor = row.get("actor") or row.get("role")
            content = row.get("content")
            timestamp = row.get("timestamp")
            if content is None or timestamp is None:
                raise ValueError(
                    f"{path}:{lineno}: each line needs content and timestamp"
                )
            messages.append(
                {
                    "kind": row.get("kind", "message"),
                    "actor": actor,
                    "content": content,
                    "t_ref": parse_iso(timestamp),
                }
            )
    return messages


# --- random graph for latency work ------------------------------------------

_WORDS = [
    "signal", "harbor", "metric", "branch", "copper", "violet", "summit",
    "meadow", "lantern", "quartz", "cedar", "marble", "anchor", "breeze",
    "canyon", "ember", "falcon", "garnet", "hollow", "island", "jasper",
    "kernel", "ledger", "mosaic", "nectar", "onyx", "prairie", "quiver",
    "ridge", "sable", "timber", "umber", "velvet", "willow", "zenith",
]


def build_random_graph(
    entities: int = 10_000,
    edges: int = 50_000,
    dimension: int = 128,
    episodes: int = 200,
    seed: int = 11,
    group: str = "bench",
    clock=None,
) -> GraphStore:
    """Populate a store directly (no extraction) with random unit
    embeddings and word-pool fact texts; episodes link random entities so
    recency-seeded BFS has something to walk."""
    from .timeutil import utc_now_ms

    store = GraphStore(group=group, dimension=dimension, clock=clock or utc_now_ms)
    rng = random.Random(seed)
    np_rng = np.random.default_rng(seed)

    def unit_rows(count: int) -> np.ndarray:
        m = np_rng.standard_normal((count, dimension))
        return m / np.linalg.norm(m, axis=1, keepdims=True)

    t0 = parse_iso("2023-01-01T00:00:00Z")
    episode_ids: list[str] = []
    for i in range(episodes):
        ep = Episode(
            id=store.new_id("episode"),
            kind="message",
            content=f"synthetic episode {i}: " + " ".join(rng.sample(_WORDS, 4)),
            actor="Generator",
            t_ref=t0 + i * 3_600_000,
            group=group,
        )
        store.add_episode(ep)
        episode_ids.append(ep.id)

    entity_vecs = unit_rows(entities)
    entity_ids: list[str] = []
    for i in range(entities):
        name = f"{rng.choice(_WORDS).title()} {rng.choice(_WORDS).title()} {i}"
        node = EntityNode(
            id=store.new_id("entity"),
            name=name,
            summary=f"{name} concerns {rng.choice(_WORDS)} and {rng.choice(_WORDS)}.",
            name_embedding=entity_vecs[i],
        )
        store.upsert_entity(node)
        entity_ids.append(node.id)

    edge_vecs = unit_rows(edges)
    for i in range(edges):
        a, b = rng.sample(range(entities), 2)
        ep = episode_ids[rng.randrange(len(episode_ids))]
        words = " ".join(rng.sample(_WORDS, 6))
        valid = t0 + rng.randrange(0, 365) * _DAY_MS
        store.upsert_edge(
            SemanticEdge(
                id=store.new_id("edge"),
                source=entity_ids[a],
                target=entity_ids[b],
                predicate="RELATES_TO",
                fact=f"{words} connects {a} and {b}",
                fact_embedding=edge_vecs[i],
                t_created=store.tick(),
                t_valid=valid,
                episodes=(ep,),
            )
        )

    for ep_id in episode_ids:
        for node_index in rng.sample(range(entities), 5):
            store.link_episode(ep_id, entity_ids[node_index])
    return store


def clique_graph(
    store: GraphStore, cliques: list[list[str]], embedder, ids: Optional[dict[str, str]] = None
) -> dict[str, str]:
    """Build named entities wired into cliques; returns name -> node id.

    Shared helper for community fixtures (each inner list becomes a
    complete subgraph). Pass the mapping from a previous call to wire new
    nodes to the existing ones instead of minting duplicates."""
    t0 = parse_iso("2024-01-01T00:00:00Z")
    ep = Episode(
        id=store.new_id("episode"),
        kind="text",
        content="fixture episode",
        t_ref=t0,
        group=store.group,
    )
    store.add_episode(ep)
    ids = dict(ids) if ids else {}
    for clique in cliques:
        for name in clique:
            if name not in ids:
                node = EntityNode(
                    id=store.new_id("entity"),
                    name=name,
                    summary=f"{name} fixture entity",
                    name_embedding=embedder.embed(name),
                )
                store.upsert_entity(node)
                ids[name] = node.id
        for i, a in enumerate(clique):
            for b in clique[i + 1 :]:
                store.upsert_edge(
                    SemanticEdge(
                        id=store.new_id("edge"),
                        source=ids[a],
                        target=ids[b],
                        predicate="KNOWS",
                        fact=f"{a} knows {b}",
                        fact_embedding=embedder.embed(f"{a} knows {b}"),
                        t_created=store.tick(),
                        episodes=(ep.id,),
                    )
                )
    return ids
