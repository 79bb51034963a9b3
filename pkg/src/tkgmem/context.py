"""Context string construction.

Turns reranked edges, entities, and communities into the fixed context
block handed to a downstream agent. Rendering is deterministic: the
golden files under tests/golden pin it byte for byte.
"""

from __future__ import annotations

from typing import Sequence

from .model import CommunityNode, EntityNode, SemanticEdge
from .timeutil import format_human

_HEADER = (
    "FACTS and ENTITIES represent relevant context to the current conversation."
)
_FACTS_INTRO = (
    "These are the most relevant facts and their valid date ranges. "
    "If the fact is about an event, the event takes place during this time."
)
_FACT_FORMAT = "format: FACT (Date range: from - to)"
_ENTITIES_INTRO = "These are the most relevant entities"
_ENTITY_FORMAT = "ENTITY_NAME: entity summary"
_COMMUNITIES_INTRO = "These are the most relevant communities"


def render_fact_line(edge: SemanticEdge) -> str:
    """One fact line: the fact text plus its validity range. Unset start
    renders "unknown", unset end renders "present"."""
    start = format_human(edge.t_valid) if edge.t_valid is not None else "unknown"
    end = format_human(edge.t_invalid) if edge.t_invalid is not None else "present"
    return f"{edge.fact} (Date range: {start} - {end})"


def render_entity_line(node: EntityNode) -> str:
    return f"{node.name}: {node.summary}"


def build_context(
    edges: Sequence[SemanticEdge],
    entities: Sequence[EntityNode],
    communities: Sequence[CommunityNode] = (),
    include_communities: bool = True,
) -> str:
    """Render the context block. Input order is preserved; every item
    appears exactly once; nothing is truncated here."""
    facts_body = "\n".join(render_fact_line(e) for e in edges)
    entities_body = "\n".join(render_entity_line(n) for n in entities)
    parts = [
        _HEADER,
        "",
        _FACTS_INTRO,
        "",
        _FACT_FORMAT,
        "",
        "<FACTS>",
    ]
    if facts_body:
        parts.append(facts_body)
    parts.extend(
        [
            "</FACTS>",
            "",
            _ENTITIES_INTRO,
            "",
            _ENTITY_FORMAT,
            "",
            "<ENTITIES>",
        ]
    )
    if entities_body:
        parts.append(entities_body)
    parts.append("</ENTITIES>")

    if include_communities and communities:
        communities_body = "\n".join(c.summary for c in communities)
        parts.extend(["", _COMMUNITIES_INTRO, "", "<COMMUNITIES>"])
        if communities_body:
            parts.append(communities_body)
        parts.append("</COMMUNITIES>")
    return "\n".join(parts)


def token_estimate(text: str) -> int:
    """Whitespace token count, the sizing metric for context budgets."""
    return len(text.split())
