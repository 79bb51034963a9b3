"""Extractor interface plus the deterministic rule-based implementation.

Every LLM-shaped decision in the ingestion pipeline goes through an
Extractor. The mock implements the whole contract with regexes and fixed
tables: identical input produces byte-identical output, which the test
suite and the determinism guarantees rely on. A remote adapter forwards
each operation to an HTTP service.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ExtractorError
from .model import Episode, SemanticEdge
from .timeutil import format_iso

logger = logging.getLogger(__name__)


# --- data shapes exchanged with extractors ---------------------------------


@dataclass(frozen=True)
class EntityProposal:
    name: str
    summary: str = ""


@dataclass(frozen=True)
class FactProposal:
    source: str
    target: str
    predicate: str
    fact: str


@dataclass(frozen=True)
class EntityResolution:
    duplicate: bool
    id: Optional[str] = None
    merged_name: Optional[str] = None


@dataclass(frozen=True)
class FactResolution:
    duplicate: bool
    id: Optional[str] = None


@dataclass(frozen=True)
class TemporalHints:
    """ISO 8601 UTC strings, or None when the fact carries no time info."""

    valid_at: Optional[str] = None
    invalid_at: Optional[str] = None


@dataclass(frozen=True)
class EpisodeContext:
    """The unit handed to extractors: the episode plus recent history."""

    current: Episode
    previous: tuple[Episode, ...] = ()

    def previous_messages(self) -> list[str]:
        return [_render_line(ep) for ep in self.previous]

    def current_message(self) -> str:
        return _render_line(self.current)


def _render_line(ep: Episode) -> str:
    if ep.kind == "message" and ep.actor:
        return f"{ep.actor}: {ep.content}"
    return ep.content


class Extractor:
    """Contract for extraction backends.

    Implementations are pure with respect to graph state: everything they
    need arrives in the arguments. Returned names are non-empty; returned
    timestamps are ISO 8601 UTC.
    """

    def extract_entities(self, ctx: EpisodeContext) -> list[EntityProposal]:
        raise NotImplementedError

    def reflect_entities(
        self, ctx: EpisodeContext, found: Sequence[EntityProposal]
    ) -> list[EntityProposal]:
        """Second verification pass: return entities missed by the first."""
        return []

    def resolve_entity(
        self, candidates: Sequence, new: EntityProposal
    ) -> EntityResolution:
        raise NotImplementedError

    def extract_facts(
        self, ctx: EpisodeContext, entities: Sequence[str]
    ) -> list[FactProposal]:
        raise NotImplementedError

    def resolve_fact(
        self, existing: Sequence[SemanticEdge], new: FactProposal
    ) -> FactResolution:
        raise NotImplementedError

    def extract_temporal(
        self, ctx: EpisodeContext, t_ref_ms: int, fact: str
    ) -> TemporalHints:
        raise NotImplementedError

    def detect_contradictions(
        self, new_edge: SemanticEdge, related: Sequence[SemanticEdge]
    ) -> list[str]:
        raise NotImplementedError

    def summarize(self, texts: Sequence[str]) -> str:
        raise NotImplementedError

    def key_terms(self, text: str) -> str:
        """Short comma-separated key terms (community naming)."""
        raise NotImplementedError


# --- the deterministic mock --------------------------------------------------

# Capitalized function words that never become entities. Months and
# weekdays stay out too: temporal phrases belong on edges, not nodes.
_STOPWORDS = frozenset(
    """
    I I'm I'd I'll I've A An The My Mine Me We Our Us Ours You Your Yours
    He Him His She Her Hers It Its They Them Their Theirs This That These
    Those There Here What Which Who Whom Whose When Where Why How Yes No
    Not Ok Okay Oh Hi Hello Hey Thanks Thank Please Well So And But Or Nor
    If Then Else Also Just Very Really Maybe Perhaps Today Yesterday
    Tomorrow Now Later Soon Once Twice Again Still Never Always Sometimes
    Monday Tuesday Wednesday Thursday Friday Saturday Sunday January
    February March April May June July August September October November
    December Is Are Was Were Be Been Am Do Does Did Have Has Had Will
    Would Can Could Should Shall Might Must Let Lets Let's On In At By For
    From To Of With As Up Down Out Over Under About After Before During
    Since Until
    """.split()
)

_MONTHS = {
    "january": 1,
    "february": 2,
    "march": 3,
    "april": 4,
    "may": 5,
    "june": 6,
    "july": 7,
    "august": 8,
    "september": 9,
    "october": 10,
    "november": 11,
    "december": 12,
}

_NUMBER_WORDS = {
    "a": 1,
    "an": 1,
    "one": 1,
    "two": 2,
    "three": 3,
    "four": 4,
    "five": 5,
    "six": 6,
    "seven": 7,
    "eight": 8,
    "nine": 9,
    "ten": 10,
    "eleven": 11,
    "twelve": 12,
}

# Verb-phrase grammar: surface regex, all-caps predicate, canonical
# third-person phrase, and whether the surface form is present tense
# (present-tense facts with no explicit date become valid at t_ref).
_VERB_PATTERNS: list[tuple[re.Pattern[str], str, str, bool]] = [
    (re.compile(r"\b(?:work|works)\s+(?:at|for)\s+", re.IGNORECASE), "WORKS_FOR", "works at", True),
    (re.compile(r"\bstarted\s+working\s+(?:at|for)\s+", re.IGNORECASE), "WORKS_FOR", "started working at", False),
    (re.compile(r"\bworked\s+(?:at|for)\s+", re.IGNORECASE), "WORKS_FOR", "worked at", False),
    (re.compile(r"\b(?:live|lives)\s+in\s+", re.IGNORECASE), "LIVES_IN", "lives in", True),
    (re.compile(r"\blived\s+in\s+", re.IGNORECASE), "LIVES_IN", "lived in", False),
    (re.compile(r"\bmoved\s+to\s+", re.IGNORECASE), "LIVES_IN", "moved to", False),
    (re.compile(r"\b(?:am|is|are)\s+married\s+to\s+", re.IGNORECASE), "MARRIED_TO", "is married to", True),
    (re.compile(r"\bmarried\s+", re.IGNORECASE), "MARRIED_TO", "married", False),
    (re.compile(r"\b(?:am|is|are)\s+friends\s+with\s+", re.IGNORECASE), "IS_FRIENDS_WITH", "is friends with", True),
    (re.compile(r"\bwas\s+born\s+in\s+", re.IGNORECASE), "BORN_IN", "was born in", False),
    (re.compile(r"\b(?:like|likes)\s+", re.IGNORECASE), "LIKES", "likes", True),
    (re.compile(r"\b(?:love|loves)\s+", re.IGNORECASE), "LOVES", "loves", True),
    (re.compile(r"\b(?:own|owns)\s+", re.IGNORECASE), "OWNS", "owns", True),
    (re.compile(r"\bbought\s+", re.IGNORECASE), "BOUGHT", "bought", False),
    (re.compile(r"\badopted\s+", re.IGNORECASE), "ADOPTED", "adopted", False),
    (re.compile(r"\bvisited\s+", re.IGNORECASE), "VISITED", "visited", False),
    (re.compile(r"\bstudied\s+at\s+", re.IGNORECASE), "STUDIED_AT", "studied at", False),
    (re.compile(r"\bstudies\s+at\s+", re.IGNORECASE), "STUDIES_AT", "studies at", True),
    (re.compile(r"\b(?:play|plays)\s+", re.IGNORECASE), "PLAYS", "plays", True),
    (re.compile(r"\b(?:manage|manages)\s+", re.IGNORECASE), "MANAGES", "manages", True),
    (re.compile(r"\b(?:know|knows)\s+", re.IGNORECASE), "KNOWS", "knows", True),
    (re.compile(r"\b(?:teach|teaches)\s+at\s+", re.IGNORECASE), "TEACHES_AT", "teaches at", True),
    (re.compile(r"\bmet\s+", re.IGNORECASE), "MET", "met", False),
    (re.compile(r"\bjoined\s+", re.IGNORECASE), "MEMBER_OF", "joined", False),
    (re.compile(r"\bfounded\s+", re.IGNORECASE), "FOUNDED", "founded", False),
]

_CANONICAL_TENSE = {canonical: present for _, _, canonical, present in _VERB_PATTERNS}

# Proper-noun token: capitalized word, optionally dotted initial,
# possessive stripped by the caller.
_PROPER_TOKEN = re.compile(r"[A-Z][A-Za-z0-9.'\-]*")
# Sentence split that does not break after single-letter initials ("A. Turing").
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])(?<![A-Z]\.)\s+")

_REL_AGO = re.compile(
    r"\b(a|an|one|two|three|four|five|six|seven|eight|nine|ten|eleven|twelve|\d+)\s+"
    r"(day|week|year)s?\s+ago\b",
    re.IGNORECASE,
)
_MONTH_DAY_YEAR = re.compile(
    r"\b(January|February|March|April|May|June|July|August|September|October|"
    r"November|December)\s+(\d{1,2})(?:st|nd|rd|th)?,?\s+(\d{4})\b",
    re.IGNORECASE,
)
_ISO_DATE = re.compile(r"\b(\d{4})-(\d{2})-(\d{2})\b")
_IN_YEAR = re.compile(r"\b(?:in|since)\s+(\d{4})\b", re.IGNORECASE)
_UNTIL_YEAR = re.compile(r"\buntil\s+(\d{4})\b", re.IGNORECASE)
_FROM_TO_YEARS = re.compile(r"\bfrom\s+(\d{4})\s+(?:to|until)\s+(\d{4})\b", re.IGNORECASE)

_DAY_MS = 86_400_000


class MockExtractor(Extractor):
    """Rule-based extractor: proper-noun entities, a small verb grammar
    for facts, regex temporal parsing, and table-driven resolution.

    Deterministic by construction. `match_token_subset=True` loosens
    entity resolution so abbreviated names ("A. Turing") merge into
    fuller ones ("Alan Turing").
    """

    def __init__(self, match_token_subset: bool = False) -> None:
        self.match_token_subset = match_token_subset

    # -- entities -----------------------------------------------------

    def extract_entities(self, ctx: EpisodeContext) -> list[EntityProposal]:
        ep = ctx.current
        proposals: list[EntityProposal] = []
        seen: set[str] = set()
        if ep.kind == "message" and ep.actor:
            proposals.append(
                EntityProposal(name=ep.actor, summary=_first_sentence(ep.content))
            )
            seen.add(ep.actor.casefold())
        for name, sentence in _proper_noun_runs(ep.content, include_sentence_initial=False):
            if name.casefold() not in seen:
                seen.add(name.casefold())
                proposals.append(EntityProposal(name=name, summary=sentence))
        return proposals

    def reflect_entities(
        self, ctx: EpisodeContext, found: Sequence[EntityProposal]
    ) -> list[EntityProposal]:
        # The first pass skips sentence-initial single capitalized words
        # (sentence case is ambiguous); the reflection pass recovers the
        # ones that clear the stopword filter.
        seen = {p.name.casefold() for p in found}
        missed: list[EntityProposal] = []
        for name, sentence in _proper_noun_runs(ctx.current.content, include_sentence_initial=True):
            if name.casefold() not in seen:
                seen.add(name.casefold())
                missed.append(EntityProposal(name=name, summary=sentence))
        return missed

    def resolve_entity(self, candidates: Sequence, new: EntityProposal) -> EntityResolution:
        new_name = _squeeze(new.name)
        for cand in candidates:
            cand_name = _squeeze(cand.name)
            if cand_name.casefold() == new_name.casefold():
                return EntityResolution(duplicate=True, id=cand.id, merged_name=_longer(cand_name, new_name))
            if self.match_token_subset and _token_subset_match(cand_name, new_name):
                return EntityResolution(duplicate=True, id=cand.id, merged_name=_longer(cand_name, new_name))
        return EntityResolution(duplicate=False)

    # -- facts ---------------------------------------------------------

    def extract_facts(
        self, ctx: EpisodeContext, entities: Sequence[str]
    ) -> list[FactProposal]:
        ep = ctx.current
        speaker = ep.actor if ep.kind == "message" else None
        by_fold = {name.casefold(): name for name in entities}
        proposals: list[FactProposal] = []
        for sentence in _sentences(ep.content):
            for pattern, predicate, canonical, _present in _VERB_PATTERNS:
                match = pattern.search(sentence)
                if not match:
                    continue
                subjects = _parse_subjects(sentence[: match.start()], speaker, by_fold)
                if not subjects:
                    continue
                object_segment = sentence[match.end() :].strip().rstrip(".!?,;").strip()
                target = _find_entity_mention(object_segment, by_fold)
                if target is None:
                    continue
                subject_display = " and ".join(subjects)
                fact_text = f"{subject_display} {canonical} {object_segment}"
                for subject in subjects:
                    proposals.append(
                        FactProposal(
                            source=subject,
                            target=target,
                            predicate=predicate,
                            fact=fact_text,
                        )
                    )
                break  # one pattern per sentence
        return proposals

    def resolve_fact(
        self, existing: Sequence[SemanticEdge], new: FactProposal
    ) -> FactResolution:
        for edge in existing:
            if edge.predicate == new.predicate and _squeeze(edge.fact).casefold() == _squeeze(new.fact).casefold():
                return FactResolution(duplicate=True, id=edge.id)
        return FactResolution(duplicate=False)

    # -- temporal ---------------------------------------------------------

    def extract_temporal(
        self, ctx: EpisodeContext, t_ref_ms: int, fact: str
    ) -> TemporalHints:
        span = _FROM_TO_YEARS.search(fact)
        if span:
            return TemporalHints(
                valid_at=_year_iso(int(span.group(1))),
                invalid_at=_year_iso(int(span.group(2))),
            )
        until = _UNTIL_YEAR.search(fact)
        if until:
            return TemporalHints(invalid_at=_year_iso(int(until.group(1))))
        mdy = _MONTH_DAY_YEAR.search(fact)
        if mdy:
            month = _MONTHS[mdy.group(1).lower()]
            return TemporalHints(valid_at=_date_iso(int(mdy.group(3)), month, int(mdy.group(2))))
        iso = _ISO_DATE.search(fact)
        if iso:
            return TemporalHints(
                valid_at=_date_iso(int(iso.group(1)), int(iso.group(2)), int(iso.group(3)))
            )
        year = _IN_YEAR.search(fact)
        if year:
            # Year-only mentions resolve to January 1st, midnight UTC.
            return TemporalHints(valid_at=_year_iso(int(year.group(1))))
        rel = _REL_AGO.search(fact)
        if rel:
            amount_raw = rel.group(1).lower()
            amount = _NUMBER_WORDS.get(amount_raw, 0) or int(amount_raw)
            unit = rel.group(2).lower()
            if unit == "day":
                then = t_ref_ms - amount * _DAY_MS
            elif unit == "week":
                then = t_ref_ms - amount * 7 * _DAY_MS
            else:
                then = _years_back(t_ref_ms, amount)
            return TemporalHints(valid_at=format_iso(then))
        if _fact_tense_is_present(fact):
            # Present-tense statement: the relationship holds as of the
            # reference timestamp.
            return TemporalHints(valid_at=format_iso(t_ref_ms))
        return TemporalHints()

    # -- contradictions ---------------------------------------------------

    def detect_contradictions(
        self, new_edge: SemanticEdge, related: Sequence[SemanticEdge]
    ) -> list[str]:
        # Same subject asserting the same predicate about a different
        # object (or differently-worded object text) is a contradiction;
        # exact duplicates are handled upstream by fact resolution.
        out: list[str] = []
        new_fact = _squeeze(new_edge.fact).casefold()
        for edge in related:
            if edge.id == new_edge.id or edge.predicate != new_edge.predicate:
                continue
            if edge.source != new_edge.source:
                continue
            if edge.target != new_edge.target or _squeeze(edge.fact).casefold() != new_fact:
                out.append(edge.id)
        return out

    # -- summaries -----------------------------------------------------------

    def summarize(self, texts: Sequence[str]) -> str:
        """Concatenate sentence-deduplicated inputs, original order kept."""
        seen: set[str] = set()
        parts: list[str] = []
        for text in texts:
            for sentence in _sentences(text):
                key = _squeeze(sentence).casefold().rstrip(".")
                if key and key not in seen:
                    seen.add(key)
                    parts.append(sentence.strip())
        summary = " ".join(parts)
        if len(summary) > 600:
            summary = summary[:600].rsplit(" ", 1)[0] + "..."
        return summary

    def key_terms(self, text: str) -> str:
        counts: dict[str, int] = {}
        for token in re.findall(r"\w+", text):
            low = token.lower()
            if len(low) < 3 or token in _STOPWORDS or low in {"the", "and", "with"}:
                continue
            counts[low] = counts.get(low, 0) + 1
        top = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        return ", ".join(term for term, _ in top)


# --- mock helpers -----------------------------------------------------------


def _sentences(text: str) -> list[str]:
    return [s for s in (_s.strip() for _s in _SENTENCE_SPLIT.split(text)) if s]


def _first_sentence(text: str) -> str:
    parts = _sentences(text)
    return parts[0] if parts else text.strip()


def _squeeze(text: str) -> str:
    return " ".join(text.split())


def _longer(a: str, b: str) -> str:
    return a if len(a) >= len(b) else b


def _strip_possessive(token: str) -> str:
    for suffix in ("'s", "’s"):
        if token.endswith(suffix):
            return token[: -len(suffix)]
    return token


def _proper_noun_runs(
    text: str, include_sentence_initial: bool
) -> list[tuple[str, str]]:
    """Maximal runs of capitalized tokens with the sentence they live in.

    With include_sentence_initial=False, runs that consist of a single
    sentence-opening token are suppressed (first-pass conservatism); with
    True, only those are returned (the reflection pass). A token whose raw
    form carries trailing punctuation ends its run ("Paris, London" is two
    runs, not one name).
    """
    results: list[tuple[str, str]] = []
    for sentence in _sentences(text):
        raw_tokens = sentence.split()
        run: list[str] = []
        run_start_index = 0

        def flush() -> None:
            if not run:
                return
            name = " ".join(run)
            sentence_initial_single = run_start_index == 0 and len(run) == 1
            if sentence_initial_single == include_sentence_initial:
                results.append((name, sentence))
            run.clear()

        for idx, raw in enumerate(raw_tokens):
            stripped = _strip_possessive(raw.strip("\"'()[]"))
            breaker = stripped != stripped.rstrip(",;:!?")
            stripped = stripped.rstrip(",;:!?")
            word = None
            if stripped and _PROPER_TOKEN.fullmatch(stripped):
                candidate = stripped if _is_initial(stripped) else stripped.rstrip(".")
                if candidate and candidate not in _STOPWORDS:
                    word = candidate
            if word is not None:
                if not run:
                    run_start_index = idx
                run.append(word)
                if breaker:
                    flush()
                continue
            flush()
        flush()
    return results


def _is_initial(token: str) -> bool:
    return len(token) == 2 and token[1] == "." and token[0].isupper()


def _token_subset_match(a: str, b: str) -> bool:
    """True when one name's tokens all match tokens of the other, with
    dotted initials matching any token they prefix."""
    ta = [t.rstrip(".").casefold() for t in a.split()]
    tb = [t.rstrip(".").casefold() for t in b.split()]
    if not ta or not tb:
        return False
    short, long_ = (ta, tb) if len(ta) <= len(tb) else (tb, ta)
    remaining = list(long_)
    for tok in short:
        hit = None
        for other in remaining:
            if tok == other or (len(tok) == 1 and other.startswith(tok)) or (
                len(other) == 1 and tok.startswith(other)
            ):
                hit = other
                break
        if hit is None:
            return False
        remaining.remove(hit)
    return True


def _parse_subjects(
    prefix: str, speaker: Optional[str], by_fold: dict[str, str]
) -> list[str]:
    """Resolve the clause before the verb into entity names.

    Handles "I", entity mentions (longest suffix of the segment, so
    leading adverbs are ignored), and "X and Y" conjunctions. Segments
    that resolve to nothing are dropped.
    """
    prefix = prefix.strip().strip(",")
    if not prefix:
        return []
    subjects: list[str] = []
    for part in re.split(r"\s+and\s+", prefix, flags=re.IGNORECASE):
        candidate = _subject_from_segment(part.strip(), speaker, by_fold)
        if candidate is not None and candidate not in subjects:
            subjects.append(candidate)
    return subjects


def _subject_from_segment(
    segment: str, speaker: Optional[str], by_fold: dict[str, str]
) -> Optional[str]:
    words = segment.split()
    # Longest suffix wins ("Yesterday Alice" -> Alice).
    for start in range(len(words)):
        tail = " ".join(words[start:])
        fold = tail.casefold()
        if fold == "i" and speaker:
            return speaker
        if fold in by_fold:
            return by_fold[fold]
    return None


def _find_entity_mention(segment: str, by_fold: dict[str, str]) -> Optional[str]:
    """Earliest (then longest) known entity mentioned inside the segment."""
    fold = segment.casefold()
    best: Optional[tuple[int, int, str]] = None
    for name_fold, name in by_fold.items():
        pattern = r"(?<!\w)" + re.escape(name_fold) + r"(?!\w)"
        match = re.search(pattern, fold)
        if match:
            key = (match.start(), -len(name_fold), name)
            if best is None or key < best:
                best = key
    return best[2] if best else None


def _fact_tense_is_present(fact: str) -> bool:
    for pattern, _pred, canonical, present in _VERB_PATTERNS:
        if pattern.search(fact):
            return present
    return False


def _date_iso(year: int, month: int, day: int) -> str:
    from datetime import datetime, timezone

    dt = datetime(year, month, day, tzinfo=timezone.utc)
    return format_iso(int(dt.timestamp()) * 1000)


def _year_iso(year: int) -> str:
    return _date_iso(year, 1, 1)


def _years_back(t_ms: int, years: int) -> int:
    from datetime import datetime, timezone

    dt = datetime.fromtimestamp(t_ms // 1000, tz=timezone.utc)
    try:
        shifted = dt.replace(year=dt.year - years)
    except ValueError:  # Feb 29 -> Feb 28
        shifted = dt.replace(year=dt.year - years, day=28)
    return int(shifted.timestamp()) * 1000 + t_ms % 1000


# --- remote adapter -------------------------------------------------------


class RemoteExtractor(Extractor):
    """HTTP/JSON adapter: one endpoint per operation, bodies mirror the
    prompt slots (previous_messages, current_message, existing_nodes,
    new_node, reference_timestamp, fact). Retries with exponential
    backoff before surfacing ExtractorError."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 5.0,
        retries: int = 2,
        backoff: float = 0.1,
        transport=None,
    ) -> None:
        import httpx

        self._base = base_url.rstrip("/")
        self._retries = retries
        self._backoff = backoff
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post(self, op: str, body: dict) -> dict:
        import httpx

        url = f"{self._base}/{op}"
        for attempt in range(self._retries + 1):
            try:
                response = self._client.post(url, json=body)
                response.raise_for_status()
                return response.json()
            except (httpx.HTTPError, ValueError) as exc:
                if attempt == self._retries:
                    raise ExtractorError(f"extractor op {op} failed: {exc}") from exc
                time.sleep(self._backoff * 2**attempt)
        raise ExtractorError(f"extractor op {op} failed")  # pragma: no cover

    def extract_entities(self, ctx: EpisodeContext) -> list[EntityProposal]:
        data = self._post(
            "extract_entities",
            {
                "previous_messages": ctx.previous_messages(),
                "current_message": ctx.current_message(),
                "actor": ctx.current.actor,
                "kind": ctx.current.kind,
            },
        )
        return [
            EntityProposal(name=e["name"], summary=e.get("summary", ""))
            for e in data.get("entities", [])
        ]

    def reflect_entities(
        self, ctx: EpisodeContext, found: Sequence[EntityProposal]
    ) -> list[EntityProposal]:
        data = self._post(
            "reflect_entities",
            {
                "previous_messages": ctx.previous_messages(),
                "current_message": ctx.current_message(),
                "found": [{"name": p.name, "summary": p.summary} for p in found],
            },
        )
        return [
            EntityProposal(name=e["name"], summary=e.get("summary", ""))
            for e in data.get("entities", [])
        ]

    def resolve_entity(self, candidates: Sequence, new: EntityProposal) -> EntityResolution:
        data = self._post(
            "resolve_entity",
            {
                "existing_nodes": [
                    {"id": c.id, "name": c.name, "summary": c.summary} for c in candidates
                ],
                "new_node": {"name": new.name, "summary": new.summary},
            },
        )
        return EntityResolution(
            duplicate=bool(data.get("is_duplicate")),
            id=data.get("id"),
            merged_name=data.get("name"),
        )

    def extract_facts(
        self, ctx: EpisodeContext, entities: Sequence[str]
    ) -> list[FactProposal]:
        data = self._post(
            "extract_facts",
            {
                "previous_messages": ctx.previous_messages(),
                "current_message": ctx.current_message(),
                "entities": list(entities),
            },
        )
        return [
            FactProposal(
                source=f["source"],
                target=f["target"],
                predicate=f["predicate"],
                fact=f["fact"],
            )
            for f in data.get("facts", [])
        ]

    def resolve_fact(
        self, existing: Sequence[SemanticEdge], new: FactProposal
    ) -> FactResolution:
        data = self._post(
            "resolve_fact",
            {
                "existing_edges": [
                    {"id": e.id, "predicate": e.predicate, "fact": e.fact}
                    for e in existing
                ],
                "new_edge": {"predicate": new.predicate, "fact": new.fact},
            },
        )
        return FactResolution(duplicate=bool(data.get("is_duplicate")), id=data.get("id"))

    def extract_temporal(
        self, ctx: EpisodeContext, t_ref_ms: int, fact: str
    ) -> TemporalHints:
        data = self._post(
            "extract_temporal",
            {
                "previous_messages": ctx.previous_messages(),
                "current_message": ctx.current_message(),
                "reference_timestamp": format_iso(t_ref_ms),
                "fact": fact,
            },
        )
        return TemporalHints(valid_at=data.get("valid_at"), invalid_at=data.get("invalid_at"))

    def detect_contradictions(
        self, new_edge: SemanticEdge, related: Sequence[SemanticEdge]
    ) -> list[str]:
        data = self._post(
            "detect_contradictions",
            {
                "new_edge": {
                    "id": new_edge.id,
                    "predicate": new_edge.predicate,
                    "fact": new_edge.fact,
                },
                "related_edges": [
                    {"id": e.id, "predicate": e.predicate, "fact": e.fact}
                    for e in related
                ],
            },
        )
        return list(data.get("contradicted", []))

    def summarize(self, texts: Sequence[str]) -> str:
        return self._post("summarize", {"texts": list(texts)}).get("summary", "")

    def key_terms(self, text: str) -> str:
        return self._post("key_terms", {"text": text}).get("terms", "")
