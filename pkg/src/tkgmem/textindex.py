"""Okapi BM25 over a hand-rolled inverted index.

One index per searchable field class (fact text, entity names, community
names, ...). Tokenization is a Unicode word-boundary split, lowercased,
no stemming. Duplicate query tokens are counted once.

Postings are kept as append-only parallel arrays per token (slot ids and
term frequencies); removed documents tombstone their slot and are masked
out at scoring time, so scoring is a handful of vectorized gathers even
on tens of thousands of documents.
"""

from __future__ import annotations

import math
import re

import numpy as np

TOKEN_RE = re.compile(r"\w+", re.UNICODE)

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in TOKEN_RE.findall(text)]


class InvertedIndex:
    """token -> postings (doc slot, term frequency), plus per-doc lengths
    and corpus stats, kept consistent on every mutation."""

    def __init__(self, k1: float = DEFAULT_K1, b: float = DEFAULT_B) -> None:
        self.k1 = k1
        self.b = b
        self._slot_of: dict[str, int] = {}
        self._ids: list[str | None] = []
        self._doc_terms: dict[str, dict[str, int]] = {}
        self._postings: dict[str, tuple[list[int], list[int]]] = {}
        self._df: dict[str, int] = {}
        self._np_cache: dict[str, tuple[int, np.ndarray, np.ndarray]] = {}
        self._dl = np.zeros(64, dtype=np.float64)
        self._alive = np.zeros(64, dtype=bool)
        self._n_slots = 0
        self._n_live = 0
        self._total_len = 0

    def __len__(self) -> int:
        return self._n_live

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._slot_of

    @property
    def avgdl(self) -> float:
        return self._total_len / self._n_live if self._n_live else 0.0

    def upsert(self, doc_id: str, text: str) -> None:
        if doc_id in self._slot_of:
            self.remove(doc_id)
        tokens = tokenize(text)
        terms: dict[str, int] = {}
        for tok in tokens:
            terms[tok] = terms.get(tok, 0) + 1
        slot = self._new_slot(doc_id, len(tokens))
        for tok, tf in terms.items():
            slots, tfs = self._postings.setdefault(tok, ([], []))
            slots.append(slot)
            tfs.append(tf)
            self._df[tok] = self._df.get(tok, 0) + 1
        self._doc_terms[doc_id] = terms
        self._n_live += 1
        self._total_len += len(tokens)

    def remove(self, doc_id: str) -> None:
        slot = self._slot_of.pop(doc_id, None)
        if slot is None:
            return
        terms = self._doc_terms.pop(doc_id)
        for tok in terms:
            remaining = self._df.get(tok, 0) - 1
            if remaining > 0:
                self._df[tok] = remaining
            else:
                self._df.pop(tok, None)
        self._total_len -= int(self._dl[slot])
        self._alive[slot] = False
        self._ids[slot] = None
        self._n_live -= 1

    def idf(self, token: str) -> float:
        n = self._n_live
        df = self._df.get(token, 0)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def search(self, query: str, limit: int) -> list[tuple[str, float]]:
        """Top `limit` docs by BM25, ties broken by ascending doc id."""
        if self._n_live == 0 or limit <= 0:
            return []
        scores = np.zeros(self._n_slots, dtype=np.float64)
        avgdl = self.avgdl
        hit = False
        # Sorted token order keeps float accumulation order stable across
        # processes (set iteration order is hash-dependent).
        for token in sorted(set(tokenize(query))):
            if token not in self._df:
                continue
            slots, tfs = self._posting_arrays(token)
            dl = self._dl[slots]
            norm = tfs * (self.k1 + 1) / (
                tfs + self.k1 * (1 - self.b + self.b * dl / avgdl)
            )
            np.add.at(scores, slots, self.idf(token) * norm)
            hit = True
        if not hit:
            return []
        scores[~self._alive[: self._n_slots]] = 0.0
        matched = np.flatnonzero(scores > 0.0)
        if matched.size == 0:
            return []
        k = min(limit, matched.size)
        if k < matched.size:
            part = matched[np.argpartition(-scores[matched], k - 1)[:k]]
            kth_value = scores[part].min()
            matched = matched[scores[matched] >= kth_value]
        ranked = sorted(
            ((self._ids[s], float(scores[s])) for s in matched),
            key=lambda kv: (-kv[1], kv[0]),
        )
        return ranked[:k]

    def score(self, query: str, doc_id: str) -> float:
        """BM25 score of one stored doc; 0.0 when nothing overlaps."""
        if doc_id not in self._slot_of:
            return 0.0
        avgdl = self.avgdl
        terms = self._doc_terms[doc_id]
        dl = float(self._dl[self._slot_of[doc_id]])
        total = 0.0
        for token in sorted(set(tokenize(query))):
            tf = terms.get(token)
            if not tf:
                continue
            norm = tf * (self.k1 + 1) / (
                tf + self.k1 * (1 - self.b + self.b * dl / avgdl)
            )
            total += self.idf(token) * norm
        return total

    def _new_slot(self, doc_id: str, length: int) -> int:
        slot = self._n_slots
        if slot == self._dl.shape[0]:
            capacity = self._dl.shape[0] * 2
            dl = np.zeros(capacity, dtype=np.float64)
            dl[:slot] = self._dl[:slot]
            alive = np.zeros(capacity, dtype=bool)
            alive[:slot] = self._alive[:slot]
            self._dl = dl
            self._alive = alive
        self._dl[slot] = length
        self._alive[slot] = True
        self._ids.append(doc_id)
        self._slot_of[doc_id] = slot
        self._n_slots += 1
        return slot

    def _posting_arrays(self, token: str) -> tuple[np.ndarray, np.ndarray]:
        slots, tfs = self._postings[token]
        cached = self._np_cache.get(token)
        if cached is not None and cached[0] == len(slots):
            return cached[1], cached[2]
        arr_slots = np.asarray(slots, dtype=np.int64)
        arr_tfs = np.asarray(tfs, dtype=np.float64)
        self._np_cache[token] = (len(slots), arr_slots, arr_tfs)
        return arr_slots, arr_tfs
