"""Text embedders.

The engine only assumes `dimension` and `embed(text) -> unit vector`. The
default is a deterministic feature-hashing embedder so a graph can be
built and queried with no external model; a remote adapter forwards to an
HTTP embedding service.
"""

from __future__ import annotations

import hashlib
import re
import time
from typing import Protocol, Sequence

import numpy as np

from .errors import DimensionMismatch, ExtractorError

WORD_WEIGHT = 1.0
CHAR_NGRAM_WEIGHT = 0.5
CHAR_NGRAM_SIZE = 3


class Embedder(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbedder:
    """Signed feature hashing over word unigrams and character trigrams.

    Deterministic across processes (keyed on blake2b, never the builtin
    hash). Texts sharing tokens land near each other; empty text maps to
    a fixed basis vector so results stay unit-norm.
    """

    def __init__(self, dimension: int = 1024) -> None:
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in _words(text):
            self._bump(vec, f"w:{token}", WORD_WEIGHT)
            padded = f"#{token}#"
            for i in range(len(padded) - CHAR_NGRAM_SIZE + 1):
                self._bump(vec, f"c:{padded[i : i + CHAR_NGRAM_SIZE]}", CHAR_NGRAM_WEIGHT)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm

    def _bump(self, vec: np.ndarray, feature: str, weight: float) -> None:
        digest = hashlib.blake2b(feature.encode(), digest_size=8).digest()
        value = int.from_bytes(digest, "little")
        sign = 1.0 if value & 1 else -1.0
        vec[(value >> 1) % self.dimension] += sign * weight


class RemoteEmbedder:
    """HTTP adapter: POST {"texts": [...]} -> {"vectors": [[...], ...]}."""

    def __init__(
        self,
        base_url: str,
        dimension: int,
        timeout: float = 5.0,
        retries: int = 2,
        transport=None,
    ) -> None:
        import httpx

        self.dimension = dimension
        self._url = base_url.rstrip("/") + "/embed"
        self._retries = retries
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]

    def embed_batch(self, texts: Sequence[str]) -> list[np.ndarray]:
        import httpx

        for attempt in range(self._retries + 1):
            try:
                response = self._client.post(self._url, json={"texts": list(texts)})
                response.raise_for_status()
                vectors = response.json()["vectors"]
                break
            except (httpx.HTTPError, KeyError, ValueError) as exc:
                if attempt == self._retries:
                    raise ExtractorError(f"embedding service failed: {exc}") from exc
                time.sleep(0.1 * 2**attempt)
        out = []
        for vec in vectors:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dimension,):
                raise DimensionMismatch(
                    f"embedding service returned dimension {arr.shape}, expected {self.dimension}"
                )
            out.append(arr)
        return out


def _words(text: str) -> list[str]:
    return [t.lower() for t in re.findall(r"\w+", text)]
