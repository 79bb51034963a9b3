"""Embedders: hashing determinism and the remote adapter contract."""

from __future__ import annotations

import httpx
import numpy as np
import pytest

from tkgmem.embedding import HashingEmbedder, RemoteEmbedder
from tkgmem.errors import DimensionMismatch, ExtractorError


def test_hashing_embedder_unit_norm_and_deterministic():
    embedder = HashingEmbedder(64)
    a = embedder.embed("Alice works at Acme Corp")
    b = embedder.embed("Alice works at Acme Corp")
    assert np.array_equal(a, b)
    assert abs(np.linalg.norm(a) - 1.0) < 1e-9


def test_hashing_embedder_empty_text_is_unit():
    embedder = HashingEmbedder(16)
    vec = embedder.embed("")
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-12


def test_shared_tokens_raise_similarity():
    embedder = HashingEmbedder(256)
    query = embedder.embed("where does alice work")
    related = embedder.embed("alice works at acme corp")
    unrelated = embedder.embed("quantum flux capacitor maintenance")
    assert float(query @ related) > float(query @ unrelated)


def test_remote_embedder_contract():
    def handler(request):
        import json

        body = json.loads(request.read())
        return httpx.Response(
            200, json={"vectors": [[1.0, 0.0, 0.0, 0.0] for _ in body["texts"]]}
        )

    remote = RemoteEmbedder(
        "http://embed.test", dimension=4, transport=httpx.MockTransport(handler)
    )
    out = remote.embed_batch(["a", "b"])
    assert len(out) == 2
    assert np.array_equal(out[0], np.array([1.0, 0.0, 0.0, 0.0]))


def test_remote_embedder_dimension_mismatch():
    def handler(request):
        return httpx.Response(200, json={"vectors": [[1.0, 0.0]]})

    remote = RemoteEmbedder(
        "http://embed.test", dimension=4, transport=httpx.MockTransport(handler)
    )
    with pytest.raises(DimensionMismatch):
        remote.embed("x")


def test_remote_embedder_failure_after_retries():
    def handler(request):
        return httpx.Response(500)

    remote = RemoteEmbedder(
        "http://embed.test", dimension=4, retries=1, transport=httpx.MockTransport(handler)
    )
    with pytest.raises(ExtractorError):
        remote.embed("x")
