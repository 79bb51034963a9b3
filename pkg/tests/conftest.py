"""Shared fixtures: deterministic engines, stores, and embedders."""

from __future__ import annotations

import numpy as np
import pytest

from tkgmem import Engine, EngineConfig
from tkgmem.embedding import HashingEmbedder
from tkgmem.extraction import MockExtractor
from tkgmem.store import GraphStore
from tkgmem.timeutil import TickingClock, parse_iso

DIM = 64

T0 = parse_iso("2024-06-01T00:00:00Z")


def ms(text: str) -> int:
    return parse_iso(text)


def make_clock(start: str = "2024-06-01T00:00:00Z") -> TickingClock:
    return TickingClock(parse_iso(start))


def make_engine(
    dimension: int = DIM,
    group: str = "test",
    extractor=None,
    clock=None,
    **config_overrides,
) -> Engine:
    config = EngineConfig(dimension=dimension, **config_overrides)
    return Engine(
        config=config,
        group=group,
        extractor=extractor or MockExtractor(),
        clock=clock or make_clock(),
    )


def unit_vector(dimension: int, axis: int = 0) -> np.ndarray:
    vec = np.zeros(dimension, dtype=np.float64)
    vec[axis % dimension] = 1.0
    return vec


@pytest.fixture
def engine() -> Engine:
    return make_engine()


@pytest.fixture
def store() -> GraphStore:
    return GraphStore(group="test", dimension=DIM, clock=make_clock())


@pytest.fixture
def embedder() -> HashingEmbedder:
    return HashingEmbedder(DIM)
