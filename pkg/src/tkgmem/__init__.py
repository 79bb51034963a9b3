"""tkgmem: an embeddable, temporally-aware knowledge-graph memory engine.

Episodes go in; a bi-temporal graph of entities, facts, and communities
comes out, served through hybrid retrieval (BM25 + cosine + graph BFS),
rank fusion, and deterministic context construction.
"""

from .config import EngineConfig, ServiceConfig
from .engine import Engine, RetrievalResult
from .errors import (
    AlreadyIngested,
    CorruptStore,
    DanglingReference,
    DimensionMismatch,
    DuplicateId,
    EmptyContent,
    ExtractorError,
    SelfLoop,
    TkgError,
    UnknownId,
    ValidationError,
)
from .extraction import EpisodeContext, Extractor, MockExtractor, RemoteExtractor
from .model import (
    CommunityNode,
    EntityNode,
    Episode,
    EpisodicEdge,
    SemanticEdge,
    valid_at,
)
from .pipeline import IngestReport
from .rerank import RerankerConfig
from .search import CandidateSet, Query
from .store import GraphSnapshot, GraphStore

__version__ = "0.1.0"

__all__ = [
    "AlreadyIngested",
    "CandidateSet",
    "CommunityNode",
    "CorruptStore",
    "DanglingReference",
    "DimensionMismatch",
    "DuplicateId",
    "EmptyContent",
    "Engine",
    "EngineConfig",
    "EntityNode",
    "Episode",
    "EpisodeContext",
    "EpisodicEdge",
    "Extractor",
    "ExtractorError",
    "GraphSnapshot",
    "GraphStore",
    "IngestReport",
    "MockExtractor",
    "Query",
    "RemoteExtractor",
    "RerankerConfig",
    "RetrievalResult",
    "SelfLoop",
    "SemanticEdge",
    "ServiceConfig",
    "TkgError",
    "UnknownId",
    "ValidationError",
    "valid_at",
    "__version__",
]
