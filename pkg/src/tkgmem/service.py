"""HTTP service: multi-graph memory over a JSON API.

Each graph lives in its own store file under the data directory and gets
its own engine; ingestion is linearized per graph while requests for
different graphs proceed independently. Searching never mutates state.
"""

from __future__ import annotations

import logging
import os
import re
import threading
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .config import EngineConfig, ServiceConfig
from .embedding import RemoteEmbedder
from .engine import Engine
from .errors import (
    AlreadyIngested,
    DuplicateId,
    EmptyContent,
    ExtractorError,
    TkgError,
    UnknownId,
    ValidationError,
)
from .extraction import MockExtractor, RemoteExtractor
from .model import community_view, edge_view, entity_view
from .rerank import JaccardScorer, RemoteCrossScorer, RerankerConfig
from .search import SEARCH_METHODS, Query
from .timeutil import parse_iso

logger = logging.getLogger(__name__)

_GRAPH_NAME = re.compile(r"^[A-Za-z0-9_.\-]{1,64}$")


class GraphRegistry:
    """Lazily opens one engine per graph name, backed by files under the
    data directory."""

    def __init__(self, config: ServiceConfig) -> None:
        self.config = config
        self._engines: dict[str, Engine] = {}
        self._lock = threading.Lock()
        os.makedirs(config.data_dir, exist_ok=True)

    def _store_path(self, name: str) -> str:
        return os.path.join(self.config.data_dir, f"{name}.tkg")

    def exists(self, name: str) -> bool:
        if not _GRAPH_NAME.match(name):
            raise ValidationError(f"invalid graph name {name!r}")
        with self._lock:
            if name in self._engines:
                return True
        return os.path.exists(self._store_path(name))

    def get(self, name: str, create: bool = False) -> Engine:
        if not _GRAPH_NAME.match(name):
            raise ValidationError(f"invalid graph name {name!r}")
        with self._lock:
            engine = self._engines.get(name)
            if engine is not None:
                return engine
            path = self._store_path(name)
            if not create and not os.path.exists(path):
                raise UnknownId(f"unknown graph {name}")
            engine = self._build_engine(name, path)
            self._engines[name] = engine
            return engine

    def _build_engine(self, name: str, path: str) -> Engine:
        cfg = self.config
        engine_cfg = EngineConfig(**vars(cfg.engine))
        extractor = (
            RemoteExtractor(
                cfg.extractor_url,
                timeout=cfg.extractor_timeout,
                retries=cfg.extractor_retries,
            )
            if cfg.extractor_url
            else MockExtractor()
        )
        embedder = (
            RemoteEmbedder(cfg.embedder_url, dimension=engine_cfg.dimension)
            if cfg.embedder_url
            else None
        )
        scorer = (
            RemoteCrossScorer(cfg.cross_encoder_url)
            if cfg.cross_encoder_url
            else JaccardScorer()
        )
        return Engine.open(
            path,
            config=engine_cfg,
            group=name,
            extractor=extractor,
            embedder=embedder,
            cross_scorer=scorer,
        )


def create_app(config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    config.validate()
    registry = GraphRegistry(config)
    app = FastAPI(title="tkgmem", version="0.1.0")
    app.state.registry = registry

    @app.exception_handler(TkgError)
    async def _tkg_error(request: Request, exc: TkgError) -> JSONResponse:
        status = 500
        if isinstance(exc, (AlreadyIngested, DuplicateId)):
            status = 409
        elif isinstance(exc, UnknownId):
            status = 404
        elif isinstance(exc, ExtractorError):
            status = 502
        elif isinstance(exc, (ValidationError, EmptyContent)):
            status = 400
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.post("/graphs/{graph}/episodes", status_code=201)
    async def ingest_episode(graph: str, body: dict) -> dict[str, Any]:
        engine = registry.get(graph, create=True)
        kind = body.get("kind", "message")
        content = body.get("content")
        t_ref_raw = body.get("t_ref")
        if not isinstance(content, str) or not content.strip():
            raise ValidationError("content is required")
        if t_ref_raw is None:
            raise ValidationError("t_ref is required")
        try:
            t_ref = (
                int(t_ref_raw)
                if isinstance(t_ref_raw, (int, float)) and not isinstance(t_ref_raw, bool)
                else parse_iso(str(t_ref_raw))
            )
        except ValueError as exc:
            raise ValidationError(f"t_ref is not a timestamp: {exc}") from exc
        report = engine.ingest_episode(
            kind=kind,
            content=content,
            actor=body.get("actor"),
            t_ref=t_ref,
            episode_id=body.get("id"),
        )
        return {
            "episode_id": report.episode_id,
            "entities_added": report.entities_added,
            "entities_merged": report.entities_merged,
            "edges_added": report.edges_added,
            "edges_invalidated": report.edges_invalidated,
        }

    @app.post("/graphs/{graph}/search")
    async def search(graph: str, body: dict) -> dict[str, Any]:
        if not registry.exists(graph):
            raise UnknownId(f"unknown graph {graph}")
        engine = registry.get(graph)
        text = body.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ValidationError("query text must be non-empty")
        limit = body.get("limit", engine.config.default_limit)
        if not isinstance(limit, int) or isinstance(limit, bool) or limit < 1:
            raise ValidationError("limit must be a positive integer")
        methods = tuple(body.get("methods", SEARCH_METHODS))
        as_of = None
        if body.get("as_of") is not None:
            try:
                as_of = parse_iso(str(body["as_of"]))
            except ValueError as exc:
                raise ValidationError(f"as_of is not a timestamp: {exc}") from exc
        seeds = body.get("seeds")
        query = Query(
            text=text,
            limit=limit,
            methods=methods,
            as_of=as_of,
            seeds=tuple(seeds) if seeds else None,
        )
        rerank_cfg = _parse_rerank(body.get("rerank"), engine)
        result = engine.retrieve(query, rerank=rerank_cfg)
        return result.to_json()

    @app.get("/graphs/{graph}/entities/{node_id}")
    async def get_entity(graph: str, node_id: str) -> dict[str, Any]:
        engine = registry.get(graph)
        return entity_view(engine.entity(node_id), include_embedding=True)

    @app.get("/graphs/{graph}/edges/{edge_id}")
    async def get_edge(graph: str, edge_id: str) -> dict[str, Any]:
        engine = registry.get(graph)
        return edge_view(engine.edge(edge_id), include_embedding=True)

    @app.get("/graphs/{graph}/episodes/{episode_id}")
    async def get_episode(graph: str, episode_id: str) -> dict[str, Any]:
        from .model import episode_view

        engine = registry.get(graph)
        return episode_view(engine.store.episode(episode_id))

    @app.post("/graphs/{graph}/communities/refresh")
    async def refresh_communities(graph: str) -> dict[str, Any]:
        engine = registry.get(graph)
        count = engine.refresh_communities()
        return {"communities": count}

    @app.get("/graphs/{graph}/communities/{community_id}")
    async def get_community(graph: str, community_id: str) -> dict[str, Any]:
        engine = registry.get(graph)
        return community_view(engine.store.community(community_id))

    return app


def _parse_rerank(body: Optional[dict], engine: Engine) -> Optional[RerankerConfig]:
    if body is None:
        return None
    if not isinstance(body, dict):
        raise ValidationError("rerank must be an object")
    cfg = RerankerConfig(
        method=body.get("method", engine.config.default_reranker),
        rrf_k=body.get("rrf_k", engine.config.rrf_k),
        mmr_lambda=body.get("mmr_lambda", engine.config.mmr_lambda),
        centroid=body.get("centroid"),
    )
    cfg.validate()
    return cfg
