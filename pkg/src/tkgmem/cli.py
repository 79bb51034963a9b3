"""Command-line interface: ingest transcripts, search, benchmark, serve,
and generate synthetic fixtures."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional

from .bench import format_table, run_bench
from .config import load_service_config
from .engine import Engine
from .errors import TkgError
from .rerank import RerankerConfig
from .search import SEARCH_METHODS, Query
from .synth import (
    build_random_graph,
    read_transcript_jsonl,
    synth_transcript,
    write_transcript_jsonl,
)
from .timeutil import parse_iso

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tkgmem",
        description="Temporal knowledge-graph memory engine",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="ingest a JSONL transcript into a store")
    p_ingest.add_argument("transcript", help="JSONL file: {actor, content, timestamp}")
    p_ingest.add_argument("--store", default="memory.tkg", help="store file path")
    p_ingest.add_argument("--graph", default="default", help="graph group name")
    p_ingest.add_argument("--dimension", type=int, default=1024)

    p_search = sub.add_parser("search", help="query a store")
    p_search.add_argument("query")
    p_search.add_argument("--store", default="memory.tkg")
    p_search.add_argument("--limit", type=int, default=20)
    p_search.add_argument("--as-of", dest="as_of", default=None, help="ISO timestamp")
    p_search.add_argument(
        "--method",
        action="append",
        choices=SEARCH_METHODS,
        help="enable only these search methods (repeatable)",
    )
    p_search.add_argument(
        "--rerank",
        default="rrf",
        choices=("rrf", "mmr", "episode_mentions", "node_distance", "cross_encoder"),
    )
    p_search.add_argument("--centroid", default=None, help="node id for node_distance")
    p_search.add_argument("--json", action="store_true", help="emit JSON")

    p_bench = sub.add_parser("bench", help="latency benchmark over a corpus")
    p_bench.add_argument("corpus", help="store file (.tkg) or JSONL transcript")
    p_bench.add_argument("--queries", required=True, help="file with one query per line")
    p_bench.add_argument("--repeat", type=int, default=3)
    p_bench.add_argument("--limit", type=int, default=20)
    p_bench.add_argument("--json", action="store_true", help="emit JSON report")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--config", default=None, help="config file path")
    p_serve.add_argument("--host", default=None)
    p_serve.add_argument("--port", type=int, default=None)
    p_serve.add_argument("--data-dir", default=None)

    p_synth = sub.add_parser("synth", help="generate synthetic fixtures")
    synth_sub = p_synth.add_subparsers(dest="what", required=True)
    p_tr = synth_sub.add_parser("transcript", help="multi-session conversation JSONL")
    p_tr.add_argument("out")
    p_tr.add_argument("--messages", type=int, default=500)
    p_tr.add_argument("--sessions", type=int, default=5)
    p_tr.add_argument("--planted", type=int, default=50)
    p_tr.add_argument("--seed", type=int, default=7)
    p_tr.add_argument("--queries-out", default=None, help="also write planted queries")
    p_gr = synth_sub.add_parser("graph", help="random graph store for benchmarking")
    p_gr.add_argument("out")
    p_gr.add_argument("--entities", type=int, default=10_000)
    p_gr.add_argument("--edges", type=int, default=50_000)
    p_gr.add_argument("--dimension", type=int, default=128)
    p_gr.add_argument("--seed", type=int, default=11)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except (TkgError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "ingest":
        return _cmd_ingest(args)
    if args.command == "search":
        return _cmd_search(args)
    if args.command == "bench":
        return _cmd_bench(args)
    if args.command == "serve":
        return _cmd_serve(args)
    if args.command == "synth":
        return _cmd_synth(args)
    raise ValueError(f"unknown command {args.command}")  # pragma: no cover


def _cmd_ingest(args: argparse.Namespace) -> int:
    from .config import EngineConfig

    messages = read_transcript_jsonl(args.transcript)
    config = EngineConfig(dimension=args.dimension)
    engine = Engine.open(args.store, config=config, group=args.graph, journal=False)
    for message in messages:
        engine.ingest_episode(
            kind=message["kind"],
            content=message["content"],
            actor=message["actor"],
            t_ref=message["t_ref"],
        )
    engine.save(args.store)
    counts = engine.store.counts()
    print(
        f"ingested {len(messages)} messages -> {counts['entities']} entities, "
        f"{counts['edges']} edges, {counts['communities']} communities "
        f"({args.store})"
    )
    return 0


def _cmd_search(args: argparse.Namespace) -> int:
    engine = Engine.open(args.store, journal=False)
    query = Query(
        text=args.query,
        limit=args.limit,
        methods=tuple(args.method) if args.method else SEARCH_METHODS,
        as_of=parse_iso(args.as_of) if args.as_of else None,
    )
    rerank = RerankerConfig(method=args.rerank, centroid=args.centroid)
    result = engine.retrieve(query, rerank=rerank)
    if args.json:
        print(json.dumps(result.to_json(), indent=2))
    else:
        print(result.context)
        timings = ", ".join(f"{k}={v:.2f}" for k, v in result.timings.items())
        print(f"\n[{timings}]", file=sys.stderr)
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    with open(args.queries, "r", encoding="utf-8") as fh:
        queries = [line.strip() for line in fh if line.strip()]

    if _looks_like_store(args.corpus):
        engine = Engine.open(args.corpus, journal=False)
    else:
        engine = Engine(group="bench")
        for message in read_transcript_jsonl(args.corpus):
            engine.ingest_episode(
                kind=message["kind"],
                content=message["content"],
                actor=message["actor"],
                t_ref=message["t_ref"],
            )
    report = run_bench(engine, queries, repeat=args.repeat, limit=args.limit)
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(format_table(report))
    return 0


def _looks_like_store(path: str) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(4) == b"TKG1"
    except OSError:
        return False


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    config = load_service_config(args.config)
    if args.host:
        config.host = args.host
    if args.port:
        config.port = args.port
    if args.data_dir:
        config.data_dir = args.data_dir
    config.validate()
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.what == "transcript":
        fixture = synth_transcript(
            n_messages=args.messages,
            sessions=args.sessions,
            planted=args.planted,
            seed=args.seed,
        )
        write_transcript_jsonl(args.out, fixture)
        if args.queries_out:
            with open(args.queries_out, "w", encoding="utf-8") as fh:
                for plant in fixture.planted:
                    fh.write(plant.query + "\n")
        print(
            f"wrote {len(fixture.messages)} messages "
            f"({len(fixture.planted)} planted facts) to {args.out}"
        )
        return 0
    if args.what == "graph":
        store = build_random_graph(
            entities=args.entities,
            edges=args.edges,
            dimension=args.dimension,
            seed=args.seed,
        )
        store.persist(args.out)
        counts = store.counts()
        print(
            f"wrote graph: {counts['entities']} entities, {counts['edges']} edges "
            f"-> {args.out}"
        )
        return 0
    raise ValueError(f"unknown synth target {args.what}")  # pragma: no cover


if __name__ == "__main__":
    sys.exit(main())
