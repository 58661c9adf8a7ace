"""Live instrumented meta-search service.

Wraps a pluggable upstream provider, injects up to k trail-recommended
results at the top of page one, logs every query and click in AOL-compatible
rows (plus extension columns), and updates trails in real time on clicks.
Recommended and organic results are indistinguishable on the wire: the
recommended flag lives only in the log.
"""

from __future__ import annotations

import json
import os
import random
import secrets
import threading
import time
from dataclasses import dataclass, fields
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping
from urllib.parse import parse_qs, urlsplit

from swarmsearch.pheromone import (
    DecayConfig,
    ExaminationTable,
    Flavor,
    PheromoneStore,
    expand_query_keys,
    increment_naive,
    increment_ranking_bias,
    normalize_query,
)
from swarmsearch.provider import Provider, UpstreamError, make_provider
from swarmsearch.querylog import format_timestamp

PAGE_SIZE = 10
ENV_PREFIX = "SWARMSEARCH_"


class UnknownTokenError(LookupError):
    """Click token was never issued or was already spent."""


@dataclass
class ServiceConfig:
    """Key=value service configuration; environment variables with the
    SWARMSEARCH_ prefix override file values (e.g. SWARMSEARCH_K=1)."""

    flavor: Flavor = Flavor.NAIVE
    delta: float = 86400.0
    k: int = 3
    key_mode: str = "ngram"
    provider: str = "fixture"
    provider_dir: str = "fixtures"
    log_path: str = "interactions.tsv"
    seed: int = 0
    epsilon: float = 1e-6
    exam_table: str | None = None
    store_path: str | None = None
    static_dir: str | None = None
    host: str = "127.0.0.1"
    port: int = 8080

    def __post_init__(self) -> None:
        if isinstance(self.flavor, str):
            self.flavor = Flavor.parse(self.flavor)
        if not 1 <= self.k <= PAGE_SIZE:
            raise ValueError(f"k must be in [1, {PAGE_SIZE}], got {self.k}")
        if self.key_mode not in ("exact", "ngram"):
            raise ValueError(f"key_mode must be 'exact' or 'ngram', got {self.key_mode}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, str]) -> "ServiceConfig":
        kwargs: dict = {}
        casts = {f.name: f.type for f in fields(cls)}
        for key, value in mapping.items():
            if key not in casts:
                raise ValueError(f"unknown service config key {key!r}")
            if key in ("delta", "epsilon"):
                kwargs[key] = float(value)
            elif key in ("k", "seed", "port"):
                kwargs[key] = int(value)
            else:
                kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path | None = None,
             env: Mapping[str, str] | None = None) -> "ServiceConfig":
        mapping: dict[str, str] = {}
        if path is not None:
            with open(path, encoding="utf-8") as handle:
                for raw in handle:
                    line = raw.strip()
                    if not line or line.startswith("#"):
                        continue
                    key, _, value = line.partition("=")
                    mapping[key.strip()] = value.strip()
        env = os.environ if env is None else env
        for name in (f.name for f in fields(cls)):
            override = env.get(ENV_PREFIX + name.upper())
            if override is not None:
                mapping[name] = override
        return cls.from_mapping(mapping)


@dataclass(frozen=True)
class ClickTarget:
    session: str
    query: str
    rank: int
    url: str
    recommended: bool
    page: int


class SearchApp:
    """Request-level logic, independent of the HTTP plumbing."""

    def __init__(self, cfg: ServiceConfig, provider: Provider | None = None,
                 clock=time.time) -> None:
        self.cfg = cfg
        self.provider = provider if provider is not None else make_provider(
            cfg.provider, cfg.provider_dir)
        decay = DecayConfig(cfg.delta, cfg.epsilon)
        if cfg.store_path and Path(cfg.store_path).exists():
            self.store = PheromoneStore.load(cfg.store_path, cfg.flavor, decay)
        else:
            self.store = PheromoneStore(cfg.flavor, decay)
        self._exam_table: ExaminationTable | None = None
        if cfg.flavor is Flavor.RANKING_BIAS:
            self._exam_table = (ExaminationTable.load(cfg.exam_table)
                                if cfg.exam_table else ExaminationTable.default())
        self._clock = clock
        self._rng = random.Random(cfg.seed)
        self._state_lock = threading.Lock()
        self._tokens: dict[str, ClickTarget] = {}
        self._clicked_ranks: dict[tuple[str, str], list[int]] = {}
        self._queries = 0
        self._clicks = 0
        self._log_lock = threading.Lock()
        self._log = open(cfg.log_path, "a", encoding="utf-8")

    def close(self) -> None:
        with self._log_lock:
            self._log.close()
        if self.cfg.store_path:
            self.store.save(self.cfg.store_path)

    # -- logging ---------------------------------------------------------

    @staticmethod
    def _clean(text: str) -> str:
        return text.replace("\t", " ").replace("\n", " ").replace("\r", " ")

    def _log_row(self, session: str, query: str, now: float, rank: int,
                 url: str, recommended: bool, page: int) -> None:
        row = (f"{session}\t{self._clean(query)}\t{format_timestamp(now)}"
               f"\t{rank}\t{url}\t{int(recommended)}"
               f"\t{self.cfg.flavor.value}\t{page}\n")
        with self._log_lock:
            self._log.write(row)
            self._log.flush()

    def _log_note(self, note: str) -> None:
        with self._log_lock:
            self._log.write(f"# {self._clean(note)}\n")
            self._log.flush()

    # -- request handlers --------------------------------------------------

    def search(self, query: str, page_number: int = 1,
               session_token: str | None = None,
               now: float | None = None) -> dict:
        if not normalize_query(query):
            raise ValueError("blank query")
        if page_number < 1:
            raise ValueError(f"page must be >= 1, got {page_number}")
        now = self._clock() if now is None else now
        session = session_token or new_session_token()

        recommended: list[str] = []
        if page_number == 1:
            keys = expand_query_keys(query, self.cfg.key_mode)
            with self._state_lock:
                recommended = self.store.recommend(keys, self.cfg.k, now, self._rng)

        upstream = []
        try:
            upstream = self.provider.search(query, page_number)
        except UpstreamError as exc:
            self._log_note(f"upstream-error\t{self._clean(query)}\t"
                           f"{format_timestamp(now)}\t{exc}")
        by_url = {result.url: result for result in upstream}

        merged: list[tuple[str, str, str, bool]] = []
        for url in recommended:
            known = by_url.get(url)
            title = known.title if known else url
            snippet = known.snippet if known else ""
            merged.append((url, title, snippet, True))
        rec_set = set(recommended)
        for result in upstream:
            if result.url not in rec_set:
                merged.append((result.url, result.title, result.snippet, False))
        merged = merged[:PAGE_SIZE]

        base_rank = (page_number - 1) * PAGE_SIZE
        results = []
        with self._state_lock:
            for offset, (url, title, snippet, is_rec) in enumerate(merged, start=1):
                rank = base_rank + offset
                token = secrets.token_urlsafe(12)
                self._tokens[token] = ClickTarget(session, query, rank, url,
                                                  is_rec, page_number)
                results.append({
                    "rank": rank,
                    "url": url,
                    "title": title,
                    "snippet": snippet,
                    "click_token": token,
                })
            self._queries += 1
        self._log_row(session, query, now, 0, "", False, page_number)
        return {"query": query, "page": page_number, "results": results,
                "session": session}

    def click(self, token: str, now: float | None = None) -> str:
        now = self._clock() if now is None else now
        with self._state_lock:
            target = self._tokens.pop(token, None)
        if target is None:
            self._log_note(f"rejected-click\t{format_timestamp(now)}\ttoken={token}")
            raise UnknownTokenError(token)
        self._log_row(target.session, target.query, now, target.rank,
                      target.url, target.recommended, target.page)
        self._deposit_for_click(target, now)
        with self._state_lock:
            self._clicks += 1
        return target.url

    def _deposit_for_click(self, target: ClickTarget, now: float) -> None:
        keys = expand_query_keys(target.query, self.cfg.key_mode)
        state_key = (target.session, normalize_query(target.query))
        with self._state_lock:
            previous = list(self._clicked_ranks.get(state_key, []))
            if self.cfg.flavor is Flavor.ELABORATE:
                # live sessions never finish, so deposit the clicked doc at
                # its click ordinal and leave skipped-above trails to the
                # offline path
                position = len(previous) + 1
                increment = 1.0
            elif self.cfg.flavor is Flavor.RANKING_BIAS:
                position = None
                below = [r for r in previous if r < target.rank]
                last = max(below) if below else 0
                increment = increment_ranking_bias(target.rank, last,
                                                   self._exam_table)
            else:
                position = None
                increment = increment_naive(target.rank)
            for key in keys:
                self.store.deposit(key, target.url, position, increment, now)
            self._clicked_ranks.setdefault(state_key, []).append(target.rank)

    def stats(self) -> dict:
        snapshot = self.store.dumps()
        with self._state_lock:
            return {
                "queries": self._queries,
                "clicks": self._clicks,
                "trails": len(self.store),
                "store_bytes": len(snapshot.encode("utf-8")),
            }


def new_session_token() -> str:
    return secrets.token_urlsafe(9)


FALLBACK_PAGE = """<!doctype html>
<html><head><title>swarmsearch</title></head>
<body><h1>swarmsearch service</h1>
<p>No frontend bundle is configured. The JSON API is live:</p>
<ul><li><code>GET /search?q=&lt;query&gt;&amp;p=&lt;page&gt;</code></li>
<li><code>GET /click?t=&lt;token&gt;</code></li>
<li><code>GET /stats</code> &middot; <code>GET /healthz</code></li></ul>
</body></html>
"""

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".map": "application/json",
}


class _Handler(BaseHTTPRequestHandler):
    app: SearchApp  # injected by make_server

    # keep the test output quiet
    def log_message(self, format: str, *args) -> None:  # noqa: A002
        pass

    def _send(self, status: HTTPStatus, body: bytes, content_type: str,
              extra_headers: dict[str, str] | None = None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for name, value in (extra_headers or {}).items():
            self.send_header(name, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, payload: dict, status: HTTPStatus = HTTPStatus.OK,
                   extra_headers: dict[str, str] | None = None) -> None:
        self._send(status, json.dumps(payload).encode("utf-8"),
                   "application/json", extra_headers)

    def _session_from_request(self, params: dict) -> tuple[str, bool]:
        if "s" in params:
            return params["s"][0], False
        cookies = self.headers.get("Cookie", "")
        for part in cookies.split(";"):
            name, _, value = part.strip().partition("=")
            if name == "sid" and value:
                return value, False
        return new_session_token(), True

    def do_GET(self) -> None:  # noqa: N802 - http.server API
        url = urlsplit(self.path)
        params = parse_qs(url.query)
        try:
            if url.path == "/healthz":
                self._send(HTTPStatus.OK, b"ok", "text/plain")
            elif url.path == "/stats":
                self._send_json(self.app.stats())
            elif url.path == "/search":
                self._handle_search(params)
            elif url.path == "/click":
                self._handle_click(params)
            elif url.path == "/" or url.path.startswith("/static/"):
                self._handle_static(url.path)
            else:
                self._send_json({"error": "not found"}, HTTPStatus.NOT_FOUND)
        except ValueError as exc:
            self._send_json({"error": str(exc)}, HTTPStatus.BAD_REQUEST)
        except UnknownTokenError:
            self._send_json({"error": "unknown or spent click token"},
                            HTTPStatus.GONE)

    def _handle_search(self, params: dict) -> None:
        if "q" not in params:
            raise ValueError("missing query parameter q")
        query = params["q"][0]
        page = int(params.get("p", ["1"])[0])
        session, is_new = self._session_from_request(params)
        payload = self.app.search(query, page, session)
        headers = {}
        if is_new:
            headers["Set-Cookie"] = f"sid={session}; Path=/"
        self._send_json(payload, extra_headers=headers)

    def _handle_click(self, params: dict) -> None:
        if "t" not in params:
            raise ValueError("missing click token parameter t")
        destination = self.app.click(params["t"][0])
        body = f"redirecting to {destination}".encode("utf-8")
        self._send(HTTPStatus.FOUND, body, "text/plain",
                   {"Location": destination})

    def _handle_static(self, path: str) -> None:
        static_dir = self.app.cfg.static_dir
        name = "index.html" if path == "/" else path[len("/static/"):]
        if static_dir and name and "/" not in name and ".." not in name:
            candidate = Path(static_dir) / name
            if candidate.is_file():
                content_type = CONTENT_TYPES.get(candidate.suffix,
                                                 "application/octet-stream")
                self._send(HTTPStatus.OK, candidate.read_bytes(), content_type)
                return
        if path == "/":
            self._send(HTTPStatus.OK, FALLBACK_PAGE.encode("utf-8"),
                       "text/html; charset=utf-8")
        else:
            self._send_json({"error": "not found"}, HTTPStatus.NOT_FOUND)


def make_server(app: SearchApp, host: str | None = None,
                port: int | None = None) -> ThreadingHTTPServer:
    """Bind a threaded HTTP server for ``app`` (port 0 picks a free port)."""
    handler = type("BoundHandler", (_Handler,), {"app": app})
    host = app.cfg.host if host is None else host
    port = app.cfg.port if port is None else port
    return ThreadingHTTPServer((host, port), handler)


def run_service(cfg: ServiceConfig) -> None:
    app = SearchApp(cfg)
    server = make_server(app)
    address = f"http://{server.server_address[0]}:{server.server_address[1]}"
    print(f"swarmsearch service listening on {address}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        app.close()
