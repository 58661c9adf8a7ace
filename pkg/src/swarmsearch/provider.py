"""Pluggable upstream result providers: a deterministic tf-idf index over a
local corpus, and a fixture provider replaying canned pages."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence
from urllib.parse import quote

from swarmsearch.pheromone import normalize_query

PAGE_SIZE = 10
INDEX_FILENAME = "index.json"
SNIPPET_LENGTH = 200

_TOKEN = re.compile(r"[a-z0-9]+")


class UpstreamError(RuntimeError):
    """The upstream provider could not produce results."""


class MissingFixtureError(UpstreamError):
    """No canned page exists for this query."""


@dataclass(frozen=True)
class UpstreamResult:
    url: str
    title: str
    snippet: str


class Provider(Protocol):
    def search(self, query: str, page_number: int) -> list[UpstreamResult]: ...


def _tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def ingest_corpus(directory: str | Path) -> dict:
    """Build (or rebuild) the inverted index for every ``*.jsonl`` doc file.

    Documents are ``{url, title, body}`` JSON objects, one per line. The
    index is persisted beside the corpus with sorted keys and no volatile
    fields, so re-ingesting an unchanged corpus is byte-identical. Malformed
    lines are skipped and counted.
    """
    directory = Path(directory)
    docs: dict[str, dict] = {}
    postings: dict[str, dict[str, int]] = {}
    skipped = 0
    for path in sorted(directory.glob("*.jsonl")):
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    url, title = record["url"], record["title"]
                    body = record["body"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    skipped += 1
                    continue
                docs[url] = {
                    "title": title,
                    "snippet": body[:SNIPPET_LENGTH],
                }
                counts: dict[str, int] = {}
                for token in _tokenize(f"{title} {body}"):
                    counts[token] = counts.get(token, 0) + 1
                for token, count in counts.items():
                    postings.setdefault(token, {})[url] = count
    index = {"doc_count": len(docs), "docs": docs, "postings": postings}
    with open(directory / INDEX_FILENAME, "w", encoding="utf-8") as handle:
        json.dump(index, handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")
    return {"docs": len(docs), "skipped": skipped, "terms": len(postings)}


class LocalIndexProvider:
    """Ranks an ingested corpus by summed tf-idf; ties break by URL."""

    def __init__(self, directory: str | Path) -> None:
        directory = Path(directory)
        index_path = directory / INDEX_FILENAME
        if not index_path.exists():
            ingest_corpus(directory)
        try:
            with open(index_path, encoding="utf-8") as handle:
                self._index = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise UpstreamError(f"cannot load index at {index_path}: {exc}") from exc

    def search(self, query: str, page_number: int) -> list[UpstreamResult]:
        doc_count = self._index["doc_count"]
        postings = self._index["postings"]
        scores: dict[str, float] = {}
        for token in _tokenize(query):
            hits = postings.get(token)
            if not hits:
                continue
            idf = math.log(doc_count / len(hits)) + 1.0
            for url, tf in hits.items():
                scores[url] = scores.get(url, 0.0) + tf * idf
        ranked = sorted(scores, key=lambda url: (-scores[url], url))
        start = (page_number - 1) * PAGE_SIZE
        return [
            UpstreamResult(url, self._index["docs"][url]["title"],
                           self._index["docs"][url]["snippet"])
            for url in ranked[start:start + PAGE_SIZE]
        ]


def fixture_filename(query: str) -> str:
    return quote(normalize_query(query), safe="") + ".json"


class FixtureProvider:
    """Replays canned pages from ``<dir>/<url-quoted normalized query>.json``,
    each file a JSON list of {url, title, snippet} objects."""

    def __init__(self, directory: str | Path) -> None:
        self._directory = Path(directory)

    def search(self, query: str, page_number: int) -> list[UpstreamResult]:
        path = self._directory / fixture_filename(query)
        if not path.exists():
            raise MissingFixtureError(f"no fixture for query {query!r} at {path}")
        try:
            with open(path, encoding="utf-8") as handle:
                records = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise UpstreamError(f"unreadable fixture {path}: {exc}") from exc
        start = (page_number - 1) * PAGE_SIZE
        return [
            UpstreamResult(r["url"], r.get("title", r["url"]), r.get("snippet", ""))
            for r in records[start:start + PAGE_SIZE]
        ]


def write_fixture(directory: str | Path, query: str,
                  results: Sequence[UpstreamResult | dict]) -> Path:
    """Helper for tests and demos: store a canned page for ``query``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / fixture_filename(query)
    records = [
        r if isinstance(r, dict) else
        {"url": r.url, "title": r.title, "snippet": r.snippet}
        for r in results
    ]
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(records, handle, indent=1)
        handle.write("\n")
    return path


def make_provider(kind: str, directory: str | Path) -> Provider:
    if kind == "fixture":
        return FixtureProvider(directory)
    if kind == "local-index":
        return LocalIndexProvider(directory)
    raise ValueError(f"unknown provider {kind!r}; expected 'fixture' or 'local-index'")
