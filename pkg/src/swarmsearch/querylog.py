"""AOL-format interaction log parsing, 30-minute sessionization, dataset
subsetting, and chronological train/test partitioning."""

from __future__ import annotations

import calendar
import gzip
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Sequence

from swarmsearch.pheromone import normalize_query

AOL_HEADER = "AnonID\tQuery\tQueryTime\tItemRank\tClickURL"
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"
SESSION_THRESHOLD = 1800.0
PAGE_SIZE = 10


class LogParseError(ValueError):
    """A malformed log row; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None) -> None:
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)
        self.line_no = line_no


def parse_timestamp(text: str) -> int:
    """``YYYY-MM-DD HH:MM:SS`` to epoch seconds (treated as UTC)."""
    return calendar.timegm(time.strptime(text, TIMESTAMP_FORMAT))


def format_timestamp(epoch: float) -> str:
    return time.strftime(TIMESTAMP_FORMAT, time.gmtime(epoch))


@dataclass(frozen=True)
class Interaction:
    """One parsed log row. Rank 0 means the query was issued with no click."""

    user_id: str
    query: str
    timestamp: int
    rank: int = 0
    url: str | None = None

    def __post_init__(self) -> None:
        if (self.rank == 0) != (self.url is None):
            raise ValueError(
                f"rank {self.rank} inconsistent with url {self.url!r}: "
                "rank 0 means no clicked URL and vice versa")
        if self.rank < 0:
            raise ValueError(f"rank must be >= 0, got {self.rank}")


@dataclass(frozen=True)
class Click:
    rank: int
    url: str


@dataclass(frozen=True)
class Session:
    """One query by one user with its clicks, bounded by the inactivity gap."""

    user_id: str
    query: str
    start_time: int
    clicks: tuple[Click, ...] = ()


def parse_log_line(line: str, line_no: int | None = None) -> Interaction | None:
    """Parse one TSV row; returns None for blank-query rows (skip signal).

    Accepts 3 to 5 fields (user, query, timestamp[, rank[, url]]); extension
    columns beyond the fifth (as written by the live service) are ignored.
    """
    fields = line.rstrip("\n").split("\t")
    if len(fields) < 3:
        raise LogParseError(f"expected at least 3 tab-separated fields, "
                            f"got {len(fields)}", line_no)
    user_id, query = fields[0], fields[1]
    if not query.strip():
        return None
    try:
        timestamp = parse_timestamp(fields[2])
    except ValueError:
        raise LogParseError(f"bad timestamp {fields[2]!r}", line_no) from None
    rank = 0
    if len(fields) >= 4 and fields[3].strip():
        try:
            rank = int(fields[3])
        except ValueError:
            raise LogParseError(f"bad rank {fields[3]!r}", line_no) from None
    url = fields[4].strip() if len(fields) >= 5 and fields[4].strip() else None
    try:
        return Interaction(user_id, query, timestamp, rank, url)
    except ValueError as exc:
        raise LogParseError(str(exc), line_no) from None


def _open_maybe_gzip(path: str | Path) -> IO[str]:
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def read_log(path: str | Path, dedup: bool = False) -> list[Interaction]:
    """Read a plain or gzipped AOL-format TSV.

    Skips an optional header line, blank lines, '#' annotation lines, and
    blank-query rows. With ``dedup``, consecutive byte-identical rows (an
    artifact of some logs) collapse to one.
    """
    interactions: list[Interaction] = []
    previous_fields: tuple[str, ...] | None = None
    with _open_maybe_gzip(path) as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if line_no == 1 and line == AOL_HEADER:
                continue
            fields = tuple(line.split("\t")[:5])
            if dedup and fields == previous_fields:
                continue
            previous_fields = fields
            interaction = parse_log_line(line, line_no)
            if interaction is not None:
                interactions.append(interaction)
    return interactions


def write_log(interactions: Iterable[Interaction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for it in interactions:
            handle.write(f"{it.user_id}\t{it.query}\t{format_timestamp(it.timestamp)}"
                         f"\t{it.rank}\t{it.url or ''}\n")


def sessionize(interactions: Sequence[Interaction],
               threshold: float = SESSION_THRESHOLD) -> list[Session]:
    """Group interactions into per-(user, query) sessions.

    Consecutive actions strictly less than ``threshold`` seconds apart share
    a session; a gap of exactly the threshold or more starts a new one.
    Rank-0 rows delimit sessions without contributing clicks. Output is in
    canonical order: (start_time, user_id, query).
    """
    groups: dict[tuple[str, str], list[Interaction]] = {}
    for interaction in interactions:
        groups.setdefault((interaction.user_id, interaction.query), []).append(interaction)

    sessions: list[Session] = []
    for (user_id, query), rows in groups.items():
        rows = sorted(rows, key=lambda it: it.timestamp)  # stable: log order kept on ties
        start: int | None = None
        previous: int | None = None
        clicks: list[Click] = []
        for row in rows:
            if previous is None or row.timestamp - previous >= threshold:
                if start is not None:
                    sessions.append(Session(user_id, query, start, tuple(clicks)))
                start = row.timestamp
                clicks = []
            if row.rank > 0:
                clicks.append(Click(row.rank, row.url))
            previous = row.timestamp
        if start is not None:
            sessions.append(Session(user_id, query, start, tuple(clicks)))
    sessions.sort(key=lambda s: (s.start_time, s.user_id, s.query))
    return sessions


@dataclass(frozen=True)
class DatasetSubset:
    """Query subsets selected for evaluation; ``union`` is their union."""

    frequent: frozenset[str]
    easy: frozenset[str]
    difficult: frozenset[str]

    @property
    def union(self) -> frozenset[str]:
        return self.frequent | self.easy | self.difficult


def filter_dataset(sessions: Sequence[Session], span_days: int,
                   page_size: int = PAGE_SIZE) -> DatasetSubset:
    """Select the evaluation queries.

    frequent: interaction count at least once per day on average across the
    span. easy: a strict majority of the query's sessions stay within the
    first result page. difficult: a strict majority go beyond it. Clickless
    sessions count in the denominators only.
    """
    if span_days < 1:
        raise ValueError(f"span_days must be >= 1, got {span_days}")
    interactions: dict[str, int] = {}
    totals: dict[str, int] = {}
    first_page_only: dict[str, int] = {}
    beyond_first_page: dict[str, int] = {}
    for session in sessions:
        query = normalize_query(session.query)
        interactions[query] = interactions.get(query, 0) + max(1, len(session.clicks))
        totals[query] = totals.get(query, 0) + 1
        if session.clicks:
            if all(click.rank <= page_size for click in session.clicks):
                first_page_only[query] = first_page_only.get(query, 0) + 1
            else:
                beyond_first_page[query] = beyond_first_page.get(query, 0) + 1
    frequent = frozenset(q for q, n in interactions.items() if n >= span_days)
    easy = frozenset(q for q, n in first_page_only.items() if 2 * n > totals[q])
    difficult = frozenset(q for q, n in beyond_first_page.items() if 2 * n > totals[q])
    return DatasetSubset(frequent, easy, difficult)


def span_days(interactions: Sequence[Interaction]) -> int:
    """Number of calendar days covered by the log, first and last inclusive."""
    if not interactions:
        raise ValueError("empty log has no span")
    timestamps = [it.timestamp for it in interactions]
    first = min(timestamps) // 86400
    last = max(timestamps) // 86400
    return int(last - first) + 1


def partition(sessions: Sequence[Session],
              split: float) -> tuple[list[Session], list[Session]]:
    """Sessions starting before ``split`` train; the rest test. Order kept."""
    train = [s for s in sessions if s.start_time < split]
    test = [s for s in sessions if s.start_time >= split]
    return train, test


def write_sessions(sessions: Iterable[Session], path: str | Path) -> None:
    """One session per line: {user_id, query, start_time, clicks:[{rank,url}]}."""
    with open(path, "w", encoding="utf-8") as handle:
        for session in sessions:
            handle.write(json.dumps({
                "user_id": session.user_id,
                "query": session.query,
                "start_time": session.start_time,
                "clicks": [{"rank": c.rank, "url": c.url} for c in session.clicks],
            }, sort_keys=True) + "\n")


def read_sessions(path: str | Path) -> list[Session]:
    sessions: list[Session] = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            sessions.append(Session(
                user_id=record["user_id"],
                query=record["query"],
                start_time=int(record["start_time"]),
                clicks=tuple(Click(c["rank"], c["url"]) for c in record["clicks"]),
            ))
    return sessions
