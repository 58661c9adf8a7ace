"""Condensed-list construction and rank-discounted scoring, plus the small
statistics used by the controlled-experiment analytics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from swarmsearch.pheromone import normalize_query


class EmptyJudgmentsError(ValueError):
    """No clicks, so no judged documents exist for this session."""


class UndefinedNormalizationError(ValueError):
    """All gains are zero; the ideal ranking has no mass to normalize by."""


class UndefinedSimilarityError(ValueError):
    """One side has no tokens; cosine is undefined."""


class UndefinedCorrelationError(ValueError):
    """Zero variance on one side; correlation is undefined."""


class NoDataError(ValueError):
    """An average was requested over an empty record set."""


@dataclass(frozen=True)
class NdcgConfig:
    """Log base for the rank discount and the report cutoffs."""

    b: int = 2
    cutoffs: tuple[int, ...] = (1, 3, 10)

    def __post_init__(self) -> None:
        if self.b < 2:
            raise ValueError(f"log base must be >= 2, got {self.b}")
        if not self.cutoffs or any(c < 1 for c in self.cutoffs):
            raise ValueError("cutoffs must be positive")
        if list(self.cutoffs) != sorted(self.cutoffs):
            raise ValueError("cutoffs must be ascending")


DEFAULT_NDCG = NdcgConfig()


@dataclass(frozen=True)
class CondensedList:
    """Judged documents only: binary gains in rank order."""

    gains: tuple[int, ...]


def condensed_list(page: Sequence[str], clicked_ranks: Iterable[int]) -> CondensedList:
    """Binary gains for the judged prefix of a result page.

    Clicked ranks gain 1, ranks skipped above the last click gain 0, and
    everything below the last click is unjudged and dropped.
    """
    ranks = sorted(set(clicked_ranks))
    if not ranks:
        raise EmptyJudgmentsError("no clicked ranks; session carries no judgments")
    if ranks[0] < 1 or ranks[-1] > len(page):
        raise ValueError(f"clicked ranks {ranks} outside page bounds 1..{len(page)}")
    clicked = set(ranks)
    return CondensedList(tuple(1 if r in clicked else 0 for r in range(1, ranks[-1] + 1)))


def _gains(gains: CondensedList | Sequence[float]) -> Sequence[float]:
    return gains.gains if isinstance(gains, CondensedList) else gains


def dcg(gains: CondensedList | Sequence[float], p: int,
        cfg: NdcgConfig = DEFAULT_NDCG) -> float:
    """Discounted cumulative gain at cutoff ``p``.

    The first ``b - 1`` positions contribute undiscounted; position i >= b
    contributes gain / log_b(i). Lists shorter than ``p`` count as
    zero-padded.
    """
    if p < 1:
        raise ValueError(f"cutoff must be >= 1, got {p}")
    values = _gains(gains)
    limit = min(p, len(values))
    total = math.fsum(values[:min(limit, cfg.b - 1)])
    total += math.fsum(values[i - 1] / math.log(i, cfg.b)
                       for i in range(cfg.b, limit + 1))
    return total


def ndcg(gains: CondensedList | Sequence[float], p: int,
         cfg: NdcgConfig = DEFAULT_NDCG) -> float:
    """DCG normalized by the DCG of the ideal (descending-gain) ordering."""
    values = _gains(gains)
    if not any(values):
        raise UndefinedNormalizationError("all gains are zero")
    ideal = sorted(values, reverse=True)
    return dcg(values, p, cfg) / dcg(ideal, p, cfg)


@dataclass(frozen=True)
class ScoreRecord:
    """One scored observation feeding the report averages."""

    query: str
    user_id: str
    session_time: int
    cutoff: int
    value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"value must be in [0, 1], got {self.value}")


def micro_average(records: Sequence[ScoreRecord], cutoff: int) -> float:
    """Mean over every record at the cutoff: one pooled experiment."""
    values = [r.value for r in records if r.cutoff == cutoff]
    if not values:
        raise NoDataError(f"no records at cutoff {cutoff}")
    return math.fsum(values) / len(values)


def macro_average(records: Sequence[ScoreRecord], group_by: str, cutoff: int) -> float:
    """Mean of per-group means, grouping by ``user`` or ``query``."""
    if group_by not in ("user", "query"):
        raise ValueError(f"group_by must be 'user' or 'query', got {group_by!r}")
    groups: dict[str, list[float]] = {}
    for record in records:
        if record.cutoff != cutoff:
            continue
        key = record.user_id if group_by == "user" else record.query
        groups.setdefault(key, []).append(record.value)
    if not groups:
        raise NoDataError(f"no records at cutoff {cutoff}")
    means = [math.fsum(values) / len(values) for values in groups.values()]
    return math.fsum(means) / len(means)


def _term_vector(queries: Sequence[str]) -> Counter:
    counts: Counter = Counter()
    for query in queries:
        counts.update(normalize_query(query).split())
    return counts


def cosine_similarity(queries_a: Sequence[str], queries_b: Sequence[str]) -> float:
    """Cosine of the term-frequency vectors of two query lists."""
    if not queries_a or not queries_b:
        raise UndefinedSimilarityError("empty query list")
    a = _term_vector(queries_a)
    b = _term_vector(queries_b)
    if not a or not b:
        raise UndefinedSimilarityError("no tokens after normalization")
    dot = math.fsum(count * b[term] for term, count in a.items())
    norm_a = math.sqrt(math.fsum(c * c for c in a.values()))
    norm_b = math.sqrt(math.fsum(c * c for c in b.values()))
    return dot / (norm_a * norm_b)


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise ValueError(f"need at least 3 points, got {len(xs)}")
    n = len(xs)
    mean_x = math.fsum(xs) / n
    mean_y = math.fsum(ys) / n
    cov = math.fsum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = math.fsum((x - mean_x) ** 2 for x in xs)
    var_y = math.fsum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        raise UndefinedCorrelationError("zero variance")
    return cov / math.sqrt(var_x * var_y)
