"""Analytics for the controlled experiment: time-vs-participation-order
correlations with significance flags, and query-similarity comparisons
within and across the control and experimental groups."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import combinations, product
from pathlib import Path
from typing import Sequence

from scipy.stats import t as student_t

from swarmsearch.metrics import (
    NoDataError,
    UndefinedCorrelationError,
    UndefinedSimilarityError,
    cosine_similarity,
    pearson_r,
)

GROUPS = ("control", "experimental")
TASK_CLASSES = ("trivial", "non_trivial")
MEASURES = ("total_time", "average_time")
SIMILARITY_SCOPES = ("within_control", "within_experimental", "cross_group")
SIMILARITY_BASES = ("first_query", "all_queries")

MIN_PARTICIPANTS = 3


@dataclass(frozen=True)
class ExperimentRecord:
    """One participant's work on one task."""

    participant_order: int
    group: str
    task_id: str
    trivial: bool
    time_seconds: float
    queries: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.participant_order < 1:
            raise ValueError(f"participant order must be >= 1, "
                             f"got {self.participant_order}")
        if self.group not in GROUPS:
            raise ValueError(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.time_seconds <= 0:
            raise ValueError(f"time must be positive, got {self.time_seconds}")


_TRUTHY = {"1", "true", "yes", "y"}
_FALSY = {"0", "false", "no", "n"}


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in _TRUTHY:
        return True
    if lowered in _FALSY:
        return False
    raise ValueError(f"cannot parse boolean {text!r}")


def read_experiment_csv(path: str | Path) -> list[ExperimentRecord]:
    """CSV with header order,group,task,trivial,seconds,queries; queries are
    joined by '|'."""
    records: list[ExperimentRecord] = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        expected = {"order", "group", "task", "trivial", "seconds", "queries"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise ValueError(f"experiment CSV must have columns {sorted(expected)}, "
                             f"got {reader.fieldnames}")
        for row in reader:
            queries = tuple(q.strip() for q in row["queries"].split("|") if q.strip())
            records.append(ExperimentRecord(
                participant_order=int(row["order"]),
                group=row["group"].strip().lower(),
                task_id=row["task"].strip(),
                trivial=_parse_bool(row["trivial"]),
                time_seconds=float(row["seconds"]),
                queries=queries,
            ))
    return records


def critical_r(n: int, alpha: float) -> float:
    """Two-sided critical value of Pearson's r for ``n`` paired samples."""
    df = n - 2
    if df < 1:
        raise ValueError(f"need at least 3 samples, got {n}")
    t_crit = float(student_t.ppf(1.0 - alpha / 2.0, df))
    return t_crit / math.sqrt(df + t_crit * t_crit)


@dataclass(frozen=True)
class CorrelationRow:
    group: str
    task_class: str
    measure: str
    n: int
    r: float | None          # None when undefined (zero variance)
    significance: str        # "5%", "10%", "ns", or "undefined"


@dataclass(frozen=True)
class SimilarityRow:
    task_id: str
    scope: str
    basis: str
    mean_cosine: float | None
    pairs: int


@dataclass(frozen=True)
class ExperimentReport:
    correlations: tuple[CorrelationRow, ...]
    similarities: tuple[SimilarityRow, ...]


def _participants(records: Sequence[ExperimentRecord], group: str) -> list[int]:
    return sorted({r.participant_order for r in records if r.group == group})


def _correlation_rows(records: Sequence[ExperimentRecord]) -> list[CorrelationRow]:
    rows: list[CorrelationRow] = []
    for group, task_class in product(GROUPS, TASK_CLASSES):
        wanted_trivial = task_class == "trivial"
        subset = [r for r in records
                  if r.group == group and r.trivial == wanted_trivial]
        per_participant: dict[int, list[float]] = {}
        for record in subset:
            per_participant.setdefault(record.participant_order, []).append(
                record.time_seconds)
        orders = sorted(per_participant)
        for measure in MEASURES:
            if measure == "total_time":
                values = [math.fsum(per_participant[o]) for o in orders]
            else:
                values = [math.fsum(per_participant[o]) / len(per_participant[o])
                          for o in orders]
            if len(orders) < MIN_PARTICIPANTS:
                raise NoDataError(
                    f"{group}/{task_class}: need at least {MIN_PARTICIPANTS} "
                    f"participants, got {len(orders)}")
            try:
                r = pearson_r([float(o) for o in orders], values)
            except UndefinedCorrelationError:
                rows.append(CorrelationRow(group, task_class, measure,
                                           len(orders), None, "undefined"))
                continue
            if abs(r) >= critical_r(len(orders), 0.05):
                significance = "5%"
            elif abs(r) >= critical_r(len(orders), 0.10):
                significance = "10%"
            else:
                significance = "ns"
            rows.append(CorrelationRow(group, task_class, measure,
                                       len(orders), r, significance))
    return rows


def _queries_by_participant(records: Sequence[ExperimentRecord], task_id: str,
                            group: str) -> dict[int, tuple[str, ...]]:
    return {
        r.participant_order: r.queries
        for r in records
        if r.task_id == task_id and r.group == group and r.queries
    }


def _mean_pairwise(sides_a: dict[int, tuple[str, ...]],
                   sides_b: dict[int, tuple[str, ...]] | None,
                   first_only: bool) -> tuple[float | None, int]:
    if sides_b is None:
        pairs = list(combinations(sorted(sides_a), 2))
        pick = lambda order: sides_a[order]  # noqa: E731
        pairings = [(pick(a), pick(b)) for a, b in pairs]
    else:
        pairings = [(sides_a[a], sides_b[b])
                    for a in sorted(sides_a) for b in sorted(sides_b)]
    values = []
    for queries_a, queries_b in pairings:
        if first_only:
            queries_a, queries_b = queries_a[:1], queries_b[:1]
        try:
            values.append(cosine_similarity(list(queries_a), list(queries_b)))
        except UndefinedSimilarityError:
            continue
    if not values:
        return None, 0
    return math.fsum(values) / len(values), len(values)


def _similarity_rows(records: Sequence[ExperimentRecord]) -> list[SimilarityRow]:
    rows: list[SimilarityRow] = []
    task_ids = sorted({r.task_id for r in records})
    for task_id in task_ids:
        control = _queries_by_participant(records, task_id, "control")
        experimental = _queries_by_participant(records, task_id, "experimental")
        for basis in SIMILARITY_BASES:
            first_only = basis == "first_query"
            for scope in SIMILARITY_SCOPES:
                if scope == "within_control":
                    mean, pairs = _mean_pairwise(control, None, first_only)
                elif scope == "within_experimental":
                    mean, pairs = _mean_pairwise(experimental, None, first_only)
                else:
                    mean, pairs = _mean_pairwise(control, experimental, first_only)
                rows.append(SimilarityRow(task_id, scope, basis, mean, pairs))
    return rows


def analyze_experiment(records: Sequence[ExperimentRecord]) -> ExperimentReport:
    """Correlations (order vs. time, per group and task class, with 10%/5%
    two-sided significance flags) plus per-task query similarities."""
    if not records:
        raise NoDataError("no experiment records")
    for group in GROUPS:
        if len(_participants(records, group)) < MIN_PARTICIPANTS:
            raise NoDataError(f"group {group!r} has fewer than "
                              f"{MIN_PARTICIPANTS} participants")
    return ExperimentReport(
        correlations=tuple(_correlation_rows(records)),
        similarities=tuple(_similarity_rows(records)),
    )


def emit_analysis(report: ExperimentReport, path: str | Path) -> None:
    """Single TSV with a section column: correlation rows then similarity rows."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("section\tgroup_or_task\ttasks_or_scope\tmeasure_or_basis"
                     "\tn\tvalue\tsignificance\n")
        for row in report.correlations:
            value = "undefined" if row.r is None else f"{row.r:.6f}"
            handle.write(f"correlation\t{row.group}\t{row.task_class}"
                         f"\t{row.measure}\t{row.n}\t{value}\t{row.significance}\n")
        for row in report.similarities:
            value = "-" if row.mean_cosine is None else f"{row.mean_cosine:.6f}"
            handle.write(f"similarity\t{row.task_id}\t{row.scope}"
                         f"\t{row.basis}\t{row.pairs}\t{value}\t-\n")
