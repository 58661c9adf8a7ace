"""Offline Monte Carlo evaluation: train trail stores from a log partition,
replay held-out sessions with recommendation injection, derive the clicks
those users would have produced, and score baseline vs. swarm with
condensed-list nDCG. Includes a synthetic-log generator for desk-scale runs.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from swarmsearch.intent import IntentLabel
from swarmsearch.metrics import (
    ScoreRecord,
    condensed_list,
    macro_average,
    micro_average,
    ndcg,
)
from swarmsearch.pheromone import (
    DecayConfig,
    ExaminationTable,
    Flavor,
    PheromoneStore,
    derive_elaborate_order,
    expand_query_keys,
    increment_naive,
    increment_ranking_bias,
    normalize_query,
)
from swarmsearch.querylog import Interaction, Session

# Logs record clicks only, so unclicked slots of a reconstructed page get an
# opaque stand-in URL: skippable, never clickable, never deposited.
PLACEHOLDER_SCHEME = "unobserved:"
DEFAULT_PAGE_SIZE = 10


def placeholder(rank: int) -> str:
    return f"{PLACEHOLDER_SCHEME}//rank-{rank}"


def is_placeholder(url: str) -> bool:
    return url.startswith(PLACEHOLDER_SCHEME)


@dataclass(frozen=True)
class RunConfig:
    """One simulation run: flavor, decay, recommendation count, data split."""

    flavor: Flavor = Flavor.NAIVE
    delta: float = 86400.0
    k: int = 1
    split: float = 0.0
    iterations: int = 10
    seed: int = 0
    key_mode: str = "exact"
    epsilon: float = 1e-6
    cutoffs: tuple[int, ...] = (1, 3, 10)

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")

    def new_store(self) -> PheromoneStore:
        return PheromoneStore(self.flavor,
                              DecayConfig(self.delta, self.epsilon))


# The documented presets whose cross-product forms the full run matrix:
# 3 flavors x 2 half-lives x 2 recommendation counts x 2 splits = 24 runs.
PRESET_DELTAS = (86400.0, 604800.0)
PRESET_KS = (1, 3)


def preset_run_matrix(splits: Sequence[float], seed: int = 0,
                      iterations: int = 10) -> list[RunConfig]:
    return [
        RunConfig(flavor=flavor, delta=delta, k=k, split=split,
                  iterations=iterations, seed=seed)
        for flavor in Flavor
        for delta in PRESET_DELTAS
        for k in PRESET_KS
        for split in splits
    ]


def reconstruct_page(clicks: Sequence[tuple[int, str]],
                     page_size: int = DEFAULT_PAGE_SIZE) -> list[str]:
    """Result page implied by a click set: clicked URLs at their ranks,
    placeholders elsewhere, length max(page_size, deepest click)."""
    by_rank: dict[int, str] = {}
    for rank, url in clicks:
        by_rank.setdefault(rank, url)
    length = max([page_size, *by_rank.keys()]) if by_rank else page_size
    return [by_rank.get(rank, placeholder(rank)) for rank in range(1, length + 1)]


def _last_click_below(previous_ranks: Sequence[int], rank: int) -> int:
    """Most recent earlier click above the current rank, 0 when none.

    The browsing model defines examination only for a prior click strictly
    above the current position; an out-of-order click restarts from the top.
    """
    below = [r for r in previous_ranks if r < rank]
    return max(below) if below else 0


def train(store: PheromoneStore, sessions: Sequence[Session], cfg: RunConfig,
          exam_table: ExaminationTable | None = None) -> PheromoneStore:
    """Replay training sessions in time order, depositing per the flavor.

    Timestamps drive evaporation. The position-keyed flavor deposits the
    whole derived preference order, skipping placeholder slots.
    """
    last_time = None
    for session in sessions:
        if last_time is not None and session.start_time < last_time:
            raise ValueError("training sessions must be chronologically ordered")
        last_time = session.start_time
        if not session.clicks:
            continue
        keys = expand_query_keys(session.query, cfg.key_mode)
        now = float(session.start_time)
        if cfg.flavor is Flavor.ELABORATE:
            page = reconstruct_page([(c.rank, c.url) for c in session.clicks])
            ranks = {c.rank for c in session.clicks}
            for doc, position in derive_elaborate_order(page, ranks):
                if is_placeholder(doc):
                    continue
                for key in keys:
                    store.deposit(key, doc, position, 1.0, now)
            continue
        seen_ranks: list[int] = []
        for click in session.clicks:
            if cfg.flavor is Flavor.RANKING_BIAS:
                if exam_table is None:
                    raise ValueError("ranking_bias training needs an examination table")
                last = _last_click_below(seen_ranks, click.rank)
                increment = increment_ranking_bias(click.rank, last, exam_table)
            else:
                increment = increment_naive(click.rank)
            for key in keys:
                store.deposit(key, click.url, None, increment, now)
            seen_ranks.append(click.rank)
    return store


def inject_recommendations(page: Sequence[str],
                           recs: Sequence[str]) -> list[str]:
    """Recommendations become the top results; an already-present one moves
    up from its old slot, the rest shift down keeping their order."""
    rec_set = set(recs)
    return list(recs) + [doc for doc in page if doc not in rec_set]


def alleged_clicks(original_clicks: Sequence[tuple[int, str]],
                   injected_page: Sequence[str]) -> set[int]:
    """New ranks at which the logged user would still have clicked.

    A user who clicked a document after skipping s results has demonstrated
    tolerance for s skips, so on the reordered page the document stays
    clicked exactly when the number of non-clicked results remaining above
    it does not exceed s. Documents never clicked originally are never
    clicked here, which penalizes recommendations the user ignored.
    """
    skips_budget: dict[str, list[int]] = {}
    ranks_above = sorted(rank for rank, _ in original_clicks)
    for rank, url in original_clicks:
        clicked_above = sum(1 for other in ranks_above if other < rank)
        skips_budget.setdefault(url, []).append(rank - 1 - clicked_above)
    for budgets in skips_budget.values():
        budgets.sort()

    alleged: set[int] = set()
    skips_seen = 0
    for new_rank, doc in enumerate(injected_page, start=1):
        budgets = skips_budget.get(doc)
        if budgets and skips_seen <= budgets[0]:
            budgets.pop(0)
            alleged.add(new_rank)
        else:
            skips_seen += 1
    return alleged


@dataclass(frozen=True)
class SimOutcome:
    """One Monte Carlo iteration for one test session."""

    flavor: Flavor
    user_id: str
    query: str
    session_time: int
    iteration: int
    injected_page: tuple[str, ...]
    alleged_ranks: frozenset[int]
    baseline_ndcg: dict[int, float]
    sim_ndcg: dict[int, float]

    def to_json(self) -> str:
        return json.dumps({
            "flavor": self.flavor.value,
            "user_id": self.user_id,
            "query": self.query,
            "session_time": self.session_time,
            "iteration": self.iteration,
            "injected_page": list(self.injected_page),
            "alleged_ranks": sorted(self.alleged_ranks),
            "baseline_ndcg": {str(c): v for c, v in sorted(self.baseline_ndcg.items())},
            "sim_ndcg": {str(c): v for c, v in sorted(self.sim_ndcg.items())},
        }, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "SimOutcome":
        record = json.loads(line)
        return cls(
            flavor=Flavor(record["flavor"]),
            user_id=record["user_id"],
            query=record["query"],
            session_time=record["session_time"],
            iteration=record["iteration"],
            injected_page=tuple(record["injected_page"]),
            alleged_ranks=frozenset(record["alleged_ranks"]),
            baseline_ndcg={int(c): v for c, v in record["baseline_ndcg"].items()},
            sim_ndcg={int(c): v for c, v in record["sim_ndcg"].items()},
        )


def _ndcg_at_cutoffs(page: Sequence[str], clicked_ranks: set[int],
                     cutoffs: Sequence[int]) -> dict[int, float]:
    if not clicked_ranks:
        return {cutoff: 0.0 for cutoff in cutoffs}
    gains = condensed_list(page, clicked_ranks)
    return {cutoff: ndcg(gains, cutoff) for cutoff in cutoffs}


def iteration_rng(seed: int, session_index: int, iteration: int) -> random.Random:
    """Independent, reproducible stream per (run, session, iteration)."""
    return random.Random(f"{seed}:{session_index}:{iteration}")


def run_monte_carlo(store: PheromoneStore, test_sessions: Sequence[Session],
                    cfg: RunConfig) -> list[SimOutcome]:
    """Score every clicked test session under ``cfg.iterations`` seeded
    recommendation draws. The store is never deposited into: evaporation is
    evaluated at each session's own timestamp, nothing else moves.
    """
    outcomes: list[SimOutcome] = []
    for session_index, session in enumerate(test_sessions):
        if not session.clicks:
            continue
        original = [(c.rank, c.url) for c in session.clicks]
        page = reconstruct_page(original)
        baseline = _ndcg_at_cutoffs(page, {rank for rank, _ in original},
                                    cfg.cutoffs)
        keys = expand_query_keys(session.query, cfg.key_mode)
        now = float(session.start_time)
        for iteration in range(cfg.iterations):
            rng = iteration_rng(cfg.seed, session_index, iteration)
            recs = store.recommend(keys, cfg.k, now, rng)
            injected = inject_recommendations(page, recs)
            alleged = alleged_clicks(original, injected)
            sim = _ndcg_at_cutoffs(injected, alleged, cfg.cutoffs)
            outcomes.append(SimOutcome(
                flavor=store.flavor,
                user_id=session.user_id,
                query=session.query,
                session_time=session.start_time,
                iteration=iteration,
                injected_page=tuple(injected),
                alleged_ranks=frozenset(alleged),
                baseline_ndcg=baseline,
                sim_ndcg=sim,
            ))
    return outcomes


def write_outcomes(outcomes: Iterable[SimOutcome], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for outcome in outcomes:
            handle.write(outcome.to_json() + "\n")


def read_outcomes(path: str | Path) -> list[SimOutcome]:
    with open(path, encoding="utf-8") as handle:
        return [SimOutcome.from_json(line) for line in handle if line.strip()]


# -- report assembly ----------------------------------------------------------

DATASETS = ("whole", "navigational", "non_navigational")
AVERAGINGS = ("micro", "macro_user", "macro_query")
FLAVOR_COLUMNS = (Flavor.NAIVE, Flavor.RANKING_BIAS, Flavor.ELABORATE)

REPORT_HEADER = (
    "dataset", "averaging", "cutoff", "baseline",
    "naive", "naive_delta_pct", "ranking_bias", "rb_delta_pct",
    "elaborate", "elab_delta_pct", "naive_note", "rb_note", "elab_note",
)


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    averaging: str
    cutoff: int
    baseline: float | None
    flavors: dict[Flavor, float] = field(default_factory=dict)


def delta_pct(baseline: float, value: float) -> float:
    """Relative change in percent; infinite when a zero baseline improves."""
    if baseline == 0.0:
        return 0.0 if value == 0.0 else math.copysign(math.inf, value)
    return (value - baseline) / baseline * 100.0


def delta_note(delta: float) -> str:
    """Effect-size annotation: under 5% is noise, 5-10% noticeable, above material."""
    if math.isnan(delta):
        return "-"
    magnitude = abs(delta)
    if magnitude > 10.0:
        return "material"
    if magnitude >= 5.0:
        return "noticeable"
    return "-"


def _session_means(outcomes: Sequence[SimOutcome], cutoffs: Sequence[int]):
    """Collapse iterations: per (flavor, session) mean sim nDCG, plus the
    per-session baseline (iteration-independent)."""
    sims: dict[tuple[Flavor, str, str, int], list[SimOutcome]] = {}
    for outcome in outcomes:
        key = (outcome.flavor, outcome.user_id, outcome.query, outcome.session_time)
        sims.setdefault(key, []).append(outcome)
    baseline_records: dict[tuple[str, str, int], list[ScoreRecord]] = {}
    flavor_records: dict[Flavor, list[ScoreRecord]] = {f: [] for f in Flavor}
    for (flavor, user_id, query, session_time), rows in sims.items():
        normalized = normalize_query(query)
        for cutoff in cutoffs:
            mean_sim = math.fsum(r.sim_ndcg[cutoff] for r in rows) / len(rows)
            flavor_records[flavor].append(
                ScoreRecord(normalized, user_id, session_time, cutoff, mean_sim))
        session_key = (user_id, normalized, session_time)
        if session_key not in baseline_records:
            baseline_records[session_key] = [
                ScoreRecord(normalized, user_id, session_time, cutoff,
                            rows[0].baseline_ndcg[cutoff])
                for cutoff in cutoffs
            ]
    baselines = [record for records in baseline_records.values() for record in records]
    return baselines, flavor_records


def _average(records: Sequence[ScoreRecord], averaging: str, cutoff: int) -> float | None:
    if not records:
        return None
    try:
        if averaging == "micro":
            return micro_average(records, cutoff)
        if averaging == "macro_user":
            return macro_average(records, "user", cutoff)
        return macro_average(records, "query", cutoff)
    except ValueError:
        return None


def summarize(outcomes: Sequence[SimOutcome],
              labels: Mapping[str, IntentLabel] | None = None,
              cutoffs: Sequence[int] = (1, 3, 10)) -> list[ReportRow]:
    """The nine-table report: {whole, navigational, non-navigational} x
    {micro, macro-by-user, macro-by-query} x cutoffs, one row each."""
    if not outcomes:
        raise ValueError("no outcomes to summarize")
    labels = labels or {}
    baselines, flavor_records = _session_means(outcomes, cutoffs)

    def in_dataset(record: ScoreRecord, dataset: str) -> bool:
        if dataset == "whole":
            return True
        label = labels.get(record.query)
        if label is None:
            return False
        wanted = (IntentLabel.NAVIGATIONAL if dataset == "navigational"
                  else IntentLabel.NON_NAVIGATIONAL)
        return label is wanted

    rows: list[ReportRow] = []
    for dataset in DATASETS:
        base_subset = [r for r in baselines if in_dataset(r, dataset)]
        flavor_subsets = {
            flavor: [r for r in records if in_dataset(r, dataset)]
            for flavor, records in flavor_records.items()
        }
        for averaging in AVERAGINGS:
            for cutoff in cutoffs:
                rows.append(ReportRow(
                    dataset=dataset,
                    averaging=averaging,
                    cutoff=cutoff,
                    baseline=_average(base_subset, averaging, cutoff),
                    flavors={
                        flavor: value
                        for flavor, records in flavor_subsets.items()
                        if (value := _average(records, averaging, cutoff)) is not None
                    },
                ))
    return rows


def _format_value(value: float | None) -> str:
    return "-" if value is None else f"{value:.6f}"


def emit_report(rows: Sequence[ReportRow], path: str | Path) -> None:
    """Write the report TSV (values to six decimals, deltas in percent)."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\t".join(REPORT_HEADER) + "\n")
        for row in rows:
            cells = [row.dataset, row.averaging, str(row.cutoff),
                     _format_value(row.baseline)]
            notes = []
            for flavor in FLAVOR_COLUMNS:
                value = row.flavors.get(flavor)
                if value is None or row.baseline is None:
                    cells += ["-", "-"]
                    notes.append("-")
                    continue
                delta = delta_pct(row.baseline, value)
                delta_text = "inf" if math.isinf(delta) else f"{delta:+.2f}"
                cells += [f"{value:.6f}", delta_text]
                notes.append(delta_note(delta))
            handle.write("\t".join(cells + notes) + "\n")


# -- synthetic log generation --------------------------------------------------

def gen_synthetic_log(n_users: int, page: Sequence[str], relevant_rank: int,
                      exam_table: ExaminationTable, seed: int,
                      query: str = "ants",
                      start_time: int = 1141171200,  # 2006-03-01 00:00:00 UTC
                      spacing: int = 600) -> list[Interaction]:
    """Simulated users scanning one result page top-down.

    Each user issues the same query at increasing timestamps, examines each
    position with the table's probability (abandoning on the first
    non-examination) and clicks the single relevant document when reaching
    it. Clickless visits emit a rank-0 row. Deterministic for a fixed seed.
    """
    if n_users and not 1 <= relevant_rank <= len(page):
        raise ValueError(f"relevant_rank {relevant_rank} outside page "
                         f"1..{len(page)}")
    rng = random.Random(seed)
    interactions: list[Interaction] = []
    for index in range(n_users):
        user_id = str(5_000_000 + index)
        timestamp = start_time + index * spacing
        clicked = False
        for position in range(1, relevant_rank + 1):
            if rng.random() >= exam_table.probability(position, 0):
                break
            if position == relevant_rank:
                clicked = True
        if clicked:
            interactions.append(Interaction(
                user_id, query, timestamp, relevant_rank,
                page[relevant_rank - 1]))
        else:
            interactions.append(Interaction(user_id, query, timestamp))
    return interactions
