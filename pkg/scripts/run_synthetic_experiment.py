#!/usr/bin/env python3
"""Desk-scale directional experiment on a synthetic browsing log.

Generates a 200-user log whose single relevant document sits at rank 7,
trains the unit-deposit flavor on the first 150 users, replays the held-out
50-user tail under seeded Monte Carlo recommendation injection, and prints
baseline vs. swarm nDCG at cutoffs 1, 3, and 10.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from swarmsearch.intent import NameLexicon, classify
from swarmsearch.pheromone import ExaminationTable, Flavor, normalize_query
from swarmsearch.querylog import partition, sessionize
from swarmsearch.simulate import (
    RunConfig,
    emit_report,
    gen_synthetic_log,
    run_monte_carlo,
    summarize,
    train,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--users", type=int, default=200)
    parser.add_argument("--tail", type=int, default=50,
                        help="held-out users at the end of the log")
    parser.add_argument("--relevant-rank", type=int, default=7)
    parser.add_argument("--flavor", default="naive")
    parser.add_argument("--delta", type=float, default=86400.0)
    parser.add_argument("--k", type=int, default=1)
    parser.add_argument("--iterations", type=int, default=10)
    parser.add_argument("--seed", type=int, default=20060301)
    parser.add_argument("--report", default=None,
                        help="optional path for the full report TSV")
    args = parser.parse_args()

    page = [f"http://example.org/doc{i:02d}" for i in range(1, 11)]
    table = ExaminationTable.default()
    log = gen_synthetic_log(args.users, page, args.relevant_rank, table,
                            seed=args.seed)
    sessions = sessionize(log)
    split = sorted({row.timestamp for row in log})[args.users - args.tail]
    train_sessions, test_sessions = partition(sessions, split)

    cfg = RunConfig(flavor=Flavor.parse(args.flavor), delta=args.delta,
                    k=args.k, split=split, iterations=args.iterations,
                    seed=args.seed)
    store = train(cfg.new_store(), train_sessions, cfg,
                  exam_table=table)
    outcomes = run_monte_carlo(store, test_sessions, cfg)
    if not outcomes:
        print("no clicked sessions in the tail; try more users", file=sys.stderr)
        return 1

    print(f"log: {len(log)} rows, {sum(1 for r in log if r.rank)} clicks; "
          f"{len(train_sessions)} train / {len(test_sessions)} test sessions; "
          f"{len(store)} trails")
    per_session: dict = {}
    for outcome in outcomes:
        key = (outcome.user_id, outcome.session_time)
        per_session.setdefault(key, []).append(outcome)
    print(f"{'cutoff':>6} {'baseline':>10} {'swarm':>10} {'delta':>9}")
    for cutoff in cfg.cutoffs:
        sims = [sum(r.sim_ndcg[cutoff] for r in rows) / len(rows)
                for rows in per_session.values()]
        bases = [rows[0].baseline_ndcg[cutoff] for rows in per_session.values()]
        base = sum(bases) / len(bases)
        sim = sum(sims) / len(sims)
        delta = "inf" if base == 0 and sim > 0 else f"{(sim - base) / base * 100:+.2f}%" \
            if base else "0.00%"
        print(f"{cutoff:>6} {base:>10.6f} {sim:>10.6f} {delta:>9}")

    if args.report:
        lexicon = NameLexicon.from_terms()
        labels = {normalize_query(s.query): classify(s.query, lexicon)
                  for s in test_sessions}
        emit_report(summarize(outcomes, labels, cfg.cutoffs), args.report)
        print(f"report -> {args.report}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
