#!/usr/bin/env python3
"""Run the full 24-configuration evaluation matrix against a query log.

Matrix: 3 flavors x half-lives {1 day, 1 week} x k {1, 3} x two
train/test splits. Needs an AOL-format log supplied externally (the log
itself is not distributed with this repository); writes one report TSV
and one outcomes JSONL per configuration.

Usage:
    python scripts/run_full_matrix.py --log user-ct-test-collection-01.txt.gz \
        --outdir runs/ --split-a "2006-04-01 00:00:00" --split-b "2006-05-01 00:00:00"
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from swarmsearch.intent import NameLexicon, classify
from swarmsearch.pheromone import ExaminationTable, normalize_query
from swarmsearch.querylog import parse_timestamp, partition, read_log, sessionize
from swarmsearch.simulate import (
    emit_report,
    preset_run_matrix,
    run_monte_carlo,
    summarize,
    train,
    write_outcomes,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--log", required=True, help="AOL-format TSV (.gz ok)")
    parser.add_argument("--outdir", required=True)
    parser.add_argument("--split-a", default="2006-04-01 00:00:00")
    parser.add_argument("--split-b", default="2006-05-01 00:00:00")
    parser.add_argument("--iterations", type=int, default=10)
    parser.add_argument("--seed", type=int, default=2006)
    parser.add_argument("--names", nargs="*", default=[],
                        help="lexicon term files for the intent split")
    parser.add_argument("--suffixes", default=None)
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    print("reading log ...", flush=True)
    sessions = sessionize(read_log(args.log))
    print(f"{len(sessions)} sessions", flush=True)

    if args.names or args.suffixes:
        from swarmsearch.intent import load_lexicon
        lexicon = load_lexicon(args.names, args.suffixes)
    else:
        lexicon = NameLexicon.from_terms()
    labels = {}
    for session in sessions:
        key = normalize_query(session.query)
        if key and key not in labels:
            labels[key] = classify(session.query, lexicon)

    table = ExaminationTable.default()
    splits = (float(parse_timestamp(args.split_a)),
              float(parse_timestamp(args.split_b)))
    for cfg in preset_run_matrix(splits, seed=args.seed,
                                 iterations=args.iterations):
        tag = (f"{cfg.flavor.value}_d{int(cfg.delta)}_k{cfg.k}"
               f"_s{int(cfg.split)}")
        train_sessions, test_sessions = partition(sessions, cfg.split)
        store = train(cfg.new_store(), train_sessions, cfg, exam_table=table)
        outcomes = run_monte_carlo(store, test_sessions, cfg)
        if not outcomes:
            print(f"{tag}: no clicked test sessions, skipped")
            continue
        write_outcomes(outcomes, outdir / f"outcomes_{tag}.jsonl")
        emit_report(summarize(outcomes, labels, cfg.cutoffs),
                    outdir / f"report_{tag}.tsv")
        print(f"{tag}: {len(outcomes)} outcomes", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
