"""Command-line entry point: log processing, intent classification, training,
simulation, reporting, synthetic logs, experiment analytics, and the service.

Every artifact-producing subcommand writes ``<first-output>.manifest.json``
recording the effective configuration, the seed, and SHA-256 checksums of
the inputs, so any artifact can be reproduced byte-for-byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from swarmsearch.experiment import (
    analyze_experiment,
    emit_analysis,
    read_experiment_csv,
)
from swarmsearch.intent import NameLexicon, classify, load_lexicon
from swarmsearch.pheromone import ExaminationTable, Flavor, normalize_query
from swarmsearch.querylog import (
    filter_dataset,
    parse_timestamp,
    partition,
    read_log,
    read_sessions,
    sessionize,
    span_days,
    write_log,
    write_sessions,
)
from swarmsearch.service import ServiceConfig, run_service
from swarmsearch.simulate import (
    RunConfig,
    emit_report,
    gen_synthetic_log,
    run_monte_carlo,
    summarize,
    train,
    write_outcomes,
)

USAGE_ERROR = 2
DATA_ERROR = 1


def _sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(primary_output: str | Path, command: str, config: dict,
                   inputs: Sequence[str | Path],
                   outputs: Sequence[str | Path]) -> Path:
    manifest_path = Path(str(primary_output) + ".manifest.json")
    manifest = {
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    with open(manifest_path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return manifest_path


def _parse_split(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return float(parse_timestamp(text))


def _load_lexicon_from_args(names: Sequence[str], suffixes: str | None) -> NameLexicon:
    if names or suffixes:
        return load_lexicon(list(names), suffixes)
    return NameLexicon.from_terms()


# -- subcommands ----------------------------------------------------------


def cmd_sessionize(args: argparse.Namespace) -> int:
    interactions = read_log(args.infile, dedup=args.dedup)
    sessions = sessionize(interactions, threshold=args.threshold)
    write_sessions(sessions, args.out)
    write_manifest(args.out, "sessionize",
                   {"threshold": args.threshold, "dedup": args.dedup},
                   [args.infile], [args.out])
    print(f"{len(sessions)} sessions from {len(interactions)} interactions "
          f"-> {args.out}")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    sessions = read_sessions(args.sessions)
    if args.span_days is not None:
        days = args.span_days
    else:
        stamps = [s.start_time for s in sessions]
        if not stamps:
            print("no sessions to filter", file=sys.stderr)
            return DATA_ERROR
        days = (max(stamps) // 86400 - min(stamps) // 86400) + 1
    subset = filter_dataset(sessions, span_days=days, page_size=args.page_size)
    payload = {
        "span_days": days,
        "frequent": sorted(subset.frequent),
        "easy": sorted(subset.easy),
        "difficult": sorted(subset.difficult),
        "union": sorted(subset.union),
    }
    with open(args.out, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    write_manifest(args.out, "filter",
                   {"span_days": days, "page_size": args.page_size},
                   [args.sessions], [args.out])
    print(f"frequent={len(subset.frequent)} easy={len(subset.easy)} "
          f"difficult={len(subset.difficult)} union={len(subset.union)}")
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    lexicon = _load_lexicon_from_args(args.names, args.suffixes)
    print(f"lexicon: {len(lexicon.names)} names, {len(lexicon.suffixes)} suffixes",
          file=sys.stderr)
    source = open(args.infile, encoding="utf-8") if args.infile else sys.stdin
    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for line in source:
            query = line.strip()
            if not query:
                continue
            label = classify(query, lexicon)
            sink.write(f"{query}\t{label.value}\n")
    finally:
        if args.infile:
            source.close()
        if args.out:
            sink.close()
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = RunConfig(
        flavor=Flavor.parse(args.flavor),
        delta=args.delta,
        key_mode=args.key_mode,
        epsilon=args.epsilon,
        seed=args.seed,
    )
    sessions = sorted(read_sessions(args.sessions), key=lambda s: s.start_time)
    exam_table = (ExaminationTable.load(args.exam_table) if args.exam_table
                  else ExaminationTable.default())
    store = train(cfg.new_store(), sessions, cfg, exam_table=exam_table)
    store.save(args.out)
    write_manifest(args.out, "train",
                   {"flavor": cfg.flavor.value, "delta": cfg.delta,
                    "key_mode": cfg.key_mode, "epsilon": cfg.epsilon},
                   [args.sessions] + ([args.exam_table] if args.exam_table else []),
                   [args.out])
    print(f"trained {len(store)} trails from {len(sessions)} sessions -> {args.out}")
    return 0


def _read_keyvalue_config(path: str | Path) -> dict[str, str]:
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for raw in handle:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            mapping[key.strip()] = value.strip()
    return mapping


SIMULATE_KEYS = {
    "sessions", "log", "split", "flavor", "delta", "k", "iterations", "seed",
    "key_mode", "epsilon", "cutoffs", "exam_table", "names", "suffixes",
    "report", "outcomes",
}


def cmd_simulate(args: argparse.Namespace) -> int:
    raw = _read_keyvalue_config(args.config)
    unknown = set(raw) - SIMULATE_KEYS
    if unknown:
        print(f"unknown simulate config keys: {sorted(unknown)}", file=sys.stderr)
        return USAGE_ERROR
    for required in ("split", "report", "outcomes"):
        if required not in raw:
            print(f"simulate config needs {required}=", file=sys.stderr)
            return USAGE_ERROR
    if ("sessions" in raw) == ("log" in raw):
        print("simulate config needs exactly one of sessions= or log=",
              file=sys.stderr)
        return USAGE_ERROR
    cfg = RunConfig(
        flavor=Flavor.parse(raw.get("flavor", "naive")),
        delta=float(raw.get("delta", 86400)),
        k=int(raw.get("k", 1)),
        split=_parse_split(raw["split"]),
        iterations=int(raw.get("iterations", 10)),
        seed=args.seed if args.seed is not None else int(raw.get("seed", 0)),
        key_mode=raw.get("key_mode", "exact"),
        epsilon=float(raw.get("epsilon", 1e-6)),
        cutoffs=tuple(int(c) for c in raw.get("cutoffs", "1,3,10").split(",")),
    )
    if "sessions" in raw:
        sessions = read_sessions(raw["sessions"])
    else:
        sessions = sessionize(read_log(raw["log"]))
    sessions = sorted(sessions, key=lambda s: s.start_time)
    train_sessions, test_sessions = partition(sessions, cfg.split)
    exam_table = (ExaminationTable.load(raw["exam_table"]) if raw.get("exam_table")
                  else ExaminationTable.default())
    store = train(cfg.new_store(), train_sessions, cfg, exam_table=exam_table)
    outcomes = run_monte_carlo(store, test_sessions, cfg)
    if not outcomes:
        print("no clicked test sessions; nothing to report", file=sys.stderr)
        return DATA_ERROR

    name_files = [p for p in raw.get("names", "").split(",") if p]
    lexicon = _load_lexicon_from_args(name_files, raw.get("suffixes") or None)
    labels = {
        normalize_query(s.query): classify(s.query, lexicon)
        for s in test_sessions if normalize_query(s.query)
    }
    rows = summarize(outcomes, labels, cfg.cutoffs)
    write_outcomes(outcomes, raw["outcomes"])
    emit_report(rows, raw["report"])
    inputs = [raw.get("sessions") or raw["log"]] + [p for p in name_files]
    if raw.get("suffixes"):
        inputs.append(raw["suffixes"])
    if raw.get("exam_table"):
        inputs.append(raw["exam_table"])
    write_manifest(raw["report"], "simulate",
                   {**{k: v for k, v in raw.items()}, "seed": cfg.seed},
                   inputs, [raw["report"], raw["outcomes"]])
    print(f"{len(train_sessions)} train / {len(test_sessions)} test sessions, "
          f"{len(outcomes)} outcomes -> {raw['report']}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    from swarmsearch.simulate import read_outcomes
    outcomes = []
    for path in args.outcomes:
        outcomes.extend(read_outcomes(path))
    if not outcomes:
        print("no outcomes to report", file=sys.stderr)
        return DATA_ERROR
    lexicon = _load_lexicon_from_args(args.names, args.suffixes)
    labels = {
        normalize_query(o.query): classify(o.query, lexicon)
        for o in outcomes if normalize_query(o.query)
    }
    rows = summarize(outcomes, labels, tuple(args.cutoffs))
    emit_report(rows, args.out)
    write_manifest(args.out, "report", {"cutoffs": args.cutoffs},
                   list(args.outcomes), [args.out])
    print(f"report over {len(outcomes)} outcomes -> {args.out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    page = [f"http://example.org/doc{i:02d}" for i in range(1, args.docs + 1)]
    exam_table = (ExaminationTable.load(args.exam_table) if args.exam_table
                  else ExaminationTable.default())
    log = gen_synthetic_log(args.users, page, args.relevant_rank, exam_table,
                            seed=args.seed, query=args.query,
                            spacing=args.spacing)
    write_log(log, args.out)
    write_manifest(args.out, "synth",
                   {"users": args.users, "relevant_rank": args.relevant_rank,
                    "docs": args.docs, "seed": args.seed, "query": args.query,
                    "spacing": args.spacing},
                   [args.exam_table] if args.exam_table else [], [args.out])
    clicks = sum(1 for row in log if row.rank > 0)
    print(f"{len(log)} interactions ({clicks} clicks) -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = ServiceConfig.load(args.config)
    if args.port is not None:
        cfg.port = args.port
    run_service(cfg)
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    records = read_experiment_csv(args.infile)
    report = analyze_experiment(records)
    emit_analysis(report, args.out)
    write_manifest(args.out, "analyze", {}, [args.infile], [args.out])
    significant = sum(1 for row in report.correlations
                      if row.significance in ("5%", "10%"))
    print(f"{len(report.correlations)} correlations ({significant} significant), "
          f"{len(report.similarities)} similarity rows -> {args.out}")
    return 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmsearch",
        description="Swarm-based adaptive meta-search toolkit",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("sessionize", help="split an AOL-format log into sessions")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=1800.0,
                   help="inactivity gap in seconds that splits sessions")
    p.add_argument("--dedup", action="store_true",
                   help="collapse consecutive identical rows")
    p.set_defaults(func=cmd_sessionize)

    p = sub.add_parser("filter", help="select frequent/easy/difficult queries")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--span-days", type=int, default=None,
                   help="override the span computed from the data")
    p.add_argument("--page-size", type=int, default=10)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("classify",
                       help="label queries navigational/non-navigational "
                            "(reads stdin or --in, one query per line)")
    p.add_argument("--names", nargs="*", default=[],
                   help="term files: companies, organizations, people names")
    p.add_argument("--suffixes", default=None, help="domain suffix file")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("train", help="train a trail store from sessions")
    p.add_argument("--sessions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--flavor", default="naive")
    p.add_argument("--delta", type=float, default=86400.0)
    p.add_argument("--key-mode", default="exact", choices=("exact", "ngram"))
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--exam-table", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate",
                       help="train + Monte Carlo + report from a key=value config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="merge outcome files into one report")
    p.add_argument("--outcomes", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--names", nargs="*", default=[])
    p.add_argument("--suffixes", default=None)
    p.add_argument("--cutoffs", nargs="*", type=int, default=[1, 3, 10])
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic browsing log")
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--relevant-rank", type=int, default=7)
    p.add_argument("--docs", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--query", default="ants")
    p.add_argument("--spacing", type=int, default=600,
                   help="seconds between successive users")
    p.add_argument("--exam-table", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the live search service")
    p.add_argument("--config", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("analyze", help="controlled-experiment analytics "
                                       "(CSV: order,group,task,trivial,seconds,queries)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analyze)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
