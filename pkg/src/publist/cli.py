"""Batch command-line surface over the pipeline.

Commands: ingest source exports to a records file, run a session
(dedup + scoring), record curator decisions, compare the two retrieval
methods, export the publication list, and print descriptive statistics.

Exit codes: 0 success, 1 validation failure, 2 bad arguments or
format, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from .core import (
    Config,
    FormatError,
    PublicationRecord,
    PublistError,
    ResearcherProfile,
    SourceTag,
    ValidationError,
    validate_record,
)
from .ingest import parse_ris, parse_table, parse_trajectory, profile_from_data
from .report import (
    DEFAULT_ADDRESS_FLOOR,
    compare_methods,
    descriptive_stats,
    export_list,
    match_gold,
    run_method_address,
    run_method_cluster,
)
from .session import Session

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

_TABLE_DELIMITERS = {"csv": ",", "tsv": "\t"}


def _detect_format(path: Path, forced: str | None) -> str:
    if forced:
        return forced
    ext = path.suffix.lower().lstrip(".")
    if ext in ("ris", "csv", "tsv"):
        return ext
    raise FormatError(f"cannot infer format from extension: {path.name}")


def _load_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


def load_profile(path: Path, trajectory_path: Path | None = None) -> ResearcherProfile:
    """Read an analyst-written profile file (see profile_from_data)."""
    data = _load_json(path)
    profile = profile_from_data(data)
    if trajectory_path is not None:
        extra = parse_trajectory(trajectory_path.read_text(encoding="utf-8"))
        profile = replace(profile, trajectory=profile.trajectory + tuple(extra))
    return profile


def load_config(path: Path | None) -> Config:
    if path is None:
        return Config()
    return Config.from_dict(_load_json(path))


def _read_records_file(path: Path) -> list[PublicationRecord]:
    records = []
    violations: list[str] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = PublicationRecord.from_dict(json.loads(line))
        problems = validate_record(record)
        if problems:
            violations.append(f"{path.name}:{lineno}: " + "; ".join(problems))
        else:
            records.append(record)
    if violations:
        raise ValidationError(violations)
    return records


def cmd_ingest(args: argparse.Namespace) -> int:
    source = SourceTag(
        source_id=args.source_id,
        source_name=args.source_name or args.source_id,
        trust_rank=args.trust,
    )
    all_records = []
    summaries = []
    for raw_path in args.paths:
        path = Path(raw_path)
        if not path.exists():
            raise FormatError(f"no such file: {path}")
        fmt = _detect_format(path, args.format)
        text = path.read_text(encoding="utf-8")
        if fmt == "ris":
            records, report = parse_ris(text, source)
        else:
            records, report = parse_table(
                text, None, source, delimiter=_TABLE_DELIMITERS[fmt]
            )
        all_records.extend(records)
        summaries.append((path, report))

    out = Path(args.output)
    out.write_text(
        "".join(
            json.dumps(r.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n"
            for r in all_records
        ),
        encoding="utf-8",
    )
    for path, report in summaries:
        print(
            f"{path.name} [{report.source_id}]: parsed {report.records_parsed},"
            f" rejected {report.records_rejected}"
        )
        for (start, end), message in report.violations:
            span = f"line {start}" if start == end else f"lines {start}-{end}"
            print(f"  {span}: {message}")
    print(f"wrote {len(all_records)} records to {out}")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    records = []
    for raw in args.records:
        records.extend(_read_records_file(Path(raw)))
    profile = load_profile(
        Path(args.profile),
        Path(args.trajectory) if args.trajectory else None,
    )
    config = load_config(Path(args.config) if args.config else None)
    session_dir = Path(args.session)
    session = Session.create(session_dir, profile, config)
    if records:
        session.add_records(records)
    summary = session.run()
    print(json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_decide(args: argparse.Namespace) -> int:
    session = Session.open(Path(args.session))
    delta = session.apply_decision(
        args.record,
        args.decision,
        note=args.note,
        override=args.override,
        timestamp=None if args.deterministic else True,
    )
    print(json.dumps(delta.to_dict(), ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    session = Session.open(Path(args.session))
    set_a = run_method_cluster(session)
    set_b = run_method_address(session, args.address_floor)
    gold_ids = None
    unmatched: tuple[str, ...] = ()
    if args.gold:
        entries = _load_json(Path(args.gold))
        gold_ids, unmatched = match_gold(entries, session.canonical_records())
    comparison = compare_methods(
        set_a,
        set_b,
        session,
        gold=gold_ids,
        unmatched_gold=unmatched,
        address_floor=args.address_floor,
    )
    payload = comparison.to_dict()
    text = json.dumps(payload, ensure_ascii=False, indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)
    print()
    print(f"cluster method: {len(comparison.set_a)} records")
    print(f"address method: {len(comparison.set_b)} records")
    print(f"both: {len(comparison.both)}  only cluster: {len(comparison.only_a)}"
          f"  only address: {len(comparison.only_b)}")
    if comparison.recall_union is not None:
        print(
            f"recall — cluster {comparison.recall_a:.3f}, address {comparison.recall_b:.3f},"
            f" union {comparison.recall_union:.3f}"
        )
    reason_counts: dict[str, int] = {}
    for code in comparison.reasons.values():
        reason_counts[code] = reason_counts.get(code, 0) + 1
    for code in sorted(reason_counts):
        print(f"  {code}: {reason_counts[code]}")
    return EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    session = Session.open(Path(args.session))
    payload = export_list(session, args.format)
    out = Path(args.output)
    out.write_bytes(payload)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    session = Session.open(Path(args.session))
    print(json.dumps(descriptive_stats(session), ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.sessions_root))
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="publist",
        description="Compose one researcher's publication list from noisy sources.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="parse source exports into a records file")
    p_ingest.add_argument("paths", nargs="+", help="export files (.ris, .csv, .tsv)")
    p_ingest.add_argument("--source-id", required=True)
    p_ingest.add_argument("--source-name", default=None)
    p_ingest.add_argument("--trust", type=int, default=0, help="trust rank (0 = most trusted)")
    p_ingest.add_argument("--format", choices=("ris", "csv", "tsv"), default=None)
    p_ingest.add_argument("-o", "--output", required=True, help="records .jsonl output path")
    p_ingest.set_defaults(func=cmd_ingest)

    p_run = sub.add_parser("run", help="create a session: dedup, score, tier")
    p_run.add_argument("--records", action="append", required=True, help="records .jsonl (repeatable)")
    p_run.add_argument("--profile", required=True, help="researcher profile .json")
    p_run.add_argument("--trajectory", default=None, help="extra trajectory lines file")
    p_run.add_argument("--config", default=None, help="engine config .json")
    p_run.add_argument("--session", required=True, help="session directory to create")
    p_run.add_argument("--deterministic", action="store_true", help="suppress timestamps")
    p_run.set_defaults(func=cmd_run)

    p_decide = sub.add_parser("decide", help="record one curator decision")
    p_decide.add_argument("--session", required=True)
    p_decide.add_argument("--record", required=True, help="record id")
    p_decide.add_argument("--decision", choices=("accept", "reject"), required=True)
    p_decide.add_argument("--note", default="")
    p_decide.add_argument("--override", action="store_true",
                          help="allow revising an automatic ACCEPTED/REJECTED tier")
    p_decide.add_argument("--deterministic", action="store_true", help="suppress timestamps")
    p_decide.set_defaults(func=cmd_decide)

    p_compare = sub.add_parser("compare", help="compare cluster vs address methods")
    p_compare.add_argument("--session", required=True)
    p_compare.add_argument("--gold", default=None, help="external publication list .json")
    p_compare.add_argument("--address-floor", type=float, default=DEFAULT_ADDRESS_FLOOR)
    p_compare.add_argument("-o", "--output", default=None, help="write comparison JSON here too")
    p_compare.set_defaults(func=cmd_compare)

    p_export = sub.add_parser("export", help="export the accepted publication list")
    p_export.add_argument("--session", required=True)
    p_export.add_argument("--format", choices=("json", "csv", "ris"), required=True)
    p_export.add_argument("-o", "--output", required=True)
    p_export.set_defaults(func=cmd_export)

    p_stats = sub.add_parser("stats", help="print descriptive statistics")
    p_stats.add_argument("--session", required=True)
    p_stats.set_defaults(func=cmd_stats)

    p_serve = sub.add_parser("serve", help="run the HTTP session service")
    p_serve.add_argument("--sessions-root", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return int(args.func(args))
    except ValidationError as exc:
        for violation in exc.violations:
            print(f"validation: {violation}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PublistError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:  # pragma: no cover - defensive
        logger.exception("unhandled error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
