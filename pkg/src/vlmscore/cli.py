"""Command-line entry point: ``vlmscore validate|eval|report``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .entities import MATCHER_KINDS
from .harness import (
    FORMATS,
    TASKS,
    EvalConfig,
    EvalReport,
    IngestError,
    ingest,
    parse_ground_truth,
    parse_prediction,
    read_jsonl,
    render_report,
    run_eval,
)
from .judge import ConfigError, HttpTransport, JudgeCache, JudgeClient
from .schema import MEDIA_KINDS
from .textmatch import MatchConfig

EXIT_OK, EXIT_EVAL_FAILED, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3

ENV_HELP = """\
environment:
  VLMSCORE_JUDGE_URL      judge endpoint used by --judge http when --judge-url is absent
  VLMSCORE_JUDGE_API_KEY  bearer token sent to the judge endpoint
  VLMSCORE_JUDGE_MODEL    judge model id recorded in cache keys and provenance
  VLMSCORE_CACHE_DIR      directory for cached judge verdicts (default: no cache)

exit codes:
  0 success, 1 evaluation failure threshold exceeded (or invalid records
  under `validate`), 2 configuration error, 3 I/O or input-data error
"""


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vlmscore",
        description="Evaluate structured vision-language model outputs against ground truth.",
        epilog=ENV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a JSONL file against the annotation schema")
    v.add_argument("path", help="JSONL file, one record per line with a sample_id field")
    v.add_argument("--role", choices=("gt", "pred"), default="gt",
                   help="gt parses strictly; pred parses leniently (default: gt)")
    v.add_argument("--media-kind", choices=MEDIA_KINDS,
                   help="media kind for prediction lines that omit it")

    e = sub.add_parser("eval", help="score predictions against ground truth",
                       epilog=ENV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("--gt", required=True, help="ground-truth JSONL")
    e.add_argument("--pred", required=True, help="prediction JSONL")
    e.add_argument("--tasks", default=",".join(t for t in TASKS if t != "media"),
                   help=f"comma-separated subset of {','.join(TASKS)} (default: all but media)")
    e.add_argument("--matcher", choices=MATCHER_KINDS, default="exact_normalized")
    e.add_argument("--alias-file", help="alias table for --matcher alias_table")
    e.add_argument("--theta", type=float, default=0.5, help="entity match threshold (default 0.5)")
    e.add_argument("--tau", type=float, default=0.30, help="OCR coverage threshold (default 0.30)")
    e.add_argument("--min-block-len", type=int, default=2, help="shortest matched substring (default 2)")
    e.add_argument("--case-insensitive", action="store_true", help="casefold OCR text before matching")
    e.add_argument("--judge", choices=("none", "stub", "http"), default="none",
                   help="judge backend; http reads VLMSCORE_JUDGE_* variables")
    e.add_argument("--judge-url", help="judge endpoint (overrides VLMSCORE_JUDGE_URL)")
    e.add_argument("--cache-dir", help="judge cache directory (overrides VLMSCORE_CACHE_DIR)")
    e.add_argument("--kiu-sidecar", help="JSONL of pre-extracted description units")
    e.add_argument("--parallelism", type=int, default=1)
    e.add_argument("--format", choices=FORMATS, default="json")
    e.add_argument("-o", "--output", help="write the report here instead of stdout")

    r = sub.add_parser("report", help="re-render a JSON report in another format")
    r.add_argument("path", help="JSON report written by `vlmscore eval`")
    r.add_argument("--format", choices=FORMATS, default="markdown")
    r.add_argument("-o", "--output")
    return p


def _judge(args) -> Optional[JudgeClient]:
    cache_dir = args.cache_dir or os.environ.get("VLMSCORE_CACHE_DIR")
    cache = JudgeCache(cache_dir) if cache_dir else None
    if args.judge == "stub":
        return JudgeClient.stub(cache=cache)
    if args.judge == "http":
        url = args.judge_url or os.environ.get("VLMSCORE_JUDGE_URL")
        if not url:
            raise ConfigError("--judge http needs --judge-url or VLMSCORE_JUDGE_URL")
        model = os.environ.get("VLMSCORE_JUDGE_MODEL", "unspecified")
        return JudgeClient(HttpTransport(url, os.environ.get("VLMSCORE_JUDGE_API_KEY")), model, cache=cache)
    return None


def _config(args) -> EvalConfig:
    tasks = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
    try:
        match = MatchConfig(args.tau, args.min_block_len, not args.case_insensitive)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    config = EvalConfig(
        tasks=tasks,
        matcher=args.matcher,
        theta=args.theta,
        alias_path=args.alias_file,
        match=match,
        judge=_judge(args),
        kiu_sidecar=args.kiu_sidecar,
        parallelism=args.parallelism,
        output_format=args.format,
    )
    if config.matcher == "alias_table" and not config.alias_path:
        raise ConfigError("--matcher alias_table needs --alias-file")
    config.validate()
    return config


def _emit(data: bytes, output: Optional[str]) -> None:
    if output:
        Path(output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()


def cmd_validate(args) -> int:
    rows = read_jsonl(args.path)
    bad = 0
    for sid, row in rows.items():
        try:
            if args.role == "gt":
                _, violations = parse_ground_truth(row)
                status, diagnostics = "valid", []
            else:
                outcome, violations = parse_prediction(row, row.get("media_kind") or args.media_kind)
                status, diagnostics = outcome.status, list(outcome.diagnostics)
        except IngestError as exc:
            print(f"{sid}\tinvalid\t{exc}")
            bad += 1
            continue
        errors = [v for v in violations if v.severity == "error"]
        if status == "invalid" or errors:
            bad += 1
        notes = "; ".join(diagnostics + [str(v) for v in violations])
        print(f"{sid}\t{'invalid' if errors else status}\t{notes}".rstrip())
    print(f"{len(rows) - bad}/{len(rows)} records usable", file=sys.stderr)
    return EXIT_EVAL_FAILED if bad else EXIT_OK


def cmd_eval(args) -> int:
    config = _config(args)
    print(f"config digest: {config.digest()}", file=sys.stderr)
    data = ingest(args.gt, args.pred)
    for w in data.warnings:
        print(f"warning: {w}", file=sys.stderr)
    report = run_eval(config, data.samples, data.warnings)
    _emit(render_report(report, args.format), args.output)
    if report.status != "ok":
        print(f"evaluation failed: {len(report.failed)} of {report.provenance['samples']} samples "
              f"lost to judge errors", file=sys.stderr)
        return EXIT_EVAL_FAILED
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.path).read_text(encoding="utf-8"))
    except ValueError as exc:
        raise IngestError(f"{args.path}: not JSON: {exc}") from exc
    report = EvalReport.from_dict(data)
    print(f"config digest: {report.provenance.get('config_digest')}", file=sys.stderr)
    _emit(render_report(report, args.format), args.output)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "eval": cmd_eval, "report": cmd_report}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, IngestError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
