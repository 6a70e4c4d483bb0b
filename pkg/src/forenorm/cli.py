"""Command-line driver: ingest, derive, query, export, compare.

Stages talk to each other only through the canonical wire format, so any
stage's output can be fed to another stage or to an external tool. Data goes
to stdout (or ``--out``); counts, warnings and errors go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from importlib import resources
from typing import Callable, Optional, Sequence

from . import __version__
from .classify import (
    FilterExpr,
    classify_collection,
    default_category_rules,
    filter_collection,
    load_category_rules,
)
from .correlate import default_rules, derive_events, load_rules, profile_subject
from .errors import ForenormError, IngestError
from .exchange import export_stix_bundle, parse, serialize
from .ingest import (
    L2T_COLUMNS,
    SQLITE_MAGIC,
    IngestResult,
    MappingProfile,
    bundled_profiles,
    default_profile,
    ingest_delimited,
    ingest_eventlog_export,
    ingest_relational_export,
    ingest_timeline_csv,
    load_profile,
)
from .model import Collection, Domain, Metadata, render_sentence, when_sort_key
from .verify import compare_tools, load_answer_key, load_tool_output, render_matrix

log = logging.getLogger("forenorm")

FORMATS = ("auto", "timeline_csv", "relational_export", "eventlog_export", "delimited")


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"forenorm: {msg}", file=sys.stderr)


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    with open(path, "rb") as fh:
        return fh.read()


def _write(out: Optional[str], data: bytes) -> None:
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        with open(out, "wb") as fh:
            fh.write(data)


def _require(paths: Sequence[str]) -> None:
    missing = [p for p in paths if p != "-" and not os.path.exists(p)]
    if missing:
        raise UsageError(f"no such file: {', '.join(missing)}")


def _profile(ref: str) -> MappingProfile:
    if os.path.exists(ref):
        with open(ref, "rb") as fh:
            return load_profile(fh)
    if ref in bundled_profiles():
        return default_profile(ref)
    raise UsageError(f"no such profile file or bundled profile: {ref}")


def _rules(ref: str):
    if os.path.exists(ref):
        with open(ref, "rb") as fh:
            return load_rules(fh)
    if resources.files("forenorm.data.rules").joinpath(f"{ref}.yaml").is_file():
        return default_rules(ref)
    raise UsageError(f"no such rules file or bundled rule set: {ref}")


def detect_format(data: bytes) -> str:
    """Guess the adapter from content."""
    if data.startswith(SQLITE_MAGIC):
        return "relational_export"
    head = data.lstrip()[:1]
    if head == b"{":
        return "relational_export"
    if head == b"<":
        return "eventlog_export"
    first = data.decode("utf-8", errors="replace").lstrip("﻿").splitlines()[:1]
    header = next(csv.reader(io.StringIO(first[0])), []) if first else []
    if set(header) == set(L2T_COLUMNS):
        return "timeline_csv"
    if "EventID" in header:
        return "eventlog_export"
    return "delimited"


def _ingest_one(data: bytes, path: str, fmt: str, profile: MappingProfile, table: Optional[str],
                start: int, id_mode: str) -> IngestResult:
    name = os.path.basename(path)
    kw = dict(path=name, start=start, id_mode=id_mode)
    if fmt == "timeline_csv":
        return ingest_timeline_csv(data, profile, **kw)
    if fmt == "relational_export":
        return ingest_relational_export(data, table, profile, **kw)
    if fmt == "eventlog_export":
        return ingest_eventlog_export(data, profile, **kw)
    return ingest_delimited(data, profile, **kw)


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> int:
    if not args.inputs:
        raise UsageError("ingest needs at least one input file")
    if not args.profile:
        raise UsageError("ingest needs --profile")
    _require(args.inputs)
    if len(args.profile) not in (1, len(args.inputs)):
        raise UsageError("give one --profile for all inputs or one per input")
    profiles = [_profile(p) for p in args.profile]
    if len(profiles) == 1:
        profiles *= len(args.inputs)
    cat_rules = default_category_rules()
    if args.category_rules:
        _require([args.category_rules])
        with open(args.category_rules, "rb") as fh:
            cat_rules = load_category_rules(fh)

    traces = []
    n = 1
    for path, profile in zip(args.inputs, profiles):
        data = _read(path)
        fmt = args.input_format if args.input_format != "auto" else detect_format(data)
        try:
            res = _ingest_one(data, path, fmt, profile, args.table, n, args.id_mode)
        except IngestError as err:
            err.path = path
            _err(str(err))
            return 1
        for skip in res.skipped:
            skip.path = path
            _err(f"skipped {skip}")
        print(f"{path}: {fmt}: ingested {len(res.traces)}, skipped {len(res.skipped)}",
              file=sys.stderr)
        traces += res.traces
        n += len(res.traces)

    meta = Metadata(case_name=args.case, created_at=args.created_at, tool_version=__version__)
    c = classify_collection(Collection(tuple(traces), (), meta), cat_rules)
    _write(args.out, serialize(c))
    return 0


def _load_collection(path: str) -> Collection:
    _require([path])
    return parse(_read(path))


def cmd_derive(args) -> int:
    c = _load_collection(args.collection)
    if not args.rules:
        raise UsageError("derive needs --rules")
    rules = [r for ref in args.rules for r in _rules(ref)]
    res = derive_events(c, rules)
    for s in res.skipped:
        _err(f"warning: {s}")
    print(f"events created {res.created}, skipped {len(res.skipped)}", file=sys.stderr)
    if res.skipped:
        print(f"warnings: {len(res.skipped)}", file=sys.stderr)
    _write(args.out, serialize(res.collection))
    return 0


def _build_filter(args) -> FilterExpr:
    domains = {d: getattr(args, d.value) for d in (Domain.WHO, Domain.HOW, Domain.WHAT, Domain.WHERE)
               if getattr(args, d.value) is not None}
    try:
        return FilterExpr(
            categories=frozenset(args.category) if args.category else None,
            domains=domains,
            start=args.start,
            end=args.end,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_query(args) -> int:
    c = _load_collection(args.collection)
    if args.subject is not None:
        report = profile_subject(c, args.subject)
        text = report.render()
        if args.figure:
            from .plotting import plot_profile_timeline

            plot_profile_timeline(report, args.figure)
    else:
        sel = filter_collection(c, _build_filter(args))
        # chronological for reading; untimed events last
        lines = [render_sentence(e) for e in sorted(sel.events, key=lambda e: when_sort_key(e.when))]
        if args.traces:
            for t in sel.traces:
                lines.append(f"{t.id} [{t.category.value}] {t.artifact_type} "
                             f"{t.source.path} {t.source.record_locator}")
        lines.append(f"{len(sel.events)} events")
        if args.traces:
            lines.append(f"{len(sel.traces)} traces")
        text = "\n".join(lines) + "\n"
    _write(args.out, text.encode("utf-8"))
    return 0


def cmd_export(args) -> int:
    c = _load_collection(args.collection)
    data = serialize(c) if args.format == "native" else export_stix_bundle(c)
    _write(args.out, data)
    return 0


def cmd_compare(args) -> int:
    _require([args.answer_key, *args.tool_outputs])
    with open(args.answer_key, "rb") as fh:
        key = load_answer_key(fh)
    outputs = []
    for p in args.tool_outputs:
        with open(p, "rb") as fh:
            outputs.append(load_tool_output(fh))
    artifact = None
    if args.strict:
        path = args.artifact or os.path.join(os.path.dirname(args.answer_key), key.artifact)
        if not os.path.isfile(path):
            raise UsageError(f"--strict needs the source artifact ({path} not found)")
        artifact = _read(path)
    report = compare_tools(key, outputs, artifact=artifact)
    _write(args.out, render_matrix(report).encode("utf-8"))
    if args.figure:
        from .plotting import plot_verdict_matrix

        plot_verdict_matrix(report, args.figure)
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="forenorm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="convert tool outputs into a trace collection")
    s.add_argument("inputs", nargs="*")
    s.add_argument("--profile", action="append", default=[],
                   help="profile file or bundled name (%s)" % ", ".join(bundled_profiles()))
    s.add_argument("--input-format", choices=FORMATS, default="auto")
    s.add_argument("--table", help="table to read from relational exports")
    s.add_argument("--category-rules")
    s.add_argument("--id-mode", choices=("sequential", "hash"), default="sequential")
    s.add_argument("--case")
    s.add_argument("--created-at")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("derive", help="derive event objects with rules")
    s.add_argument("collection")
    s.add_argument("--rules", action="append", default=[])
    s.add_argument("--out")
    s.set_defaults(func=cmd_derive)

    s = sub.add_parser("query", help="filter events or profile a subject")
    s.add_argument("collection")
    for d in ("who", "how", "what", "where"):
        s.add_argument(f"--{d}", metavar="PATTERN")
    s.add_argument("--from", dest="start", metavar="TIME")
    s.add_argument("--to", dest="end", metavar="TIME")
    s.add_argument("--category", action="append")
    s.add_argument("--subject", help="print a profile report for this who value")
    s.add_argument("--traces", action="store_true", help="list matching traces too")
    s.add_argument("--figure", help="with --subject: write a timeline figure here")
    s.add_argument("--out")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("export", help="write the canonical document or a STIX bundle")
    s.add_argument("collection")
    s.add_argument("--format", choices=("native", "stix"), default="native")
    s.add_argument("--out")
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("compare", help="score tool outputs against an answer key")
    s.add_argument("answer_key")
    s.add_argument("tool_outputs", nargs="+")
    s.add_argument("--strict", action="store_true", help="check answer offsets in the artifact")
    s.add_argument("--artifact", help="source artifact for --strict")
    s.add_argument("--figure", help="write a verdict-matrix figure here")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    func: Callable[[argparse.Namespace], int] = args.func
    try:
        return func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits 2
    except (ForenormError, OSError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
