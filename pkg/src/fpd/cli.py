"""Command-line interface: ``fpd validate|convert|fmt|report|rules``.

Exit status: 0 compliant/success, 1 rule violations (or reformat needed
under ``fmt --check``), 2 parse, schema or IO errors.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from fpd.model import Model, ModelError, Placement, StateKind, decomposition_depth
from fpd.rules import RuleConfig, RuleId, Severity, list_rules, validate
from fpd.script import ParseFailure, SourceSpan, parse_document, print_model
from fpd.xmlio import XmlError, deserialize, serialize

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_ERROR = 2

FORMATS = {".fpd": "fpd", ".xml": "xml"}


class InputError(Exception):
    """Unreadable or unparseable input; maps to exit status 2."""


def _use_color(stream) -> bool:
    mode = os.environ.get("FPD_COLOR", "auto").lower()
    if mode == "always":
        return True
    if mode == "never":
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _paint(text: str, code: str, on: bool) -> str:
    return f"\033[{code}m{text}\033[0m" if on else text


def detect_format(path: str, override: Optional[str]) -> str:
    if override:
        return override
    fmt = FORMATS.get(Path(path).suffix.lower())
    if fmt is None:
        raise InputError(f"{path}: cannot tell the format from the extension; use --from")
    return fmt


def load(path: str, fmt: Optional[str] = None, lenient: bool = False
         ) -> tuple[Model, dict[str, SourceSpan]]:
    fmt = detect_format(path, fmt)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError as exc:
        raise InputError(f"{path}: not UTF-8 ({exc.reason})") from None
    try:
        if fmt == "fpd":
            doc = parse_document(text, path)
            return doc.model, doc.spans
        return deserialize(text.encode("utf-8"), lenient=lenient), {}
    except ParseFailure as exc:
        raise InputError("\n".join(f"{e} [error]" for e in exc.errors)) from None
    except (XmlError, ModelError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _rule_list(text: str) -> list[RuleId]:
    return [RuleId.parse(part) for part in text.split(",") if part.strip()]


def _overrides(text: str) -> dict[RuleId, Severity]:
    result = {}
    for part in text.split(","):
        if not part.strip():
            continue
        rule, _, sev = part.partition("=")
        try:
            result[RuleId.parse(rule)] = Severity(sev.strip().lower())
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad severity override {part!r}") from None
    return result


def _config(args) -> RuleConfig:
    severities = args.severity_overrides or {}
    if args.rules:
        return RuleConfig.only(args.rules, severities=severities)
    return RuleConfig(severities=severities)


def _validate_one(path: str, args) -> tuple[int, str, str]:
    """Validate a single file, returning (status, stdout text, stderr text)."""
    out, err = io.StringIO(), io.StringIO()
    try:
        model, spans = load(path, args.from_format, args.lenient)
    except InputError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_ERROR, out.getvalue(), err.getvalue()

    diags = validate(model, _config(args))
    color = args.color
    for d in diags:
        if args.format == "machine":
            record = d.to_record()
            record["file"] = path
            span = spans.get(d.elements[0])
            if span is not None:
                record["line"], record["column"] = span.start_line, span.start_col
            print(json.dumps(record, ensure_ascii=False, sort_keys=False), file=out)
            continue
        span = spans.get(d.elements[0])
        where = str(span) if span is not None else path
        sev = _paint(d.severity.value, "31" if d.severity is Severity.ERROR else "33", color)
        print(f"{where}: {sev} {d.rule.name} {d.rule.title}: {d.message}", file=out)
        print(f"    process {d.process_id}; elements: {', '.join(d.elements)}", file=out)
    n_err = sum(d.severity is Severity.ERROR for d in diags)
    n_warn = len(diags) - n_err
    if args.format == "text":
        summary = f"{path}: {n_err} error{'s' if n_err != 1 else ''}"
        if n_warn:
            summary += f", {n_warn} warning{'s' if n_warn != 1 else ''}"
        print(summary, file=out)
    return (EXIT_VIOLATIONS if n_err else EXIT_OK), out.getvalue(), err.getvalue()


def cmd_validate(args) -> int:
    args.color = _use_color(sys.stdout)
    paths = args.paths
    if len(paths) == 1:
        results = [_validate_one(paths[0], args)]
    else:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(lambda p: _validate_one(p, args), paths))
    for _, out, err in results:
        sys.stdout.write(out)
        sys.stderr.write(err)
    return max(status for status, _, _ in results)


def _write(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def cmd_convert(args) -> int:
    try:
        model, _ = load(args.input, args.from_format, args.lenient)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text = serialize(model) if args.to == "xml" else print_model(model)
    try:
        _write(text, args.out)
    except OSError as exc:
        print(f"error: {args.out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_ERROR
    diags = validate(model)
    if diags:
        n_err = sum(d.severity is Severity.ERROR for d in diags)
        print(f"warning: converted model has {n_err} rule error(s) and "
              f"{len(diags) - n_err} warning(s); run 'fpd validate' for details",
              file=sys.stderr)
    return EXIT_OK


def cmd_fmt(args) -> int:
    status = EXIT_OK
    for path in args.paths:
        try:
            source = Path(path).read_text(encoding="utf-8")
            model, _ = load(path, "fpd")
        except (OSError, InputError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            status = EXIT_ERROR
            continue
        formatted = print_model(model)
        if formatted == source:
            continue
        if args.check:
            print(f"{path}: would reformat")
            status = max(status, EXIT_VIOLATIONS)
        else:
            Path(path).write_text(formatted, encoding="utf-8", newline="\n")
            print(f"{path}: reformatted")
    return status


def process_counts(model: Model) -> list[dict]:
    rows = []
    for p in model.processes:
        states = {
            f"{kind.value.lower()}_{placement.value}": 0
            for kind in StateKind for placement in Placement
        }
        for s in p.states:
            states[f"{s.kind.value.lower()}_{s.placement.value}"] += 1
        rows.append({
            "process": p.id,
            "name": p.name,
            "root": p.id in model.root_process_ids,
            "states": len(p.states),
            "statesByKind": states,
            "operators": len(p.operators),
            "resources": len(p.resources),
            "connectors": len(p.connectors),
            "flows": len(p.flows),
            "usages": len(p.usages),
            "decompositionDepth": decomposition_depth(p, model),
        })
    return rows


def cmd_report(args) -> int:
    try:
        model, _ = load(args.path, args.from_format, args.lenient)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    rows = process_counts(model)
    if args.format == "machine":
        for row in rows:
            print(json.dumps(row, ensure_ascii=False))
        return EXIT_OK
    for row in rows:
        label = f"{row['name']} ({row['process']})" if row["name"] else row["process"]
        print(f"process {label}{' [root]' if row['root'] else ''}")
        print(f"  states: {row['states']}")
        for kind in StateKind:
            b = row["statesByKind"][f"{kind.value.lower()}_boundary"]
            i = row["statesByKind"][f"{kind.value.lower()}_intermediate"]
            print(f"    {kind.value.lower():<12} boundary {b}  intermediate {i}")
        for key in ("operators", "resources", "connectors", "flows", "usages"):
            print(f"  {key}: {row[key]}")
        print(f"  decomposition depth: {row['decompositionDepth']}")
    return EXIT_OK


def cmd_rules(args) -> int:
    for rule, description, severity in list_rules():
        print(f"{rule.name:<4} {rule.title:<25} {severity.value:<8} {description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpd", description="Validate, convert and format FPD process models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def input_opts(p, lenient=True):
        p.add_argument("--from", dest="from_format", choices=("fpd", "xml"),
                       help="input format (default: by file extension)")
        if lenient:
            p.add_argument("--lenient", action="store_true",
                           help="XML input: warn about unknown content instead of failing")

    p = sub.add_parser("validate", help="check models against the rule catalog")
    p.add_argument("paths", nargs="+", metavar="path")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    p.add_argument("--rules", type=_rule_list,
                   help="comma-separated subset of rules to run, e.g. R1,R3")
    p.add_argument("--severity-overrides", type=_overrides, metavar="RULE=SEV,...",
                   help="e.g. R13=error,R5=warning")
    input_opts(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", help="convert between .fpd and .xml")
    p.add_argument("input")
    p.add_argument("--to", choices=("xml", "fpd"), required=True)
    p.add_argument("--out", help="output path (default: standard output)")
    input_opts(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("fmt", help="rewrite .fpd files in canonical form")
    p.add_argument("paths", nargs="+", metavar="path")
    p.add_argument("--check", action="store_true",
                   help="report files that need formatting without writing")
    p.set_defaults(func=cmd_fmt)

    p = sub.add_parser("report", help="print per-process element counts")
    p.add_argument("path")
    p.add_argument("--format", choices=("text", "machine"), default="text")
    input_opts(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("rules", help="print the rule catalog")
    p.set_defaults(func=cmd_rules)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
