"""Command line front end: nli-annotate."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import AnnotatorError
from .job import AnnotationJob, annotate_corpus

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ERROR = 2


def _fail_usage(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_USAGE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nli-annotate",
        description="Annotate raw text files into CoNLL-U with lemmas, "
        "fine-grained POS tags, named entities, and dependencies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ann = sub.add_parser("annotate", help="annotate a directory of text files")
    ann.add_argument("--in", dest="in_dir", required=True, metavar="DIR",
                     help="directory of raw UTF-8 text files")
    ann.add_argument("--labels", required=True, metavar="MAP.json",
                     help="JSON object mapping file patterns to labels")
    ann.add_argument("--out", required=True, metavar="DIR",
                     help="output directory for .conllu files and report.json")
    ann.add_argument("--model", default="builtin", metavar="NAME",
                     help="pipeline: 'builtin' or 'spacy:<model>' (default builtin)")
    ann.add_argument("--workers", type=int, default=None, metavar="N",
                     help="parallel annotation threads (default: one per file, max 8)")
    return parser


def _load_label_map(path: Path) -> dict[str, str]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValueError(f"cannot read label map: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"label map is not valid JSON: {exc}") from None
    if (
        not isinstance(data, dict)
        or not data
        or not all(
            isinstance(k, str) and isinstance(v, str) and k and v
            for k, v in data.items()
        )
    ):
        raise ValueError(
            "label map must be a non-empty JSON object of pattern -> label strings"
        )
    return data


def cmd_annotate(args: argparse.Namespace) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        return _fail_usage(f"--in {in_dir} is not a directory")
    try:
        label_map = _load_label_map(Path(args.labels))
    except ValueError as exc:
        return _fail_usage(str(exc))
    if args.workers is not None and args.workers < 1:
        return _fail_usage("--workers must be at least 1")

    inputs = sorted(
        p for p in in_dir.iterdir()
        if p.is_file() and not p.name.startswith(".")
    )
    if not inputs:
        print(f"error: no input files under {in_dir}", file=sys.stderr)
        return EXIT_ERROR

    job = AnnotationJob(
        input_paths=inputs,
        label_map=label_map,
        output_path=args.out,
        model_name=args.model,
    )
    try:
        report = annotate_corpus(job, workers=args.workers)
    except AnnotatorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    for outcome in report.outcomes:
        name = Path(outcome.input).name
        if outcome.status == "ok":
            print(f"annotated {name} -> {outcome.output} "
                  f"[{outcome.label}] ({outcome.tokens} tokens)")
        else:
            print(f"{outcome.status} {name}: {outcome.reason}")
    print(
        f"done: {report.count('ok')} annotated, "
        f"{report.count('skipped')} skipped, {report.count('failed')} failed "
        f"(report.json written)"
    )
    if not report.ok:
        return EXIT_ERROR
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.command == "annotate":
        return cmd_annotate(args)
    return _fail_usage(f"unknown command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
