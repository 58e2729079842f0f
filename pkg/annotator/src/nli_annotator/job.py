"""Batch annotation jobs: raw text files in, CoNLL-U files plus a report out."""

from __future__ import annotations

import contextlib
import fnmatch
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from nlikit.corpus import parse_conllu, serialize_conllu

from . import JobError, PipelineError
from .pipeline import load_backend


@dataclass(frozen=True)
class AnnotationJob:
    """A batch of input files, a pattern-to-label mapping, and a destination.

    ``label_map`` keys are shell-style patterns tried against both the file
    name and the full POSIX path; every input must be matched by exactly one
    pattern, and the matching pattern's value becomes the document label.
    """

    input_paths: Sequence[str | Path]
    label_map: Mapping[str, str]
    output_path: str | Path
    model_name: str = "builtin"


@dataclass(frozen=True)
class FileOutcome:
    input: str
    status: str  # "ok" | "skipped" | "failed"
    label: str = ""
    output: str = ""
    tokens: int = 0
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "status": self.status,
            "label": self.label,
            "output": self.output,
            "tokens": self.tokens,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class AnnotationReport:
    model: str
    outcomes: tuple[FileOutcome, ...] = field(default_factory=tuple)

    def count(self, status: str) -> int:
        return sum(1 for o in self.outcomes if o.status == status)

    @property
    def ok(self) -> bool:
        """True when every non-skipped file was annotated."""
        return self.count("failed") == 0

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "counts": {
                "ok": self.count("ok"),
                "skipped": self.count("skipped"),
                "failed": self.count("failed"),
            },
            "files": [o.to_dict() for o in self.outcomes],
        }


def resolve_label(path: str | Path, label_map: Mapping[str, str]) -> str:
    """Label for ``path``, enforcing the exactly-one-pattern invariant."""
    p = Path(path)
    hits = [
        pattern
        for pattern in label_map
        if fnmatch.fnmatchcase(p.name, pattern)
        or fnmatch.fnmatchcase(p.as_posix(), pattern)
    ]
    if not hits:
        raise JobError(f"no label pattern matches {p.as_posix()!r}")
    if len(hits) > 1:
        raise JobError(
            f"{p.as_posix()!r} matched by several label patterns: "
            + ", ".join(repr(h) for h in hits)
        )
    return label_map[hits[0]]


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def annotate_corpus(job: AnnotationJob, workers: int | None = None) -> AnnotationReport:
    """Annotate every input file and write one CoNLL-U file per document.

    Files that are empty or not UTF-8 are skipped with a report entry.
    Each written file is read back and re-parsed; a document that does not
    round-trip with the pipeline's own token count is marked failed. The
    report is also written to ``report.json`` in the output directory.
    """
    backend = load_backend(job.model_name)
    paths = sorted(Path(p) for p in job.input_paths)
    if not paths:
        raise JobError("job has no input files")

    labels = {p: resolve_label(p, job.label_map) for p in paths}
    by_stem: dict[str, Path] = {}
    for p in paths:
        clash = by_stem.setdefault(p.stem, p)
        if clash is not p:
            raise JobError(
                f"output name collision: {clash.as_posix()!r} and "
                f"{p.as_posix()!r} both map to {p.stem}.conllu"
            )

    out_dir = Path(job.output_path)
    out_dir.mkdir(parents=True, exist_ok=True)

    def work(path: Path) -> FileOutcome:
        outcome = FileOutcome(input=path.as_posix(), status="failed")
        try:
            raw = path.read_bytes()
        except OSError as exc:
            return replace(outcome, reason=f"unreadable: {exc}")
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            return replace(outcome, status="skipped", reason="not UTF-8")
        if not text.strip():
            return replace(outcome, status="skipped", reason="empty")
        outcome = replace(outcome, label=labels[path])
        try:
            doc = backend.annotate(
                text, doc_id=path.stem, label=labels[path], source=path.name
            )
        except PipelineError as exc:
            return replace(outcome, reason=str(exc))
        out_file = out_dir / f"{path.stem}.conllu"
        _write_atomic(out_file, serialize_conllu([doc]))
        try:
            parsed = parse_conllu(out_file.read_text(encoding="utf-8"))
        except Exception as exc:
            return replace(outcome, reason=f"output failed validation: {exc}")
        if len(parsed) != 1 or parsed[0].n_tokens != doc.n_tokens:
            return replace(outcome, reason="output token count does not match pipeline")
        return replace(
            outcome, status="ok", output=out_file.name, tokens=doc.n_tokens
        )

    n_workers = workers if workers is not None else min(8, len(paths))
    if n_workers < 1:
        raise JobError("workers must be at least 1")
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        outcomes = tuple(pool.map(work, paths))

    report = AnnotationReport(model=backend.name, outcomes=outcomes)
    _write_atomic(
        out_dir / "report.json",
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
    )
    return report
