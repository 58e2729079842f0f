"""Corpus loading, validation, sampling and pairing.

Documents are annotated token sequences read from CoNLL-U files. Document
metadata (class label, proficiency level, source collection) travels in
``# meta`` comment lines so each file is self-contained. Parsed values are
frozen dataclasses and safe to share across threads.
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, replace
from pathlib import Path
from random import Random
from typing import IO, Iterable, Mapping, Sequence

from .errors import DataError, ParseError, ValidationError

# Head index of the sentence root.
ROOT = -1

# Labels assigned by pair_binary.
NATIVE_LABEL = "NATIVE"
NONNATIVE_LABEL = "NONNATIVE"


@dataclass(frozen=True)
class TokenAnnotation:
    """One token with its annotation layers.

    ``head`` is a 0-based index into the same sentence, or ROOT. Annotation
    layers that are absent (plain-text ingestion) hold empty strings.
    """

    surface: str
    lemma: str
    pos: str
    ne_tag: str
    head: int
    dep_label: str
    is_punct: bool


Sentence = tuple[TokenAnnotation, ...]


@dataclass(frozen=True)
class AnnotatedDocument:
    doc_id: str
    label: str
    sentences: tuple[Sentence, ...]
    proficiency: int | None = None
    source: str = ""
    char_length: int = 0

    def tokens(self) -> Iterable[TokenAnnotation]:
        for sentence in self.sentences:
            yield from sentence

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class LabeledDataset:
    documents: tuple[AnnotatedDocument, ...]
    label_space: tuple[str, ...]

    @property
    def n_documents(self) -> int:
        return len(self.documents)


def _looks_punct(surface: str) -> bool:
    return bool(surface) and all(
        unicodedata.category(ch).startswith("P") for ch in surface
    )


def validate_document(doc: AnnotatedDocument) -> None:
    """Check per-document invariants; raise ValidationError on the first breach."""
    if not doc.doc_id:
        raise ValidationError("document with empty doc_id")
    if not doc.label:
        raise ValidationError(f"document {doc.doc_id!r} has no label")
    if not doc.sentences:
        raise ValidationError(f"document {doc.doc_id!r} has no sentences")
    if doc.proficiency is not None and doc.proficiency < 0:
        raise ValidationError(f"document {doc.doc_id!r}: negative proficiency")
    total_surface = 0
    for s_idx, sentence in enumerate(doc.sentences):
        if not sentence:
            raise ValidationError(f"document {doc.doc_id!r}: empty sentence {s_idx}")
        n = len(sentence)
        roots = 0
        for t_idx, tok in enumerate(sentence):
            if not tok.surface:
                raise ValidationError(
                    f"document {doc.doc_id!r}: empty surface at sentence "
                    f"{s_idx} token {t_idx}"
                )
            total_surface += len(tok.surface)
            if tok.head == ROOT:
                roots += 1
            elif not 0 <= tok.head < n:
                raise ValidationError(
                    f"document {doc.doc_id!r}: head {tok.head} out of range "
                    f"in sentence {s_idx}"
                )
            elif tok.head == t_idx:
                raise ValidationError(
                    f"document {doc.doc_id!r}: token {t_idx} is its own head "
                    f"in sentence {s_idx}"
                )
        if roots != 1:
            raise ValidationError(
                f"document {doc.doc_id!r}: sentence {s_idx} has {roots} roots"
            )
        # Single root plus acyclicity makes the sentence one tree. A cycle
        # would keep some token from ever reaching the root.
        for t_idx in range(n):
            hops = 0
            cur = t_idx
            while sentence[cur].head != ROOT:
                cur = sentence[cur].head
                hops += 1
                if hops > n:
                    raise ValidationError(
                        f"document {doc.doc_id!r}: dependency cycle in "
                        f"sentence {s_idx}"
                    )
    if doc.char_length < total_surface:
        raise ValidationError(
            f"document {doc.doc_id!r}: char_length {doc.char_length} smaller "
            f"than total surface length {total_surface}"
        )


def make_dataset(
    documents: Sequence[AnnotatedDocument],
    label_space: Sequence[str] | None = None,
) -> LabeledDataset:
    """Bundle documents into a dataset, validating ids and the label space."""
    seen: set[str] = set()
    for doc in documents:
        if doc.doc_id in seen:
            raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
        seen.add(doc.doc_id)
    if label_space is None:
        space = tuple(sorted({d.label for d in documents}))
    else:
        space = tuple(label_space)
        if len(set(space)) != len(space):
            raise ValidationError("label_space contains duplicates")
        extra = {d.label for d in documents} - set(space)
        if extra:
            raise ValidationError(f"labels outside label_space: {sorted(extra)}")
    return LabeledDataset(documents=tuple(documents), label_space=space)


# ---------------------------------------------------------------------------
# CoNLL-U parsing and serialization.
#
# Columns: ID FORM LEMMA UPOS XPOS FEATS HEAD DEPREL DEPS MISC. The fine tag
# lives in XPOS; UPOS carries only the PUNCT marker. Document metadata rides
# in "# newdoc id", "# meta label", "# meta proficiency", "# meta source" and
# "# meta chars" comments. The entity tag is a BIO-style "NE=" key in MISC.

_N_COLS = 10


def _parse_misc_ne(misc: str) -> str:
    if misc == "_":
        return ""
    for part in misc.split("|"):
        if part.startswith("NE="):
            return part[3:]
    return ""


class _DocBuilder:
    def __init__(self, doc_id: str, line_no: int) -> None:
        self.doc_id = doc_id
        self.line_no = line_no
        self.label = ""
        self.proficiency: int | None = None
        self.source = ""
        self.chars: int | None = None
        self.sentences: list[Sentence] = []
        self.pending: list[TokenAnnotation] = []

    def flush_sentence(self) -> None:
        if self.pending:
            self.sentences.append(tuple(self.pending))
            self.pending = []

    def finish(self) -> AnnotatedDocument:
        self.flush_sentence()
        if self.chars is None:
            total = sum(len(t.surface) for s in self.sentences for t in s)
            n_tok = sum(len(s) for s in self.sentences)
            chars = total + max(0, n_tok - 1)
        else:
            chars = self.chars
        doc = AnnotatedDocument(
            doc_id=self.doc_id,
            label=self.label,
            sentences=tuple(self.sentences),
            proficiency=self.proficiency,
            source=self.source,
            char_length=chars,
        )
        validate_document(doc)
        return doc


def parse_conllu(stream: str | IO[str] | Iterable[str]) -> list[AnnotatedDocument]:
    """Parse CoNLL-U text into validated documents.

    Accepts a string or any iterable of lines. Multiword-token ranges and
    empty nodes (ids like ``3-4`` or ``5.1``) are skipped; basic token ids
    must be consecutive from 1 within each sentence. Raises ParseError with
    a line number for malformed lines, ValidationError for structural
    breaches (missing label, broken trees, duplicate ids).
    """
    if isinstance(stream, str):
        lines: Iterable[str] = stream.splitlines()
    else:
        lines = stream

    docs: list[AnnotatedDocument] = []
    builder: _DocBuilder | None = None
    expect_id = 1

    def flush_doc() -> None:
        nonlocal builder, expect_id
        if builder is not None:
            docs.append(builder.finish())
            builder = None
        expect_id = 1

    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            if builder is not None:
                builder.flush_sentence()
            expect_id = 1
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("newdoc id"):
                _, _, value = body.partition("=")
                doc_id = value.strip()
                if not doc_id:
                    raise ParseError("newdoc with empty id", line_no)
                flush_doc()
                builder = _DocBuilder(doc_id, line_no)
            elif body.startswith("meta "):
                if builder is None:
                    raise ParseError("meta comment before any newdoc", line_no)
                key_val = body[len("meta "):]
                key, sep, value = key_val.partition("=")
                if not sep:
                    raise ParseError(f"malformed meta comment {line!r}", line_no)
                key = key.strip()
                value = value.strip()
                if key == "label":
                    builder.label = value
                elif key == "proficiency":
                    try:
                        builder.proficiency = int(value)
                    except ValueError:
                        raise ParseError(
                            f"proficiency is not an integer: {value!r}", line_no
                        ) from None
                elif key == "source":
                    builder.source = value
                elif key == "chars":
                    try:
                        builder.chars = int(value)
                    except ValueError:
                        raise ParseError(
                            f"chars is not an integer: {value!r}", line_no
                        ) from None
                # Unknown meta keys are ignored.
            # Other comments (# sent_id, # text, ...) are ignored.
            continue

        if builder is None:
            raise ParseError("token line before any newdoc", line_no)
        cols = line.split("\t")
        if len(cols) != _N_COLS:
            raise ParseError(
                f"expected {_N_COLS} tab-separated columns, got {len(cols)}", line_no
            )
        tok_id, form, lemma, upos, xpos, _feats, head_s, deprel, _deps, misc = cols
        if "-" in tok_id or "." in tok_id:
            continue  # multiword range or empty node
        try:
            idx = int(tok_id)
        except ValueError:
            raise ParseError(f"token id is not an integer: {tok_id!r}", line_no) from None
        if idx != expect_id:
            raise ParseError(
                f"token id {idx} out of sequence (expected {expect_id})", line_no
            )
        expect_id += 1
        if not form or form == "_":
            raise ParseError("empty FORM column", line_no)
        try:
            head_i = int(head_s)
        except ValueError:
            raise ParseError(f"HEAD is not an integer: {head_s!r}", line_no) from None
        if head_i < 0:
            raise ParseError(f"negative HEAD {head_i}", line_no)
        if upos != "_":
            is_punct = upos == "PUNCT"
        else:
            is_punct = _looks_punct(form)
        builder.pending.append(
            TokenAnnotation(
                surface=form,
                lemma="" if lemma == "_" else lemma,
                pos="" if xpos == "_" else xpos,
                ne_tag=_parse_misc_ne(misc),
                head=ROOT if head_i == 0 else head_i - 1,
                dep_label="" if deprel == "_" else deprel,
                is_punct=is_punct,
            )
        )
    flush_doc()
    return docs


def _field(value: str) -> str:
    if "\t" in value or "\n" in value:
        raise ValidationError(f"field contains tab or newline: {value!r}")
    return value if value else "_"


def serialize_conllu(documents: Sequence[AnnotatedDocument]) -> str:
    """Serialize documents to canonical CoNLL-U text.

    parse_conllu(serialize_conllu(docs)) reproduces every field of docs.
    """
    out: list[str] = []
    for doc in documents:
        validate_document(doc)
        out.append(f"# newdoc id = {_field_comment(doc.doc_id)}")
        out.append(f"# meta label = {_field_comment(doc.label)}")
        if doc.proficiency is not None:
            out.append(f"# meta proficiency = {doc.proficiency}")
        if doc.source:
            out.append(f"# meta source = {_field_comment(doc.source)}")
        out.append(f"# meta chars = {doc.char_length}")
        for s_idx, sentence in enumerate(doc.sentences, start=1):
            out.append(f"# sent_id = {doc.doc_id}-{s_idx}")
            out.append("# text = " + " ".join(t.surface for t in sentence))
            for t_idx, tok in enumerate(sentence, start=1):
                head = 0 if tok.head == ROOT else tok.head + 1
                misc = f"NE={tok.ne_tag}" if tok.ne_tag else "_"
                # UPOS encodes punctuationhood; "X" pins down the rare
                # non-punct token whose surface is all punctuation marks.
                if tok.is_punct:
                    upos = "PUNCT"
                elif _looks_punct(tok.surface):
                    upos = "X"
                else:
                    upos = "_"
                out.append(
                    "\t".join(
                        (
                            str(t_idx),
                            _field(tok.surface),
                            _field(tok.lemma),
                            upos,
                            _field(tok.pos),
                            "_",
                            str(head),
                            _field(tok.dep_label),
                            "_",
                            misc,
                        )
                    )
                )
            out.append("")
    return "\n".join(out) + ("\n" if out else "")


def _field_comment(value: str) -> str:
    if "\n" in value:
        raise ValidationError(f"metadata contains newline: {value!r}")
    return value


# ---------------------------------------------------------------------------
# Plain-text ingestion.


def tokenize_plain(
    text: str,
    label: str,
    *,
    doc_id: str = "doc",
    proficiency: int | None = None,
    source: str = "",
) -> AnnotatedDocument:
    """Build a minimally annotated document from raw text.

    Tokens are whitespace chunks with every non-alphanumeric character split
    off as its own token. Sentences end after ``.``, ``!`` or ``?`` tokens.
    Lemmas are lowercased surfaces; POS, entity and dependency-label layers
    are left empty. Each sentence gets a flat tree (first token is the root)
    so the document validates; operations needing real syntax will reject
    the empty layers.
    """
    if not text.strip():
        raise DataError("empty text")
    words: list[str] = []
    for chunk in text.split():
        run = ""
        for ch in chunk:
            if ch.isalnum():
                run += ch
            else:
                if run:
                    words.append(run)
                    run = ""
                words.append(ch)
        if run:
            words.append(run)

    sentences: list[Sentence] = []
    current: list[str] = []
    for word in words:
        current.append(word)
        if word in {".", "!", "?"}:
            sentences.append(_plain_sentence(current))
            current = []
    if current:
        sentences.append(_plain_sentence(current))

    doc = AnnotatedDocument(
        doc_id=doc_id,
        label=label,
        sentences=tuple(sentences),
        proficiency=proficiency,
        source=source,
        char_length=len(text),
    )
    validate_document(doc)
    return doc


def _plain_sentence(words: Sequence[str]) -> Sentence:
    return tuple(
        TokenAnnotation(
            surface=w,
            lemma=w.lower(),
            pos="",
            ne_tag="",
            head=ROOT if i == 0 else 0,
            dep_label="",
            is_punct=_looks_punct(w),
        )
        for i, w in enumerate(words)
    )


# ---------------------------------------------------------------------------
# Dataset operations.


def docs_by_label(dataset: LabeledDataset) -> dict[str, list[AnnotatedDocument]]:
    groups: dict[str, list[AnnotatedDocument]] = {lab: [] for lab in dataset.label_space}
    for doc in dataset.documents:
        groups[doc.label].append(doc)
    return groups


def sample_balanced(dataset: LabeledDataset, per_label: int, seed: int) -> LabeledDataset:
    """Draw per_label documents per label without replacement, deterministically."""
    if per_label <= 0:
        raise DataError("per_label must be positive")
    groups = docs_by_label(dataset)
    for label, docs in groups.items():
        if len(docs) < per_label:
            raise DataError(
                f"label {label!r} has {len(docs)} documents, need {per_label}"
            )
    rng = Random(seed)
    keep: set[str] = set()
    for label in dataset.label_space:
        docs = groups[label]
        chosen = rng.sample(range(len(docs)), per_label)
        keep.update(docs[i].doc_id for i in chosen)
    return LabeledDataset(
        documents=tuple(d for d in dataset.documents if d.doc_id in keep),
        label_space=dataset.label_space,
    )


def filter_min_chars(dataset: LabeledDataset, min_chars: int) -> LabeledDataset:
    kept = tuple(d for d in dataset.documents if d.char_length >= min_chars)
    return LabeledDataset(documents=kept, label_space=dataset.label_space)


def pair_binary(
    non_native: LabeledDataset,
    native: LabeledDataset,
    l1: str,
    native_sample: int,
    seed: int,
) -> LabeledDataset:
    """Build a NATIVE / NONNATIVE dataset for one L1.

    Takes every non_native document labeled l1 and a seeded sample of
    native_sample native documents. The native sample depends only on the
    seed and the native dataset, never on l1, so every L1 task built with
    the same seed faces the identical native side.
    """
    if l1 not in non_native.label_space:
        raise DataError(f"l1 {l1!r} not in the non-native label space")
    nn_docs = [d for d in non_native.documents if d.label == l1]
    if not nn_docs:
        raise DataError(f"no documents labeled {l1!r}")
    if native_sample <= 0 or native_sample > native.n_documents:
        raise DataError(
            f"native_sample {native_sample} outside 1..{native.n_documents}"
        )
    rng = Random(seed)
    chosen = rng.sample(range(native.n_documents), native_sample)
    nat_docs = [native.documents[i] for i in sorted(chosen)]

    nn_ids = {d.doc_id for d in nn_docs}
    overlap = nn_ids & {d.doc_id for d in nat_docs}
    if overlap:
        raise ValidationError(f"doc_id collision between sides: {sorted(overlap)[:5]}")

    documents = tuple(
        [replace(d, label=NONNATIVE_LABEL) for d in nn_docs]
        + [replace(d, label=NATIVE_LABEL) for d in nat_docs]
    )
    return LabeledDataset(
        documents=documents, label_space=(NATIVE_LABEL, NONNATIVE_LABEL)
    )


Band = tuple[int, int | None]


def band_name(band: Band) -> str:
    low, high = band
    return f"{low}-{high}" if high is not None else f"{low}+"


def group_by_proficiency(
    dataset: LabeledDataset, bands: Sequence[Band]
) -> tuple[dict[str, LabeledDataset], int]:
    """Split by proficiency bands; returns (band datasets, dropped count).

    Bands are (low, high) inclusive ranges, high=None meaning open-ended.
    Overlapping bands are rejected. Documents without a proficiency level
    or outside every band are dropped and counted.
    """
    if not bands:
        raise DataError("no bands given")
    for low, high in bands:
        if high is not None and high < low:
            raise DataError(f"band {band_name((low, high))} is empty")
    for i, a in enumerate(bands):
        for b in bands[i + 1 :]:
            a_hi = a[1] if a[1] is not None else float("inf")
            b_hi = b[1] if b[1] is not None else float("inf")
            if a[0] <= b_hi and b[0] <= a_hi:
                raise DataError(
                    f"bands {band_name(a)} and {band_name(b)} overlap"
                )
    grouped: dict[str, list[AnnotatedDocument]] = {band_name(b): [] for b in bands}
    dropped = 0
    for doc in dataset.documents:
        if doc.proficiency is None:
            dropped += 1
            continue
        for band in bands:
            low, high = band
            if doc.proficiency >= low and (high is None or doc.proficiency <= high):
                grouped[band_name(band)].append(doc)
                break
        else:
            dropped += 1
    out = {
        name: LabeledDataset(documents=tuple(docs), label_space=dataset.label_space)
        for name, docs in grouped.items()
    }
    return out, dropped


def summarize(dataset: LabeledDataset) -> dict:
    """Per-label document and token counts plus totals, for summary tables."""
    labels: dict[str, dict[str, int]] = {}
    for label in dataset.label_space:
        docs = [d for d in dataset.documents if d.label == label]
        labels[label] = {
            "documents": len(docs),
            "tokens": sum(d.n_tokens for d in docs),
        }
    return {
        "documents": dataset.n_documents,
        "tokens": sum(d.n_tokens for d in dataset.documents),
        "labels": labels,
    }


# ---------------------------------------------------------------------------
# Manifest loading. A manifest is a JSON list of entries:
#   {"path": "sub/dir-or-file", "label": "SPA", "proficiency": 3, "source": "x"}
# .conllu files are parsed (entry fields override file metadata when given);
# .txt files go through tokenize_plain and require a label.


def load_manifest(path: str | Path) -> LabeledDataset:
    manifest_path = Path(path)
    try:
        entries = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(entries, list):
        raise ParseError("manifest must be a JSON list")
    base = manifest_path.parent
    documents: list[AnnotatedDocument] = []
    for entry in entries:
        if not isinstance(entry, dict) or "path" not in entry:
            raise ParseError(f"manifest entry missing 'path': {entry!r}")
        target = base / entry["path"]
        if target.is_dir():
            files = sorted(
                p for p in target.iterdir() if p.suffix in {".conllu", ".txt"}
            )
        elif target.is_file():
            files = [target]
        else:
            raise DataError(f"manifest path does not exist: {target}")
        for file in files:
            documents.extend(_load_manifest_file(file, entry))
    return make_dataset(documents)


def _load_manifest_file(file: Path, entry: Mapping) -> list[AnnotatedDocument]:
    label = entry.get("label", "")
    proficiency = entry.get("proficiency")
    source = entry.get("source", "")
    if file.suffix == ".conllu":
        docs = parse_conllu(file.read_text(encoding="utf-8"))
        if label or proficiency is not None or source:
            docs = [
                replace(
                    d,
                    label=label or d.label,
                    proficiency=proficiency if proficiency is not None else d.proficiency,
                    source=source or d.source,
                )
                for d in docs
            ]
        return docs
    if not label:
        raise DataError(f"plain-text entry without a label: {file}")
    return [
        tokenize_plain(
            file.read_text(encoding="utf-8"),
            label,
            doc_id=file.stem,
            proficiency=proficiency,
            source=source,
        )
    ]


def load_path(path: str | Path) -> LabeledDataset:
    """Load a dataset from a .conllu file, a directory of them, or a manifest."""
    p = Path(path)
    if p.is_dir():
        documents: list[AnnotatedDocument] = []
        for file in sorted(p.glob("*.conllu")):
            documents.extend(parse_conllu(file.read_text(encoding="utf-8")))
        if not documents:
            raise DataError(f"no .conllu files under {p}")
        return make_dataset(documents)
    if p.suffix == ".json":
        return load_manifest(p)
    if p.suffix == ".conllu":
        return make_dataset(parse_conllu(p.read_text(encoding="utf-8")))
    raise DataError(f"cannot load dataset from {p}: expect .conllu, .json or directory")
