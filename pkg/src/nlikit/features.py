"""Feature extraction over annotated documents.

Thirty feature families. Nine projections of the token stream, each taken as
1-, 2- and 3-grams:

  T   surface tokens
  L   lemmas
  TN  surfaces with entity-covered tokens replaced by a placeholder
  LN  lemmas with entity-covered tokens replaced by a placeholder
  TP  surfaces with open-class-masked POS substituted for the token
  LP  lemmas with the same POS masking
  MS  POS tag alone, or POS-suffix for words ending in a known suffix
  P   POS tags
  D   dependency labels

and three statistical families encoding value distributions:

  WL  word lengths in characters (punctuation excluded)
  SL  sentence lengths in tokens (punctuation included)
  DD  dependency depths (root = 0, child = head depth + 1)

n-grams run over the whole document, crossing sentence boundaries. Every
feature name is prefixed with its family and order ("T2:", "WL:") so families
can mix in one space without collisions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import ROOT, AnnotatedDocument
from .errors import DataError

NGRAM_FAMILIES = ("T", "L", "TN", "LN", "TP", "LP", "MS", "P", "D")
STAT_FAMILIES = ("WL", "SL", "DD")

# POS classes rewritten to the tag itself under TP/LP masking.
MASKED_POS = frozenset({"ADD", "FW", "NN", "NNP", "NNPS", "NNS", "XX"})

# Placeholder substituted for entity-covered tokens under TN/LN masking.
ENTITY_PLACEHOLDER = "ENT"

# Default derivational/inflectional suffix list for the MS family. Matching
# is longest-first and requires a stem of at least two characters, so short
# function words stay bare.
DEFAULT_SUFFIXES = (
    "ability", "ibility", "ization", "isation", "fulness", "ousness",
    "iveness", "ation", "ition", "ction", "ement", "alism", "esque",
    "wards", "sion", "tion", "ment", "ness", "ance", "ence", "ancy",
    "ency", "ship", "hood", "ious", "eous", "able", "ible", "ative",
    "itive", "ical", "less", "ling", "like", "fold", "most", "ward",
    "wise", "dom", "ism", "ist", "ite", "ant", "ent", "ing", "ful",
    "ous", "ive", "ial", "ure", "age", "ery", "ory", "ary", "ian",
    "ish", "ify", "ise", "ize", "ate", "let", "ion", "al", "ic",
    "ed", "ly",
)


@dataclass(frozen=True)
class SuffixLexicon:
    """Ordered suffix list with longest-match-first lookup."""

    suffixes: tuple[str, ...] = DEFAULT_SUFFIXES

    def __post_init__(self) -> None:
        if not self.suffixes:
            raise DataError("empty suffix lexicon")
        seen = set()
        for s in self.suffixes:
            if not s or s != s.lower():
                raise DataError(f"suffix must be non-empty lowercase: {s!r}")
            if s in seen:
                raise DataError(f"duplicate suffix {s!r}")
            seen.add(s)
        ordered = tuple(sorted(self.suffixes, key=lambda s: (-len(s), s)))
        object.__setattr__(self, "suffixes", ordered)

    def match(self, word: str) -> str | None:
        """Longest listed suffix of word, requiring a stem of >= 2 chars."""
        lowered = word.lower()
        for s in self.suffixes:
            if len(lowered) >= len(s) + 2 and lowered.endswith(s):
                return s
        return None


_LEGAL_SPECS: set[tuple[str, int | None]] = {
    (fam, order) for fam in NGRAM_FAMILIES for order in (1, 2, 3)
} | {(fam, None) for fam in STAT_FAMILIES}


@dataclass(frozen=True)
class FeatureSpec:
    """One of the 30 legal family/order combinations."""

    family: str
    order: int | None = None

    def __post_init__(self) -> None:
        if (self.family, self.order) not in _LEGAL_SPECS:
            raise DataError(f"illegal feature spec: {self.family}{self.order or ''}")

    @property
    def prefix(self) -> str:
        if self.order is None:
            return self.family
        return f"{self.family}{self.order}"

    @property
    def is_statistical(self) -> bool:
        return self.order is None

    @classmethod
    def parse(cls, text: str) -> "FeatureSpec":
        text = text.strip()
        if text in STAT_FAMILIES:
            return cls(text, None)
        if text and text[-1] in "123" and text[:-1] in NGRAM_FAMILIES:
            return cls(text[:-1], int(text[-1]))
        raise DataError(f"unknown feature spec {text!r}")


def all_specs() -> tuple[FeatureSpec, ...]:
    """All 30 specs in presentation order."""
    specs = [
        FeatureSpec(fam, order) for fam in NGRAM_FAMILIES for order in (1, 2, 3)
    ]
    specs.extend(FeatureSpec(fam) for fam in STAT_FAMILIES)
    return tuple(specs)


def parse_spec_list(texts: Iterable[str] | str) -> tuple[FeatureSpec, ...]:
    """Parse feature spec names; the single string "all" expands to all 30."""
    if isinstance(texts, str):
        if texts.strip().lower() == "all":
            return all_specs()
        texts = texts.split(",")
    specs = tuple(FeatureSpec.parse(t) for t in texts)
    if not specs:
        raise DataError("empty feature spec list")
    if len({s.prefix for s in specs}) != len(specs):
        raise DataError("duplicate feature specs")
    return specs


# ---------------------------------------------------------------------------
# Stream projections.


def _require_layer(ok: bool, family: str, doc: AnnotatedDocument, layer: str) -> None:
    if not ok:
        raise DataError(
            f"family {family} needs {layer} annotations, "
            f"missing in document {doc.doc_id!r}"
        )


def project_stream(
    doc: AnnotatedDocument, family: str, lexicon: SuffixLexicon | None = None
) -> list[str]:
    """Project a document to the unit stream of one n-gram family.

    All projections preserve the token count. Families needing an annotation
    layer the document lacks raise DataError naming both.
    """
    if family not in NGRAM_FAMILIES:
        raise DataError(f"unknown n-gram family {family!r}")
    tokens = [t for s in doc.sentences for t in s]
    if family == "T":
        return [t.surface for t in tokens]
    if family == "L":
        _require_layer(all(t.lemma for t in tokens), family, doc, "lemma")
        return [t.lemma for t in tokens]
    if family == "TN":
        return [ENTITY_PLACEHOLDER if t.ne_tag else t.surface for t in tokens]
    if family == "LN":
        _require_layer(all(t.lemma for t in tokens), family, doc, "lemma")
        return [ENTITY_PLACEHOLDER if t.ne_tag else t.lemma for t in tokens]
    if family in ("TP", "LP", "MS", "P"):
        _require_layer(all(t.pos for t in tokens), family, doc, "POS")
        if family == "P":
            return [t.pos for t in tokens]
        if family == "TP":
            return [t.pos if t.pos in MASKED_POS else t.surface for t in tokens]
        if family == "LP":
            _require_layer(all(t.lemma for t in tokens), family, doc, "lemma")
            return [t.pos if t.pos in MASKED_POS else t.lemma for t in tokens]
        lex = lexicon if lexicon is not None else SuffixLexicon()
        units = []
        for t in tokens:
            suffix = lex.match(t.surface)
            units.append(t.pos if suffix is None else f"{t.pos}-{suffix}")
        return units
    # family == "D"
    _require_layer(all(t.dep_label for t in tokens), family, doc, "dependency")
    return [t.dep_label for t in tokens]


def extract_ngrams(units: Sequence[str], order: int, prefix: str) -> Counter[str]:
    """Count n-grams of the given order, each keyed as "<prefix>:<u1 u2 ...>"."""
    if order < 1:
        raise DataError(f"n-gram order must be >= 1, got {order}")
    counts: Counter[str] = Counter()
    head = prefix + ":"
    for i in range(len(units) - order + 1):
        counts[head + " ".join(units[i : i + order])] += 1
    return counts


# ---------------------------------------------------------------------------
# Statistical families.


def dependency_depths(sentence: Sequence) -> list[int]:
    """Depth of every token in its dependency tree; the root has depth 0."""
    n = len(sentence)
    depths = [-1] * n
    for i in range(n):
        if depths[i] >= 0:
            continue
        chain = []
        cur = i
        while depths[cur] < 0 and sentence[cur].head != ROOT:
            chain.append(cur)
            cur = sentence[cur].head
        if depths[cur] < 0:
            depths[cur] = 0  # reached the root unvisited
        base = depths[cur]
        for node in reversed(chain):
            base += 1
            depths[node] = base
    return depths


def statistical_units(doc: AnnotatedDocument, kind: str) -> list[int]:
    """Observed values for one statistical family, in document order.

    WL: character length of each non-punctuation token. SL: token count of
    each sentence, punctuation included. DD: dependency depth of each token;
    requires dependency annotations.
    """
    if kind == "WL":
        return [len(t.surface) for s in doc.sentences for t in s if not t.is_punct]
    if kind == "SL":
        return [len(s) for s in doc.sentences]
    if kind == "DD":
        has_deps = all(t.dep_label for s in doc.sentences for t in s)
        _require_layer(has_deps, kind, doc, "dependency")
        values: list[int] = []
        for sentence in doc.sentences:
            values.extend(dependency_depths(sentence))
        return values
    raise DataError(f"unknown statistical family {kind!r}")


def encode_statistical(doc: AnnotatedDocument, kind: str) -> Counter[str]:
    """Count statistical observations, each keyed as "<kind>:<value>"."""
    counts: Counter[str] = Counter()
    for value in statistical_units(doc, kind):
        counts[f"{kind}:{value}"] += 1
    return counts


# ---------------------------------------------------------------------------
# Document-level extraction.


@dataclass(frozen=True)
class FeatureCounts:
    """Raw feature counts for one document."""

    doc_id: str
    counts: dict[str, int] = field(compare=False)


def extract_features(
    doc: AnnotatedDocument,
    specs: Sequence[FeatureSpec],
    lexicon: SuffixLexicon | None = None,
) -> FeatureCounts:
    """Extract all requested families for one document."""
    if not specs:
        raise DataError("no feature specs given")
    counts: Counter[str] = Counter()
    projections: dict[str, list[str]] = {}
    for spec in specs:
        if spec.is_statistical:
            counts.update(encode_statistical(doc, spec.family))
            continue
        if spec.family not in projections:
            projections[spec.family] = project_stream(doc, spec.family, lexicon)
        counts.update(
            extract_ngrams(projections[spec.family], spec.order, spec.prefix)
        )
    return FeatureCounts(doc_id=doc.doc_id, counts=dict(counts))


def feature_family(feature: str) -> str:
    """Family prefix of a feature name ("T2:de la" -> "T2")."""
    head, sep, _ = feature.partition(":")
    if not sep:
        raise DataError(f"feature name without prefix: {feature!r}")
    return head


def dump_counts(total: dict[str, int]) -> str:
    """Serialize aggregated counts as sorted "feature<TAB>count" lines."""
    return "".join(f"{feat}\t{total[feat]}\n" for feat in sorted(total))
