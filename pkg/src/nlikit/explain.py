"""Coefficient-based explanation of trained models.

For a one-vs-rest linear model, features with large positive weights mark
overuse by the target class relative to the rest; large negative weights
mark underuse. Rankings can exclude features that carry named-entity
material, and any ranked n-gram feature can be illustrated with keyword-in-
context lines drawn from a corpus.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import LabeledDataset
from .errors import DataError
from .features import (
    ENTITY_PLACEHOLDER,
    NGRAM_FAMILIES,
    STAT_FAMILIES,
    FeatureSpec,
    SuffixLexicon,
    project_stream,
)
from .learn import MulticlassModel


@dataclass(frozen=True)
class FeatureAttribution:
    feature: str
    weight: float
    rank: int


@dataclass(frozen=True)
class ConcordanceLine:
    doc_id: str
    left: str
    match: str
    right: str
    offset: int


@dataclass(frozen=True)
class LabelExplanation:
    label: str
    overuse: tuple[FeatureAttribution, ...]
    underuse: tuple[FeatureAttribution, ...]


@dataclass(frozen=True)
class ExplainReport:
    labels: tuple[LabelExplanation, ...]

    def to_dict(self) -> dict:
        return {
            "labels": [
                {
                    "label": sec.label,
                    "overuse": [
                        {"feature": a.feature, "weight": a.weight, "rank": a.rank}
                        for a in sec.overuse
                    ],
                    "underuse": [
                        {"feature": a.feature, "weight": a.weight, "rank": a.rank}
                        for a in sec.underuse
                    ],
                }
                for sec in self.labels
            ]
        }

    def to_text(self) -> str:
        lines: list[str] = []
        for sec in self.labels:
            lines.append(f"== {sec.label} ==")
            width = max(
                [len(a.feature) for a in sec.overuse + sec.underuse] + [8]
            )
            lines.append("-- overuse --")
            for a in sec.overuse:
                lines.append(f"{a.rank:>3}  {a.feature:<{width}}  {a.weight:+.4f}")
            lines.append("-- underuse --")
            for a in sec.underuse:
                lines.append(f"{a.rank:>3}  {a.feature:<{width}}  {a.weight:+.4f}")
            lines.append("")
        return "\n".join(lines)


def entity_unit_sets(dataset: LabeledDataset) -> tuple[set[str], set[str]]:
    """(surfaces, lemmas) of entity-covered tokens across the dataset."""
    surfaces: set[str] = set()
    lemmas: set[str] = set()
    for doc in dataset.documents:
        for tok in doc.tokens():
            if tok.ne_tag:
                surfaces.add(tok.surface)
                if tok.lemma:
                    lemmas.add(tok.lemma)
    return surfaces, lemmas


def _carries_entity(
    feature: str, surfaces: set[str], lemmas: set[str]
) -> bool:
    prefix, _, body = feature.partition(":")
    family = prefix.rstrip("123")
    if family in STAT_FAMILIES or family in ("MS", "P", "D"):
        return False
    units = body.split(" ")
    if family in ("T", "TN", "TP"):
        pool = surfaces
    else:  # L, LN, LP
        pool = lemmas
    return any(u == ENTITY_PLACEHOLDER or u in pool for u in units)


def rank_features(
    model: MulticlassModel,
    label: str,
    top_k: int = 10,
    *,
    exclude_entities_from: LabeledDataset | None = None,
) -> LabelExplanation:
    """Top-k overuse (most positive) and underuse (most negative) features.

    Ordering is by weight, ties broken lexicographically by feature name.
    With exclude_entities_from given, features containing entity surfaces,
    entity lemmas or the entity placeholder are dropped before ranking.
    """
    if label not in model.per_label:
        raise DataError(f"model has no label {label!r}")
    if top_k < 1:
        raise DataError("top_k must be >= 1")
    binary = model.per_label[label]
    features = model.vocabulary.features
    if len(binary.weights) != len(features):
        raise DataError("model weights disagree with vocabulary size")
    pairs: Iterable[tuple[str, float]] = zip(features, binary.weights.tolist())
    if exclude_entities_from is not None:
        surfaces, lemmas = entity_unit_sets(exclude_entities_from)
        pairs = [
            (f, w) for f, w in pairs if not _carries_entity(f, surfaces, lemmas)
        ]
    else:
        pairs = list(pairs)
    over = sorted(pairs, key=lambda t: (-t[1], t[0]))[:top_k]
    under = sorted(pairs, key=lambda t: (t[1], t[0]))[:top_k]
    return LabelExplanation(
        label=label,
        overuse=tuple(
            FeatureAttribution(feature=f, weight=w, rank=i + 1)
            for i, (f, w) in enumerate(over)
        ),
        underuse=tuple(
            FeatureAttribution(feature=f, weight=w, rank=i + 1)
            for i, (f, w) in enumerate(under)
        ),
    )


def explain_model(
    model: MulticlassModel,
    top_k: int = 10,
    *,
    exclude_entities_from: LabeledDataset | None = None,
) -> ExplainReport:
    """Overuse/underuse rankings for every label of the model."""
    return ExplainReport(
        labels=tuple(
            rank_features(
                model, label, top_k, exclude_entities_from=exclude_entities_from
            )
            for label in model.labels
        )
    )


def kwic(
    dataset: LabeledDataset,
    feature: str,
    window: int = 5,
    *,
    lexicon: SuffixLexicon | None = None,
    max_lines: int | None = None,
) -> list[ConcordanceLine]:
    """Keyword-in-context lines for one n-gram feature.

    The feature's family projection is recomputed per document and scanned
    for the unit sequence; context windows show the same projection. Lines
    are ordered by doc_id, then by match offset. Statistical features have
    no positions and are rejected.
    """
    prefix, sep, body = feature.partition(":")
    if not sep:
        raise DataError(f"feature name without prefix: {feature!r}")
    spec = FeatureSpec.parse(prefix)
    if spec.is_statistical:
        raise DataError(f"family {spec.family} has no positions to show")
    units = body.split(" ")
    if len(units) != spec.order or any(not u for u in units):
        raise DataError(
            f"feature body {body!r} does not match order {spec.order}"
        )
    if window < 0:
        raise DataError("window must be >= 0")
    lines: list[ConcordanceLine] = []
    for doc in sorted(dataset.documents, key=lambda d: d.doc_id):
        stream = project_stream(doc, spec.family, lexicon)
        n = spec.order
        for i in range(len(stream) - n + 1):
            if stream[i : i + n] == units:
                lines.append(
                    ConcordanceLine(
                        doc_id=doc.doc_id,
                        left=" ".join(stream[max(0, i - window) : i]),
                        match=" ".join(stream[i : i + n]),
                        right=" ".join(stream[i + n : i + n + window]),
                        offset=i,
                    )
                )
                if max_lines is not None and len(lines) >= max_lines:
                    return lines
    return lines


def kwic_text(lines: Sequence[ConcordanceLine]) -> str:
    """Aligned text rendering, match column centered."""
    if not lines:
        return "(no matches)\n"
    left_w = max(len(l.left) for l in lines)
    match_w = max(len(l.match) for l in lines)
    id_w = max(len(l.doc_id) for l in lines)
    out = []
    for l in lines:
        out.append(
            f"{l.doc_id:<{id_w}}  {l.left:>{left_w}}  [{l.match:^{match_w}}]  {l.right}"
        )
    return "\n".join(out) + "\n"
