"""Vocabulary building and tf-idf vectorization.

The vocabulary is always fit on training documents only; test documents are
encoded against it, with unseen features dropped. Features whose total count
across the fitting documents is below min_total are removed, except features
of the statistical families, whose value histograms must stay intact.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .errors import DataError, ParseError
from .features import STAT_FAMILIES, FeatureCounts, feature_family


@dataclass
class FeatureVocabulary:
    """Immutable feature-to-index mapping with document statistics.

    Indices follow lexicographic feature order. document_frequency[i] and
    total_count[i] are the fitting-corpus statistics of features[i]; n_docs
    is the number of fitting documents.
    """

    features: tuple[str, ...]
    document_frequency: np.ndarray
    total_count: np.ndarray
    n_docs: int
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if list(self.features) != sorted(self.features):
            raise DataError("vocabulary features must be in lexicographic order")
        if len(self.features) != len(set(self.features)):
            raise DataError("vocabulary contains duplicate features")
        if len(self.document_frequency) != len(self.features) or len(
            self.total_count
        ) != len(self.features):
            raise DataError("vocabulary arrays disagree in length")
        self._index = {feat: i for i, feat in enumerate(self.features)}

    def __len__(self) -> int:
        return len(self.features)

    def index_of(self, feature: str) -> int | None:
        return self._index.get(feature)

    def entries(self) -> Iterator[tuple[str, int, int, int]]:
        for i, feat in enumerate(self.features):
            yield feat, i, int(self.document_frequency[i]), int(self.total_count[i])


def build_vocabulary(
    all_counts: Sequence[FeatureCounts], min_total: int = 2
) -> FeatureVocabulary:
    """Fit a vocabulary on the given documents.

    Features with corpus-wide total count < min_total are dropped, except
    statistical-family features, which are always kept.
    """
    if not all_counts:
        raise DataError("cannot fit a vocabulary on zero documents")
    totals: Counter[str] = Counter()
    dfs: Counter[str] = Counter()
    for fc in all_counts:
        for feat, cnt in fc.counts.items():
            if cnt <= 0:
                raise DataError(f"non-positive count for {feat!r} in {fc.doc_id!r}")
            totals[feat] += cnt
            dfs[feat] += 1
    kept = sorted(
        feat
        for feat, tot in totals.items()
        if tot >= min_total or feature_family(feat) in STAT_FAMILIES
    )
    return FeatureVocabulary(
        features=tuple(kept),
        document_frequency=np.array([dfs[f] for f in kept], dtype=np.int64),
        total_count=np.array([totals[f] for f in kept], dtype=np.int64),
        n_docs=len(all_counts),
    )


@dataclass(frozen=True)
class SparseVector:
    """L2-normalized sparse vector: strictly increasing indices with weights."""

    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if len(self.indices) != len(self.weights):
            raise DataError("indices and weights disagree in length")
        if len(self.indices) > 1 and not np.all(np.diff(self.indices) > 0):
            raise DataError("indices must be strictly increasing")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "SparseVector":
        ordered = sorted(pairs)
        return cls(
            indices=np.array([i for i, _ in ordered], dtype=np.int64),
            weights=np.array([w for _, w in ordered], dtype=np.float64),
        )

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights**2)))


def idf_weights(vocab: FeatureVocabulary) -> np.ndarray:
    """Smoothed idf per vocabulary index: ln((1+n)/(1+df)) + 1."""
    return (
        np.log((1.0 + vocab.n_docs) / (1.0 + vocab.document_frequency.astype(np.float64)))
        + 1.0
    )


def tfidf(
    counts: FeatureCounts,
    vocab: FeatureVocabulary,
    idf: np.ndarray | None = None,
) -> SparseVector:
    """Encode one document against a fitted vocabulary.

    Out-of-vocabulary features are dropped. The result is L2-normalized;
    a document with no in-vocabulary features encodes as the zero vector.
    """
    if idf is None:
        idf = idf_weights(vocab)
    idx: list[int] = []
    tfs: list[float] = []
    for feat, cnt in counts.counts.items():
        j = vocab.index_of(feat)
        if j is not None:
            idx.append(j)
            tfs.append(float(cnt))
    if not idx:
        return SparseVector(
            indices=np.empty(0, dtype=np.int64), weights=np.empty(0, dtype=np.float64)
        )
    order = np.argsort(np.array(idx, dtype=np.int64))
    indices = np.array(idx, dtype=np.int64)[order]
    weights = np.array(tfs, dtype=np.float64)[order] * idf[indices]
    norm = np.sqrt(np.sum(weights**2))
    if norm > 0:
        weights = weights / norm
    return SparseVector(indices=indices, weights=weights)


def vectorize_all(
    all_counts: Sequence[FeatureCounts], vocab: FeatureVocabulary
) -> list[SparseVector]:
    idf = idf_weights(vocab)
    return [tfidf(fc, vocab, idf) for fc in all_counts]


# ---------------------------------------------------------------------------
# Text round-trip for vocabularies and vectors.


def write_vocabulary(vocab: FeatureVocabulary) -> str:
    """Vocabulary as "feature<TAB>index<TAB>df<TAB>count" lines."""
    lines = [f"# n_docs = {vocab.n_docs}"]
    for feat, i, df, tot in vocab.entries():
        lines.append(f"{feat}\t{i}\t{df}\t{tot}")
    return "\n".join(lines) + "\n"


def read_vocabulary(text: str | IO[str]) -> FeatureVocabulary:
    if not isinstance(text, str):
        text = text.read()
    n_docs = None
    feats: list[str] = []
    dfs: list[int] = []
    tots: list[int] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("n_docs"):
                _, _, value = body.partition("=")
                try:
                    n_docs = int(value.strip())
                except ValueError:
                    raise ParseError(f"bad n_docs value {value!r}", line_no) from None
            continue
        cols = line.split("\t")
        if len(cols) != 4:
            raise ParseError(f"expected 4 columns, got {len(cols)}", line_no)
        feat, idx_s, df_s, tot_s = cols
        try:
            idx, df, tot = int(idx_s), int(df_s), int(tot_s)
        except ValueError:
            raise ParseError(f"non-integer column in {line!r}", line_no) from None
        if idx != len(feats):
            raise ParseError(f"index {idx} out of sequence", line_no)
        feats.append(feat)
        dfs.append(df)
        tots.append(tot)
    if n_docs is None:
        raise ParseError("missing '# n_docs =' header")
    return FeatureVocabulary(
        features=tuple(feats),
        document_frequency=np.array(dfs, dtype=np.int64),
        total_count=np.array(tots, dtype=np.int64),
        n_docs=n_docs,
    )


def vocabulary_hash(vocab: FeatureVocabulary) -> str:
    """SHA-256 over the canonical text serialization."""
    return hashlib.sha256(write_vocabulary(vocab).encode("utf-8")).hexdigest()


def write_vectors(
    doc_ids: Sequence[str], vectors: Sequence[SparseVector]
) -> str:
    """One document per line: "doc_id<TAB>index:weight index:weight ..."."""
    if len(doc_ids) != len(vectors):
        raise DataError("doc_ids and vectors disagree in length")
    lines = []
    for doc_id, vec in zip(doc_ids, vectors):
        cells = " ".join(
            f"{int(i)}:{w:.17g}" for i, w in zip(vec.indices, vec.weights)
        )
        lines.append(f"{doc_id}\t{cells}")
    return "\n".join(lines) + "\n"
