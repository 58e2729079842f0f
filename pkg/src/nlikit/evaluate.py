"""Cross-validated evaluation and experiment grids.

Accuracy is pooled: predictions from all k test folds accumulate into one
confusion matrix and the score is its diagonal mass over its total mass.
Vocabulary and idf are refit on the training folds of every split; test
documents are encoded against that fitted vocabulary only.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from random import Random
from typing import Mapping, Sequence

import numpy as np

from .corpus import LabeledDataset
from .errors import DataError
from .features import FeatureCounts, FeatureSpec, SuffixLexicon, extract_features
from .learn import MulticlassModel, predict, train_ovr
from .vectorize import build_vocabulary, vectorize_all, vocabulary_hash

logger = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    """Square count matrix; rows are true labels, columns assigned labels."""

    labels: tuple[str, ...]
    cells: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels) or not self.labels:
            raise DataError("labels must be non-empty and unique")
        n = len(self.labels)
        if self.cells is None:
            self.cells = np.zeros((n, n), dtype=np.int64)
        else:
            self.cells = np.asarray(self.cells, dtype=np.int64)
            if self.cells.shape != (n, n):
                raise DataError(f"cells must be {n}x{n}")
            if np.any(self.cells < 0):
                raise DataError("cells must be non-negative")
        self._index = {lab: i for i, lab in enumerate(self.labels)}

    def add(self, true_label: str, assigned_label: str, count: int = 1) -> None:
        try:
            i = self._index[true_label]
            j = self._index[assigned_label]
        except KeyError as exc:
            raise DataError(f"label {exc} outside the matrix label space") from None
        self.cells[i, j] += count

    @property
    def total(self) -> int:
        return int(self.cells.sum())


def accuracy(cm: ConfusionMatrix) -> float:
    """Diagonal mass over total mass of a pooled confusion matrix."""
    total = cm.total
    if total == 0:
        raise DataError("empty confusion matrix has no accuracy")
    return float(np.trace(cm.cells)) / total


# ---------------------------------------------------------------------------
# Fold construction.


def make_folds(dataset: LabeledDataset, k: int, seed: int) -> list[tuple[int, ...]]:
    """Stratified k folds of document indices, deterministic per seed.

    Both per-label and global fold sizes differ by at most one. Labels with
    fewer than k documents force a non-stratified fallback (logged).
    """
    n = dataset.n_documents
    if k < 2:
        raise DataError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise DataError(f"k={k} exceeds dataset size {n}")
    rng = Random(seed)
    by_label: dict[str, list[int]] = {lab: [] for lab in dataset.label_space}
    for i, doc in enumerate(dataset.documents):
        by_label[doc.label].append(i)

    stratified = all(len(idxs) >= k for idxs in by_label.values() if idxs)
    folds: list[list[int]] = [[] for _ in range(k)]
    if stratified:
        # Remainder documents rotate through a global fold offset so the
        # global sizes stay within one of each other too.
        offset = 0
        for label in dataset.label_space:
            idxs = by_label[label]
            if not idxs:
                continue
            rng.shuffle(idxs)
            base, extra = divmod(len(idxs), k)
            sizes = [base] * k
            for j in range(extra):
                sizes[(offset + j) % k] += 1
            offset = (offset + extra) % k
            pos = 0
            for f in range(k):
                folds[f].extend(idxs[pos : pos + sizes[f]])
                pos += sizes[f]
    else:
        logger.warning(
            "some label has fewer than %d documents; falling back to "
            "non-stratified folds",
            k,
        )
        idxs = list(range(n))
        rng.shuffle(idxs)
        base, extra = divmod(n, k)
        pos = 0
        for f in range(k):
            size = base + (1 if f < extra else 0)
            folds[f].extend(idxs[pos : pos + size])
            pos += size
    return [tuple(sorted(f)) for f in folds]


# ---------------------------------------------------------------------------
# Experiments.


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_id: str
    specs: tuple[FeatureSpec, ...]
    k: int = 10
    seed: int = 0
    c: float = 1.0
    tol: float = 1e-4
    max_epochs: int = 1000
    min_total: int = 2
    name: str = ""

    def __post_init__(self) -> None:
        if not self.specs:
            raise DataError("experiment needs at least one feature spec")
        if self.k < 2:
            raise DataError("experiment needs k >= 2")
        if not self.name:
            object.__setattr__(self, "name", spec_set_name(self.specs))


def spec_set_name(specs: Sequence[FeatureSpec]) -> str:
    from .features import all_specs

    if set(specs) == set(all_specs()):
        return "(All)"
    return " ".join(s.prefix for s in specs)


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    fold_accuracies: tuple[float, ...]
    fold_vocab_hashes: tuple[str, ...]
    confusion: ConfusionMatrix
    accuracy: float
    unconverged: int
    warnings: tuple[str, ...] = ()
    wall_time: float = 0.0

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "dataset_id": self.config.dataset_id,
            "features": [s.prefix for s in self.config.specs],
            "name": self.config.name,
            "k": self.config.k,
            "seed": self.config.seed,
            "solver": {
                "c": self.config.c,
                "tol": self.config.tol,
                "max_epochs": self.config.max_epochs,
            },
            "fold_accuracies": list(self.fold_accuracies),
            "fold_vocab_hashes": list(self.fold_vocab_hashes),
            "confusion": {
                "labels": list(self.confusion.labels),
                "cells": self.confusion.cells.tolist(),
            },
            "accuracy": self.accuracy,
            "unconverged": self.unconverged,
            "warnings": list(self.warnings),
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out


def extract_all(
    dataset: LabeledDataset,
    specs: Sequence[FeatureSpec],
    lexicon: SuffixLexicon | None = None,
) -> list[FeatureCounts]:
    return [extract_features(doc, specs, lexicon) for doc in dataset.documents]


def cross_validate(
    dataset: LabeledDataset,
    config: ExperimentConfig,
    *,
    folds: Sequence[Sequence[int]] | None = None,
    lexicon: SuffixLexicon | None = None,
    counts: Sequence[FeatureCounts] | None = None,
) -> ExperimentReport:
    """Run stratified k-fold cross-validation under one configuration.

    An explicit fold partition can be supplied (it must cover exactly the
    dataset's indices); otherwise folds come from make_folds(config.k,
    config.seed). Precomputed per-document counts may be passed to skip
    re-extraction; they must align with dataset.documents.
    """
    start = time.perf_counter()
    if dataset.n_documents == 0:
        raise DataError("empty dataset")
    if folds is None:
        folds = make_folds(dataset, config.k, config.seed)
    else:
        folds = [tuple(f) for f in folds]
        covered = sorted(i for f in folds for i in f)
        if covered != list(range(dataset.n_documents)):
            raise DataError("explicit folds must partition the dataset indices")
    if counts is None:
        counts = extract_all(dataset, config.specs, lexicon)
    elif len(counts) != dataset.n_documents:
        raise DataError("counts must align with dataset.documents")
    labels = [doc.label for doc in dataset.documents]

    pooled = ConfusionMatrix(labels=dataset.label_space)
    fold_accuracies: list[float] = []
    fold_hashes: list[str] = []
    warnings: list[str] = []
    unconverged = 0
    for f_idx, test_idx in enumerate(folds):
        test_set = set(test_idx)
        train_idx = [i for i in range(dataset.n_documents) if i not in test_set]
        if not train_idx or not test_idx:
            raise DataError(f"fold {f_idx} leaves an empty train or test side")
        train_labels = [labels[i] for i in train_idx]
        if len(set(train_labels)) < 2:
            raise DataError(f"fold {f_idx} training side has a single label")
        vocab = build_vocabulary(
            [counts[i] for i in train_idx], min_total=config.min_total
        )
        fold_hashes.append(vocabulary_hash(vocab))
        train_vecs = vectorize_all([counts[i] for i in train_idx], vocab)
        model = train_ovr(
            train_vecs,
            train_labels,
            vocab,
            c=config.c,
            tol=config.tol,
            max_epochs=config.max_epochs,
            seed=config.seed + 104729 * f_idx,
        )
        unconverged += model.n_unconverged
        warnings.extend(f"fold {f_idx}: {w}" for w in model.warnings)
        test_vecs = vectorize_all([counts[i] for i in test_idx], vocab)
        correct = 0
        for i, vec in zip(test_idx, test_vecs):
            pred = predict(model, vec)
            pooled.add(labels[i], pred.label)
            if pred.label == labels[i]:
                correct += 1
        fold_accuracies.append(correct / len(test_idx))
    return ExperimentReport(
        config=config,
        fold_accuracies=tuple(fold_accuracies),
        fold_vocab_hashes=tuple(fold_hashes),
        confusion=pooled,
        accuracy=accuracy(pooled),
        unconverged=unconverged,
        warnings=tuple(warnings),
        wall_time=time.perf_counter() - start,
    )


def train_full(
    dataset: LabeledDataset,
    config: ExperimentConfig,
    *,
    lexicon: SuffixLexicon | None = None,
) -> MulticlassModel:
    """Fit vocabulary and one-vs-rest models on the whole dataset."""
    counts = extract_all(dataset, config.specs, lexicon)
    vocab = build_vocabulary(counts, min_total=config.min_total)
    vectors = vectorize_all(counts, vocab)
    return train_ovr(
        vectors,
        [d.label for d in dataset.documents],
        vocab,
        c=config.c,
        tol=config.tol,
        max_epochs=config.max_epochs,
        seed=config.seed,
    )


# ---------------------------------------------------------------------------
# Grids: feature sets x datasets, with per-cell failure isolation.


@dataclass
class GridResult:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    reports: dict[tuple[str, str], ExperimentReport]
    errors: dict[tuple[str, str], str]
    marks_top: int = 5

    def cell_accuracy(self, row: str, column: str) -> float | None:
        report = self.reports.get((row, column))
        return None if report is None else report.accuracy

    def column_marks(self) -> dict[str, dict[str, list[str]]]:
        """Per column: the top-N and bottom-N row names by accuracy."""
        marks: dict[str, dict[str, list[str]]] = {}
        for col in self.columns:
            scored = [
                (self.reports[(row, col)].accuracy, row)
                for row in self.rows
                if (row, col) in self.reports
            ]
            ranked = sorted(scored, key=lambda t: (-t[0], t[1]))
            n = self.marks_top
            marks[col] = {
                "top": [row for _, row in ranked[:n]],
                "bottom": [row for _, row in ranked[-n:]] if len(ranked) > n else [],
            }
        return marks

    def to_tsv(self) -> str:
        lines = ["\t".join(["features"] + list(self.columns))]
        for row in self.rows:
            cells = [row]
            for col in self.columns:
                acc = self.cell_accuracy(row, col)
                cells.append("ERROR" if acc is None else f"{acc:.4f}")
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "rows": list(self.rows),
            "columns": list(self.columns),
            "cells": {
                f"{row}\t{col}": self.reports[(row, col)].to_dict()
                for (row, col) in self.reports
            },
            "errors": {f"{row}\t{col}": msg for (row, col), msg in self.errors.items()},
            "marks": self.column_marks(),
        }


def run_grid(
    configs: Sequence[ExperimentConfig],
    datasets: Mapping[str, LabeledDataset],
    *,
    lexicon: SuffixLexicon | None = None,
) -> GridResult:
    """Evaluate every configuration; a failing cell never aborts the grid."""
    rows: list[str] = []
    columns: list[str] = []
    reports: dict[tuple[str, str], ExperimentReport] = {}
    errors: dict[tuple[str, str], str] = {}
    for config in configs:
        if config.name not in rows:
            rows.append(config.name)
        if config.dataset_id not in columns:
            columns.append(config.dataset_id)
        key = (config.name, config.dataset_id)
        try:
            dataset = datasets[config.dataset_id]
        except KeyError:
            errors[key] = f"unknown dataset {config.dataset_id!r}"
            continue
        try:
            reports[key] = cross_validate(dataset, config, lexicon=lexicon)
        except Exception as exc:  # isolate the failing cell
            logger.warning("grid cell %s failed: %s", key, exc)
            errors[key] = str(exc)
    return GridResult(
        rows=tuple(rows), columns=tuple(columns), reports=reports, errors=errors
    )


def shuffled_labels(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Random label permutation across documents (chance-level control)."""
    rng = Random(seed)
    labels = [d.label for d in dataset.documents]
    rng.shuffle(labels)
    documents = tuple(
        replace(doc, label=lab) for doc, lab in zip(dataset.documents, labels)
    )
    return LabeledDataset(documents=documents, label_space=dataset.label_space)
