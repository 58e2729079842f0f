"""Linear one-vs-rest classification with calibrated outputs.

Binary models are L2-regularized L1-hinge SVMs trained in the dual by
coordinate descent over a CSR matrix. The bias is an always-on augmented
feature, so the solver state is a single weight vector. Per-epoch coordinate
order is a seeded permutation from an explicit linear congruential generator,
which keeps the interpreted and JIT-compiled paths bit-identical.

Probabilities come from per-model sigmoid calibration p = 1/(1+exp(a*s+b)),
fit by Newton iterations with backtracking on held-out decision scores from
an internal 3-fold split of the training data.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from random import Random
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError
from .vectorize import FeatureVocabulary, SparseVector, vocabulary_hash

MODEL_FORMAT_VERSION = 1


def _dcd_core(indptr, indices, data, y, c, tol, max_epochs, seed, dim):
    """Dual coordinate descent on min_a 1/2 a'Qa - e'a, 0 <= a <= c.

    Rows of the CSR matrix already include the augmented bias column.
    Convergence is declared only after a verification sweep (no updates)
    observes max |projected gradient| < tol against the final weights.
    Returns (w, alpha, epochs, max_violation, converged).
    """
    n = len(y)
    w = np.zeros(dim)
    alpha = np.zeros(n)
    qd = np.zeros(n)
    for i in range(n):
        s = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            s += data[p] * data[p]
        qd[i] = s
    order = np.arange(n)
    state = np.int64(seed) & np.int64(0xFFFFFFFF)
    epochs = 0
    viol = 0.0
    converged = 0
    while epochs < max_epochs:
        # Fisher-Yates permutation driven by a 32-bit LCG.
        for j in range(n - 1, 0, -1):
            state = (np.int64(1664525) * state + np.int64(1013904223)) & np.int64(
                0xFFFFFFFF
            )
            r = int(state % np.int64(j + 1))
            tmp = order[j]
            order[j] = order[r]
            order[r] = tmp
        viol = 0.0
        for k in range(n):
            i = order[k]
            s = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                s += w[indices[p]] * data[p]
            g = y[i] * s - 1.0
            a_old = alpha[i]
            if a_old <= 0.0:
                pg = g if g < 0.0 else 0.0
            elif a_old >= c:
                pg = g if g > 0.0 else 0.0
            else:
                pg = g
            apg = -pg if pg < 0.0 else pg
            if apg > viol:
                viol = apg
            if pg != 0.0:
                a_new = a_old - g / qd[i]
                if a_new < 0.0:
                    a_new = 0.0
                elif a_new > c:
                    a_new = c
                alpha[i] = a_new
                d = (a_new - a_old) * y[i]
                if d != 0.0:
                    for p in range(indptr[i], indptr[i + 1]):
                        w[indices[p]] += d * data[p]
        epochs += 1
        if viol < tol:
            check = 0.0
            for i in range(n):
                s = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    s += w[indices[p]] * data[p]
                g = y[i] * s - 1.0
                if alpha[i] <= 0.0:
                    pg = g if g < 0.0 else 0.0
                elif alpha[i] >= c:
                    pg = g if g > 0.0 else 0.0
                else:
                    pg = g
                apg = -pg if pg < 0.0 else pg
                if apg > check:
                    check = apg
            if check < tol:
                viol = check
                converged = 1
                break
    return w, alpha, epochs, viol, converged


_dcd_core_py = _dcd_core
try:  # JIT-compile when numba is present; the interpreted path is identical.
    import numba as _numba

    _dcd_core = _numba.njit(cache=True, fastmath=False)(_dcd_core_py)
except ImportError:  # pragma: no cover
    pass


@dataclass(frozen=True)
class TrainResult:
    """Solver output for one binary problem."""

    weights: np.ndarray
    bias: float
    alpha: np.ndarray
    epochs: int
    converged: bool
    max_violation: float


def _build_csr(
    vectors: Sequence[SparseVector], dim: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = len(vectors)
    nnz = sum(v.nnz for v in vectors) + n
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices = np.empty(nnz, dtype=np.int64)
    data = np.empty(nnz, dtype=np.float64)
    pos = 0
    for i, v in enumerate(vectors):
        k = v.nnz
        if k and int(v.indices[-1]) >= dim:
            raise DataError(
                f"vector index {int(v.indices[-1])} exceeds dimension {dim}"
            )
        indices[pos : pos + k] = v.indices
        data[pos : pos + k] = v.weights
        indices[pos + k] = dim  # augmented bias column
        data[pos + k] = 1.0
        pos += k + 1
        indptr[i + 1] = pos
    return indptr, indices, data


def train_binary(
    vectors: Sequence[SparseVector],
    targets: Sequence[float],
    *,
    c: float = 1.0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    seed: int = 0,
    dim: int | None = None,
) -> TrainResult:
    """Train one binary hinge-loss model; deterministic for a fixed seed."""
    if len(vectors) == 0:
        raise DataError("no training vectors")
    if len(vectors) != len(targets):
        raise DataError("vectors and targets disagree in length")
    y = np.asarray(targets, dtype=np.float64)
    if not np.all(np.abs(y) == 1.0):
        raise DataError("targets must be +1 or -1")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DataError("training data contains a single class")
    if c <= 0 or tol <= 0 or max_epochs < 1:
        raise DataError("c and tol must be positive, max_epochs >= 1")
    if dim is None:
        dim = 0
        for v in vectors:
            if v.nnz:
                dim = max(dim, int(v.indices[-1]) + 1)
    indptr, indices, data = _build_csr(vectors, dim)
    w, alpha, epochs, viol, converged = _dcd_core(
        indptr, indices, data, y, float(c), float(tol), int(max_epochs), int(seed), dim + 1
    )
    return TrainResult(
        weights=w[:dim],
        bias=float(w[dim]),
        alpha=alpha,
        epochs=int(epochs),
        converged=bool(converged),
        max_violation=float(viol),
    )


# ---------------------------------------------------------------------------
# Sigmoid calibration.


def fit_platt(
    scores: Sequence[float],
    targets: Sequence[float],
    *,
    max_iter: int = 200,
    min_step: float = 1e-10,
    sigma: float = 1e-12,
    tol: float = 1e-8,
) -> tuple[float, float]:
    """Fit (a, b) of p = 1/(1+exp(a*s+b)) by penalized maximum likelihood.

    Targets are smoothed to (n_pos+1)/(n_pos+2) and 1/(n_neg+2). Newton
    steps with backtracking line search; both classes must be present.
    """
    s = np.asarray(scores, dtype=np.float64)
    raw = np.asarray(targets, dtype=np.float64)
    if s.size == 0 or s.size != raw.size:
        raise DataError("scores and targets must be equal-length and non-empty")
    if not np.all(np.abs(raw) == 1.0):
        raise DataError("targets must be +1 or -1")
    n_pos = int(np.sum(raw > 0))
    n_neg = int(np.sum(raw < 0))
    if n_pos == 0 or n_neg == 0:
        raise DataError("calibration needs scores from both classes")
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(raw > 0, hi, lo)

    def objective(a: float, b: float) -> float:
        fapb = a * s + b
        pos_side = t * fapb + np.log1p(np.exp(-np.abs(fapb)))
        neg_side = (t - 1.0) * fapb + np.log1p(np.exp(-np.abs(fapb)))
        return float(np.sum(np.where(fapb >= 0, pos_side, neg_side)))

    a = 0.0
    b = math.log((n_neg + 1.0) / (n_pos + 1.0))
    fval = objective(a, b)
    for _ in range(max_iter):
        fapb = a * s + b
        e = np.exp(-np.abs(fapb))  # never overflows
        p = np.where(fapb >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + float(np.sum(s * s * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(s * d2))
        d1 = t - p
        g1 = float(np.sum(s * d1))
        g2 = float(np.sum(d1))
        if abs(g1) < tol and abs(g2) < tol:
            break
        det = h11 * h22 - h21 * h21
        da = -(h22 * g1 - h21 * g2) / det
        db = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * da + g2 * db
        step = 1.0
        while step >= min_step:
            new_a = a + step * da
            new_b = b + step * db
            new_f = objective(new_a, new_b)
            if new_f < fval + 1e-4 * step * gd:
                a, b, fval = new_a, new_b, new_f
                break
            step /= 2.0
        else:
            break  # line search failed; current point is the answer
    return a, b


def platt_probability(a: float, b: float, score: float) -> float:
    """Stable evaluation of 1/(1+exp(a*score+b))."""
    z = a * score + b
    if z >= 0:
        e = math.exp(-z) if z < 700 else 0.0
        return e / (1.0 + e)
    e = math.exp(z) if z > -700 else 0.0
    return 1.0 / (1.0 + e)


# ---------------------------------------------------------------------------
# Models.


@dataclass(frozen=True)
class BinaryLinearModel:
    """Weights over vocabulary indices plus bias and calibration parameters."""

    positive_label: str
    weights: np.ndarray
    bias: float
    platt_a: float
    platt_b: float


@dataclass
class MulticlassModel:
    per_label: dict[str, BinaryLinearModel]
    vocabulary: FeatureVocabulary
    diagnostics: dict[str, TrainResult] = field(default_factory=dict, repr=False)
    warnings: tuple[str, ...] = ()

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(self.per_label))

    @property
    def n_unconverged(self) -> int:
        return sum(1 for r in self.diagnostics.values() if not r.converged)


@dataclass(frozen=True)
class Prediction:
    label: str
    probabilities: dict[str, float]
    tie: bool


def decision_score(model: BinaryLinearModel, v: SparseVector) -> float:
    if v.nnz and int(v.indices[-1]) >= len(model.weights):
        raise DataError(
            f"vector index {int(v.indices[-1])} exceeds model dimension "
            f"{len(model.weights)}"
        )
    return float(np.sum(model.weights[v.indices] * v.weights)) + model.bias


def calibrated_probability(model: BinaryLinearModel, score: float) -> float:
    return platt_probability(model.platt_a, model.platt_b, score)


def _ovr_targets(labels: Sequence[str], positive: str) -> np.ndarray:
    return np.where(np.asarray(labels) == positive, 1.0, -1.0)


def train_ovr(
    vectors: Sequence[SparseVector],
    labels: Sequence[str],
    vocabulary: FeatureVocabulary,
    *,
    c: float = 1.0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    seed: int = 0,
    platt_folds: int = 3,
) -> MulticlassModel:
    """Train one calibrated binary model per label, one-vs-rest.

    Calibration scores come from an internal stratified platt_folds split of
    the training set; folds whose training part is single-class are skipped,
    and if no usable held-out scores remain the calibration falls back to
    in-sample scores from the final model (recorded as a warning).
    """
    if len(vectors) != len(labels):
        raise DataError("vectors and labels disagree in length")
    label_set = tuple(sorted(set(labels)))
    if len(label_set) < 2:
        raise DataError("need at least two distinct labels")
    dim = len(vocabulary)
    n = len(vectors)
    per_label: dict[str, BinaryLinearModel] = {}
    diagnostics: dict[str, TrainResult] = {}
    warnings: list[str] = []
    for lab_idx, label in enumerate(label_set):
        label_seed = seed + 7919 * lab_idx
        y = _ovr_targets(labels, label)
        final = train_binary(
            vectors, y, c=c, tol=tol, max_epochs=max_epochs, seed=label_seed, dim=dim
        )
        oof_scores: list[float] = []
        oof_targets: list[float] = []
        pos_idx = [i for i in range(n) if y[i] > 0]
        neg_idx = [i for i in range(n) if y[i] < 0]
        rng = Random(label_seed)
        rng.shuffle(pos_idx)
        rng.shuffle(neg_idx)
        fold_of = np.empty(n, dtype=np.int64)
        for j, i in enumerate(pos_idx):
            fold_of[i] = j % platt_folds
        for j, i in enumerate(neg_idx):
            fold_of[i] = j % platt_folds
        for part in range(platt_folds):
            train_idx = [i for i in range(n) if fold_of[i] != part]
            test_idx = [i for i in range(n) if fold_of[i] == part]
            if not test_idx or not train_idx:
                continue
            part_y = y[train_idx]
            if not (np.any(part_y > 0) and np.any(part_y < 0)):
                warnings.append(
                    f"calibration fold {part} for {label!r} skipped: single class"
                )
                continue
            part_model = train_binary(
                [vectors[i] for i in train_idx],
                part_y,
                c=c,
                tol=tol,
                max_epochs=max_epochs,
                seed=label_seed + 1 + part,
                dim=dim,
            )
            stub = BinaryLinearModel(label, part_model.weights, part_model.bias, 0.0, 0.0)
            for i in test_idx:
                oof_scores.append(decision_score(stub, vectors[i]))
                oof_targets.append(float(y[i]))
        usable = (
            len(oof_scores) >= 2
            and any(t > 0 for t in oof_targets)
            and any(t < 0 for t in oof_targets)
        )
        if not usable:
            warnings.append(
                f"calibration for {label!r} fell back to in-sample scores"
            )
            stub = BinaryLinearModel(label, final.weights, final.bias, 0.0, 0.0)
            oof_scores = [decision_score(stub, v) for v in vectors]
            oof_targets = [float(t) for t in y]
        a, b = fit_platt(oof_scores, oof_targets)
        per_label[label] = BinaryLinearModel(
            positive_label=label,
            weights=final.weights,
            bias=final.bias,
            platt_a=a,
            platt_b=b,
        )
        diagnostics[label] = final
    return MulticlassModel(
        per_label=per_label,
        vocabulary=vocabulary,
        diagnostics=diagnostics,
        warnings=tuple(warnings),
    )


def predict(model: MulticlassModel, v: SparseVector) -> Prediction:
    """Assign the label with the highest calibrated probability.

    Exact probability ties go to the lexicographically first label and are
    flagged.
    """
    if not model.per_label:
        raise DataError("model has no labels")
    probs = {
        label: calibrated_probability(m, decision_score(m, v))
        for label, m in model.per_label.items()
    }
    best = max(probs.values())
    candidates = sorted(lab for lab, p in probs.items() if p == best)
    return Prediction(label=candidates[0], probabilities=probs, tie=len(candidates) > 1)


# ---------------------------------------------------------------------------
# Model persistence. A single .npz holds the stacked weight matrix, bias and
# calibration vectors, the vocabulary, and a JSON metadata blob including the
# vocabulary hash; loading refuses a file whose vocabulary hashes differently.


def save_model(model: MulticlassModel, path: str | Path) -> None:
    labels = model.labels
    dim = len(model.vocabulary)
    weights = np.zeros((len(labels), dim), dtype=np.float64)
    bias = np.zeros(len(labels), dtype=np.float64)
    platt_a = np.zeros(len(labels), dtype=np.float64)
    platt_b = np.zeros(len(labels), dtype=np.float64)
    for i, label in enumerate(labels):
        m = model.per_label[label]
        if len(m.weights) != dim:
            raise DataError(
                f"model for {label!r} has dimension {len(m.weights)}, "
                f"vocabulary has {dim}"
            )
        weights[i] = m.weights
        bias[i] = m.bias
        platt_a[i] = m.platt_a
        platt_b[i] = m.platt_b
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "labels": list(labels),
        "n_docs": model.vocabulary.n_docs,
        "vocab_sha256": vocabulary_hash(model.vocabulary),
    }
    with open(path, "wb") as fh:
        np.savez(
            fh,
            meta=np.array(json.dumps(meta, sort_keys=True)),
            weights=weights,
            bias=bias,
            platt_a=platt_a,
            platt_b=platt_b,
            vocab_features=np.array(model.vocabulary.features, dtype=np.str_),
            vocab_df=model.vocabulary.document_frequency,
            vocab_total=model.vocabulary.total_count,
        )


def load_model(path: str | Path) -> MulticlassModel:
    with open(path, "rb") as fh:
        blob = io.BytesIO(fh.read())
    with np.load(blob, allow_pickle=False) as npz:
        try:
            meta = json.loads(str(npz["meta"]))
            weights = npz["weights"]
            bias = npz["bias"]
            platt_a = npz["platt_a"]
            platt_b = npz["platt_b"]
            features = tuple(str(f) for f in npz["vocab_features"])
            df = npz["vocab_df"]
            total = npz["vocab_total"]
        except KeyError as exc:
            raise DataError(f"model file missing array {exc}") from None
    if meta.get("format_version") != MODEL_FORMAT_VERSION:
        raise DataError(
            f"unsupported model format version {meta.get('format_version')!r}"
        )
    vocab = FeatureVocabulary(
        features=features,
        document_frequency=df,
        total_count=total,
        n_docs=int(meta["n_docs"]),
    )
    if vocabulary_hash(vocab) != meta.get("vocab_sha256"):
        raise DataError("vocabulary hash mismatch: model file is inconsistent")
    labels = [str(x) for x in meta["labels"]]
    if weights.shape != (len(labels), len(vocab)):
        raise DataError("weight matrix shape disagrees with labels and vocabulary")
    per_label = {
        label: BinaryLinearModel(
            positive_label=label,
            weights=weights[i].copy(),
            bias=float(bias[i]),
            platt_a=float(platt_a[i]),
            platt_b=float(platt_b[i]),
        )
        for i, label in enumerate(labels)
    }
    return MulticlassModel(per_label=per_label, vocabulary=vocab)
