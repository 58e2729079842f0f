"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written from scratch with plain Python and
scipy, sharing no code paths with the modules under test.
"""

from __future__ import annotations

import math
import re

import numpy as np
from scipy.optimize import minimize

STAT_PREFIXES = ("WL", "SL", "DD")


def tfidf_reference(
    corpus: list[dict[str, int]], min_total: int = 2
) -> tuple[list[str], list[dict[int, float]]]:
    """Dict-based tf-idf: returns (sorted vocabulary, per-doc index->weight)."""
    n = len(corpus)
    totals: dict[str, int] = {}
    dfs: dict[str, int] = {}
    for counts in corpus:
        for feat, cnt in counts.items():
            totals[feat] = totals.get(feat, 0) + cnt
            dfs[feat] = dfs.get(feat, 0) + 1
    vocab = sorted(
        feat
        for feat, tot in totals.items()
        if tot >= min_total or feat.split(":", 1)[0] in STAT_PREFIXES
    )
    index = {feat: i for i, feat in enumerate(vocab)}
    docs_out: list[dict[int, float]] = []
    for counts in corpus:
        weights: dict[int, float] = {}
        for feat, cnt in counts.items():
            if feat in index:
                idf = math.log((1.0 + n) / (1.0 + dfs[feat])) + 1.0
                weights[index[feat]] = cnt * idf
        norm = math.sqrt(sum(v * v for v in weights.values()))
        if norm > 0:
            weights = {i: v / norm for i, v in weights.items()}
        docs_out.append(weights)
    return vocab, docs_out


def accuracy_reference(cells: list[list[int]]) -> float:
    total = sum(sum(row) for row in cells)
    diag = sum(cells[i][i] for i in range(len(cells)))
    return diag / total


def solve_dual_reference(
    points: list[list[float]], targets: list[float], c: float
) -> dict:
    """Box-constrained QP solve of the hinge-loss dual, bias via +1 column."""
    x = np.array([list(p) + [1.0] for p in points], dtype=np.float64)
    y = np.array(targets, dtype=np.float64)
    m = y[:, None] * x
    q = m @ m.T
    n = len(y)

    def fun(a: np.ndarray) -> float:
        return float(0.5 * a @ q @ a - a.sum())

    def jac(a: np.ndarray) -> np.ndarray:
        return q @ a - 1.0

    res = minimize(
        fun,
        np.full(n, 0.5 * c),
        jac=jac,
        bounds=[(0.0, c)] * n,
        method="L-BFGS-B",
        options={"maxiter": 5000, "ftol": 1e-15, "gtol": 1e-12},
    )
    alpha = res.x
    w = (alpha * y) @ x
    margins = 1.0 - y * (x @ w)
    primal = float(0.5 * w @ w + c * np.clip(margins, 0.0, None).sum())
    dual = float(alpha.sum() - 0.5 * w @ w)
    return {"alpha": alpha, "w": w[:-1], "b": float(w[-1]), "primal": primal, "dual": dual}


def primal_objective_reference(
    points: list[list[float]],
    targets: list[float],
    weights: np.ndarray,
    bias: float,
    c: float,
) -> float:
    x = np.asarray(points, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    scores = x @ np.asarray(weights) + bias
    hinge = np.clip(1.0 - y * scores, 0.0, None).sum()
    reg = 0.5 * (float(np.asarray(weights) @ np.asarray(weights)) + bias * bias)
    return float(reg + c * hinge)


def platt_reference(scores: list[float], targets: list[float]) -> tuple[float, float]:
    """BFGS fit of the smoothed-target sigmoid likelihood."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    n_pos = int((y > 0).sum())
    n_neg = int((y < 0).sum())
    hi = (n_pos + 1.0) / (n_pos + 2.0)
    lo = 1.0 / (n_neg + 2.0)
    t = np.where(y > 0, hi, lo)

    def nll(params: np.ndarray) -> float:
        z = params[0] * s + params[1]
        softplus = np.log1p(np.exp(-np.abs(z)))
        return float(np.sum(np.where(z >= 0, t * z + softplus, (t - 1.0) * z + softplus)))

    def grad(params: np.ndarray) -> np.ndarray:
        z = params[0] * s + params[1]
        e = np.exp(-np.abs(z))
        p = np.where(z >= 0, e / (1.0 + e), 1.0 / (1.0 + e))
        d = t - p
        return np.array([float(np.sum(s * d)), float(np.sum(d))])

    x0 = np.array([0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))])
    res = minimize(nll, x0, jac=grad, method="BFGS", options={"gtol": 1e-10, "maxiter": 1000})
    return float(res.x[0]), float(res.x[1])


def regex_token_count(text: str) -> int:
    """Token count of an ASCII text under the plain-text tokenization rule."""
    return len(re.findall(r"[A-Za-z0-9]+|[^A-Za-z0-9\s]", text))
