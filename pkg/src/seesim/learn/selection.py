"""Stratified k-fold evaluation, hyper-parameter grid search and greedy
forward feature selection."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .features import Dataset, FeatureVector, raw_matrix
from .metrics import Metrics, confusion
from .svm import SvmModel, fit, rbf_kernel

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)
DEFAULT_GAMMA_GRID = (0.01, 0.1, 1.0, 10.0)
SELECTION_C = 10.0
SELECTION_GAMMA = 1.0


class TooFewSamples(ValueError):
    pass


def stratified_folds(y: Sequence[int], k: int, seed: int) -> list[np.ndarray]:
    """Test-index arrays for ``k`` folds with class proportions preserved.

    Each class is shuffled with the seed and dealt round-robin; the deal
    continues across classes so fold sizes differ by at most one.
    """
    y = np.asarray(y)
    if k < 2:
        raise TooFewSamples("need at least 2 folds")
    if len(y) < k:
        raise TooFewSamples(f"{len(y)} samples for {k} folds")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2 or counts.min() < 2:
        raise TooFewSamples("every class needs at least two samples for stratified folds")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    slot = 0
    for cls in classes:
        idx = np.flatnonzero(y == cls)
        for i in rng.permutation(idx):
            folds[slot % k].append(int(i))
            slot += 1
    return [np.array(sorted(f), dtype=int) for f in folds]


def _cv_predictions(X: np.ndarray, y: np.ndarray, C: float, gamma: float, folds: list[np.ndarray],
                    tol: float = 1e-3, max_passes: int = 100) -> tuple[np.ndarray, np.ndarray]:
    scores = np.zeros(len(y))
    n = len(y)
    for test in folds:
        train = np.setdiff1d(np.arange(n), test)
        res, _ = fit(X[train], y[train], C, gamma, tol, max_passes)
        sv = res.alpha > 0
        coef = res.alpha[sv] * y[train][sv]
        scores[test] = rbf_kernel(X[test], X[train][sv], gamma) @ coef + res.b
    return np.where(scores >= 0, 1, -1), scores


def cv_accuracy(ds: Dataset, C: float, gamma: float, k: int = 10, seed: int = 0, mask=None) -> float:
    """Mean per-fold accuracy of stratified k-fold cross-validation."""
    mask = ds.mask if mask is None else np.asarray(mask, dtype=bool)
    X = ds.X[:, mask]
    folds = stratified_folds(ds.y, k, seed)
    pred, _ = _cv_predictions(X, ds.y, C, gamma, folds)
    return float(np.mean([np.mean(pred[f] == ds.y[f]) for f in folds]))


def cross_validate(ds: Dataset, C: float, gamma: float, k: int = 10, seed: int = 0) -> tuple[Metrics, np.ndarray, list[Metrics]]:
    """Pooled confusion counts, out-of-fold scores and per-fold metrics."""
    folds = stratified_folds(ds.y, k, seed)
    pred, scores = _cv_predictions(ds.X[:, ds.mask], ds.y, C, gamma, folds)
    per_fold = [confusion(pred[f], ds.y[f]) for f in folds]
    return confusion(pred, ds.y), scores, per_fold


def _grid_cell(args):
    ds, C, gamma, k, seed = args
    return cv_accuracy(ds, C, gamma, k, seed)


def grid_search(ds: Dataset, C_grid: Sequence[float] = DEFAULT_C_GRID,
                gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID, k: int = 10, seed: int = 0,
                jobs: int = 1) -> tuple[float, float, float, list[tuple[float, float, float]]]:
    """Best (C, gamma) by mean CV accuracy; ties go to smaller C, then smaller gamma.

    Returns ``(C, gamma, accuracy, table)`` where ``table`` lists every grid cell.
    """
    stratified_folds(ds.y, k, seed)  # validate early
    cells = [(C, g) for C in sorted(C_grid) for g in sorted(gamma_grid)]
    args = [(ds, C, g, k, seed) for C, g in cells]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            accs = list(pool.map(_grid_cell, args))
    else:
        accs = [_grid_cell(a) for a in args]
    table = [(C, g, acc) for (C, g), acc in zip(cells, accs)]
    best = max(range(len(table)), key=lambda i: (table[i][2], -i))
    C, g, acc = table[best]
    return C, g, acc, table


def forward_feature_selection(ds: Dataset, k: int = 10, seed: int = 0, C: float = SELECTION_C,
                              gamma: float = SELECTION_GAMMA) -> tuple[np.ndarray, list[float], list[int]]:
    """Greedy forward selection by mean CV accuracy.

    Returns the mask at the best subset size (ties: smaller size), the score
    after each addition and the order in which features were added.
    """
    d = ds.X.shape[1]
    if d < 2:
        raise ValueError("forward selection needs at least two candidate features")
    stratified_folds(ds.y, k, seed)
    chosen: list[int] = []
    curve: list[float] = []
    while len(chosen) < d:
        best_f, best_s = -1, -1.0
        for f in range(d):
            if f in chosen:
                continue
            mask = np.zeros(d, dtype=bool)
            mask[chosen + [f]] = True
            s = cv_accuracy(ds, C, gamma, k, seed, mask=mask)
            if s > best_s:
                best_f, best_s = f, s
        chosen.append(best_f)
        curve.append(best_s)
    size = int(np.argmax(curve)) + 1  # first maximum = smallest size
    mask = np.zeros(d, dtype=bool)
    mask[chosen[:size]] = True
    return mask, curve, chosen


@dataclass
class Prediction:
    nodes: list[int]
    labels: np.ndarray
    scores: np.ndarray
    wall_time: float


def predict_sensitivity(model: SvmModel, vectors: Sequence[FeatureVector]) -> Prediction:
    """Classify nodes as high (+1) or low (-1) sensitivity from raw features."""
    t0 = time.perf_counter()
    X = model.transform(raw_matrix(vectors))
    scores = model.decision_function(X) if len(vectors) else np.zeros(0)
    labels = np.where(scores >= 0, 1, -1)
    wall = time.perf_counter() - t0
    return Prediction([v.node for v in vectors], labels, scores, wall)
