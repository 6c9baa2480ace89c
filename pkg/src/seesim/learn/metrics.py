"""Binary classification metrics and ROC analysis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .svm import SingleClassDataset


class LengthMismatch(ValueError):
    pass


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


@dataclass(frozen=True)
class Metrics:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def tpr(self) -> float:
        return _ratio(self.tp, self.tp + self.fn)

    @property
    def tnr(self) -> float:
        return _ratio(self.tn, self.tn + self.fp)

    @property
    def precision(self) -> float:
        return _ratio(self.tp, self.tp + self.fp)

    @property
    def accuracy(self) -> float:
        return _ratio(self.tp + self.tn, self.total)

    @property
    def f1(self) -> float:
        return _ratio(2 * self.precision * self.tpr, self.precision + self.tpr)

    def as_dict(self) -> dict:
        return {
            "TP": self.tp, "TN": self.tn, "FP": self.fp, "FN": self.fn,
            "TPR": self.tpr, "TNR": self.tnr, "precision": self.precision,
            "accuracy": self.accuracy, "F1": self.f1,
        }

    def __add__(self, other: "Metrics") -> "Metrics":
        return Metrics(self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn)


def confusion(predictions: Sequence[int], labels: Sequence[int]) -> Metrics:
    p = np.asarray(predictions)
    t = np.asarray(labels)
    if p.shape != t.shape:
        raise LengthMismatch(f"{len(p)} predictions for {len(t)} labels")
    return Metrics(
        tp=int(np.sum((p > 0) & (t > 0))),
        tn=int(np.sum((p <= 0) & (t <= 0))),
        fp=int(np.sum((p > 0) & (t <= 0))),
        fn=int(np.sum((p <= 0) & (t > 0))),
    )


evaluate = confusion


def roc(scores: Sequence[float], labels: Sequence[int]) -> tuple[list[tuple[float, float]], float]:
    """ROC points from (0, 0) to (1, 1) and the trapezoid-rule AUC.

    Every distinct score is a threshold; tied scores move both rates at once.
    """
    s = np.asarray(scores, dtype=float)
    t = np.asarray(labels) > 0
    if s.shape != t.shape:
        raise LengthMismatch(f"{len(s)} scores for {len(t)} labels")
    n_pos, n_neg = int(t.sum()), int((~t).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClassDataset("ROC needs both classes")
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    k = 0
    while k < len(s):
        j = k
        while j < len(s) and s[j] == s[k]:
            tp += int(t[j])
            fp += int(not t[j])
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        k = j
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, auc
