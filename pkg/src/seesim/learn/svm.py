"""Soft-margin SVM with an RBF kernel, trained by sequential minimal optimization.

The dual problem

    max  sum(a) - 1/2 a^T Q a,   Q_ij = y_i y_j K(x_i, x_j)
    s.t. 0 <= a_i <= C,  sum(a_i y_i) = 0

is solved two multipliers at a time.  The working pair is the most violating
index ``i`` plus the partner ``j`` with the largest second-order decrease of
the objective.  Training stops once the largest KKT violation gap drops
below ``tol``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

TAU = 1e-12
MODEL_VERSION = 1


class SvmError(ValueError):
    pass


class SingleClassDataset(SvmError):
    pass


class NonPositiveHyperparameter(SvmError):
    pass


class FeatureMaskMismatch(SvmError):
    pass


def rbf_kernel(X: np.ndarray, Z: np.ndarray, gamma: float) -> np.ndarray:
    """K[i, j] = exp(-gamma * ||X_i - Z_j||^2)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    sq = (X * X).sum(1)[:, None] + (Z * Z).sum(1)[None, :] - 2.0 * X @ Z.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SmoResult:
    alpha: np.ndarray
    b: float
    iterations: int
    converged: bool
    gap: float


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    ay = alpha * y
    return float(alpha.sum() - 0.5 * ay @ K @ ay)


def smo(K: np.ndarray, y: np.ndarray, C: float, tol: float = 1e-3, max_passes: int = 100) -> SmoResult:
    """Solve the dual for a precomputed kernel matrix.

    ``max_passes`` bounds the work at ``max_passes * n`` pair updates.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    alpha = np.zeros(n)
    G = -np.ones(n)  # gradient of 1/2 a^T Q a - e^T a
    QD = np.diag(K).copy()
    max_iter = max_passes * max(n, 1)
    it = 0
    gap = np.inf
    converged = False
    pos = y > 0
    while it < max_iter:
        v = -y * G
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            converged = True
            gap = 0.0
            break
        v_up = np.where(up, v, -np.inf)
        i = int(np.argmax(v_up))
        m = v_up[i]
        M = np.min(v[low])
        gap = m - M
        if gap <= tol:
            converged = True
            break
        cand = low & (v < m)
        b_it = m - v
        a_it = QD[i] + QD - 2.0 * K[i]
        a_it = np.where(a_it > 0, a_it, TAU)
        score = np.where(cand, -(b_it * b_it) / a_it, np.inf)
        j = int(np.argmin(score))

        Qi = y[i] * y * K[i]
        Qj = y[j] * y * K[j]
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2.0 * Qi[j]
            quad = quad if quad > 0 else TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = QD[i] + QD[j] - 2.0 * Qi[j]
            quad = quad if quad > 0 else TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        G += Qi * (ni - ai) + Qj * (nj - aj)
        it += 1

    v = -y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        b = float(v[free].mean())
    else:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        hi = v[up].max() if up.any() else v[low].min()
        lo = v[low].min() if low.any() else hi
        b = float((hi + lo) / 2.0)
    return SmoResult(alpha, b, it, converged, float(max(gap, 0.0)))


def kkt_violations(alpha: np.ndarray, y: np.ndarray, K: np.ndarray, b: float, C: float, tol: float) -> list[int]:
    """Indices whose multiplier breaks the KKT conditions by more than ``tol``."""
    f = K @ (alpha * y) + b
    margin = y * f
    bad = []
    for k, (a, m) in enumerate(zip(alpha, margin)):
        if a <= 0:
            ok = m >= 1 - tol
        elif a >= C:
            ok = m <= 1 + tol
        else:
            ok = abs(m - 1) <= tol
        if not ok:
            bad.append(k)
    return bad


@dataclass
class SvmModel:
    support_vectors: np.ndarray  # (n_sv, d), normalized and masked
    alphas: np.ndarray
    sv_labels: np.ndarray
    b: float
    C: float
    gamma: float
    feature_mask: np.ndarray  # bool over the candidate features
    norm_min: np.ndarray  # per candidate feature
    norm_max: np.ndarray
    feature_names: tuple[str, ...] = ()

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        """Scores for rows already normalized and masked."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if len(X) == 0:
            return np.zeros(0)
        if X.shape[1] != self.support_vectors.shape[1]:
            raise FeatureMaskMismatch(
                f"expected {self.support_vectors.shape[1]} features, got {X.shape[1]}"
            )
        return rbf_kernel(X, self.support_vectors, self.gamma) @ (self.alphas * self.sv_labels) + self.b

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.where(self.decision_function(X) >= 0, 1, -1)

    def transform(self, raw: np.ndarray) -> np.ndarray:
        """Normalize raw candidate-feature rows and apply the mask."""
        raw = np.atleast_2d(np.asarray(raw, dtype=float))
        if raw.size == 0:
            return np.zeros((0, int(self.feature_mask.sum())))
        if raw.shape[1] != len(self.feature_mask):
            raise FeatureMaskMismatch(f"expected {len(self.feature_mask)} raw features, got {raw.shape[1]}")
        span = self.norm_max - self.norm_min
        safe = np.where(span > 0, span, 1.0)
        X = np.where(span > 0, (raw - self.norm_min) / safe, 0.0)
        return X[:, self.feature_mask]

    def to_json(self) -> str:
        doc = {
            "version": MODEL_VERSION,
            "kernel": "rbf",
            "C": self.C,
            "gamma": self.gamma,
            "b": self.b,
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "labels": self.sv_labels.astype(int).tolist(),
            "feature_mask": self.feature_mask.astype(bool).tolist(),
            "feature_names": list(self.feature_names),
            "norm_min": self.norm_min.tolist(),
            "norm_max": self.norm_max.tolist(),
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        doc = json.loads(text)
        if doc.get("version") != MODEL_VERSION or doc.get("kernel") != "rbf":
            raise SvmError(f"unsupported model file (version {doc.get('version')}, kernel {doc.get('kernel')})")
        mask = np.array(doc["feature_mask"], dtype=bool)
        sv = np.array(doc["support_vectors"], dtype=float).reshape(-1, int(mask.sum()))
        return cls(sv, np.array(doc["alphas"], dtype=float), np.array(doc["labels"], dtype=float),
                   float(doc["b"]), float(doc["C"]), float(doc["gamma"]), mask,
                   np.array(doc["norm_min"], dtype=float), np.array(doc["norm_max"], dtype=float),
                   tuple(doc.get("feature_names", ())))


def fit(X: np.ndarray, y: np.ndarray, C: float, gamma: float, tol: float = 1e-3,
        max_passes: int = 100) -> tuple[SmoResult, np.ndarray]:
    """Train on a plain matrix; returns the solver result and the kernel matrix."""
    if C <= 0 or gamma <= 0:
        raise NonPositiveHyperparameter(f"C and gamma must be positive (C={C}, gamma={gamma})")
    y = np.asarray(y, dtype=float)
    if len(np.unique(y)) < 2:
        raise SingleClassDataset("training needs both classes")
    X = np.asarray(X, dtype=float)
    K = rbf_kernel(X, X, gamma)
    return smo(K, y, C, tol, max_passes), K


def train_svm(ds, C: float, gamma: float, tol: float = 1e-3, max_passes: int = 100, seed: int = 0) -> SvmModel:
    """Fit an RBF SVM on a preprocessed dataset.

    ``seed`` is accepted for pipeline symmetry; the pair selection is
    deterministic, so it has no effect on the result.
    """
    X = ds.X[:, ds.mask]
    res, _ = fit(X, ds.y, C, gamma, tol, max_passes)
    sv = res.alpha > 0
    return SvmModel(
        support_vectors=X[sv].copy(),
        alphas=res.alpha[sv].copy(),
        sv_labels=np.asarray(ds.y, dtype=float)[sv].copy(),
        b=res.b,
        C=C,
        gamma=gamma,
        feature_mask=ds.mask.copy(),
        norm_min=ds.norm_min.copy(),
        norm_max=ds.norm_max.copy(),
        feature_names=tuple(ds.feature_names),
    )
