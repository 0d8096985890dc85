"""Linear SVM (dual coordinate descent), one-vs-one voting and accuracy metrics."""
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (ClassTooSmall, DimensionMismatch, EmptyInput,
                     LengthMismatch, SingleClass)

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0)


@dataclass
class BinarySvm:
    weights: np.ndarray
    bias: float
    C: float

    def decision(self, X):
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias


def primal_objective(X, labels, w, b, C):
    """``1/2 (||w||^2 + b^2) + C sum_i max(0, 1 - l_i (w.x_i + b))``.

    The bias is trained as the weight of a constant unit feature, so it is
    regularised together with ``w``.
    """
    margins = labels * (X @ w + b)
    return 0.5 * (w @ w + b * b) + C * np.maximum(0.0, 1.0 - margins).sum()


def train_binary(X, labels, C, tol=1e-4, max_iter=2000, seed=0):
    """L1-loss linear SVM by dual coordinate descent.

    The dual ``min 1/2 a^T Q a - sum(a)``, ``0 <= a <= C`` is minimised one
    coordinate at a time in a seeded random order per epoch, until every
    projected-gradient entry of an epoch is within ``tol`` of zero.

    Parameters
    ----------
    X : array (n, dim)
    labels : array (n,) of -1/+1
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyInput("no training samples")
    if len(y) != len(X):
        raise LengthMismatch(f"{len(X)} samples but {len(y)} labels")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClass("both labels (-1 and +1) must be present")

    n, dim = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    qdiag = np.einsum("ij,ij->i", Xa, Xa)
    alpha = np.zeros(n)
    w = np.zeros(dim + 1)
    rng = np.random.default_rng(seed)
    rows = list(Xa)
    for _ in range(max_iter):
        worst = 0.0
        for i in rng.permutation(n):
            xi, yi, ai = rows[i], y[i], alpha[i]
            g = yi * (w @ xi) - 1.0
            if ai == 0.0:
                pg = min(g, 0.0)
            elif ai == C:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg != 0.0:
                worst = max(worst, abs(pg))
                new = min(max(ai - g / qdiag[i], 0.0), C)
                w += (new - ai) * yi * xi
                alpha[i] = new
        if worst <= tol:
            break
    return BinarySvm(w[:-1].copy(), float(w[-1]), float(C))


@dataclass
class OvoSvmModel:
    """One binary classifier per unordered class pair ``(a, b)``, ``a < b``.

    A nonnegative decision value is a vote for ``a``.
    """

    num_classes: int
    classifiers: list

    def decision_votes(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes = np.zeros((len(X), self.num_classes), dtype=np.int64)
        for a, b, clf in self.classifiers:
            if X.shape[1] != len(clf.weights):
                raise DimensionMismatch(
                    f"model expects {len(clf.weights)} features, got {X.shape[1]}")
            win_a = clf.decision(X) >= 0
            votes[win_a, a - 1] += 1
            votes[~win_a, b - 1] += 1
        return votes

    def to_dict(self):
        return {"num_classes": self.num_classes,
                "classifiers": [{"pair": [a, b], "C": clf.C, "bias": clf.bias,
                                 "weights": clf.weights.tolist()}
                                for a, b, clf in self.classifiers]}

    @classmethod
    def from_dict(cls, obj):
        return cls(int(obj["num_classes"]),
                   [(int(c["pair"][0]), int(c["pair"][1]),
                     BinarySvm(np.asarray(c["weights"], dtype=np.float64),
                               float(c["bias"]), float(c["C"])))
                    for c in obj["classifiers"]])


def save_model(path, model):
    with open(path, "w") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path):
    with open(path) as fh:
        return OvoSvmModel.from_dict(json.load(fh))


def train_ovo(X, labels, C, num_classes=None, n_jobs=1, **kwargs):
    """Train ``M (M - 1) / 2`` pairwise classifiers; class ids run 1..M."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(X) == 0:
        raise EmptyInput("no training samples")
    if len(labels) != len(X):
        raise LengthMismatch(f"{len(X)} samples but {len(labels)} labels")
    M = int(num_classes or labels.max())
    pairs = list(itertools.combinations(range(1, M + 1), 2))

    def fit(pair):
        a, b = pair
        sel = (labels == a) | (labels == b)
        for k in pair:
            if not np.any(labels == k):
                raise SingleClass(f"pair ({a}, {b}): class {k} has no training samples",
                                  pair=pair)
        signs = np.where(labels[sel] == a, 1.0, -1.0)
        return train_binary(X[sel], signs, C, **kwargs)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            models = list(pool.map(fit, pairs))
    else:
        models = [fit(p) for p in pairs]
    return OvoSvmModel(M, [(a, b, m) for (a, b), m in zip(pairs, models)])


def predict(model, code):
    """Class id chosen by majority vote; ties go to the lowest class id."""
    code = np.asarray(code, dtype=np.float64)
    if code.ndim != 1:
        raise DimensionMismatch("predict takes a single code vector")
    return int(predict_batch(model, code[None, :])[0])


def predict_batch(model, X):
    return np.argmax(model.decision_votes(X), axis=1) + 1


@dataclass
class EvalReport:
    """Confusion counts (rows true, columns predicted) and derived scores.

    ``per_class_acc`` is NaN for classes absent from the truth; ``AA``
    averages over the classes that are present.
    """

    confusion: np.ndarray
    per_class_acc: np.ndarray
    OA: float
    AA: float
    kappa: float

    def to_dict(self):
        return {"OA": self.OA, "AA": self.AA, "kappa": self.kappa,
                "per_class_acc": [None if np.isnan(a) else float(a) for a in self.per_class_acc],
                "confusion": self.confusion.tolist()}


def report_from_confusion(confusion):
    cm = np.asarray(confusion, dtype=np.int64)
    total = cm.sum()
    if total == 0:
        raise EmptyInput("empty confusion matrix")
    rows, cols = cm.sum(axis=1), cm.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(rows > 0, np.diag(cm) / np.maximum(rows, 1), np.nan)
    oa = np.trace(cm) / total
    pe = float(rows @ cols) / float(total) ** 2
    if pe < 1.0:
        kappa = (oa - pe) / (1.0 - pe)
    else:
        # a single class in both truth and predictions
        kappa = 1.0 if oa == 1.0 else 0.0
    return EvalReport(cm, per_class, float(oa), float(np.nanmean(per_class)), float(kappa))


def evaluate(predictions, truth, num_classes=None):
    pred = np.asarray(predictions, dtype=np.int64).reshape(-1)
    true = np.asarray(truth, dtype=np.int64).reshape(-1)
    if len(pred) != len(true):
        raise LengthMismatch(f"{len(pred)} predictions for {len(true)} labels")
    if len(true) == 0:
        raise EmptyInput("nothing to evaluate")
    M = int(num_classes or max(pred.max(), true.max()))
    cm = np.zeros((M, M), dtype=np.int64)
    np.add.at(cm, (true - 1, pred - 1), 1)
    return report_from_confusion(cm)


def stratified_folds(labels, folds, seed):
    """Fold number for every sample; each class is spread round-robin."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    assign = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for k in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == k))
        assign[members] = (offset + np.arange(len(members))) % folds
        offset += len(members)
    return assign


@dataclass
class CVResult:
    C: float
    scores: dict  # C -> mean OA over folds


def cross_validate(X, labels, grid=DEFAULT_C_GRID, folds=5, seed=0, num_classes=None,
                   n_jobs=1, **kwargs):
    """Stratified k-fold choice of the SVM regularisation ``C``.

    The grid point with the highest mean overall accuracy wins; ties go to
    the smallest ``C``.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    for k, n in zip(*np.unique(labels, return_counts=True)):
        if n < 2:
            raise ClassTooSmall(k)
    M = int(num_classes or labels.max())
    assign = stratified_folds(labels, folds, seed)
    scores = {}
    for C in sorted(grid):
        accs = []
        for f in range(folds):
            val = assign == f
            if not np.any(val):
                continue
            model = train_ovo(X[~val], labels[~val], C, num_classes=M, n_jobs=n_jobs,
                              seed=seed, **kwargs)
            accs.append(np.mean(predict_batch(model, X[val]) == labels[val]))
        scores[C] = float(np.mean(accs))
    best = max(scores.values())
    chosen = min(c for c, s in scores.items() if s == best)
    return CVResult(chosen, scores)
