"""Stratified k-fold cross-validation and precision / recall / f-measure."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import FoldError, OpgramError, TooFewInstances


@dataclass
class ConfusionMatrix:
    """``counts[i, j]``: instances of actual class ``classes[i]`` predicted as ``classes[j]``."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        self.classes = tuple(self.classes)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("negative count in confusion matrix")

    @classmethod
    def empty(cls, classes: Sequence[str]) -> ConfusionMatrix:
        return cls(tuple(classes), np.zeros((len(classes), len(classes)), dtype=np.int64))

    @classmethod
    def from_labels(cls, actual: Sequence[str], predicted: Sequence[str],
                    classes: Sequence[str] | None = None) -> ConfusionMatrix:
        if classes is None:
            classes = sorted(set(actual) | set(predicted))
        cm = cls.empty(classes)
        idx = {c: i for i, c in enumerate(cm.classes)}
        for a, p in zip(actual, predicted, strict=True):
            cm.counts[idx[a], idx[p]] += 1
        return cm

    @classmethod
    def from_dict(cls, nested: dict) -> ConfusionMatrix:
        """``{actual: {predicted: count}}``."""
        classes = sorted(set(nested) | {p for row in nested.values() for p in row})
        cm = cls.empty(classes)
        idx = {c: i for i, c in enumerate(classes)}
        for a, row in nested.items():
            for p, n in row.items():
                cm.counts[idx[a], idx[p]] += n
        return cm

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: ConfusionMatrix) -> ConfusionMatrix:
        if self.classes != other.classes:
            raise ValueError("cannot add confusion matrices over different classes")
        return ConfusionMatrix(self.classes, self.counts + other.counts)

    def to_dict(self) -> dict:
        return {a: {p: int(self.counts[i, j]) for j, p in enumerate(self.classes)}
                for i, a in enumerate(self.classes)}


def _ratio(num, den):
    return num / den if den else 0.0


def precision_recall_f1(cm: ConfusionMatrix, c: str) -> tuple[float, float, float]:
    """0/0 is taken as 0 for each of the three."""
    i = cm.classes.index(c)
    tp = int(cm.counts[i, i])
    p = _ratio(tp, int(cm.counts[:, i].sum()))
    r = _ratio(tp, int(cm.counts[i, :].sum()))
    return p, r, _ratio(2 * p * r, p + r)


def weighted_f_measure(cm: ConfusionMatrix) -> float:
    """Per-class f1 averaged with weights proportional to actual support."""
    total = cm.total
    if total == 0:
        raise ValueError("weighted f-measure of an empty matrix")
    acc = 0.0
    for i, c in enumerate(cm.classes):
        support = int(cm.counts[i, :].sum())
        if support:
            acc += support * precision_recall_f1(cm, c)[2]
    return acc / total


def per_class_metrics(cm: ConfusionMatrix) -> dict[str, dict[str, float]]:
    out = {}
    for i, c in enumerate(cm.classes):
        p, r, f = precision_recall_f1(cm, c)
        out[c] = {"precision": p, "recall": r, "f1": f, "support": int(cm.counts[i, :].sum())}
    return out


@dataclass(frozen=True)
class FoldSplit:
    k: int
    seed: int
    assignment: tuple[int, ...]  # fold index per instance

    def fold_indices(self, fold: int) -> list[int]:
        return [i for i, f in enumerate(self.assignment) if f == fold]

    def folds(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for i, f in enumerate(self.assignment):
            out[f].append(i)
        return out


def stratified_folds(labels: Sequence[str], k: int, seed: int = 0) -> FoldSplit:
    """Shuffle each class with ``seed``, then deal its members round-robin to the folds.

    The dealing position carries over from one class to the next (classes
    taken in name order), so small classes do not all pile into fold 0.
    """
    labels = [getattr(x, "label", x) for x in labels]
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(labels) < k:
        raise TooFewInstances(f"{len(labels)} instances cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    assignment = [0] * len(labels)
    pos = 0
    for c in sorted(set(labels)):
        members = [i for i, lab in enumerate(labels) if lab == c]
        for i in rng.permutation(members).tolist():
            assignment[i] = pos % k
            pos += 1
    return FoldSplit(k, seed, tuple(assignment))


@dataclass
class CVReport:
    classes: tuple[str, ...]
    folds: list[ConfusionMatrix]
    pooled: ConfusionMatrix
    weighted_f: float
    mean_fold_weighted_f: float
    per_class: dict
    train_seconds: list[float] = field(default_factory=list)
    predict_seconds: list[float] = field(default_factory=list)

    def to_dict(self, timing: bool = False) -> dict:
        doc = {
            "classes": list(self.classes),
            "weighted_f": self.weighted_f,
            "mean_fold_weighted_f": self.mean_fold_weighted_f,
            "pooled": self.pooled.to_dict(),
            "per_class": self.per_class,
            "folds": [f.to_dict() for f in self.folds],
        }
        if timing:
            doc["timing"] = self.timing()
        return doc

    def timing(self) -> dict:
        return {
            "train_seconds": sum(self.train_seconds),
            "predict_seconds": sum(self.predict_seconds),
            "per_fold_train_seconds": list(self.train_seconds),
            "per_fold_predict_seconds": list(self.predict_seconds),
        }


def cross_validate(instances: Sequence, k: int, seed: int,
                   train_fn: Callable, predict_fn: Callable, threads: int = 1) -> CVReport:
    """Train on k-1 folds, predict the held-out fold, for every fold.

    ``train_fn(train_instances) -> model`` and
    ``predict_fn(model, test_instances) -> labels``. The headline number is
    the weighted f-measure of the pooled matrix; the mean of per-fold
    values is reported too.
    """
    labels = [inst.label for inst in instances]
    split = stratified_folds(labels, k, seed)
    classes = tuple(sorted(set(labels)))
    folds = split.folds()

    def run(f):
        test_idx = folds[f]
        test_set = set(test_idx)
        train = [inst for i, inst in enumerate(instances) if i not in test_set]
        test = [instances[i] for i in test_idx]
        t0 = time.perf_counter()
        try:
            model = train_fn(train)
        except OpgramError as exc:
            raise FoldError(f, exc) from exc
        t1 = time.perf_counter()
        pred = list(predict_fn(model, test))
        t2 = time.perf_counter()
        cm = ConfusionMatrix.from_labels([labels[i] for i in test_idx], pred, classes)
        return cm, t1 - t0, t2 - t1

    if threads <= 1:
        results = [run(f) for f in range(k)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(k)))

    fold_cms = [r[0] for r in results]
    pooled = ConfusionMatrix.empty(classes)
    for cm in fold_cms:
        pooled = pooled + cm
    fold_f = [weighted_f_measure(cm) for cm in fold_cms if cm.total]
    return CVReport(
        classes=classes,
        folds=fold_cms,
        pooled=pooled,
        weighted_f=weighted_f_measure(pooled),
        mean_fold_weighted_f=float(np.mean(fold_f)) if fold_f else 0.0,
        per_class=per_class_metrics(pooled),
        train_seconds=[r[1] for r in results],
        predict_seconds=[r[2] for r in results],
    )
