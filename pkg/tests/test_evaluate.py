import random
from collections import Counter

import numpy as np
import pytest

from oracles import metrics_by_hand
from opgram.errors import FoldError, EmptyClass, TooFewInstances
from opgram.evaluate import (
    ConfusionMatrix, cross_validate, per_class_metrics, precision_recall_f1, stratified_folds,
    weighted_f_measure,
)


def test_folds_balanced_pairs():
    labels = ["b"] * 10 + ["m"] * 10
    split = stratified_folds(labels, 10, seed=3)
    for fold in split.folds():
        assert sorted(labels[i] for i in fold) == ["b", "m"]
    assert stratified_folds(labels, 10, seed=3) == split
    assert stratified_folds(labels, 10, seed=4) != split


def test_small_class_spreads_over_distinct_folds():
    labels = ["a"] * 3 + ["b"] * 40
    split = stratified_folds(labels, 10, seed=0)
    assert len({split.assignment[i] for i in range(3)}) == 3


@pytest.mark.parametrize("seed", range(5))
def test_fold_stratification_property(seed):
    rng = random.Random(seed)
    labels = [rng.choice("abcd") for _ in range(rng.randint(10, 80))]
    k = rng.randint(2, 10)
    split = stratified_folds(labels, k, seed)
    assert sorted(i for f in split.folds() for i in f) == list(range(len(labels)))
    for c in set(labels):
        sizes = Counter(split.assignment[i] for i, lab in enumerate(labels) if lab == c)
        per_fold = [sizes.get(f, 0) for f in range(k)]
        assert max(per_fold) - min(per_fold) <= 1


def test_fold_errors():
    with pytest.raises(TooFewInstances):
        stratified_folds(["a"] * 3, 4)
    with pytest.raises(ValueError):
        stratified_folds(["a"] * 3, 1)


def test_metric_examples():
    diag = ConfusionMatrix(("a", "b"), [[5, 0], [0, 3]])
    assert precision_recall_f1(diag, "a") == (1.0, 1.0, 1.0)
    ghost = ConfusionMatrix(("a", "b", "c"), [[5, 0, 0], [1, 3, 0], [0, 0, 0]])
    assert precision_recall_f1(ghost, "c") == (0.0, 0.0, 0.0)
    cm = ConfusionMatrix.from_dict({"mal": {"mal": 8, "ben": 2}, "ben": {"mal": 1, "ben": 9}})
    p, r, f = precision_recall_f1(cm, "mal")
    assert p == pytest.approx(8 / 9, abs=1e-15) and r == pytest.approx(8 / 10, abs=1e-15)
    assert f == pytest.approx(2 * (8 / 9) * (8 / 10) / ((8 / 9) + (8 / 10)), abs=1e-15)
    f_ben = precision_recall_f1(cm, "ben")[2]
    assert f_ben == pytest.approx(2 * (9 / 10) * (9 / 11) / ((9 / 10) + (9 / 11)), abs=1e-15)
    assert weighted_f_measure(cm) == pytest.approx((f + f_ben) / 2, abs=1e-15)


def test_weighted_f_perfect_and_single_class():
    assert weighted_f_measure(ConfusionMatrix(("a", "b", "c"), np.diag([4, 1, 7]))) == 1.0
    assert weighted_f_measure(ConfusionMatrix(("a",), [[9]])) == 1.0
    with pytest.raises(ValueError):
        weighted_f_measure(ConfusionMatrix.empty(("a", "b")))


@pytest.mark.parametrize("seed", range(10))
def test_weighted_f_random(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(2, 6))
    M = rng.integers(0, 30, size=(k, k))
    classes = tuple(f"c{i}" for i in range(k))
    cm = ConfusionMatrix(classes, M)
    rows, wf = metrics_by_hand(M.tolist(), classes)
    assert abs(weighted_f_measure(cm) - wf) < 1e-12
    pcm = per_class_metrics(cm)
    for c, (p, r, f, s) in zip(classes, rows):
        assert pcm[c]["support"] == s
        assert abs(pcm[c]["f1"] - f) < 1e-12


def test_from_labels_and_add():
    cm = ConfusionMatrix.from_labels(["a", "b", "b"], ["a", "a", "b"])
    assert cm.to_dict() == {"a": {"a": 1, "b": 0}, "b": {"a": 1, "b": 1}}
    assert (cm + cm).total == 6
    with pytest.raises(ValueError):
        cm + ConfusionMatrix.empty(("a", "c"))


class Item:
    def __init__(self, i, label):
        self.i, self.label = i, label


def test_cv_constant_predictor():
    data = [Item(i, "b" if i % 2 else "m") for i in range(20)]
    rep = cross_validate(data, 10, 0, lambda tr: None, lambda m, te: ["m"] * len(te))
    # every instance predicted m: precision 1/2, recall 1 for m; 0 for b
    f_m = 2 * 0.5 * 1.0 / 1.5
    assert rep.weighted_f == pytest.approx(0.5 * f_m + 0.5 * 0.0, abs=1e-15)
    assert rep.pooled.to_dict() == {"b": {"b": 0, "m": 10}, "m": {"b": 0, "m": 10}}
    assert sum(f.total for f in rep.folds) == 20


def test_cv_memorizer_and_loo():
    data = [Item(i, "b" if i < 6 else "m") for i in range(12)]
    truth = {d.i: d.label for d in data}
    rep = cross_validate(data, 12, 1, lambda tr: truth, lambda m, te: [m[t.i] for t in te])
    assert rep.weighted_f == 1.0 and rep.mean_fold_weighted_f == 1.0
    assert [f.total for f in rep.folds] == [1] * 12
    threaded = cross_validate(data, 12, 1, lambda tr: truth, lambda m, te: [m[t.i] for t in te], threads=4)
    assert threaded.to_dict() == rep.to_dict()
    assert len(rep.timing()["per_fold_train_seconds"]) == 12


def test_cv_wraps_fold_errors():
    data = [Item(i, "b" if i % 2 else "m") for i in range(10)]

    def bad_train(tr):
        raise EmptyClass("nothing")

    with pytest.raises(FoldError):
        cross_validate(data, 5, 0, bad_train, lambda m, te: [])
