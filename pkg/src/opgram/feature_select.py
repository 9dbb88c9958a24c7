"""Information-gain ranking with segment-at-a-time scoring.

Each feature's score depends only on its own column, so the vocabulary can
be cut into contiguous id ranges, scored range by range (possibly on
worker threads) and merged; the result does not depend on the cut.

Entropies are in bits. Frequency-mode features are discretized by the
single threshold that maximizes information gain; candidates are the
midpoints between consecutive distinct observed counts, with absence
counted as 0.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import EmptyDistribution
from .ngram import BINARY, FREQUENCY, MODES, LabeledInstance, NGramVocabulary, to_csr

DEFAULT_THRESHOLD = 0.1
DEFAULT_BUDGET_BYTES = 1 << 30


@dataclass(frozen=True)
class ClassDistribution:
    counts: Mapping[str, int]

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> ClassDistribution:
        counts: dict[str, int] = {}
        for lab in labels:
            counts[lab] = counts.get(lab, 0) + 1
        return cls(dict(sorted(counts.items())))

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def _count_entropy(counts) -> float:
    """H in bits from raw counts: log2 N - sum(c log2 c) / N."""
    counts = [int(c) for c in counts]
    if any(c < 0 for c in counts):
        raise ValueError("negative count")
    n = sum(counts)
    if n == 0:
        raise EmptyDistribution("entropy of an empty distribution")
    s = 0.0
    for c in counts:
        if c:
            s += c * math.log2(c)
    return max(0.0, math.log2(n) - s / n)


def entropy(dist: ClassDistribution | Sequence[int]) -> float:
    counts = dist.counts.values() if isinstance(dist, ClassDistribution) else dist
    return _count_entropy(counts)


@dataclass(frozen=True)
class ContingencyTable:
    """Counts of (feature value, class) pairs for one feature.

    ``counts[j, i]`` is the number of instances with feature value
    ``values[j]`` and class ``classes[i]``. For frequency features the
    values are ``"<=t"`` / ``">t"`` around ``threshold``.
    """

    values: tuple
    classes: tuple
    counts: np.ndarray
    threshold: float | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (len(self.values), len(self.classes)):
            raise ValueError(f"counts shape {counts.shape} does not match values x classes")
        if (counts < 0).any():
            raise ValueError("negative count in contingency table")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple], classes: Sequence[str] | None = None) -> ContingencyTable:
        """Tabulate ``(value, class)`` observations."""
        pairs = list(pairs)
        values = tuple(sorted({v for v, _ in pairs}))
        classes = tuple(sorted({c for _, c in pairs})) if classes is None else tuple(classes)
        vi = {v: j for j, v in enumerate(values)}
        ci = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(values), len(classes)), dtype=np.int64)
        for v, c in pairs:
            counts[vi[v], ci[c]] += 1
        return cls(values, classes, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def class_marginal(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def value_marginal(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def class_distribution(self) -> ClassDistribution:
        return ClassDistribution(dict(zip(self.classes, (int(c) for c in self.class_marginal))))


def conditional_entropy(t: ContingencyTable) -> float:
    """Expected class entropy after observing the feature value."""
    n = t.total
    if n == 0:
        raise EmptyDistribution("conditional entropy of an empty table")
    acc = 0.0
    for row in t.counts:
        nj = int(row.sum())
        if nj:
            acc += nj * _count_entropy(row)
    return acc / n


def information_gain(t: ContingencyTable) -> float:
    h = entropy(t.class_marginal)
    return min(h, max(0.0, h - conditional_entropy(t)))


def _label_codes(instances: Sequence[LabeledInstance], classes: Sequence[str] | None = None):
    classes = sorted({inst.label for inst in instances}) if classes is None else list(classes)
    code = {c: i for i, c in enumerate(classes)}
    y = np.array([code[inst.label] for inst in instances], dtype=np.int64)
    return classes, y


def feature_table(instances: Sequence[LabeledInstance], feature_id: int, mode: str,
                  classes: Sequence[str] | None = None) -> ContingencyTable:
    """Contingency table of one feature, discretized by the best threshold in frequency mode.

    This is the per-feature reference path; :func:`segmented_ig` computes the
    same scores in bulk.
    """
    if not instances:
        raise EmptyDistribution("no instances")
    classes, y = _label_codes(instances, classes)
    vals = np.array([inst.vector.as_dict().get(feature_id, 0) for inst in instances], dtype=np.int64)
    if mode == BINARY:
        present = (vals > 0).astype(np.int64)
        t = ContingencyTable.from_pairs(zip(present.tolist(), (classes[i] for i in y)), classes)
        return t
    if mode != FREQUENCY:
        raise ValueError(f"unknown mode {mode!r}")
    distinct = sorted(set(vals.tolist()))
    if len(distinct) < 2:
        return ContingencyTable.from_pairs(zip(vals.tolist(), (classes[i] for i in y)), classes)
    best = None
    for lo, hi in zip(distinct, distinct[1:]):
        thr = (lo + hi) / 2.0
        counts = np.zeros((2, len(classes)), dtype=np.int64)
        np.add.at(counts, ((vals > thr).astype(np.int64), y), 1)
        t = ContingencyTable((f"<={thr:g}", f">{thr:g}"), tuple(classes), counts, thr)
        ig = information_gain(t)
        if best is None or ig > best[0]:
            best = (ig, t)
    return best[1]


@dataclass(frozen=True)
class IGScore:
    feature_id: int
    key: str
    ig: float
    threshold: float | None = None

    def sort_key(self):
        return (-self.ig, self.key)


@dataclass(frozen=True)
class SegmentPlan:
    """Contiguous feature-id ranges ``[start, stop)`` covering ``[0, n_features)``."""

    n_features: int
    segments: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pos = 0
        for start, stop in self.segments:
            if start != pos or stop <= start:
                raise ValueError(f"segments must be ordered, disjoint and non-empty; bad range {(start, stop)}")
            pos = stop
        if pos != self.n_features:
            raise ValueError(f"segments cover [0, {pos}) but there are {self.n_features} features")

    @classmethod
    def uniform(cls, n_features: int, segment_size: int) -> SegmentPlan:
        if segment_size < 1:
            raise ValueError("segment_size must be >= 1")
        return cls(n_features, tuple((a, min(a + segment_size, n_features))
                                     for a in range(0, n_features, segment_size)))

    @classmethod
    def from_cuts(cls, n_features: int, cuts: Iterable[int]) -> SegmentPlan:
        bounds = [0] + sorted(set(c for c in cuts if 0 < c < n_features)) + [n_features]
        if n_features == 0:
            return cls(0, ())
        return cls(n_features, tuple(zip(bounds, bounds[1:])))

    @classmethod
    def for_budget(cls, n_features: int, n_instances: int, n_classes: int,
                   budget_bytes: int = DEFAULT_BUDGET_BYTES) -> SegmentPlan:
        return cls.uniform(n_features, segment_size_for_budget(n_instances, n_classes, budget_bytes))

    @property
    def segment_size(self) -> int:
        return max((b - a for a, b in self.segments), default=1)


def segment_size_for_budget(n_instances: int, n_classes: int, budget_bytes: int) -> int:
    """Features per segment so one segment's dense scoring state stays under ``budget_bytes``.

    Worst case per feature is a dense column with per-class running counts
    (8 bytes each) plus the two split-side count vectors.
    """
    per_feature = 8 * (max(n_instances, 1) * (max(n_classes, 1) + 2) + 2 * max(n_classes, 1))
    return max(1, int(budget_bytes) // per_feature)


def _score_segment(Xc, start, stop, y, totals, xlogx, mode, backend):
    sub = Xc[:, start:stop]
    indptr = sub.indptr.astype(np.int64)
    rows = sub.indices.astype(np.int64)
    if mode == BINARY:
        return backend.ig_binary(indptr, rows, y, totals, xlogx), None
    values = sub.data.astype(np.float64)
    col = np.repeat(np.arange(stop - start, dtype=np.int64), np.diff(indptr))
    order = np.lexsort((values, col))
    return backend.ig_frequency(indptr, rows[order], values[order], y, totals, xlogx)


def segmented_ig(instances: Sequence[LabeledInstance], vocab: NGramVocabulary | Sequence[str],
                 plan: SegmentPlan | None = None, mode: str = BINARY, threads: int = 1,
                 backend=None, classes: Sequence[str] | None = None) -> list[IGScore]:
    """Score every vocabulary feature, one segment at a time, and return them ranked."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    keys = vocab.keys if isinstance(vocab, NGramVocabulary) else list(vocab)
    if not instances:
        raise EmptyDistribution("no instances to score")
    classes, y = _label_codes(instances, classes)
    totals = np.bincount(y, minlength=len(classes)).astype(np.int64)
    if plan is None:
        plan = SegmentPlan.for_budget(len(keys), len(instances), len(classes))
    if plan.n_features != len(keys):
        raise ValueError(f"plan covers {plan.n_features} features, vocabulary has {len(keys)}")
    backend = kernels.get_backend(backend)
    xlogx = kernels.xlogx_table(len(instances))
    Xc = to_csr(instances, len(keys)).tocsc()
    Xc.sort_indices()

    def run(seg):
        return _score_segment(Xc, seg[0], seg[1], y, totals, xlogx, mode, backend)

    if threads <= 1:
        parts = [run(seg) for seg in plan.segments]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, plan.segments))

    scores = []
    for (start, _stop), (ig, thr) in zip(plan.segments, parts):
        for j, g in enumerate(ig.tolist()):
            fid = start + j
            t = None if thr is None or math.isnan(thr[j]) else float(thr[j])
            scores.append(IGScore(fid, keys[fid], g, t))
    return rank(scores)


def rank(scores: Iterable[IGScore]) -> list[IGScore]:
    """Order by IG descending, then key ascending."""
    return sorted(scores, key=IGScore.sort_key)


def select_features(scores: Iterable[IGScore], threshold: float | None = None,
                    top_k: int | None = None) -> list[tuple[int, str]]:
    """Survivors as ``(feature_id, key)`` in rank order.

    ``threshold`` keeps scores strictly above it; ``top_k`` keeps the best
    ``k``. Both may be given.
    """
    ranked = rank(scores)
    if threshold is not None:
        if threshold < 0:
            raise ValueError("threshold must be >= 0")
        ranked = [s for s in ranked if s.ig > threshold]
    if top_k is not None:
        if top_k < 0:
            raise ValueError("top_k must be >= 0")
        ranked = ranked[:top_k]
    return [(s.feature_id, s.key) for s in ranked]
