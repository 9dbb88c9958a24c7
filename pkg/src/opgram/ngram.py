"""N-gram opcode extraction, vocabularies and sparse per-app vectors."""
from __future__ import annotations

import hashlib
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import BENIGN, MALWARE, AppRecord
from .errors import DimensionMismatch, MissingFamily

BINARY = "binary"
FREQUENCY = "frequency"
MODES = (BINARY, FREQUENCY)

DETECT = "detect"
CATEGORIZE = "categorize"
TASKS = (DETECT, CATEGORIZE)


def _check_n(n: int) -> None:
    if n < 1:
        raise ValueError(f"gram length must be >= 1, got {n}")


def iter_windows(method: bytes, n: int):
    """The raw byte windows of one method, in order."""
    return (method[i:i + n] for i in range(len(method) - n + 1))


def extract_ngrams(method: bytes | Sequence[int], n: int) -> list[str]:
    """Hex keys of the ``len(method) - n + 1`` consecutive windows (none if shorter than ``n``)."""
    _check_n(n)
    return [w.hex() for w in iter_windows(bytes(method), n)]


def count_ngrams(app: AppRecord, n: int) -> Counter:
    """Occurrence count of each window (as raw bytes) over every method of ``app``."""
    _check_n(n)
    counts: Counter = Counter()
    for m in app.methods:
        if len(m) >= n:
            counts.update(iter_windows(m, n))
    return counts


def _app_keyset(app: AppRecord, n: int) -> set[bytes]:
    keys: set[bytes] = set()
    for m in app.methods:
        keys.update(iter_windows(m, n))
    return keys


class NGramVocabulary:
    """Sorted, dense-id map of n-gram keys for one gram length."""

    def __init__(self, n: int, keys: Iterable[str]):
        _check_n(n)
        keys = sorted(set(keys))
        for k in keys:
            if len(k) != 2 * n:
                raise ValueError(f"key {k!r} does not have length {2 * n}")
        self.n = n
        self.keys: list[str] = keys
        self.index: dict[str, int] = {k: i for i, k in enumerate(keys)}

    def __len__(self):
        return len(self.keys)

    def __contains__(self, key: str) -> bool:
        return key in self.index

    def __eq__(self, other):
        return isinstance(other, NGramVocabulary) and self.n == other.n and self.keys == other.keys

    def __repr__(self):
        return f"NGramVocabulary(n={self.n}, size={len(self)})"

    def id_of(self, key: str) -> int | None:
        return self.index.get(key)

    def digest(self) -> str:
        return keys_digest(self.keys)


def keys_digest(keys: Sequence[str]) -> str:
    """Stable fingerprint of an ordered feature-key list."""
    h = hashlib.sha256()
    for k in keys:
        h.update(k.encode("ascii"))
        h.update(b"\n")
    return h.hexdigest()


def build_vocabulary(corpus: Sequence[AppRecord], n: int, threads: int = 1) -> NGramVocabulary:
    """Union of every app's n-gram keys, sorted; independent of traversal order."""
    _check_n(n)
    if threads <= 1:
        sets = (_app_keyset(app, n) for app in corpus)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sets = list(pool.map(lambda a: _app_keyset(a, n), corpus))
    union: set[bytes] = set()
    for s in sets:
        union |= s
    return NGramVocabulary(n, (k.hex() for k in union))


@dataclass(frozen=True)
class SparseVector:
    """Ascending (feature id, value) pairs for one application."""

    mode: str
    ids: tuple[int, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if len(self.ids) != len(self.values):
            raise ValueError("ids and values differ in length")
        if any(b <= a for a, b in zip(self.ids, self.ids[1:])):
            raise ValueError("feature ids must be unique and ascending")
        if self.mode == BINARY and any(v != 1 for v in self.values):
            raise ValueError("binary vectors hold only 1s")
        if any(v < 1 for v in self.values):
            raise ValueError("stored values must be >= 1")

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.ids, self.values))

    def __len__(self):
        return len(self.ids)

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.ids, self.values))

    def binarize(self) -> SparseVector:
        return SparseVector(BINARY, self.ids, (1,) * len(self.ids))


@dataclass(frozen=True)
class LabeledInstance:
    app_id: str
    label: str
    vector: SparseVector


def app_vector(app: AppRecord, vocab: NGramVocabulary, mode: str) -> SparseVector:
    """Frequency: total count over all methods; binary: presence. Unknown keys are dropped."""
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    pairs = []
    for window, count in count_ngrams(app, vocab.n).items():
        fid = vocab.index.get(window.hex())
        if fid is not None:
            pairs.append((fid, count))
    pairs.sort()
    ids = tuple(p[0] for p in pairs)
    values = (1,) * len(ids) if mode == BINARY else tuple(p[1] for p in pairs)
    return SparseVector(mode, ids, values)


def task_label(app: AppRecord, task: str) -> str | None:
    """Class label of ``app`` for ``task``, or None if the app takes no part in it."""
    if task == DETECT:
        return app.label
    if task == CATEGORIZE:
        if app.label != MALWARE:
            return None
        if not app.family:
            raise MissingFamily(f"malware app {app.id!r} has no family; categorization needs one")
        return app.family
    raise ValueError(f"unknown task {task!r}")


def task_corpus(corpus: Sequence[AppRecord], task: str) -> list[AppRecord]:
    """Apps participating in ``task`` (categorization keeps malware only)."""
    return [a for a in corpus if task_label(a, task) is not None]


def vectorize_corpus(corpus: Sequence[AppRecord], vocab: NGramVocabulary, mode: str,
                     task: str = DETECT, threads: int = 1) -> list[LabeledInstance]:
    apps = task_corpus(corpus, task)
    labels = [task_label(a, task) for a in apps]

    def vec(app):
        return app_vector(app, vocab, mode)

    if threads <= 1:
        vectors = [vec(a) for a in apps]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vectors = list(pool.map(vec, apps))
    return [LabeledInstance(a.id, lab, v) for a, lab, v in zip(apps, labels, vectors)]


def to_csr(instances: Sequence[LabeledInstance], n_features: int, binary: bool = False) -> sp.csr_matrix:
    """Stack instance vectors into an ``(n_instances, n_features)`` CSR matrix of float64."""
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for inst in instances:
        v = inst.vector
        if v.ids and v.ids[-1] >= n_features:
            raise DimensionMismatch(f"{inst.app_id}: feature id {v.ids[-1]} >= {n_features}")
        indices.extend(v.ids)
        data.extend(v.values)
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.asarray(data, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(instances), n_features),
    )
    if binary:
        X.data[:] = 1.0
    return X


def restrict(instances: Sequence[LabeledInstance], feature_ids: Sequence[int]) -> list[LabeledInstance]:
    """Project instances onto ``feature_ids``; feature ``feature_ids[j]`` becomes column ``j``."""
    remap = {fid: j for j, fid in enumerate(feature_ids)}
    out = []
    for inst in instances:
        pairs = sorted((remap[i], v) for i, v in zip(inst.vector.ids, inst.vector.values) if i in remap)
        vec = SparseVector(inst.vector.mode, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
        out.append(LabeledInstance(inst.app_id, inst.label, vec))
    return out


def total_windows(corpus: Sequence[AppRecord], n: int) -> int:
    return sum(max(0, len(m) - n + 1) for a in corpus for m in a.methods)


__all__ = [
    "BINARY", "FREQUENCY", "MODES", "DETECT", "CATEGORIZE", "TASKS", "BENIGN", "MALWARE",
    "NGramVocabulary", "SparseVector", "LabeledInstance", "extract_ngrams", "count_ngrams",
    "build_vocabulary", "app_vector", "vectorize_corpus", "task_label", "task_corpus", "to_csr",
    "restrict", "total_windows", "keys_digest",
]
