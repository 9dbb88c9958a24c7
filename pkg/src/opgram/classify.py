"""Naive Bayes and linear SVM classifiers over selected sparse features.

Naive Bayes is Bernoulli on binary vectors and multinomial on frequency
vectors. The SVM is trained per class (one-vs-rest) by stochastic
subgradient descent on the hinge loss with step size 1/(lambda t).
Ties in every argmax go to the class name that sorts first.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import DimensionMismatch, EmptyClass, VocabularyMismatch
from .ngram import BINARY, FREQUENCY, MODES, LabeledInstance, SparseVector, keys_digest, to_csr

MODEL_FORMAT = "opgram-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    algorithm: str = "svm"
    seed: int = 0
    epochs: int = 20
    lam: float = 1e-4
    alpha: float = 1.0
    schedule: str = "pegasos"

    def __post_init__(self):
        if self.algorithm not in ("nb", "svm"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.epochs < 1 or self.lam <= 0 or self.alpha <= 0:
            raise ValueError("epochs >= 1, lam > 0 and alpha > 0 are required")
        if self.schedule != "pegasos":
            raise ValueError(f"unknown learning-rate schedule {self.schedule!r}")


def _infer_dim(instances, n_features):
    top = max((inst.vector.ids[-1] + 1 for inst in instances if inst.vector.ids), default=0)
    if n_features is None:
        return top
    if top > n_features:
        raise DimensionMismatch(f"feature id {top - 1} outside a {n_features}-feature space")
    return n_features


def _classes_and_codes(instances, classes):
    present = sorted({inst.label for inst in instances})
    if classes is None:
        classes = present
    else:
        classes = sorted(classes)
        missing = [c for c in classes if c not in present]
        if missing:
            raise EmptyClass(f"no training instances for class(es) {missing}")
        extra = [c for c in present if c not in classes]
        if extra:
            raise ValueError(f"instances carry undeclared class(es) {extra}")
    code = {c: i for i, c in enumerate(classes)}
    return tuple(classes), np.array([code[i.label] for i in instances], dtype=np.int64)


def _vector_row(vector: SparseVector, n_features: int) -> sp.csr_matrix:
    if vector.ids and vector.ids[-1] >= n_features:
        raise DimensionMismatch(f"feature id {vector.ids[-1]} outside a {n_features}-feature space")
    return sp.csr_matrix((np.asarray(vector.values, dtype=np.float64),
                          np.asarray(vector.ids, dtype=np.int64),
                          np.array([0, len(vector.ids)], dtype=np.int64)), shape=(1, n_features))


def _argmax_first(scores: np.ndarray) -> np.ndarray:
    return np.argmax(scores, axis=1)


# --------------------------------------------------------------------------- naive Bayes

@dataclass
class NBModel:
    mode: str
    classes: tuple[str, ...]
    log_prior: np.ndarray
    theta: np.ndarray  # (classes, features): presence prob (Bernoulli) or term prob (multinomial)
    alpha: float
    n_features: int

    def __post_init__(self):
        self._log_theta = np.log(self.theta)
        self._log_1m_theta = np.log1p(-self.theta) if self.mode == BINARY else None

    def joint_log_likelihood(self, X: sp.spmatrix) -> np.ndarray:
        """Unnormalized ``log P(c) + log P(x | c)`` for each row of ``X``."""
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        if self.mode == BINARY:
            Xb = X.copy()
            Xb.data[:] = 1.0
            base = self.log_prior + self._log_1m_theta.sum(axis=1)
            return np.asarray(Xb @ (self._log_theta - self._log_1m_theta).T) + base
        return np.asarray(X @ self._log_theta.T) + self.log_prior


def train_nb(instances: Sequence[LabeledInstance], mode: str, alpha: float = 1.0,
             n_features: int | None = None, classes: Sequence[str] | None = None) -> NBModel:
    """Fit class priors and Laplace-smoothed feature parameters.

    Bernoulli: ``(count(f present, c) + a) / (count(c) + 2a)``;
    multinomial: ``(terms(f, c) + a) / (terms(c) + a |F|)``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if not instances:
        raise EmptyClass("no training instances")
    n_features = _infer_dim(instances, n_features)
    classes, y = _classes_and_codes(instances, classes)
    X = to_csr(instances, n_features, binary=(mode == BINARY))
    C = len(classes)
    Y = sp.csr_matrix((np.ones(len(y)), (y, np.arange(len(y)))), shape=(C, len(y)))
    class_count = np.bincount(y, minlength=C).astype(np.float64)
    feat = np.asarray((Y @ X).todense(), dtype=np.float64)
    if mode == BINARY:
        theta = (feat + alpha) / (class_count[:, None] + 2 * alpha)
    else:
        theta = (feat + alpha) / (feat.sum(axis=1, keepdims=True) + alpha * n_features)
    log_prior = np.log(class_count / class_count.sum())
    return NBModel(mode, classes, log_prior, theta, float(alpha), n_features)


def _logsumexp(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return m + np.log(np.exp(a - m).sum(axis=1, keepdims=True))


def predict_nb(model: NBModel, vector: SparseVector) -> tuple[str, dict[str, float]]:
    """Predicted label and the normalized log-posterior of every class."""
    if vector.mode != model.mode:
        raise ValueError(f"model is {model.mode}, vector is {vector.mode}")
    jll = model.joint_log_likelihood(_vector_row(vector, model.n_features))
    label = model.classes[int(_argmax_first(jll)[0])]
    post = (jll - _logsumexp(jll))[0]
    return label, dict(zip(model.classes, post.tolist()))


def predict_nb_batch(model: NBModel, X: sp.spmatrix) -> list[str]:
    return [model.classes[i] for i in _argmax_first(model.joint_log_likelihood(X))]


# --------------------------------------------------------------------------- linear SVM

@dataclass
class LinearModel:
    classes: tuple[str, ...]
    weights: np.ndarray  # (classes, features)
    bias: np.ndarray  # (classes,)
    config: TrainConfig
    mode: str = FREQUENCY
    loss_history: list = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def decision_function(self, X: sp.spmatrix) -> np.ndarray:
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected {self.n_features} features, got {X.shape[1]}")
        return np.asarray(X @ self.weights.T) + self.bias


def hinge_objective(w: np.ndarray, b: float, X: sp.spmatrix, ysign: np.ndarray, lam: float) -> float:
    """``lam/2 (|w|^2 + b^2) + mean(max(0, 1 - y (w.x + b)))``."""
    margins = ysign * (np.asarray(X @ w).ravel() + b)
    return 0.5 * lam * (float(w @ w) + b * b) + float(np.maximum(0.0, 1.0 - margins).mean())


def _train_one(X, ysign, cfg: TrainConfig, seed: int, backend):
    n, d = X.shape
    rng = np.random.default_rng(seed)
    w = np.zeros(d + 1)
    indptr = X.indptr.astype(np.int64)
    indices = X.indices.astype(np.int64)
    data = X.data.astype(np.float64)
    t = 0
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n).astype(np.int64)
        t = backend.sgd_hinge(indptr, indices, data, ysign, order, cfg.lam, w, t)
        history.append(hinge_objective(w[:d], w[d], X, ysign, cfg.lam))
    return w, history


def train_linear(instances: Sequence[LabeledInstance], config: TrainConfig = TrainConfig(),
                 n_features: int | None = None, classes: Sequence[str] | None = None,
                 threads: int = 1, backend=None) -> LinearModel:
    """One-vs-rest hinge-loss SGD; class ``i`` shuffles with seed ``config.seed + i``."""
    if not instances:
        raise EmptyClass("no training instances")
    n_features = _infer_dim(instances, n_features)
    classes, y = _classes_and_codes(instances, classes)
    if len(classes) < 2:
        raise EmptyClass(f"need at least two classes, got {list(classes)}")
    mode = instances[0].vector.mode
    X = to_csr(instances, n_features)
    X.sort_indices()
    backend = kernels.get_backend(backend)

    def fit(ci):
        ysign = np.where(y == ci, 1.0, -1.0)
        return _train_one(X, ysign, config, config.seed + ci, backend)

    if threads <= 1:
        fits = [fit(ci) for ci in range(len(classes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fits = list(pool.map(fit, range(len(classes))))
    W = np.vstack([f[0][:n_features] for f in fits])
    b = np.array([f[0][n_features] for f in fits])
    return LinearModel(classes, W, b, config, mode, [f[1] for f in fits])


def predict_linear(model: LinearModel, vector: SparseVector) -> str:
    scores = model.decision_function(_vector_row(vector, model.n_features))
    return model.classes[int(_argmax_first(scores)[0])]


def predict_linear_batch(model: LinearModel, X: sp.spmatrix) -> list[str]:
    return [model.classes[i] for i in _argmax_first(model.decision_function(X))]


# --------------------------------------------------------------------------- dispatch

def train(instances: Sequence[LabeledInstance], config: TrainConfig, n_features: int,
          threads: int = 1, backend=None):
    if config.algorithm == "nb":
        return train_nb(instances, instances[0].vector.mode, config.alpha, n_features)
    return train_linear(instances, config, n_features, threads=threads, backend=backend)


def predict(model, instances: Sequence[LabeledInstance]) -> list[str]:
    if not instances:
        return []
    if isinstance(model, NBModel):
        X = to_csr(instances, model.n_features, binary=(model.mode == BINARY))
        return predict_nb_batch(model, X)
    return predict_linear_batch(model, to_csr(instances, model.n_features))


# --------------------------------------------------------------------------- persistence

def save_model(model, path: str | Path, feature_keys: Sequence[str], extra: dict | None = None) -> None:
    """Write a JSON model file tied to ``feature_keys`` by digest."""
    if len(feature_keys) != model.n_features:
        raise DimensionMismatch(f"model has {model.n_features} features, {len(feature_keys)} keys given")
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "features_digest": keys_digest(feature_keys),
        "n_features": model.n_features,
        "mode": model.mode,
        "classes": list(model.classes),
    }
    if isinstance(model, NBModel):
        doc.update(algorithm="nb", alpha=model.alpha, log_prior=model.log_prior.tolist(),
                   theta=model.theta.tolist())
    else:
        doc.update(algorithm="svm", config=asdict(model.config), weights=model.weights.tolist(),
                   bias=model.bias.tolist())
    if extra:
        doc["meta"] = extra
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path, feature_keys: Sequence[str] | None = None):
    """Read a model file; if ``feature_keys`` is given its digest must match."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != MODEL_FORMAT or doc.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: not an {MODEL_FORMAT} v{MODEL_VERSION} file")
    if feature_keys is not None and keys_digest(feature_keys) != doc["features_digest"]:
        raise VocabularyMismatch(f"{path}: model was trained on a different feature list")
    classes = tuple(doc["classes"])
    if doc["algorithm"] == "nb":
        return NBModel(doc["mode"], classes, np.array(doc["log_prior"]), np.array(doc["theta"]),
                       doc["alpha"], doc["n_features"])
    W = np.array(doc["weights"], dtype=np.float64).reshape(len(classes), doc["n_features"])
    return LinearModel(classes, W, np.array(doc["bias"]), TrainConfig(**doc["config"]), doc["mode"])
