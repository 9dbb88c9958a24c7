import itertools
import math

import numpy as np
import pytest

from oracles import exact_bernoulli_posterior
from opgram.classify import (
    LinearModel, NBModel, TrainConfig, hinge_objective, load_model, predict, predict_linear,
    predict_nb, save_model, train, train_linear, train_nb,
)
from opgram.errors import DimensionMismatch, EmptyClass, VocabularyMismatch
from opgram.ngram import BINARY, FREQUENCY, LabeledInstance, SparseVector, to_csr


def inst(label, values, mode=BINARY, app="x"):
    ids = tuple(i for i, v in enumerate(values) if v)
    vals = tuple(1 if mode == BINARY else values[i] for i in ids)
    return LabeledInstance(app, label, SparseVector(mode, ids, vals))


def vec(values, mode=BINARY):
    return inst("?", values, mode).vector


def test_single_class_nb():
    m = train_nb([inst("malware", [1, 0]), inst("malware", [0, 1])], BINARY)
    for x in ([0, 0], [1, 1], [1, 0]):
        assert predict_nb(m, vec(x))[0] == "malware"


def test_separating_feature_nb():
    data = [inst("malware", [1, 0, 1]), inst("malware", [1, 1, 0]), inst("benign", [0, 1, 1]), inst("benign", [0, 0, 0])] * 3
    m = train_nb(data, BINARY)
    assert predict(m, data) == [d.label for d in data]


def test_nb_exact_enumeration():
    labels = ["benign", "benign", "malware", "malware"]
    for bits in range(256):
        rows = [((bits >> (2 * i)) & 1, (bits >> (2 * i + 1)) & 1) for i in range(4)]
        train_set = list(zip(rows, labels))
        model = train_nb([inst(lab, list(r)) for r, lab in train_set], BINARY, n_features=2)
        for x in itertools.product((0, 1), repeat=2):
            _, logpost = predict_nb(model, vec(list(x)))
            exact = exact_bernoulli_posterior(train_set, x)
            for c in ("benign", "malware"):
                assert abs(logpost[c] - math.log(exact[c])) < 1e-12


def test_nb_tie_goes_to_first_class():
    m = NBModel(BINARY, ("benign", "malware"), np.log([0.5, 0.5]), np.full((2, 3), 0.3), 1.0, 3)
    label, post = predict_nb(m, vec([0, 0, 0]))
    assert label == "benign"
    assert post["benign"] == pytest.approx(math.log(0.5), abs=1e-15)


def test_nb_dominant_feature():
    theta = np.array([[0.01, 0.5], [0.9, 0.5]])
    m = NBModel(BINARY, ("benign", "malware"), np.log([0.5, 0.5]), theta, 1.0, 2)
    assert predict_nb(m, vec([1, 0]))[0] == "malware"


def test_nb_hand_built_two_by_two():
    prior = np.array([0.6, 0.4])
    theta = np.array([[0.2, 0.7], [0.5, 0.1]])
    m = NBModel(BINARY, ("a", "b"), np.log(prior), theta, 1.0, 2)
    _, post = predict_nb(m, vec([1, 0]))
    ja = 0.6 * 0.2 * (1 - 0.7)
    jb = 0.4 * 0.5 * (1 - 0.1)
    assert post["a"] == pytest.approx(math.log(ja / (ja + jb)), abs=1e-12)
    assert post["b"] == pytest.approx(math.log(jb / (ja + jb)), abs=1e-12)


def test_multinomial_parameters_and_posterior():
    data = [inst("a", [2, 0, 1], FREQUENCY), inst("a", [1, 0, 0], FREQUENCY), inst("b", [0, 3, 1], FREQUENCY)]
    m = train_nb(data, FREQUENCY, alpha=1.0)
    # class a: term counts [3, 0, 1], total 4; class b: [0, 3, 1], total 4
    np.testing.assert_allclose(m.theta, [[4 / 7, 1 / 7, 2 / 7], [1 / 7, 4 / 7, 2 / 7]], rtol=1e-15)
    np.testing.assert_allclose(m.theta.sum(axis=1), 1.0)
    _, post = predict_nb(m, vec([1, 2, 0], FREQUENCY))
    ja = (2 / 3) * (4 / 7) * (1 / 7) ** 2
    jb = (1 / 3) * (1 / 7) * (4 / 7) ** 2
    assert post["a"] == pytest.approx(math.log(ja / (ja + jb)), abs=1e-12)


def test_nb_invariants_and_errors():
    data = [inst("a", [1, 0]), inst("b", [0, 1]), inst("b", [1, 1])]
    m = train_nb(data, BINARY)
    assert np.exp(m.log_prior).sum() == pytest.approx(1.0)
    assert ((m.theta > 0) & (m.theta < 1)).all()
    with pytest.raises(EmptyClass):
        train_nb(data, BINARY, classes=["a", "b", "c"])
    with pytest.raises(EmptyClass):
        train_nb([], BINARY)
    with pytest.raises(DimensionMismatch):
        predict_nb(m, vec([0, 0, 1]))


def _separable(n=60, d=20, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = "malware" if i % 2 else "benign"
        x = (rng.random(d) < 0.3).astype(int) * rng.integers(1, 4, d)
        x[0] = rng.integers(1, 4) if label == "malware" else 0
        out.append(inst(label, x.tolist(), FREQUENCY, app=f"a{i}"))
    return out


def test_svm_separable_training_accuracy(backend):
    data = _separable()
    m = train_linear(data, TrainConfig(), 20, backend=backend)
    assert predict(m, data) == [d.label for d in data]
    assert m.weights.shape == (2, 20)
    assert len(m.loss_history[0]) == TrainConfig().epochs


def test_svm_deterministic(backend):
    data = _separable(seed=3)
    a = train_linear(data, TrainConfig(seed=7), 20, backend=backend)
    b = train_linear(data, TrainConfig(seed=7), 20, threads=2, backend=backend)
    assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
    c = train_linear(data, TrainConfig(seed=8), 20, backend=backend)
    assert not np.array_equal(a.weights, c.weights)


def test_svm_strong_regularization_shrinks():
    data = _separable(seed=5)
    weak = train_linear(data, TrainConfig(lam=1e-4), 20)
    strong = train_linear(data, TrainConfig(lam=1e4), 20)
    assert np.abs(strong.weights).max() < 1e-3 < np.abs(weak.weights).max()


def test_svm_objective_decreases_overall():
    data = _separable(seed=2)
    m = train_linear(data, TrainConfig(lam=1e-2, epochs=30), 20)
    X = to_csr(data, 20)
    y = np.array([1.0 if d.label == "benign" else -1.0 for d in data])
    hist = m.loss_history[0]
    assert hist[-1] <= hist[0]
    assert hist[-1] == pytest.approx(hinge_objective(m.weights[0], m.bias[0], X, y, 1e-2))


def test_linear_prediction_rules():
    cfg = TrainConfig()
    zero = LinearModel(("b", "a"), np.zeros((2, 3)), np.zeros(2), cfg)
    assert predict_linear(zero, vec([1, 1, 0], FREQUENCY)) == "b"
    pos = LinearModel(("benign", "malware"), np.array([[-1.0, 0.0], [1.0, 0.0]]), np.zeros(2), cfg)
    assert predict_linear(pos, vec([2, 0], FREQUENCY)) == "malware"
    W = np.array([[0.5, -1.0, 2.0], [1.5, 0.0, -0.5], [0.0, 1.0, 1.0]])
    bias = np.array([0.1, -0.2, 0.0])
    m = LinearModel(("f1", "f2", "f3"), W, bias, cfg)
    x = [2, 1, 1]
    scores = [sum(w * v for w, v in zip(row, x)) + b for row, b in zip(W.tolist(), bias.tolist())]
    assert scores == pytest.approx([2.1, 2.3, 2.0])
    assert predict_linear(m, vec(x, FREQUENCY)) == "f2"


def test_svm_needs_two_classes():
    with pytest.raises(EmptyClass):
        train_linear([inst("a", [1]), inst("a", [0])])


def test_config_validation():
    for bad in (dict(algorithm="knn"), dict(epochs=0), dict(lam=0), dict(alpha=-1), dict(schedule="const")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


@pytest.mark.parametrize("algo", ["nb", "svm"])
def test_model_file_round_trip(tmp_path, algo):
    data = _separable(seed=1)
    keys = [f"{i:06x}" for i in range(20)]
    m = train(data, TrainConfig(algorithm=algo), 20)
    save_model(m, tmp_path / "m.json", keys, extra={"n": 3})
    back = load_model(tmp_path / "m.json", keys)
    assert predict(back, data) == predict(m, data)
    with pytest.raises(VocabularyMismatch):
        load_model(tmp_path / "m.json", keys[::-1])
    with pytest.raises(DimensionMismatch):
        save_model(m, tmp_path / "x.json", keys[:3])
