import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opgram.corpus import AppRecord
from opgram.errors import DimensionMismatch, MissingFamily
from opgram.ngram import (
    BINARY, CATEGORIZE, DETECT, FREQUENCY, LabeledInstance, NGramVocabulary, SparseVector,
    app_vector, build_vocabulary, count_ngrams, extract_ngrams, restrict, to_csr, total_windows,
    vectorize_corpus,
)

methods_st = st.lists(st.binary(min_size=0, max_size=30), min_size=0, max_size=6)


def naive_windows(method, n):
    """Re-scan oracle: every start position whose n-byte slice lies inside the method."""
    out = []
    for start in range(len(method)):
        piece = method[start:start + n]
        if len(piece) == n:
            out.append("".join("%02x" % b for b in piece))
    return out


def test_seven_opcode_method_counts():
    m = bytes(range(1, 8))
    assert [len(extract_ngrams(m, n)) for n in (2, 3, 4)] == [6, 5, 4]


def test_short_method_has_no_grams():
    assert extract_ngrams([1, 2, 3], 5) == []


def test_hand_enumerated_windows():
    assert extract_ngrams([0x01, 0x01, 0x02], 2) == ["0101", "0102"]


def test_bad_n():
    with pytest.raises(ValueError):
        extract_ngrams(b"\x01", 0)


@given(st.binary(max_size=40), st.integers(1, 10))
def test_window_count_law(m, n):
    got = extract_ngrams(m, n)
    assert len(got) == max(0, len(m) - n + 1)
    assert got == naive_windows(m, n)


@given(methods_st, st.integers(1, 6))
def test_counts_never_cross_methods(methods, n):
    app = AppRecord("a", "benign", tuple(methods))
    expected = {}
    for m in methods:
        for k in naive_windows(m, n):
            expected[k] = expected.get(k, 0) + 1
    assert {k.hex(): v for k, v in count_ngrams(app, n).items()} == expected
    assert total_windows([app], n) == sum(expected.values())


def test_vocabulary_examples():
    app = AppRecord("a", "benign", (bytes([1, 1, 2]),))
    v = build_vocabulary([app], 2)
    assert v.keys == ["0101", "0102"] and v.index == {"0101": 0, "0102": 1}
    assert len(build_vocabulary([], 2)) == 0
    assert len(build_vocabulary([app], 4)) == 0


@settings(max_examples=30)
@given(st.lists(methods_st, min_size=1, max_size=5), st.integers(1, 4))
def test_vocabulary_is_sorted_union(apps_methods, n):
    apps = [AppRecord(f"a{i}", "benign", tuple(ms)) for i, ms in enumerate(apps_methods)]
    union = sorted({k for a in apps for m in a.methods for k in naive_windows(m, n)})
    v = build_vocabulary(apps, n)
    assert v.keys == union
    assert build_vocabulary(apps[::-1], n, threads=3) == v


def test_vocabulary_rejects_wrong_length():
    with pytest.raises(ValueError):
        NGramVocabulary(2, ["010203"])


def test_app_vector_examples():
    one = AppRecord("a", "benign", (bytes([1, 1, 1]),))
    v = build_vocabulary([one], 2)
    assert app_vector(one, v, FREQUENCY).as_dict() == {v.index["0101"]: 2}
    assert app_vector(one, v, BINARY).as_dict() == {v.index["0101"]: 1}
    two = AppRecord("b", "benign", (bytes([1, 2]), bytes([9, 1, 2])))
    v2 = build_vocabulary([two], 2)
    assert app_vector(two, v2, FREQUENCY).as_dict()[v2.index["0102"]] == 2


def test_app_vector_drops_unknown_keys():
    app = AppRecord("a", "benign", (bytes([1, 2, 3]),))
    v = NGramVocabulary(2, ["0203", "0505"])
    assert app_vector(app, v, FREQUENCY).entries == [(0, 1)]


def test_sparse_vector_invariants():
    with pytest.raises(ValueError):
        SparseVector(BINARY, (0,), (2,))
    with pytest.raises(ValueError):
        SparseVector(FREQUENCY, (1, 1), (1, 1))
    with pytest.raises(ValueError):
        SparseVector(FREQUENCY, (0,), (0,))
    assert SparseVector(FREQUENCY, (0, 3), (2, 5)).binarize().values == (1, 1)


def _apps():
    return [
        AppRecord("b1", "benign", (bytes([1, 2, 3]),)),
        AppRecord("m1", "malware", (bytes([1, 2, 4]),), "famA"),
        AppRecord("m2", "malware", (bytes([4, 4]),), "famB"),
    ]


def test_vectorize_tasks():
    apps = _apps()
    v = build_vocabulary(apps, 2)
    det = vectorize_corpus(apps, v, BINARY, DETECT)
    assert [(i.app_id, i.label) for i in det] == [("b1", "benign"), ("m1", "malware"), ("m2", "malware")]
    cat = vectorize_corpus(apps, v, BINARY, CATEGORIZE, threads=2)
    assert [(i.app_id, i.label) for i in cat] == [("m1", "famA"), ("m2", "famB")]
    bad = apps + [AppRecord("m3", "malware", (b"\x01",))]
    with pytest.raises(MissingFamily):
        vectorize_corpus(bad, v, BINARY, CATEGORIZE)


def test_to_csr_and_restrict():
    insts = [
        LabeledInstance("a", "x", SparseVector(FREQUENCY, (0, 2), (3, 1))),
        LabeledInstance("b", "y", SparseVector(FREQUENCY, (1,), (4,))),
    ]
    X = to_csr(insts, 3)
    assert np.array_equal(X.toarray(), [[3, 0, 1], [0, 4, 0]])
    assert np.array_equal(to_csr(insts, 3, binary=True).toarray(), [[1, 0, 1], [0, 1, 0]])
    with pytest.raises(DimensionMismatch):
        to_csr(insts, 2)
    r = restrict(insts, [2, 0])
    assert r[0].vector.entries == [(0, 1), (1, 3)]
    assert r[1].vector.entries == []


@settings(max_examples=30)
@given(st.lists(methods_st, min_size=2, max_size=5), st.integers(1, 4))
def test_binarize_matches_binary_vector(apps_methods, n):
    apps = [AppRecord(f"a{i}", "benign", tuple(ms)) for i, ms in enumerate(apps_methods)]
    v = build_vocabulary(apps, n)
    for app in apps:
        assert app_vector(app, v, FREQUENCY).binarize() == app_vector(app, v, BINARY)
    smaller = build_vocabulary(apps[:-1], n)
    assert set(smaller.keys) <= set(v.keys)


@given(st.binary(min_size=1, max_size=30))
def test_gram_count_strictly_decreasing_in_n(m):
    counts = [len(extract_ngrams(m, n)) for n in range(1, len(m) + 1)]
    assert all(a > b for a, b in zip(counts, counts[1:]))
