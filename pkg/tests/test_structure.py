import random

import pytest
from hypothesis import given, strategies as st

from opgram.corpus import AppRecord
from opgram.errors import LengthMismatch, MissingLevel
from opgram.ngram import build_vocabulary
from opgram.structure import ExtensionClass as E, VARIANTS, classify_extension, extension_report


def test_quoted_cases():
    assert classify_extension("08546e0c", {"08546e"}) is E.PREFIX
    assert classify_extension("08546e0c", {"08546e", "aabbcc"}) is E.PREFIX
    assert classify_extension("3808546e", {"380854", "08546e"}) is E.OVERLAP
    assert classify_extension("01020304", set()) is E.NEW
    assert classify_extension("01020304", {"020304"}) is E.SUFFIX


def test_length_checks():
    with pytest.raises(LengthMismatch):
        classify_extension("0102", {"0102"})
    with pytest.raises(LengthMismatch):
        classify_extension("01", set())


def test_report_example():
    rep = extension_report({2: {"0102"}, 3: {"010203", "040506"}})
    lv = rep.level(3)
    assert lv.counts[E.PREFIX] == 1 and lv.counts[E.NEW] == 1 and lv.total == 2
    assert rep.labels[3] == {"010203": E.PREFIX, "040506": E.NEW}
    assert lv.proportions()[E.PREFIX] == 0.5
    assert lv.extended_breakdown() == {E.PREFIX: 1.0, E.SUFFIX: 0.0, E.OVERLAP: 0.0}


def test_windows_of_one_sequence_are_all_overlap():
    seq = bytes(random.Random(0).sample(range(256), 40))
    app = AppRecord("x", "malware", (seq, seq))
    selected = {n: build_vocabulary([app], n).keys for n in range(1, 8)}
    rep = extension_report(selected)
    for lv in rep.levels:
        assert lv.counts[E.OVERLAP] == lv.total == len(seq) - lv.n + 1


def test_empty_level():
    rep = extension_report({2: {"0102"}, 3: set()})
    lv = rep.level(3)
    assert lv.total == 0 and lv.proportions() is None and lv.extended_breakdown() is None


def test_gaps_and_bad_keys():
    with pytest.raises(MissingLevel):
        extension_report({2: set(), 4: set()})
    with pytest.raises(LengthMismatch):
        extension_report({2: {"010203"}, 3: set()})
    assert extension_report({}).levels == ()


key = lambda n: st.binary(min_size=n, max_size=n).map(bytes.hex)


@given(st.integers(2, 5).flatmap(lambda n: st.tuples(
    st.just(n), st.sets(key(n), max_size=30), st.sets(key(n - 1), max_size=30))))
def test_variants_partition(case):
    n, cur, prev = case
    lv = extension_report({n - 1: prev, n: cur}).level(n)
    assert sum(lv.counts[v] for v in VARIANTS) == len(cur)
    assert lv.counts[E.NEW] + lv.extended == len(cur)
    if cur:
        assert abs(sum(lv.proportions().values()) - 1.0) < 1e-12


RANK = {E.NEW: 0, E.PREFIX: 1, E.SUFFIX: 1, E.OVERLAP: 2}


@given(st.integers(2, 4).flatmap(lambda n: st.tuples(
    key(n), st.sets(key(n - 1), max_size=10), st.sets(key(n - 1), max_size=10))))
def test_enlarging_reference_never_moves_toward_new(case):
    gram, prev, extra = case
    before = classify_extension(gram, prev)
    after = classify_extension(gram, prev | extra)
    assert RANK[after] >= RANK[before]
    if before is not E.NEW:
        assert after is before or after is E.OVERLAP
