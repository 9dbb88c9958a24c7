import pytest
from hypothesis import given, strategies as st

from opgram.errors import BadHexToken, EmptyInput, UnknownMnemonic
from opgram.opcodes import (
    DEFAULT_TABLE, OpcodeGroup, OpcodeTable, byte_to_mnemonic, describe, group_of,
    mnemonic_to_byte, ngram_key, parse_byte, parse_key,
)

# byte -> mnemonic pairs that make up frequently top-ranked malware grams
TOP_GRAM_PAIRS = {
    0x07: "move-object", 0x08: "move-object/from16", 0x0A: "move-result",
    0x0C: "move-result-object", 0x0F: "return", 0x12: "const/4", 0x1F: "check-cast",
    0x20: "instance-of", 0x22: "new-instance", 0x28: "goto", 0x38: "if-eqz",
    0x39: "if-nez", 0x52: "iget", 0x54: "iget-object", 0x65: "sget-char",
    0x6E: "invoke-virtual", 0x70: "invoke-direct",
}


@pytest.mark.parametrize("b, group", [
    (0x01, OpcodeGroup.MOVE), (0x1C, OpcodeGroup.MOVE), (0x6E, OpcodeGroup.INVOKE),
    (0x78, OpcodeGroup.INVOKE), (0x00, OpcodeGroup.OTHER), (0x27, OpcodeGroup.BRANCH),
    (0x3D, OpcodeGroup.BRANCH), (0x44, OpcodeGroup.GETTER_SETTER), (0x6D, OpcodeGroup.GETTER_SETTER),
    (0x7B, OpcodeGroup.LOGIC_ARITH), (0xE2, OpcodeGroup.LOGIC_ARITH), (0xE3, OpcodeGroup.OTHER),
    (0x1D, OpcodeGroup.OTHER), (0x79, OpcodeGroup.OTHER), (0xFF, OpcodeGroup.OTHER),
])
def test_group_of(b, group):
    assert group_of(b) is group


def test_group_ranges_partition_bytes():
    counts = {g: 0 for g in OpcodeGroup}
    for b in range(256):
        counts[group_of(b)] += 1
    assert counts[OpcodeGroup.MOVE] == 0x1C
    assert counts[OpcodeGroup.INVOKE] == 11
    assert sum(counts.values()) == 256


@pytest.mark.parametrize("bad", [-1, 256])
def test_group_of_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        group_of(bad)


def test_mnemonic_examples():
    assert mnemonic_to_byte("invoke-virtual") == 0x6E
    assert mnemonic_to_byte("iget-object") == 0x54
    with pytest.raises(UnknownMnemonic):
        mnemonic_to_byte("not-an-opcode")
    with pytest.raises(EmptyInput):
        mnemonic_to_byte("")


def test_top_gram_mnemonics_present():
    for b, name in TOP_GRAM_PAIRS.items():
        assert byte_to_mnemonic(b) == name
        assert mnemonic_to_byte(name) == b


def test_table_is_bijective():
    items = DEFAULT_TABLE.items()
    assert [b for b, _ in items] == list(range(256))
    assert len({m for _, m in items}) == 256


def test_describe_rank_two_trigram():
    assert describe("08546e") == ["move-object/from16", "iget-object", "invoke-virtual"]


@pytest.mark.parametrize("ops, key", [
    ([0x08, 0x54, 0x6E], "08546e"),
    ([0x0A], "0a"),
    ([0x12, 0x12, 0x3C, 0x0E, 0x22], "12123c0e22"),
])
def test_ngram_key(ops, key):
    assert ngram_key(ops) == key
    assert parse_key(key) == bytes(ops)


def test_ngram_key_empty():
    with pytest.raises(EmptyInput):
        ngram_key([])


@pytest.mark.parametrize("tok", ["5g", "+1", "1", "123", " 1", "0x"])
def test_parse_byte_rejects(tok):
    with pytest.raises(BadHexToken):
        parse_byte(tok)


@pytest.mark.parametrize("key", ["", "0", "0g", "123"])
def test_parse_key_rejects(key):
    with pytest.raises(BadHexToken):
        parse_key(key)


@given(st.binary(min_size=1, max_size=12))
def test_key_round_trip(raw):
    key = ngram_key(raw)
    assert key == key.lower() and len(key) == 2 * len(raw)
    assert parse_key(key) == raw
    assert parse_key(key.upper()) == raw


def test_overrides(tmp_path):
    p = tmp_path / "ops.tsv"
    p.write_text("# local names\n0xf0\texecute-inline\nf1\tinvoke-object-init/range\n")
    t = OpcodeTable.with_overrides(p)
    assert DEFAULT_TABLE.byte_to_mnemonic(0xF0) == "unused-f0"
    assert t.mnemonic_to_byte("execute-inline") == 0xF0
    assert t.byte_to_mnemonic(0xF1) == "invoke-object-init/range"
    assert t.mnemonic_to_byte("invoke-virtual") == 0x6E


def test_overrides_reject_duplicate_name(tmp_path):
    p = tmp_path / "ops.tsv"
    p.write_text("fa\tinvoke-virtual\n")
    with pytest.raises(ValueError):
        OpcodeTable.with_overrides(p)
