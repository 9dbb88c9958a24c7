"""Dalvik opcode universe: byte values, mnemonics, groups and n-gram hex keys.

Operands are never decoded here; an instruction is reduced to the single
byte of its opcode.
"""
from __future__ import annotations

import enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import BadHexToken, EmptyInput, UnknownMnemonic


class OpcodeGroup(enum.Enum):
    MOVE = "Move"
    BRANCH = "Branch"
    GETTER_SETTER = "GetterSetter"
    INVOKE = "Invoke"
    LOGIC_ARITH = "LogicArith"
    OTHER = "Other"


# inclusive byte ranges; everything else is OTHER
_GROUP_RANGES = (
    (0x01, 0x1C, OpcodeGroup.MOVE),
    (0x27, 0x3D, OpcodeGroup.BRANCH),
    (0x44, 0x6D, OpcodeGroup.GETTER_SETTER),
    (0x6E, 0x78, OpcodeGroup.INVOKE),
    (0x7B, 0xE2, OpcodeGroup.LOGIC_ARITH),
)


def group_of(b: int) -> OpcodeGroup:
    if not 0 <= b <= 0xFF:
        raise ValueError(f"opcode byte out of range: {b!r}")
    for lo, hi, group in _GROUP_RANGES:
        if lo <= b <= hi:
            return group
    return OpcodeGroup.OTHER


def _arith_block(suffix: str) -> list[str]:
    ops = ["add", "sub", "mul", "div", "rem", "and", "or", "xor", "shl", "shr", "ushr"]
    names = [f"{op}-int{suffix}" for op in ops]
    names += [f"{op}-long{suffix}" for op in ops]
    names += [f"{op}-float{suffix}" for op in ops[:5]]
    names += [f"{op}-double{suffix}" for op in ops[:5]]
    return names


def _build_default_table() -> dict[int, str]:
    table: dict[int, str] = {}

    def put(start: int, names: Iterable[str]) -> None:
        for offset, name in enumerate(names):
            table[start + offset] = name

    put(0x00, [
        "nop", "move", "move/from16", "move/16", "move-wide", "move-wide/from16",
        "move-wide/16", "move-object", "move-object/from16", "move-object/16",
        "move-result", "move-result-wide", "move-result-object", "move-exception",
        "return-void", "return", "return-wide", "return-object",
        "const/4", "const/16", "const", "const/high16", "const-wide/16",
        "const-wide/32", "const-wide", "const-wide/high16", "const-string",
        "const-string/jumbo", "const-class", "monitor-enter", "monitor-exit",
        "check-cast", "instance-of", "array-length", "new-instance", "new-array",
        "filled-new-array", "filled-new-array/range", "fill-array-data", "throw",
        "goto", "goto/16", "goto/32", "packed-switch", "sparse-switch",
        "cmpl-float", "cmpg-float", "cmpl-double", "cmpg-double", "cmp-long",
        "if-eq", "if-ne", "if-lt", "if-ge", "if-gt", "if-le",
        "if-eqz", "if-nez", "if-ltz", "if-gez", "if-gtz", "if-lez",
    ])
    kinds = ["", "-wide", "-object", "-boolean", "-byte", "-char", "-short"]
    put(0x44, [f"aget{k}" for k in kinds] + [f"aput{k}" for k in kinds])
    put(0x52, [f"iget{k}" for k in kinds] + [f"iput{k}" for k in kinds])
    put(0x60, [f"sget{k}" for k in kinds] + [f"sput{k}" for k in kinds])
    invokes = ["virtual", "super", "direct", "static", "interface"]
    put(0x6E, [f"invoke-{k}" for k in invokes])
    put(0x74, [f"invoke-{k}/range" for k in invokes])
    put(0x7B, [
        "neg-int", "not-int", "neg-long", "not-long", "neg-float", "neg-double",
        "int-to-long", "int-to-float", "int-to-double", "long-to-int",
        "long-to-float", "long-to-double", "float-to-int", "float-to-long",
        "float-to-double", "double-to-int", "double-to-long", "double-to-float",
        "int-to-byte", "int-to-char", "int-to-short",
    ])
    put(0x90, _arith_block(""))
    put(0xB0, _arith_block("/2addr"))
    put(0xD0, [
        "add-int/lit16", "rsub-int", "mul-int/lit16", "div-int/lit16",
        "rem-int/lit16", "and-int/lit16", "or-int/lit16", "xor-int/lit16",
        "add-int/lit8", "rsub-int/lit8", "mul-int/lit8", "div-int/lit8",
        "rem-int/lit8", "and-int/lit8", "or-int/lit8", "xor-int/lit8",
        "shl-int/lit8", "shr-int/lit8", "ushr-int/lit8",
    ])
    put(0xFA, [
        "invoke-polymorphic", "invoke-polymorphic/range", "invoke-custom",
        "invoke-custom/range", "const-method-handle", "const-method-type",
    ])
    for b in range(256):
        table.setdefault(b, f"unused-{b:02x}")
    return table


class OpcodeTable:
    """Bidirectional byte <-> mnemonic map covering all 256 byte values."""

    def __init__(self, by_byte: Mapping[int, str] | None = None):
        names = dict(_build_default_table() if by_byte is None else by_byte)
        if sorted(names) != list(range(256)):
            raise ValueError("opcode table must define exactly the bytes 0x00..0xff")
        by_name: dict[str, int] = {}
        for b, name in names.items():
            if name in by_name:
                raise ValueError(f"mnemonic {name!r} assigned to both {by_name[name]:#04x} and {b:#04x}")
            by_name[name] = b
        self._by_byte = names
        self._by_name = by_name

    @classmethod
    def with_overrides(cls, path: str | Path, base: OpcodeTable | None = None) -> OpcodeTable:
        """Load a ``hex<TAB>mnemonic`` file on top of ``base`` (default table)."""
        names = dict((base or DEFAULT_TABLE)._by_byte)
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'hex<TAB>mnemonic'")
            names[parse_byte(parts[0].removeprefix("0x"))] = parts[1].strip()
        return cls(names)

    def mnemonic_to_byte(self, m: str) -> int:
        if not m:
            raise EmptyInput("empty mnemonic")
        try:
            return self._by_name[m]
        except KeyError:
            raise UnknownMnemonic(m) from None

    def byte_to_mnemonic(self, b: int) -> str:
        return self._by_byte[b]

    def __contains__(self, m: str) -> bool:
        return m in self._by_name

    def __len__(self) -> int:
        return len(self._by_byte)

    def items(self):
        return sorted(self._by_byte.items())


DEFAULT_TABLE = OpcodeTable()


def mnemonic_to_byte(m: str, table: OpcodeTable = DEFAULT_TABLE) -> int:
    return table.mnemonic_to_byte(m)


def byte_to_mnemonic(b: int, table: OpcodeTable = DEFAULT_TABLE) -> str:
    return table.byte_to_mnemonic(b)


def parse_byte(token: str) -> int:
    """Parse exactly two hex digits."""
    if len(token) != 2 or not all(c in _HEXDIGITS for c in token):
        raise BadHexToken(f"not a two-digit hex byte: {token!r}")
    return int(token, 16)


_HEXDIGITS = frozenset("0123456789abcdefABCDEF")


def ngram_key(opcodes: Sequence[int] | bytes) -> str:
    """Render opcode bytes as a lowercase, zero-padded hex key: [0x08, 0x54, 0x6e] -> '08546e'."""
    if len(opcodes) == 0:
        raise EmptyInput("cannot build an n-gram key from no opcodes")
    return bytes(opcodes).hex()


def parse_key(key: str) -> bytes:
    """Inverse of :func:`ngram_key`."""
    if not key or len(key) % 2:
        raise BadHexToken(f"n-gram key must have an even, non-zero length: {key!r}")
    return bytes(parse_byte(key[i:i + 2]) for i in range(0, len(key), 2))


def describe(key: str, table: OpcodeTable = DEFAULT_TABLE) -> list[str]:
    """Mnemonics of an n-gram key, in order."""
    return [table.byte_to_mnemonic(b) for b in parse_key(key)]
