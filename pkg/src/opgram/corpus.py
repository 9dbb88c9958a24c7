"""Ingest labeled applications as per-method opcode sequences.

Two source formats are understood:

* smali text, as produced by baksmali (``.smali``);
* the plain *ops* format (``.ops``): one method per line, whitespace
  separated two-digit hex bytes, ``#`` starts a comment line.

A method sequence is a ``bytes`` object; n-grams never cross a method
boundary.
"""
from __future__ import annotations

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .errors import BadHexToken, CorpusIOError, DuplicateId, MalformedSmali, ManifestError, UnknownMnemonic
from .opcodes import DEFAULT_TABLE, OpcodeTable, parse_byte

log = logging.getLogger(__name__)

BENIGN = "benign"
MALWARE = "malware"
LABELS = (BENIGN, MALWARE)

# Directive blocks whose bodies hold data rather than instructions.
_DATA_BLOCKS = {
    ".annotation": ".end annotation",
    ".subannotation": ".end subannotation",
    ".packed-switch": ".end packed-switch",
    ".sparse-switch": ".end sparse-switch",
    ".array-data": ".end array-data",
}


@dataclass(frozen=True)
class AppRecord:
    id: str
    label: str
    methods: tuple[bytes, ...]
    family: str | None = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise ManifestError(f"{self.id}: label must be one of {LABELS}, got {self.label!r}")
        if self.family is not None and self.label != MALWARE:
            raise ManifestError(f"{self.id}: only malware apps may carry a family")

    @property
    def opcode_count(self) -> int:
        return sum(len(m) for m in self.methods)


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    label: str
    path: Path
    family: str | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    @classmethod
    def read(cls, path: str | Path) -> DatasetManifest:
        """Read a JSON Lines manifest. Relative paths resolve against its directory."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise CorpusIOError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
        entries = []
        seen = set()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: {exc.msg}") from exc
            missing = {"id", "label", "path"} - obj.keys()
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing field(s) {sorted(missing)}")
            app_id = str(obj["id"])
            if app_id in seen:
                raise DuplicateId(f"duplicate app id {app_id!r} ({path}:{lineno})")
            seen.add(app_id)
            if obj["label"] not in LABELS:
                raise ManifestError(f"{path}:{lineno}: bad label {obj['label']!r}")
            family = obj.get("family") or None
            src = Path(obj["path"])
            if not src.is_absolute():
                src = path.parent / src
            entries.append(ManifestEntry(app_id, obj["label"], src, family))
        return cls(entries)

    def write(self, path: str | Path) -> None:
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            for e in self.entries:
                obj = {"id": e.id, "label": e.label}
                if e.family is not None:
                    obj["family"] = e.family
                src = e.path
                try:
                    src = src.relative_to(path.parent)
                except ValueError:
                    pass
                obj["path"] = src.as_posix()
                fh.write(json.dumps(obj) + "\n")


def parse_ops(text: str) -> list[bytes]:
    """One method per non-comment line; a blank line is an empty method."""
    methods = []
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        methods.append(bytes(parse_byte(tok) for tok in stripped.split()))
    return methods


def format_ops(methods) -> str:
    return "".join(" ".join(f"{b:02x}" for b in m) + "\n" for m in methods)


def parse_smali(text: str, table: OpcodeTable = DEFAULT_TABLE, strict: bool = False,
                unknown: Counter | None = None) -> list[bytes]:
    """Extract one opcode sequence per ``.method`` ... ``.end method`` block.

    Directives, labels, comments and blank lines are skipped, as are the
    bodies of annotation and switch/array payload blocks. With
    ``strict=False`` an unrecognised mnemonic is dropped and tallied in
    ``unknown``; with ``strict=True`` it raises :class:`UnknownMnemonic`.
    """
    methods = []
    current: bytearray | None = None
    skip_until: str | None = None
    start_line = 0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] == "#":
            continue
        if skip_until is not None:
            if line.startswith(skip_until):
                skip_until = None
            continue
        if line.startswith(".method"):
            if current is not None:
                raise MalformedSmali(f"line {lineno}: .method inside the method opened at line {start_line}")
            current = bytearray()
            start_line = lineno
            continue
        if line.startswith(".end method"):
            if current is None:
                raise MalformedSmali(f"line {lineno}: .end method without .method")
            methods.append(bytes(current))
            current = None
            continue
        if current is None:
            continue
        if line[0] == ".":
            directive = line.split(None, 1)[0]
            if directive in _DATA_BLOCKS:
                skip_until = _DATA_BLOCKS[directive]
            continue
        if line[0] == ":":
            continue
        mnemonic = line.split(None, 1)[0]
        try:
            current.append(table.mnemonic_to_byte(mnemonic))
        except UnknownMnemonic:
            if strict:
                raise UnknownMnemonic(mnemonic, f"line {lineno}") from None
            if unknown is not None:
                unknown[mnemonic] += 1
    if current is not None:
        raise MalformedSmali(f"unterminated .method block opened at line {start_line}")
    if skip_until is not None:
        raise MalformedSmali(f"unterminated block, expected {skip_until!r}")
    return methods


def read_methods(path: Path, table: OpcodeTable = DEFAULT_TABLE, strict: bool = False) -> list[bytes]:
    """Read a ``.smali`` or ``.ops`` file, or every such file under a directory (sorted)."""
    if path.is_dir():
        files = sorted(p for p in path.rglob("*") if p.suffix in (".smali", ".ops") and p.is_file())
        methods = []
        for f in files:
            methods.extend(read_methods(f, table, strict))
        return methods
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".smali":
        unknown: Counter = Counter()
        methods = parse_smali(text, table, strict=strict, unknown=unknown)
        if unknown:
            log.warning("%s: skipped %d instruction(s) with unknown mnemonics: %s",
                        path, sum(unknown.values()), ", ".join(sorted(unknown)))
        return methods
    if path.suffix == ".ops":
        return parse_ops(text)
    raise CorpusIOError(f"{path}: unsupported file type (expected .smali or .ops)")


def load_corpus(manifest: DatasetManifest, table: OpcodeTable = DEFAULT_TABLE,
                strict: bool = False, threads: int = 1) -> list[AppRecord]:
    """Load every manifest entry; the result is always in manifest order."""
    ids = [e.id for e in manifest.entries]
    if len(set(ids)) != len(ids):
        dup = next(i for i, c in Counter(ids).items() if c > 1)
        raise DuplicateId(f"duplicate app id {dup!r}")

    def load(entry: ManifestEntry) -> AppRecord:
        try:
            methods = read_methods(entry.path, table, strict)
        except OSError as exc:
            raise CorpusIOError(f"app {entry.id!r}: cannot read {entry.path}: {exc.strerror or exc}",
                                app_id=entry.id) from exc
        except UnknownMnemonic as exc:
            raise UnknownMnemonic(exc.mnemonic, f"app {entry.id!r}, {exc.where}") from exc
        except (MalformedSmali, BadHexToken) as exc:
            raise type(exc)(f"app {entry.id!r}: {exc}") from exc
        return AppRecord(entry.id, entry.label, tuple(methods), entry.family)

    if threads <= 1:
        return [load(e) for e in manifest.entries]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(load, manifest.entries))
