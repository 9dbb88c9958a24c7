"""How selected n-grams relate to the selected (n-1)-grams.

An n-gram whose (n-1)-byte prefix and suffix are both selected one level
down is an *overlap*; with only the prefix it is *prefix-extended*, with
only the suffix *suffix-extended*; with neither it is *new*.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from .errors import LengthMismatch, MissingLevel


class ExtensionClass(enum.Enum):
    NEW = "new"
    PREFIX = "prefix"
    SUFFIX = "suffix"
    OVERLAP = "overlap"

    @property
    def extended(self) -> bool:
        return self is not ExtensionClass.NEW


VARIANTS = (ExtensionClass.NEW, ExtensionClass.PREFIX, ExtensionClass.SUFFIX, ExtensionClass.OVERLAP)


def classify_extension(gram: str, prev: Iterable[str] | frozenset[str]) -> ExtensionClass:
    if len(gram) % 2 or len(gram) < 4:
        raise LengthMismatch(f"need an n-gram key with n >= 2, got {gram!r}")
    prev = prev if isinstance(prev, (set, frozenset)) else set(prev)
    want = len(gram) - 2
    for p in prev:
        if len(p) != want:
            raise LengthMismatch(f"reference key {p!r} is not a {want // 2}-gram")
        break
    has_prefix = gram[:-2] in prev
    has_suffix = gram[2:] in prev
    if has_prefix and has_suffix:
        return ExtensionClass.OVERLAP
    if has_prefix:
        return ExtensionClass.PREFIX
    if has_suffix:
        return ExtensionClass.SUFFIX
    return ExtensionClass.NEW


@dataclass(frozen=True)
class LevelCounts:
    n: int
    counts: Mapping[ExtensionClass, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def extended(self) -> int:
        return self.total - self.counts[ExtensionClass.NEW]

    def proportions(self) -> dict[ExtensionClass, float] | None:
        """Share of each variant, or None when nothing was selected at this n."""
        if not self.total:
            return None
        return {v: self.counts[v] / self.total for v in VARIANTS}

    def extended_breakdown(self) -> dict[ExtensionClass, float] | None:
        """Prefix / suffix / overlap shares within the extended subset."""
        if not self.extended:
            return None
        return {v: self.counts[v] / self.extended for v in VARIANTS[1:]}


@dataclass(frozen=True)
class ExtensionReport:
    levels: tuple[LevelCounts, ...]
    labels: Mapping[int, Mapping[str, ExtensionClass]]

    def level(self, n: int) -> LevelCounts:
        for lv in self.levels:
            if lv.n == n:
                return lv
        raise KeyError(n)


def extension_report(selected_by_n: Mapping[int, Iterable[str]]) -> ExtensionReport:
    """Classify every selected n-gram against the selected (n-1)-grams, for each n >= 2 present."""
    ns = sorted(selected_by_n)
    if not ns:
        return ExtensionReport((), {})
    missing = sorted(set(range(ns[0], ns[-1] + 1)) - set(ns))
    if missing:
        raise MissingLevel(f"no selected set for n = {missing}")
    sets = {n: frozenset(selected_by_n[n]) for n in ns}
    for n, keys in sets.items():
        bad = next((k for k in keys if len(k) != 2 * n), None)
        if bad is not None:
            raise LengthMismatch(f"key {bad!r} listed under n={n}")
    levels = []
    labels = {}
    for n in ns:
        if n < 2 or n - 1 not in sets:
            continue
        prev = sets[n - 1]
        lab = {g: classify_extension(g, prev) for g in sorted(sets[n])}
        tally = Counter(lab.values())
        levels.append(LevelCounts(n, {v: tally.get(v, 0) for v in VARIANTS}))
        labels[n] = lab
    return ExtensionReport(tuple(levels), labels)
