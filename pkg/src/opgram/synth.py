"""Synthetic labeled corpora with planted discriminative n-grams.

Used by the acceptance tests and the benchmark in place of a real
disassembled dataset. Planted grams are written into malware methods by
overwriting bytes in place, so method lengths stay inside the configured
range; benign methods are regenerated until no planted gram occurs in
them.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import BENIGN, MALWARE, AppRecord, DatasetManifest, ManifestEntry, format_ops
from .opcodes import DEFAULT_TABLE


@dataclass(frozen=True)
class SynthConfig:
    n_benign: int = 100
    n_malware: int = 100
    alphabet_size: int = 50
    min_len: int = 5
    max_len: int = 50
    min_methods: int = 5
    max_methods: int = 20
    gram_n: int = 3
    n_planted: int = 5
    planted_rate: float = 0.8
    n_families: int = 0
    seed: int = 0


def default_alphabet(size: int) -> list[int]:
    """The first ``size`` bytes that carry a real mnemonic."""
    defined = [b for b, name in DEFAULT_TABLE.items() if not name.startswith("unused-")]
    if size > len(defined):
        raise ValueError(f"alphabet size {size} exceeds the {len(defined)} defined opcodes")
    return defined[:size]


def _random_grams(rng, alphabet, n, count, avoid=()):
    grams: list[bytes] = []
    seen = set(avoid)
    while len(grams) < count:
        g = bytes(rng.choice(alphabet, size=n).tolist())
        if g not in seen:
            seen.add(g)
            grams.append(g)
    return grams


def _contains_any(method: bytes, grams) -> bool:
    return any(g in method for g in grams)


def _random_method(rng, alphabet, cfg: SynthConfig) -> bytearray:
    length = int(rng.integers(cfg.min_len, cfg.max_len + 1))
    return bytearray(rng.choice(alphabet, size=length).tolist())


def _plant(rng, methods, grams) -> None:
    """Overwrite each gram into a random method at a spot no earlier gram occupies."""
    taken: list[set[int]] = [set() for _ in methods]
    for gram in grams:
        for _ in range(1000):
            mi = int(rng.integers(len(methods)))
            pos = int(rng.integers(0, len(methods[mi]) - len(gram) + 1))
            span = set(range(pos, pos + len(gram)))
            if not span & taken[mi]:
                break
        else:
            raise ValueError("no room left to plant another gram; raise min_len or max_methods")
        methods[mi][pos:pos + len(gram)] = gram
        taken[mi] |= span


def generate(cfg: SynthConfig = SynthConfig()) -> tuple[list[AppRecord], dict[str, list[str]]]:
    """Build the corpus; also return the planted gram keys (per family, or under ``"malware"``)."""
    if cfg.min_len < cfg.gram_n:
        raise ValueError("min_len must be at least gram_n so planted grams fit")
    rng = np.random.default_rng(cfg.seed)
    alphabet = np.array(default_alphabet(cfg.alphabet_size))
    if cfg.n_families:
        groups = [f"family{i:02d}" for i in range(cfg.n_families)]
    else:
        groups = [MALWARE]
    planted: dict[str, list[bytes]] = {}
    used: list[bytes] = []
    for g in groups:
        planted[g] = _random_grams(rng, alphabet, cfg.gram_n, cfg.n_planted, used)
        used += planted[g]

    apps = []
    for i in range(cfg.n_benign):
        methods = []
        for _ in range(int(rng.integers(cfg.min_methods, cfg.max_methods + 1))):
            m = _random_method(rng, alphabet, cfg)
            while _contains_any(bytes(m), used):
                m = _random_method(rng, alphabet, cfg)
            methods.append(bytes(m))
        apps.append(AppRecord(f"benign{i:04d}", BENIGN, tuple(methods)))

    for i in range(cfg.n_malware):
        group = groups[i % len(groups)]
        methods = [_random_method(rng, alphabet, cfg)
                   for _ in range(int(rng.integers(cfg.min_methods, cfg.max_methods + 1)))]
        chosen = [g for g in planted[group] if rng.random() < cfg.planted_rate]
        if not chosen:
            chosen = [planted[group][int(rng.integers(len(planted[group])))]]
        _plant(rng, methods, chosen)
        family = group if cfg.n_families else None
        apps.append(AppRecord(f"malware{i:04d}", MALWARE, tuple(bytes(m) for m in methods), family))

    return apps, {g: [k.hex() for k in ks] for g, ks in planted.items()}


def write_corpus(apps, directory: str | Path) -> Path:
    """Write one ``.ops`` file per app plus ``manifest.jsonl``; return the manifest path."""
    directory = Path(directory)
    (directory / "apps").mkdir(parents=True, exist_ok=True)
    entries = []
    for app in apps:
        path = directory / "apps" / f"{app.id}.ops"
        path.write_text(format_ops(app.methods), encoding="utf-8")
        entries.append(ManifestEntry(app.id, app.label, path, app.family))
    manifest = directory / "manifest.jsonl"
    DatasetManifest(entries).write(manifest)
    return manifest
