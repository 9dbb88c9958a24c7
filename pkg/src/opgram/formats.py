"""Readers and writers for the pipeline's intermediate files.

Every file starts with a ``#`` header line of ``key=value`` fields naming
the file kind, tool version, n, mode and task, so a stage can check it is
consuming what it expects. Output is deterministic: no timestamps, floats
written with ``repr``.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .errors import DimensionMismatch
from .feature_select import IGScore
from .ngram import LabeledInstance, NGramVocabulary, SparseVector


def format_header(kind: str, **fields) -> str:
    parts = [f"# {kind}", f"version={__version__}"]
    parts += [f"{k}={v}" for k, v in fields.items() if v is not None]
    return " ".join(parts) + "\n"


def parse_header(line: str, kind: str | None = None) -> dict[str, str]:
    if not line.startswith("# "):
        raise ValueError(f"missing header line, got {line[:40]!r}")
    tokens = line[2:].split()
    if kind is not None and (not tokens or tokens[0] != kind):
        raise ValueError(f"expected a {kind} file, header says {tokens[:1]}")
    meta = {"kind": tokens[0] if tokens else ""}
    for tok in tokens[1:]:
        k, _, v = tok.partition("=")
        meta[k] = v
    return meta


def _read_lines(path: Path, kind: str):
    with open(path, encoding="utf-8") as fh:
        meta = parse_header(fh.readline(), kind)
        rows = [line.rstrip("\n") for line in fh if line.strip() and not line.startswith("#")]
    return meta, rows


def _check_token(s: str, what: str) -> str:
    if not s or any(c.isspace() for c in s) or "#" in s or ":" in s:
        raise ValueError(f"{what} {s!r} must be non-empty and free of whitespace, '#' and ':'")
    return s


# --------------------------------------------------------------------------- vocabulary

def write_vocabulary(path: str | Path, vocab: NGramVocabulary, task: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_header("opgram-vocabulary", n=vocab.n, task=task, size=len(vocab),
                               digest=vocab.digest()))
        for i, k in enumerate(vocab.keys):
            fh.write(f"{i}\t{k}\n")


def read_vocabulary(path: str | Path) -> tuple[NGramVocabulary, dict]:
    meta, rows = _read_lines(Path(path), "opgram-vocabulary")
    keys = []
    for expected, row in enumerate(rows):
        fid, key = row.split("\t")
        if int(fid) != expected:
            raise ValueError(f"{path}: ids must run 0, 1, 2, ...; got {fid} at row {expected}")
        keys.append(key)
    vocab = NGramVocabulary(int(meta["n"]), keys)
    if vocab.keys != keys:
        raise ValueError(f"{path}: keys are not strictly sorted")
    return vocab, meta


# --------------------------------------------------------------------------- instances

def write_instances(path: str | Path, instances: Sequence[LabeledInstance], *, n: int, mode: str,
                    task: str, n_features: int, vocab_digest: str | None = None) -> None:
    """libsvm-style rows: ``<label> <id>:<value> ... # <app id>``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_header("opgram-instances", n=n, mode=mode, task=task,
                               features=n_features, count=len(instances), vocab_digest=vocab_digest))
        for inst in instances:
            feats = " ".join(f"{i}:{v}" for i, v in zip(inst.vector.ids, inst.vector.values))
            label = _check_token(inst.label, "label")
            app = _check_token(inst.app_id, "app id")
            fh.write(f"{label} {feats} # {app}\n" if feats else f"{label} # {app}\n")


def read_instances(path: str | Path) -> tuple[list[LabeledInstance], dict]:
    meta, rows = _read_lines(Path(path), "opgram-instances")
    mode = meta["mode"]
    out = []
    for row in rows:
        body, _, app = row.partition("#")
        tokens = body.split()
        ids, values = [], []
        for tok in tokens[1:]:
            i, _, v = tok.partition(":")
            ids.append(int(i))
            values.append(int(v))
        out.append(LabeledInstance(app.strip(), tokens[0], SparseVector(mode, tuple(ids), tuple(values))))
    return out, meta


# --------------------------------------------------------------------------- ranking / selection

def format_ig(x: float) -> str:
    return repr(float(x))


def write_ranking(path: str | Path, scores: Sequence[IGScore], *, n: int, mode: str, task: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_header("opgram-ranking", n=n, mode=mode, task=task, features=len(scores)))
        for rank, s in enumerate(scores, 1):
            fh.write(f"{rank}\t{s.key}\t{format_ig(s.ig)}\n")


def read_ranking(path: str | Path) -> tuple[list[tuple[int, str, float]], dict]:
    meta, rows = _read_lines(Path(path), "opgram-ranking")
    out = []
    for row in rows:
        r, key, ig = row.split("\t")
        out.append((int(r), key, float(ig)))
    return out, meta


def write_selection(path: str | Path, selected: Iterable[tuple[int, str]], *, n: int, mode: str,
                    task: str, criterion: str) -> None:
    selected = list(selected)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_header("opgram-selection", n=n, mode=mode, task=task,
                               criterion=criterion, selected=len(selected)))
        for fid, key in selected:
            fh.write(f"{fid}\t{key}\n")


def read_selection(path: str | Path) -> tuple[list[tuple[int, str]], dict]:
    meta, rows = _read_lines(Path(path), "opgram-selection")
    out = []
    for row in rows:
        fid, key = row.split("\t")
        out.append((int(fid), key))
    return out, meta


# --------------------------------------------------------------------------- ARFF

def _arff_quote(s: str) -> str:
    if s and all(c.isalnum() or c in "_-." for c in s) and not s[0].isdigit():
        return s
    return "'" + s.replace("\\", "\\\\").replace("'", "\\'") + "'"


def write_arff(path: str | Path, instances: Sequence[LabeledInstance], feature_names: Sequence[str],
               classes: Sequence[str] | None = None, relation: str = "opgram", comment: str | None = None) -> None:
    """Sparse ARFF: one numeric attribute per feature, nominal class last."""
    n_features = len(feature_names)
    if classes is None:
        classes = sorted({inst.label for inst in instances})
    class_set = set(classes)
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"@relation {_arff_quote(relation)}\n\n")
        for name in feature_names:
            fh.write(f"@attribute {_arff_quote(name)} numeric\n")
        fh.write("@attribute class {" + ",".join(_arff_quote(c) for c in classes) + "}\n\n@data\n")
        for inst in instances:
            v = inst.vector
            if v.ids and v.ids[-1] >= n_features:
                raise DimensionMismatch(f"{inst.app_id}: feature id {v.ids[-1]} >= {n_features}")
            if inst.label not in class_set:
                raise ValueError(f"{inst.app_id}: label {inst.label!r} not among the declared classes")
            cells = [f"{i} {val}" for i, val in zip(v.ids, v.values)]
            cells.append(f"{n_features} {_arff_quote(inst.label)}")
            fh.write("{" + ", ".join(cells) + "}\n")

