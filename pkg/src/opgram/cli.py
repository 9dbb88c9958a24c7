"""Command-line pipeline: extract -> select -> eval -> analyze, plus helpers.

All stages read and write files under ``--out``; a later stage picks up
what an earlier one wrote there. Randomness comes only from ``--seed`` and
outputs do not depend on ``--threads``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from . import classify, evaluate, feature_select, formats, ngram, structure
from .corpus import DatasetManifest, load_corpus
from .errors import CorpusIOError, OpgramError
from .opcodes import DEFAULT_TABLE, OpcodeTable

log = logging.getLogger("opgram")


@dataclass
class PipelineConfig:
    out: Path
    ns: list[int]
    modes: list[str]
    task: str = ngram.DETECT
    manifest: Path | None = None
    ig_threshold: float | None = feature_select.DEFAULT_THRESHOLD
    top_k: int | None = None
    segment_budget: int = feature_select.DEFAULT_BUDGET_BYTES
    algo: str = "svm"
    folds: int = 10
    seed: int = 0
    threads: int = 1
    epochs: int = 20
    lam: float = 1e-4
    alpha: float = 1.0
    opcode_table: Path | None = None
    strict: bool = False

    def __post_init__(self):
        if not self.ns or min(self.ns) < 1:
            raise ValueError("n must be >= 1")
        if self.folds < 2:
            raise ValueError("--folds must be >= 2")
        if self.ig_threshold is not None and self.ig_threshold < 0:
            raise ValueError("--ig-threshold must be >= 0")
        if self.threads < 1:
            raise ValueError("--threads must be >= 1")

    # file layout
    def vocab_path(self, n):
        return self.out / f"{self.task}_n{n}.vocab.tsv"

    def instances_path(self, n, mode):
        return self.out / f"{self.task}_n{n}_{mode}.instances"

    def ranking_path(self, n, mode):
        return self.out / f"{self.task}_n{n}_{mode}.ranking.tsv"

    def selection_path(self, n, mode):
        return self.out / f"{self.task}_n{n}_{mode}.selection.tsv"

    def report_path(self, n, mode):
        return self.out / f"{self.task}_n{n}_{mode}_{self.algo}.report.json"

    def timing_path(self, n, mode):
        return self.out / f"{self.task}_n{n}_{mode}_{self.algo}.timing.json"

    def model_path(self, n, mode):
        return self.out / f"{self.task}_n{n}_{mode}_{self.algo}.model.json"

    def arff_path(self, n, mode, selected):
        return self.out / f"{self.task}_n{n}_{mode}{'_selected' if selected else ''}.arff"

    def summary_path(self):
        return self.out / f"{self.task}_summary.tsv"

    def extension_paths(self, mode):
        stem = f"{self.task}_{mode}.extensions"
        return (self.out / f"{stem}.tsv", self.out / f"{stem}_proportions.tsv", self.out / f"{stem}_grams.tsv")

    def train_config(self) -> classify.TrainConfig:
        return classify.TrainConfig(algorithm=self.algo, seed=self.seed, epochs=self.epochs,
                                    lam=self.lam, alpha=self.alpha)

    def criterion(self) -> str:
        parts = []
        if self.ig_threshold is not None:
            parts.append(f"ig>{self.ig_threshold!r}")
        if self.top_k is not None:
            parts.append(f"top{self.top_k}")
        return ",".join(parts) or "all"


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise CorpusIOError(f"{path} not found; run '{stage}' first")
    return path


def _table(cfg: PipelineConfig) -> OpcodeTable:
    return OpcodeTable.with_overrides(cfg.opcode_table) if cfg.opcode_table else DEFAULT_TABLE


# --------------------------------------------------------------------------- stages

def cmd_extract(cfg: PipelineConfig) -> None:
    if cfg.manifest is None:
        raise CorpusIOError("--manifest is required for extract")
    cfg.out.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest.read(cfg.manifest)
    corpus = load_corpus(manifest, _table(cfg), strict=cfg.strict, threads=cfg.threads)
    apps = ngram.task_corpus(corpus, cfg.task)
    log.info("loaded %d apps, %d take part in %s", len(corpus), len(apps), cfg.task)
    for n in cfg.ns:
        vocab = ngram.build_vocabulary(apps, n, threads=cfg.threads)
        formats.write_vocabulary(cfg.vocab_path(n), vocab, task=cfg.task)
        for mode in cfg.modes:
            inst = ngram.vectorize_corpus(apps, vocab, mode, cfg.task, threads=cfg.threads)
            formats.write_instances(cfg.instances_path(n, mode), inst, n=n, mode=mode, task=cfg.task,
                                    n_features=len(vocab), vocab_digest=vocab.digest())
        log.info("n=%d: %d unique n-grams", n, len(vocab))


def cmd_select(cfg: PipelineConfig) -> None:
    for n in cfg.ns:
        vocab, _ = formats.read_vocabulary(_require(cfg.vocab_path(n), "extract"))
        for mode in cfg.modes:
            inst, _ = formats.read_instances(_require(cfg.instances_path(n, mode), "extract"))
            n_classes = len({i.label for i in inst})
            plan = feature_select.SegmentPlan.for_budget(len(vocab), len(inst), n_classes, cfg.segment_budget)
            scores = feature_select.segmented_ig(inst, vocab, plan, mode, threads=cfg.threads)
            selected = feature_select.select_features(scores, cfg.ig_threshold, cfg.top_k)
            formats.write_ranking(cfg.ranking_path(n, mode), scores, n=n, mode=mode, task=cfg.task)
            formats.write_selection(cfg.selection_path(n, mode), selected, n=n, mode=mode, task=cfg.task,
                                    criterion=cfg.criterion())
            log.info("n=%d %s: %d segment(s), %d of %d features selected",
                     n, mode, len(plan.segments), len(selected), len(vocab))


def _selected_instances(cfg, n, mode):
    inst, _ = formats.read_instances(_require(cfg.instances_path(n, mode), "extract"))
    selected, _ = formats.read_selection(_require(cfg.selection_path(n, mode), "select"))
    ids = [fid for fid, _ in selected]
    keys = [key for _, key in selected]
    return ngram.restrict(inst, ids), keys


def cmd_eval(cfg: PipelineConfig) -> None:
    tcfg = cfg.train_config()
    for n in cfg.ns:
        for mode in cfg.modes:
            inst, keys = _selected_instances(cfg, n, mode)
            dim = len(keys)
            report = evaluate.cross_validate(
                inst, cfg.folds, cfg.seed,
                lambda train: classify.train(train, tcfg, dim, threads=cfg.threads),
                classify.predict,
            )
            doc = {"n": n, "mode": mode, "task": cfg.task, "algorithm": cfg.algo, "k": cfg.folds,
                   "seed": cfg.seed, "features": dim, "version": __version__}
            doc.update(report.to_dict())
            cfg.report_path(n, mode).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
            cfg.timing_path(n, mode).write_text(json.dumps(report.timing(), indent=1) + "\n", encoding="utf-8")
            log.info("n=%d %s %s: weighted f = %.4f", n, mode, cfg.algo, report.weighted_f)
    write_summary(cfg)


def write_summary(cfg: PipelineConfig) -> None:
    """Rebuild the (n, mode, algorithm, weighted_f) table from every report under ``--out``."""
    rows = []
    for path in cfg.out.glob(f"{cfg.task}_n*.report.json"):
        doc = json.loads(path.read_text(encoding="utf-8"))
        rows.append((doc["n"], doc["mode"], doc["algorithm"], doc["weighted_f"], doc["mean_fold_weighted_f"]))
    rows.sort()
    with open(cfg.summary_path(), "w", encoding="utf-8") as fh:
        fh.write("n\tmode\talgorithm\tweighted_f\tmean_fold_weighted_f\n")
        for n, mode, algo, f, mf in rows:
            fh.write(f"{n}\t{mode}\t{algo}\t{f!r}\t{mf!r}\n")


def _provenance(cfg, n, mode, keys_by_id):
    """Label set containing each selected gram, as ``<label>-only`` or ``shared``."""
    path = cfg.instances_path(n, mode)
    if not path.exists():
        return {}
    inst, _ = formats.read_instances(path)
    seen: dict[int, set] = {fid: set() for fid in keys_by_id}
    for i in inst:
        for fid in i.vector.ids:
            if fid in seen:
                seen[fid].add(i.label)
    out = {}
    for fid, labels in seen.items():
        out[keys_by_id[fid]] = f"{next(iter(labels))}-only" if len(labels) == 1 else ("shared" if labels else "none")
    return out


def cmd_analyze(cfg: PipelineConfig) -> None:
    if len(cfg.ns) < 2:
        raise ValueError("analyze needs an n-range spanning at least two consecutive n")
    for mode in cfg.modes:
        selected_by_n = {}
        provenance = {}
        for n in cfg.ns:
            sel, _ = formats.read_selection(_require(cfg.selection_path(n, mode), "select"))
            selected_by_n[n] = [k for _, k in sel]
            provenance[n] = _provenance(cfg, n, mode, dict(sel))
        report = structure.extension_report(selected_by_n)
        counts_path, prop_path, grams_path = cfg.extension_paths(mode)
        header = "n\tnew\tprefix\tsuffix\toverlap\ttotal\n"
        with open(counts_path, "w", encoding="utf-8") as fh:
            fh.write(header)
            for lv in report.levels:
                c = [lv.counts[v] for v in structure.VARIANTS]
                fh.write("\t".join(str(x) for x in [lv.n, *c, lv.total]) + "\n")
        with open(prop_path, "w", encoding="utf-8") as fh:
            fh.write(header)
            for lv in report.levels:
                props = lv.proportions()
                cells = ["NA"] * 4 if props is None else [repr(props[v]) for v in structure.VARIANTS]
                fh.write("\t".join([str(lv.n), *cells, str(lv.total)]) + "\n")
        with open(grams_path, "w", encoding="utf-8") as fh:
            fh.write("n\tngram_key\textension\tprovenance\n")
            for lv in report.levels:
                for key, ext in report.labels[lv.n].items():
                    fh.write(f"{lv.n}\t{key}\t{ext.value}\t{provenance[lv.n].get(key, 'NA')}\n")


def cmd_export_arff(cfg: PipelineConfig, selected_only: bool = False) -> None:
    for n in cfg.ns:
        for mode in cfg.modes:
            if selected_only:
                inst, names = _selected_instances(cfg, n, mode)
            else:
                inst, _ = formats.read_instances(_require(cfg.instances_path(n, mode), "extract"))
                vocab, _ = formats.read_vocabulary(_require(cfg.vocab_path(n), "extract"))
                names = vocab.keys
            formats.write_arff(cfg.arff_path(n, mode, selected_only), inst, names,
                               relation=f"opgram_{cfg.task}_n{n}_{mode}",
                               comment=f"opgram {__version__} n={n} mode={mode} task={cfg.task}")


def cmd_train(cfg: PipelineConfig) -> None:
    tcfg = cfg.train_config()
    for n in cfg.ns:
        for mode in cfg.modes:
            inst, keys = _selected_instances(cfg, n, mode)
            model = classify.train(inst, tcfg, len(keys), threads=cfg.threads)
            classify.save_model(model, cfg.model_path(n, mode), keys,
                                extra={"n": n, "task": cfg.task, "selection": cfg.selection_path(n, mode).name})


def cmd_predict(cfg: PipelineConfig, model_path: Path, dest: Path) -> None:
    if cfg.manifest is None:
        raise CorpusIOError("--manifest is required for predict")
    if len(cfg.ns) != 1 or len(cfg.modes) != 1:
        raise ValueError("predict takes a single --n and --mode")
    n, mode = cfg.ns[0], cfg.modes[0]
    selected, _ = formats.read_selection(_require(cfg.selection_path(n, mode), "select"))
    keys = [k for _, k in selected]
    model = classify.load_model(model_path, keys)
    apps = load_corpus(DatasetManifest.read(cfg.manifest), _table(cfg), strict=cfg.strict, threads=cfg.threads)
    sel_vocab = ngram.NGramVocabulary(n, keys)
    # selection order is the model's column order; vocabulary ids are sorted order
    column = [keys.index(k) for k in sel_vocab.keys]
    rows = []
    for app in apps:
        v = ngram.app_vector(app, sel_vocab, mode)
        pairs = sorted((column[i], val) for i, val in zip(v.ids, v.values))
        vec = ngram.SparseVector(mode, tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
        if isinstance(model, classify.NBModel):
            label = classify.predict_nb(model, vec)[0]
        else:
            label = classify.predict_linear(model, vec)
        rows.append((app.id, label))
    with open(dest, "w", encoding="utf-8") as fh:
        fh.write("app_id\tpredicted\n")
        for app_id, label in rows:
            fh.write(f"{app_id}\t{label}\n")


def cmd_synth(args) -> None:
    from . import synth

    cfg = synth.SynthConfig(n_benign=args.benign, n_malware=args.malware, alphabet_size=args.alphabet,
                            min_len=args.min_len, max_len=args.max_len, gram_n=args.gram_n,
                            n_planted=args.planted, n_families=args.families, seed=args.seed)
    apps, planted = synth.generate(cfg)
    manifest = synth.write_corpus(apps, args.out)
    (Path(args.out) / "planted.json").write_text(json.dumps(planted, indent=1, sort_keys=True) + "\n")
    print(manifest)


# --------------------------------------------------------------------------- argument parsing

def parse_n_range(text: str) -> list[int]:
    a, sep, b = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")
    lo, hi = int(a), int(b)
    if lo < 1 or hi < lo:
        raise argparse.ArgumentTypeError(f"bad n-range {text!r}")
    return list(range(lo, hi + 1))


def _common(p: argparse.ArgumentParser, manifest=False) -> None:
    if manifest:
        p.add_argument("--manifest", type=Path, help="JSON Lines dataset manifest")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--n", type=int, help="gram length")
    g.add_argument("--n-range", type=parse_n_range, help="inclusive range of gram lengths, e.g. 1..10")
    p.add_argument("--mode", choices=["binary", "frequency", "both"], default="binary")
    p.add_argument("--task", choices=list(ngram.TASKS), default=ngram.DETECT)
    p.add_argument("--out", type=Path, required=True, help="working directory for pipeline files")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _selection_args(p):
    p.add_argument("--ig-threshold", type=float, default=feature_select.DEFAULT_THRESHOLD,
                   help="keep features with IG strictly above this (default 0.1)")
    p.add_argument("--top-k", type=int, help="keep at most this many top-ranked features")
    p.add_argument("--segment-budget-bytes", type=int, default=feature_select.DEFAULT_BUDGET_BYTES)


def _model_args(p):
    p.add_argument("--algo", choices=["nb", "svm"], default="svm")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lam", type=float, default=1e-4, help="SVM regularization strength")
    p.add_argument("--alpha", type=float, default=1.0, help="naive Bayes smoothing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opgram", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"opgram {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="build vocabularies and instance files from a manifest")
    _common(p, manifest=True)
    p.add_argument("--opcode-table", type=Path, help="hex<TAB>mnemonic overrides")
    p.add_argument("--strict", action="store_true", help="fail on unknown smali mnemonics")

    p = sub.add_parser("select", help="rank features by information gain and select")
    _common(p)
    _selection_args(p)

    p = sub.add_parser("eval", help="k-fold cross-validate a classifier on the selected features")
    _common(p)
    _model_args(p)

    p = sub.add_parser("analyze", help="new / prefix / suffix / overlap breakdown across n")
    _common(p)

    p = sub.add_parser("export-arff", help="write sparse ARFF files")
    _common(p)
    p.add_argument("--selected", action="store_true", help="export only the selected features")

    p = sub.add_parser("train", help="train on all instances and save a model file")
    _common(p)
    _model_args(p)

    p = sub.add_parser("predict", help="label the apps of a manifest with a saved model")
    _common(p, manifest=True)
    _model_args(p)
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--predictions", type=Path, help="output TSV (default <out>/predictions.tsv)")
    p.add_argument("--opcode-table", type=Path)
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("run", help="extract, select, eval and (for an n-range) analyze in one go")
    _common(p, manifest=True)
    _selection_args(p)
    _model_args(p)
    p.add_argument("--opcode-table", type=Path)
    p.add_argument("--strict", action="store_true")

    p = sub.add_parser("synth", help="write a synthetic corpus with planted malware n-grams")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--benign", type=int, default=100)
    p.add_argument("--malware", type=int, default=100)
    p.add_argument("--alphabet", type=int, default=50)
    p.add_argument("--min-len", type=int, default=5)
    p.add_argument("--max-len", type=int, default=50)
    p.add_argument("--gram-n", type=int, default=3)
    p.add_argument("--planted", type=int, default=5)
    p.add_argument("--families", type=int, default=0, help="give malware this many families")
    p.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args) -> PipelineConfig:
    if getattr(args, "n_range", None):
        ns = args.n_range
    elif getattr(args, "n", None) is not None:
        ns = [args.n]
    else:
        raise ValueError("give --n or --n-range")
    modes = list(ngram.MODES) if args.mode == "both" else [args.mode]
    kw = {}
    for name, attr in [("manifest", "manifest"), ("ig_threshold", "ig_threshold"), ("top_k", "top_k"),
                       ("segment_budget", "segment_budget_bytes"), ("algo", "algo"), ("folds", "folds"),
                       ("epochs", "epochs"), ("lam", "lam"), ("alpha", "alpha"),
                       ("opcode_table", "opcode_table"), ("strict", "strict")]:
        if hasattr(args, attr):
            kw[name] = getattr(args, attr)
    return PipelineConfig(out=args.out, ns=ns, modes=modes, task=args.task, seed=args.seed,
                          threads=args.threads, **kw)


def _setup_logging() -> None:
    level = getattr(logging, os.environ.get("OPGRAM_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(level)


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            cmd_synth(args)
            return 0
        cfg = config_from_args(args)
        if args.command == "extract":
            cmd_extract(cfg)
        elif args.command == "select":
            cmd_select(cfg)
        elif args.command == "eval":
            cmd_eval(cfg)
        elif args.command == "analyze":
            cmd_analyze(cfg)
        elif args.command == "export-arff":
            cmd_export_arff(cfg, args.selected)
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "predict":
            cmd_predict(cfg, args.model, args.predictions or cfg.out / "predictions.tsv")
        elif args.command == "run":
            cmd_extract(cfg)
            cmd_select(cfg)
            cmd_eval(cfg)
            if len(cfg.ns) > 1:
                cmd_analyze(cfg)
    except (OpgramError, OSError, ValueError) as exc:
        print(f"opgram {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
