"""Command-line entry point.

One binary, six subcommands:

    train      fit the scorer on a corpus, write checkpoint + metrics
    extract    score a corpus with a checkpoint, emit top-K phrases
    eval       compare a predictions file against corpus gold labels
    selftest   run the geometry and gradient property suites
    synth      generate a planted-keyphrase corpus + embeddings
    bench      time the kernels and the scoring pipeline

Configuration is a flat-key JSON file (--config); command-line flags
override file values. Every command is deterministic given its flags,
files, and seed. Exit codes: 0 success, 1 runtime failure, 2 usage
error. `HYPERMATCH_LOG` sets verbosity (debug, info, warning, error).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields as dataclass_fields
from dataclasses import replace
from pathlib import Path

from . import data, evaluation, selftest, training
from . import model as model_mod
from .checkpoint import CheckpointError
from .data import CorpusError, EmbeddingFormatError
from .model import ModelConfig
from .training import TrainConfig, TrainingError

log = logging.getLogger("hypermatch")

MODEL_KEYS = {f.name for f in dataclass_fields(ModelConfig)}
TRAIN_KEYS = {f.name for f in dataclass_fields(TrainConfig)}
SYNTH_KEYS = {"documents", "min_tokens", "max_tokens"}

DEFAULT_TOP_K = 10


class UsageError(Exception):
    """Bad flag/config combination; maps to exit code 2."""


# -- configuration ------------------------------------------------------


def _read_config_file(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: invalid JSON ({exc})") from exc
    except OSError as exc:
        raise UsageError(f"config {path}: {exc.strerror}") from exc
    if not isinstance(raw, dict):
        raise UsageError(f"config {path}: expected a JSON object")
    unknown = sorted(set(raw) - MODEL_KEYS - TRAIN_KEYS - SYNTH_KEYS)
    if unknown:
        raise UsageError(f"config {path}: unknown keys {unknown}")
    return raw


def build_configs(args) -> tuple[ModelConfig, TrainConfig, dict]:
    """Merge defaults, config file, and flags into validated configs."""
    raw = _read_config_file(args.config) if getattr(args, "config", None) else {}
    try:
        model_cfg = ModelConfig(**{k: raw[k] for k in raw if k in MODEL_KEYS})
        train_cfg = TrainConfig(**{k: raw[k] for k in raw if k in TRAIN_KEYS})
    except TypeError as exc:
        raise UsageError(f"config: {exc}") from exc
    if getattr(args, "euclidean", False):
        model_cfg = replace(model_cfg, curvature=0.0)
    if getattr(args, "no_mixing", False):
        model_cfg = replace(model_cfg, use_mixing=False)
    if getattr(args, "seed", None) is not None:
        train_cfg = replace(train_cfg, seed=args.seed)
    try:
        model_cfg.validate()
        train_cfg.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    synth_cfg = {k: raw[k] for k in raw if k in SYNTH_KEYS}
    return model_cfg, train_cfg, synth_cfg


def _thread_count(args) -> int:
    threads = getattr(args, "threads", None)
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise UsageError("--threads must be >= 1")
    return threads


def _require(args, *names) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise UsageError(f"--{name} is required for this command")


# -- corpus + embeddings loading ---------------------------------------


def _prepare_documents(docs, model_cfg: ModelConfig, args,
                       seed: int, threads: int):
    """PreparedDocuments for every corpus entry with usable embeddings.

    Synthetic mode derives layer stacks from token strings; file mode
    reads them from the embedding file. Documents the file does not
    cover (or covers with fewer tokens, e.g. truncated upstream) are
    skipped or shortened with a log line rather than failing the run.
    """
    synthetic = getattr(args, "synthetic", False)
    emb_path = getattr(args, "embeddings", None)
    if synthetic and emb_path:
        raise UsageError("--synthetic and --embeddings are mutually exclusive")
    if not synthetic and not emb_path:
        raise UsageError("provide --embeddings or --synthetic")

    if synthetic:
        def layers_for(doc):
            return data.synth_layers(doc.tokens, model_cfg.layers,
                                     model_cfg.embed_dim, seed)
    else:
        emb = data.EmbeddingFile(emb_path)

        def layers_for(doc):
            if doc.doc_id not in emb:
                log.warning("no embeddings for document '%s'; skipped", doc.doc_id)
                return None
            return emb.load(doc.doc_id)

    prepared = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        stacks = list(pool.map(layers_for, docs))
    for ordinal, (doc, layers) in enumerate(zip(docs, stacks)):
        if layers is None:
            continue
        tokens = doc.tokens
        if layers.shape[0] < len(tokens):
            log.warning("document '%s': embeddings cover %d of %d tokens; "
                        "tail dropped", doc.doc_id, layers.shape[0], len(tokens))
            tokens = tokens[:layers.shape[0]]
        if layers.shape[0] == 0:
            log.warning("document '%s' has no embedded tokens; skipped",
                        doc.doc_id)
            continue
        if layers.shape[1] != model_cfg.layers or layers.shape[2] != model_cfg.embed_dim:
            raise EmbeddingFormatError(
                f"document '{doc.doc_id}': embeddings are {layers.shape[1:]}, "
                f"model expects ({model_cfg.layers}, {model_cfg.embed_dim})")
        prepared.append(model_mod.prepare_document(
            doc.doc_id, tokens, doc.gold, layers, model_cfg, ordinal=ordinal))
    if not prepared:
        raise TrainingError("no documents with usable embeddings")
    return prepared


# -- subcommands --------------------------------------------------------


def cmd_train(args) -> int:
    _require(args, "corpus")
    model_cfg, train_cfg, _ = build_configs(args)
    threads = _thread_count(args)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    docs = data.load_corpus(args.corpus, max_seq_len=model_cfg.max_seq_len)
    prepared = _prepare_documents(docs, model_cfg, args, train_cfg.seed, threads)
    usable, _ = training.trainable_documents(prepared)
    if not usable:
        raise TrainingError("no document has both positive and negative "
                            "candidates; nothing to train on")

    checkpoint_path = out_dir / "checkpoint.hmck"
    result = training.train(usable, model_cfg, train_cfg,
                            checkpoint_path=checkpoint_path,
                            resume_from=getattr(args, "checkpoint", None))
    metrics_path = out_dir / "metrics.json"
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump({"history": result.history,
                   "final_step": result.step,
                   "stopped_early": result.stopped_early}, fh, indent=2)
        fh.write("\n")
    final_loss = result.history[-1]["loss"] if result.history else float("nan")
    print(f"trained {result.step} steps over {len(usable)} documents; "
          f"final epoch loss {final_loss:.6f}")
    print(f"checkpoint: {checkpoint_path}")
    print(f"metrics:    {metrics_path}")
    return 0


def cmd_extract(args) -> int:
    _require(args, "corpus", "checkpoint")
    model_cfg, train_cfg, _ = build_configs(args)
    threads = _thread_count(args)
    top_k = args.k if args.k is not None else DEFAULT_TOP_K
    if top_k < 1:
        raise UsageError("--k must be >= 1")

    params, step = training.load_parameters(args.checkpoint, model_cfg)
    log.info("loaded checkpoint at step %d", step)
    docs = data.load_corpus(args.corpus, max_seq_len=model_cfg.max_seq_len)
    prepared = _prepare_documents(docs, model_cfg, args, train_cfg.seed, threads)

    def rank(doc):
        return model_mod.rank_document(doc, params, model_cfg)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        ranked = list(pool.map(rank, prepared))

    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for scored in ranked:
            top = scored.top(top_k)
            sink.write(json.dumps({
                "id": scored.doc_id,
                "keyphrases": [list(sc.candidate.surface) for sc in top],
                "scores": [sc.score for sc in top],
            }, ensure_ascii=False) + "\n")
    finally:
        if sink is not sys.stdout:
            sink.close()
    if args.out:
        print(f"wrote top-{top_k} predictions for {len(ranked)} documents "
              f"to {args.out}")
    return 0


def _load_predictions(path) -> dict[str, list]:
    preds: dict[str, list] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict) or "id" not in obj or "keyphrases" not in obj:
                raise CorpusError(f"{path}:{lineno}: expected an object with "
                                  "'id' and 'keyphrases'")
            phrases = obj["keyphrases"]
            if not isinstance(phrases, list) or any(
                    not isinstance(p, list) or any(not isinstance(t, str) for t in p)
                    for p in phrases):
                raise CorpusError(f"{path}:{lineno}: 'keyphrases' must be a "
                                  "list of token lists")
            if obj["id"] in preds:
                raise CorpusError(f"{path}:{lineno}: duplicate id '{obj['id']}'")
            preds[obj["id"]] = phrases
    return preds


def cmd_eval(args) -> int:
    _require(args, "corpus")
    preds = _load_predictions(args.predictions)
    docs = data.load_corpus(args.corpus)
    gold = {doc.doc_id: doc.gold for doc in docs}
    stray = sorted(set(preds) - set(gold))
    if stray:
        log.warning("%d prediction id(s) not present in the corpus (first: %s)",
                    len(stray), stray[0])
    report = evaluation.evaluate(preds, gold)
    print(report.format_table())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")
        print(f"report written to {args.out}")
    return 0


def cmd_selftest(args) -> int:
    seed = args.seed if args.seed is not None else 0
    ok = selftest.run_selftest(seed)
    print("selftest: all properties passed" if ok
          else "selftest: FAILURES above")
    return 0 if ok else 1


def cmd_synth(args) -> int:
    model_cfg, train_cfg, synth_cfg = build_configs(args)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    n_docs = synth_cfg.get("documents", 50)
    docs = data.synth_corpus(
        n_docs, train_cfg.seed,
        min_tokens=synth_cfg.get("min_tokens", 24),
        max_tokens=synth_cfg.get("max_tokens", 36))
    corpus_path = out_dir / "corpus.jsonl"
    emb_path = out_dir / "embeddings.hmeb"
    data.save_corpus(corpus_path, docs)
    data.write_embeddings(emb_path, (
        (doc.doc_id,
         data.synth_layers(doc.tokens, model_cfg.layers, model_cfg.embed_dim,
                           train_cfg.seed))
        for doc in docs))
    print(f"wrote {len(docs)} documents to {corpus_path}")
    print(f"wrote embeddings ({model_cfg.layers} layers x "
          f"{model_cfg.embed_dim} dims) to {emb_path}")
    return 0


def cmd_bench(args) -> int:
    from . import bench as bench_mod  # timing harness stays off the other paths
    return bench_mod.run(baseline_path=args.baseline, out_path=args.out,
                         threads=_thread_count(args))


# -- argument parsing ---------------------------------------------------


def _add_common(sub, *, config=False, corpus=False, embeddings=False,
                checkpoint=False, out=False, seed=False, threads=False,
                k=False, modes=False) -> None:
    if config:
        sub.add_argument("--config", help="flat-key JSON configuration file")
    if corpus:
        sub.add_argument("--corpus", help="corpus file (JSON lines)")
    if embeddings:
        sub.add_argument("--embeddings", help="precomputed embedding file")
        sub.add_argument("--synthetic", action="store_true",
                         help="derive embeddings from token strings instead "
                              "of a file")
    if checkpoint:
        sub.add_argument("--checkpoint", help="model checkpoint path")
    if out:
        sub.add_argument("--out", help="output file or directory")
    if seed:
        sub.add_argument("--seed", type=int, help="random seed (default 0)")
    if threads:
        sub.add_argument("--threads", type=int,
                         help="worker threads (default: all cores)")
    if k:
        sub.add_argument("--k", type=int,
                         help=f"phrases per document (default {DEFAULT_TOP_K})")
    if modes:
        sub.add_argument("--euclidean", action="store_true",
                         help="zero-curvature variant (flat-space scoring)")
        sub.add_argument("--no-mixing", dest="no_mixing", action="store_true",
                         help="use the last encoder layer only, no adaptive "
                              "layer mixing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypermatch",
        description="Hyperbolic keyphrase extraction: train, extract, "
                    "evaluate, and check.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("train", help="fit the scorer on a corpus")
    _add_common(p, config=True, corpus=True, embeddings=True, checkpoint=True,
                out=True, seed=True, threads=True, modes=True)
    p.set_defaults(func=cmd_train)

    p = subs.add_parser("extract", help="emit top-K phrases per document")
    _add_common(p, config=True, corpus=True, embeddings=True, checkpoint=True,
                out=True, seed=True, threads=True, k=True, modes=True)
    p.set_defaults(func=cmd_extract)

    p = subs.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("predictions", help="predictions file from `extract`")
    _add_common(p, corpus=True, out=True)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("selftest", help="run geometry + gradient properties")
    _add_common(p, seed=True)
    p.set_defaults(func=cmd_selftest)

    p = subs.add_parser("synth", help="generate a toy corpus + embeddings")
    _add_common(p, config=True, out=True, seed=True)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("bench", help="time kernels and the scoring pipeline")
    p.add_argument("baseline", nargs="?",
                   help="baseline JSON to gate against (omit to measure)")
    _add_common(p, out=True, threads=True)
    p.set_defaults(func=cmd_bench)

    return parser


def _setup_logging() -> None:
    level_name = os.environ.get("HYPERMATCH_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the usage message
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (CorpusError, EmbeddingFormatError, CheckpointError, TrainingError,
            ValueError, OSError) as exc:
        log.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
