"""Command-line entry point: ``jasen <subcommand> [options]``.

Exit codes: 0 success, 1 pipeline stage failure, 2 usage error (missing
file, bad config, unknown topic), 3 unreadable or corrupt model file.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import fields

from . import evaluation
from .config import ConfigError, RunConfig, apply_env, load_config
from .corpus import (
    CorpusError,
    SchemaError,
    Vocabulary,
    build_vocabulary,
    encode_corpus,
    load_schema,
    read_lines,
    tokenize,
)
from .embedding import EmbeddingModel
from .embedding import ModelFormatError as EmbFormatError
from .inference import format_projection, project_topics_2d, top_terms
from .textcnn import CnnModel
from .textcnn import ModelFormatError as CnnFormatError
from .training import StageError, run_pipeline

logger = logging.getLogger("jasen")

EMB_FILE = "embeddings.txt"
ASPECT_FILE = "aspect.jcnn"
SENTIMENT_FILE = "sentiment.jcnn"
VOCAB_FILE = "vocab.txt"
LOG_FILE = "train.log"
CONFIG_FILE = "config.txt"


class UsageError(Exception):
    pass


class ModelError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing


def _add_run_options(p: argparse.ArgumentParser):
    g = p.add_argument_group("run configuration")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool":
            g.add_argument(flag, dest=f.name, action="store_const", const=True, default=None)
            continue
        kind = {"int": int, "float": float}.get(f.type, str)
        g.add_argument(flag, dest=f.name, type=kind, default=None, metavar=f.name.upper())
    g.add_argument("--config", dest="config_file", default=None,
                   help="key=value file overriding the defaults")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jasen", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-vocab", help="count tokens and write vocab.txt")
    _add_run_options(p)
    p.add_argument("--out", default=None, help="output path (default: <model-dir>/vocab.txt)")

    p = sub.add_parser("train", help="train embeddings and both CNN heads")
    _add_run_options(p)

    p = sub.add_parser("predict", help="label reviews with (sentiment, aspect)")
    _add_run_options(p)
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)

    p = sub.add_parser("inspect", help="print representative terms of a topic")
    _add_run_options(p)
    p.add_argument("--topic", required=True, help="aspect, sentiment, or 'sentiment|aspect'")
    p.add_argument("-n", type=int, default=5)

    p = sub.add_parser("export-proj", help="write 2-D PCA coordinates of all topics")
    _add_run_options(p)
    p.add_argument("--output", default=None)

    p = sub.add_parser("evaluate", help="score trained models on a labeled test file")
    _add_run_options(p)

    p = sub.add_parser("sweep-keywords", help="aspect macro-F1 for several keyword counts")
    _add_run_options(p)
    p.add_argument("--k", type=int, nargs="+", required=True)
    return parser


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config_file", None):
        if not os.path.isfile(args.config_file):
            raise FileNotFoundError(args.config_file)
        cfg = load_config(args.config_file, cfg)
    cfg = apply_env(cfg)
    cfg = cfg.updated(**{f.name: getattr(args, f.name, None) for f in fields(RunConfig)})
    return cfg.validate()


# ---------------------------------------------------------------------------
# helpers


def _write_lines(path, text):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)


def _require_model_dir(cfg):
    if cfg.model_dir is None:
        raise ConfigError("--model-dir is required")
    return cfg.model_dir


def load_embedding(model_dir) -> EmbeddingModel:
    path = os.path.join(model_dir, EMB_FILE)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    try:
        return EmbeddingModel.load(path)
    except (EmbFormatError, ValueError, IndexError) as exc:
        raise ModelError(str(exc)) from exc


def load_models(model_dir):
    emb = load_embedding(model_dir)
    heads = []
    for name, n_cls in ((ASPECT_FILE, len(emb.aspects)), (SENTIMENT_FILE, len(emb.sentiments))):
        path = os.path.join(model_dir, name)
        if not os.path.isfile(path):
            raise FileNotFoundError(path)
        try:
            cnn = CnnModel.load(path)
        except (CnnFormatError, ValueError) as exc:
            raise ModelError(str(exc)) from exc
        if cnn.n_classes != n_cls or cnn.embeddings.shape[0] != len(emb.words):
            raise ModelError(f"{path}: does not match {EMB_FILE}")
        heads.append(cnn)
    vocab = Vocabulary(list(emb.words), [0] * len(emb.words))
    return emb, heads[0], heads[1], vocab


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_vocab(cfg: RunConfig, args) -> int:
    cfg.require_files("corpus")
    vocab = build_vocabulary((tokenize(t) for t in read_lines(cfg.corpus)), cfg.min_count)
    out = args.out or os.path.join(_require_model_dir(cfg), VOCAB_FILE)
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    vocab.save(out)
    print(f"wrote {len(vocab)} tokens to {out}")
    return 0


def train_from_config(cfg: RunConfig, schema=None, log=None):
    texts = read_lines(cfg.corpus)
    try:
        vocab = build_vocabulary((tokenize(t) for t in texts), cfg.min_count)
    except CorpusError as exc:
        raise StageError("vocabulary", exc) from exc
    schema = schema or load_schema(cfg.schema)
    docs = encode_corpus(texts, vocab)
    n_empty = sum(d.empty for d in docs)
    if n_empty:
        logger.warning("%d documents are empty after vocabulary filtering", n_empty)
    return run_pipeline(docs, vocab, schema, cfg.pipeline(), log=log)


def cmd_train(cfg: RunConfig, args) -> int:
    cfg.require_files("corpus", "schema")
    model_dir = _require_model_dir(cfg)
    schema = load_schema(cfg.schema)
    records: list[str] = []
    result = train_from_config(cfg, schema, log=records.append)
    os.makedirs(model_dir, exist_ok=True)
    result.vocab.save(os.path.join(model_dir, VOCAB_FILE))
    result.embedding.save(os.path.join(model_dir, EMB_FILE))
    result.aspect_cnn.save(os.path.join(model_dir, ASPECT_FILE))
    result.sentiment_cnn.save(os.path.join(model_dir, SENTIMENT_FILE))
    _write_lines(os.path.join(model_dir, LOG_FILE), "".join(r + "\n" for r in records))
    _write_lines(os.path.join(model_dir, CONFIG_FILE), cfg.to_text())
    print(f"models written to {model_dir}")
    return 0


def cmd_predict(cfg: RunConfig, args) -> int:
    emb, a_cnn, s_cnn, vocab = load_models(_require_model_dir(cfg))
    if not os.path.isfile(args.input):
        raise FileNotFoundError(args.input)
    texts = read_lines(args.input)
    a_idx, a_p = evaluation.predict_labels(texts, a_cnn, vocab, cfg.threads)
    s_idx, s_p = evaluation.predict_labels(texts, s_cnn, vocab, cfg.threads)
    out = "".join(
        f"{t}\t{emb.sentiments[s]}\t{emb.aspects[a]}\t{ps:.6f}\t{pa:.6f}\n"
        for t, s, a, ps, pa in zip(texts, s_idx, a_idx, s_p, a_p)
    )
    _write_lines(args.output, out)
    return 0


def cmd_inspect(cfg: RunConfig, args) -> int:
    emb = load_embedding(_require_model_dir(cfg))
    names = emb.topic_names()
    if args.topic not in names:
        raise UsageError(f"unknown topic {args.topic!r}; valid names: {', '.join(names)}")
    for term in top_terms(emb, args.topic, args.n):
        print(term)
    return 0


def cmd_export_proj(cfg: RunConfig, args) -> int:
    emb = load_embedding(_require_model_dir(cfg))
    _write_lines(args.output, format_projection(project_topics_2d(emb)))
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    cfg.require_files("test")
    emb, a_cnn, s_cnn, vocab = load_models(_require_model_dir(cfg))
    examples = evaluation.read_labeled(cfg.test)
    m_a, m_s = evaluation.evaluate_pipeline(examples, a_cnn, s_cnn, vocab, emb.aspects,
                                            emb.sentiments, cfg.threads)
    sys.stdout.write(evaluation.format_metrics(m_a, m_s))
    return 0


def cmd_sweep_keywords(cfg: RunConfig, args) -> int:
    cfg.require_files("corpus", "schema", "test")
    schema = load_schema(cfg.schema)
    examples = evaluation.read_labeled(cfg.test)

    def run(truncated):
        result = train_from_config(cfg, truncated)
        m_a, _ = evaluation.evaluate_pipeline(examples, result.aspect_cnn, result.sentiment_cnn,
                                              result.vocab, schema.aspects, schema.sentiments,
                                              cfg.threads)
        return m_a

    try:
        rows = evaluation.keyword_sweep(schema, args.k, run)
    except ValueError as exc:
        if isinstance(exc, (SchemaError, StageError)):
            raise
        raise UsageError(str(exc)) from exc
    sys.stdout.write("k\taspect_macro_f1\n")
    sys.stdout.write("".join(f"{k}\t{f1:.6f}\n" for k, f1 in rows))
    return 0


COMMANDS = {
    "build-vocab": cmd_build_vocab,
    "train": cmd_train,
    "predict": cmd_predict,
    "inspect": cmd_inspect,
    "export-proj": cmd_export_proj,
    "evaluate": cmd_evaluate,
    "sweep-keywords": cmd_sweep_keywords,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    except (ConfigError, SchemaError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        print(f"error: corrupt model: {exc}", file=sys.stderr)
        return 3
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
