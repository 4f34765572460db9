"""Joint-topic embedding model and its trainer.

Words get a center vector (used for everything downstream) and a context
vector; every training document gets a trainable vector for the global
context term; aspects, sentiments and their (sentiment, aspect) pairs each
get a topic vector living in the center-vector space.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import backend as _backend
from . import losses
from .corpus import Document, SchemaError, TopicSchema, Vocabulary, restrict_schema

logger = logging.getLogger(__name__)

MAGIC = "jasen-emb"
VERSION = "v1"
_SECTIONS = ("WORDS", "CONTEXT", "DOCS", "ASPECT_TOPICS", "SENT_TOPICS", "JOINT_TOPICS")


class DivergenceError(RuntimeError):
    pass


class ModelFormatError(ValueError):
    pass


@dataclass
class EmbedHyperparams:
    dim: int = 100
    window: int = 5
    lambda_g: float = 2.5
    lambda_r: float = 1.0
    epochs: int = 5
    negatives: int = 5
    lr: float = 0.025
    min_lr: float = 0.0001
    subsample: float = 0.0
    use_joint: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negatives < 1 or self.epochs < 1:
            raise ValueError("dim, window, negatives and epochs must all be >= 1")
        if self.lambda_g < 0 or self.lambda_r < 0:
            raise ValueError("lambda_g and lambda_r must be >= 0")
        if self.lr <= 0 or self.min_lr < 0:
            raise ValueError("learning rates must be positive")
        if self.subsample < 0:
            raise ValueError("subsample threshold must be >= 0")


@dataclass
class EmbeddingModel:
    words: list[str]
    aspects: list[str]
    sentiments: list[str]
    center: np.ndarray
    context: np.ndarray
    docs: np.ndarray
    aspect_topics: np.ndarray
    sentiment_topics: np.ndarray
    joint_topics: np.ndarray
    schema: TopicSchema | None = None
    word_index: dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.word_index:
            self.word_index = {w: i for i, w in enumerate(self.words)}
        self.check_shapes()

    @classmethod
    def initialize(cls, vocab: Vocabulary, schema: TopicSchema, n_docs: int, dim: int, rng):
        n_v, n_a, n_s = len(vocab), len(schema.aspects), len(schema.sentiments)
        return cls(
            words=list(vocab.tokens),
            aspects=list(schema.aspects),
            sentiments=list(schema.sentiments),
            center=(rng.random((n_v, dim)) - 0.5) / dim,
            context=np.zeros((n_v, dim)),
            docs=np.zeros((n_docs, dim)),
            aspect_topics=np.zeros((n_a, dim)),
            sentiment_topics=np.zeros((n_s, dim)),
            joint_topics=np.zeros((n_s * n_a, dim)),
            schema=schema,
        )

    @property
    def dim(self) -> int:
        return self.center.shape[1]

    def check_shapes(self):
        n_v, dim = self.center.shape
        n_a, n_s = len(self.aspects), len(self.sentiments)
        expected = {
            "context": (n_v, dim),
            "aspect_topics": (n_a, dim),
            "sentiment_topics": (n_s, dim),
            "joint_topics": (n_s * n_a, dim),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.docs.ndim != 2 or self.docs.shape[1] != dim or len(self.words) != n_v:
            raise ValueError("docs/words inconsistent with center matrix")

    def is_finite(self) -> bool:
        return all(
            np.isfinite(m).all()
            for m in (self.center, self.context, self.docs, self.aspect_topics,
                      self.sentiment_topics, self.joint_topics)
        )

    def joint_row(self, sentiment: int, aspect: int) -> int:
        return sentiment * len(self.aspects) + aspect

    @property
    def joint_names(self) -> list[str]:
        return [f"{s}|{a}" for s in self.sentiments for a in self.aspects]

    def topic_names(self) -> list[str]:
        return [*self.aspects, *self.sentiments, *self.joint_names]

    def topic_vector(self, name: str) -> np.ndarray:
        """Look up a pure topic by label or a joint topic by ``sentiment|aspect``."""
        if "|" in name:
            names = self.joint_names
            if name in names:
                return self.joint_topics[names.index(name)]
        elif name in self.aspects:
            return self.aspect_topics[self.aspects.index(name)]
        elif name in self.sentiments:
            return self.sentiment_topics[self.sentiments.index(name)]
        raise KeyError(name)

    def topic_matrix(self, which: str) -> np.ndarray:
        try:
            return {
                "aspect": self.aspect_topics,
                "sentiment": self.sentiment_topics,
                "joint": self.joint_topics,
            }[which]
        except KeyError:
            raise ValueError(f"unknown topic set {which!r}") from None

    # -- serialization -----------------------------------------------------

    def save(self, path):
        n_a, n_s = len(self.aspects), len(self.sentiments)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(f"{MAGIC} {VERSION} {len(self.words)} {self.dim} {n_a} {n_s}\n")
            blocks = (
                ("WORDS", self.words, self.center),
                ("CONTEXT", self.words, self.context),
                ("DOCS", [str(i) for i in range(self.docs.shape[0])], self.docs),
                ("ASPECT_TOPICS", self.aspects, self.aspect_topics),
                ("SENT_TOPICS", self.sentiments, self.sentiment_topics),
                ("JOINT_TOPICS", self.joint_names, self.joint_topics),
            )
            for section, names, mat in blocks:
                f.write(f"{section} {len(names)}\n")
                for name, row in zip(names, mat):
                    f.write(name + " " + " ".join(format(x, ".9g") for x in row) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingModel":
        try:
            with open(path, encoding="utf-8") as f:
                lines = f.read().split("\n")
        except UnicodeDecodeError as exc:
            raise ModelFormatError(f"{path}: not a text embedding file") from exc
        head = lines[0].split()
        if len(head) != 6 or head[0] != MAGIC or head[1] != VERSION:
            raise ModelFormatError(f"{path}: bad header {lines[0][:60]!r}")
        try:
            n_v, dim, n_a, n_s = map(int, head[2:])
        except ValueError as exc:
            raise ModelFormatError(f"{path}: bad header counts") from exc
        pos = 1
        parsed = {}
        for section in _SECTIONS:
            if pos >= len(lines):
                raise ModelFormatError(f"{path}: missing section {section}")
            parts = lines[pos].split()
            if len(parts) != 2 or parts[0] != section:
                raise ModelFormatError(f"{path}:{pos + 1}: expected section {section}")
            count = int(parts[1])
            names, rows = [], np.empty((count, dim))
            for r in range(count):
                fields = lines[pos + 1 + r].split(" ") if pos + 1 + r < len(lines) else []
                if len(fields) != dim + 1:
                    raise ModelFormatError(f"{path}:{pos + 2 + r}: expected name + {dim} floats")
                names.append(fields[0])
                try:
                    rows[r] = [float(x) for x in fields[1:]]
                except ValueError as exc:
                    raise ModelFormatError(f"{path}:{pos + 2 + r}: {exc}") from exc
            parsed[section] = (names, rows)
            pos += 1 + count
        words = parsed["WORDS"][0]
        if len(words) != n_v or len(parsed["ASPECT_TOPICS"][0]) != n_a \
                or len(parsed["SENT_TOPICS"][0]) != n_s:
            raise ModelFormatError(f"{path}: section sizes disagree with header")
        try:
            return cls(
                words=words,
                aspects=parsed["ASPECT_TOPICS"][0],
                sentiments=parsed["SENT_TOPICS"][0],
                center=parsed["WORDS"][1],
                context=parsed["CONTEXT"][1],
                docs=parsed["DOCS"][1],
                aspect_topics=parsed["ASPECT_TOPICS"][1],
                sentiment_topics=parsed["SENT_TOPICS"][1],
                joint_topics=parsed["JOINT_TOPICS"][1],
            )
        except ValueError as exc:
            raise ModelFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# per-term losses on a model (reference path, used by tests and diagnostics)


def _rows(pairs):
    out: dict[int, np.ndarray] = {}
    for idx, g in pairs:
        idx = int(idx)
        out[idx] = out[idx] + g if idx in out else np.array(g, dtype=np.float64)
    return out


def local_loss_grad(model: EmbeddingModel, center_word: int, context_word: int,
                    negatives=(), exact: bool = False):
    """Local-context loss for one (center, context) pair.

    Negative-sampling form by default; ``exact=True`` uses the full softmax
    over the vocabulary and ignores ``negatives``. Gradients are returned as
    ``{matrix_name: {row: grad}}``.
    """
    u = model.center[center_word]
    if exact:
        loss, gu, gctx = losses.softmax_nll_grad(u, model.context, context_word)
        return loss, {"center": {center_word: gu}, "context": dict(enumerate(gctx))}
    negatives = list(negatives)
    loss, gu, gpos, gnegs = losses.sgns_loss_grad(
        u, model.context[context_word], model.context[negatives])
    ctx = _rows([(context_word, gpos), *zip(negatives, gnegs)])
    return loss, {"center": {center_word: gu}, "context": ctx}


def global_loss_grad(model: EmbeddingModel, word: int, document: int,
                     negative_documents=(), exact: bool = False):
    """Global-context loss: predict the document a word occurs in."""
    u = model.center[word]
    if exact:
        loss, gu, gdocs = losses.softmax_nll_grad(u, model.docs, document)
        return loss, {"center": {word: gu}, "docs": dict(enumerate(gdocs))}
    negative_documents = list(negative_documents)
    loss, gu, gpos, gnegs = losses.sgns_loss_grad(
        u, model.docs[document], model.docs[negative_documents])
    docs = _rows([(document, gpos), *zip(negative_documents, gnegs)])
    return loss, {"center": {word: gu}, "docs": docs}


def topic_posterior(model: EmbeddingModel, word_id: int, which: str) -> np.ndarray:
    """``P(t | w)`` over the aspect, sentiment or joint topic set."""
    return losses.softmax(model.topic_matrix(which) @ model.center[word_id])


def _topic_key(which):
    return {"aspect": "aspect_topics", "sentiment": "sentiment_topics", "joint": "joint_topics"}[which]


def pure_reg_loss_grad(model: EmbeddingModel, keyword_id: int, owner: int, which: str):
    topics = model.topic_matrix(which)
    loss, gu, gt = losses.topic_nll_grad(model.center[keyword_id], topics, owner)
    return loss, {"center": {keyword_id: gu}, _topic_key(which): dict(enumerate(gt))}


def joint_marginal(model: EmbeddingModel, word_id: int, dimension: str) -> np.ndarray:
    """Sum the joint posterior over the other dimension."""
    grid = topic_posterior(model, word_id, "joint").reshape(len(model.sentiments), len(model.aspects))
    if dimension == "aspect":
        return grid.sum(axis=0)
    if dimension == "sentiment":
        return grid.sum(axis=1)
    raise ValueError(f"unknown dimension {dimension!r}")


def joint_reg_loss_grad(model: EmbeddingModel, keyword_id: int, owner: int, dimension: str):
    loss, gu, gj = losses.joint_marginal_nll_grad(
        model.center[keyword_id], model.joint_topics,
        len(model.sentiments), len(model.aspects), owner, dimension)
    return loss, {"center": {keyword_id: gu}, "joint_topics": dict(enumerate(gj))}


def cross_reg_loss_grad(model: EmbeddingModel, keyword_id: int, other_dimension: str):
    """KL from uniform to the pure-topic posterior on the irrelevant dimension."""
    loss, gu, gt = losses.uniform_kl_grad(model.center[keyword_id], model.topic_matrix(other_dimension))
    return loss, {"center": {keyword_id: gu}, _topic_key(other_dimension): dict(enumerate(gt))}


# ---------------------------------------------------------------------------
# training


def init_topics(model: EmbeddingModel, schema: TopicSchema) -> EmbeddingModel:
    """Set each pure topic to the mean center vector of its keywords.

    Joint topics start at the midpoint of their two pure topics.
    """
    def mean_of(label, words):
        ids = [model.word_index[w] for w in words if w in model.word_index]
        if not ids:
            raise SchemaError(f"no in-vocabulary keywords for {label!r}")
        return model.center[ids].mean(axis=0)

    for i, a in enumerate(schema.aspects):
        model.aspect_topics[i] = mean_of(a, schema.aspect_keywords[a])
    for i, s in enumerate(schema.sentiments):
        model.sentiment_topics[i] = mean_of(s, schema.sentiment_keywords[s])
    for si in range(len(schema.sentiments)):
        for ai in range(len(schema.aspects)):
            model.joint_topics[model.joint_row(si, ai)] = (
                model.sentiment_topics[si] + model.aspect_topics[ai]) / 2.0
    return model


def _keyword_owners(schema: TopicSchema, vocab: Vocabulary):
    aspect_of = np.full(len(vocab), -1, dtype=np.int32)
    sent_of = np.full(len(vocab), -1, dtype=np.int32)
    for i, a in enumerate(schema.aspects):
        for w in schema.aspect_keywords[a]:
            aspect_of[vocab[w]] = i
    for i, s in enumerate(schema.sentiments):
        for w in schema.sentiment_keywords[s]:
            sent_of[vocab[w]] = i
    return aspect_of, sent_of


def _flatten(docs):
    lengths = np.array([len(d) for d in docs], dtype=np.int64)
    offsets = np.zeros(len(docs) + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    tokens = np.fromiter((t for d in docs for t in d.token_ids), dtype=np.int32, count=int(offsets[-1]))
    return tokens, offsets


def _subsample(tokens, offsets, keep_prob, rng):
    keep = rng.random(tokens.shape[0]) < keep_prob[tokens]
    kept_before = np.concatenate([[0], np.cumsum(keep)])
    return tokens[keep], kept_before[offsets].astype(np.int64)


def _seed64(rng) -> int:
    return int(rng.integers(0, 2**63, dtype=np.int64))


@dataclass
class EpochLosses:
    epoch: int
    local: float
    global_: float
    reg: float
    joint: float
    cross: float
    total: float

    def as_record(self) -> str:
        return (f"stage=embed epoch={self.epoch} local={self.local:.6f} global={self.global_:.6f} "
                f"reg={self.reg:.6f} joint={self.joint:.6f} cross={self.cross:.6f} total={self.total:.6f}")


def train_embeddings(docs: list[Document], vocab: Vocabulary, schema: TopicSchema,
                     hp: EmbedHyperparams | None = None, threads: int = 1, backend: str | None = None,
                     log=None):
    """Train word, document and topic vectors.

    The first epoch is context-only warm-up; topics are then initialized
    from keyword averages and the remaining epochs optimize the full
    objective. Returns ``(model, history)`` with one :class:`EpochLosses`
    per epoch. Single-threaded runs are bit-reproducible for a fixed seed.
    """
    hp = hp or EmbedHyperparams()
    if not docs or all(d.empty for d in docs):
        raise ValueError("cannot train embeddings on an empty corpus")
    if len(vocab) < 2:
        raise ValueError("vocabulary needs at least 2 tokens for negative sampling")
    schema = restrict_schema(schema, vocab)
    sweep = _backend.get_sweep(backend)
    rng = np.random.default_rng(hp.seed)
    model = EmbeddingModel.initialize(vocab, schema, len(docs), hp.dim, rng)

    tokens, offsets = _flatten(docs)
    counts = np.asarray(vocab.counts, dtype=np.float64)
    noise = counts ** 0.75
    cdf = np.cumsum(noise / noise.sum())
    aspect_of, sent_of = _keyword_owners(schema, vocab)
    keep_prob = None
    if hp.subsample > 0:
        freq = counts / counts.sum()
        keep_prob = np.minimum(1.0, np.sqrt(hp.subsample / freq) + hp.subsample / freq)

    n_tokens = int(tokens.shape[0])
    threads = max(1, int(threads))
    history = []
    for epoch in range(hp.epochs):
        order = rng.permutation(len(docs)).astype(np.int64)
        ep_tokens, ep_offsets = tokens, offsets
        if keep_prob is not None:
            ep_tokens, ep_offsets = _subsample(tokens, offsets, keep_prob, rng)
        use_topics = epoch > 0
        step = 1.0 / (hp.epochs * n_tokens)
        base = epoch / hp.epochs
        shards = np.array_split(order, threads) if threads > 1 else [order]
        seeds = [_seed64(rng) for _ in shards]
        buffers = [np.zeros(5) for _ in shards]
        args = (model.center, model.context, model.docs, model.aspect_topics,
                model.sentiment_topics, model.joint_topics, ep_tokens, ep_offsets)
        tail = (aspect_of, sent_of, cdf, hp.window, hp.negatives, hp.lambda_g, hp.lambda_r,
                use_topics, hp.use_joint, hp.lr, hp.min_lr)
        if len(shards) == 1:
            sweep(*args, np.ascontiguousarray(shards[0]), *tail, base, step, seeds[0], buffers[0])
        else:
            # relaxed consistency: workers update the shared matrices without locks
            workers = [
                threading.Thread(target=sweep, args=(
                    *args, np.ascontiguousarray(shard), *tail, base, step * len(shards), seed, buf))
                for shard, seed, buf in zip(shards, seeds, buffers)
            ]
            for t in workers:
                t.start()
            for t in workers:
                t.join()
        lsum = np.sum(buffers, axis=0)
        total = lsum[0] + hp.lambda_g * lsum[1] + hp.lambda_r * (lsum[2] + lsum[3] + lsum[4])
        rec = EpochLosses(epoch + 1, *map(float, lsum), float(total))
        if not all(math.isfinite(x) for x in lsum) or not model.is_finite():
            raise DivergenceError(f"non-finite loss or parameters in epoch {epoch + 1}: {rec}")
        history.append(rec)
        logger.info(rec.as_record())
        if log is not None:
            log(rec.as_record())
        if epoch == 0:
            init_topics(model, schema)
    model.schema = schema
    return model, history
