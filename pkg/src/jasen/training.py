"""Distillation pre-training and self-training of the two CNN heads."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import textcnn
from .corpus import Document, TopicSchema, Vocabulary
from .embedding import EmbeddingModel, EmbedHyperparams, train_embeddings
from .inference import EmptyDocumentError, embed_predict
from .textcnn import CnnHyperparams, CnnModel

logger = logging.getLogger(__name__)

HEADS = ("aspect", "sentiment")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        super().__init__(f"[{stage}] {cause}")


def target_distribution(predictions) -> np.ndarray:
    """Sharpen predictions: square, divide by class frequency, renormalize.

    Class frequency is the column sum over every row passed in. A class with
    zero total mass gets a zero target column.
    """
    P = np.asarray(predictions, dtype=np.float64)
    if P.ndim != 2:
        raise ValueError("predictions must be a 2-D array")
    f = P.sum(axis=0)
    weight = np.zeros_like(f)
    np.divide(1.0, f, out=weight, where=f > 0)
    T = P * P * weight
    z = T.sum(axis=1, keepdims=True)
    if np.any(z <= 0):
        raise ValueError("a row has no mass left after sharpening")
    return T / z


def soft_labels(docs, model: EmbeddingModel, head: str, temperature: float = 20.0,
                scoring: str = "combined") -> np.ndarray:
    n = len(model.aspects) if head == "aspect" else len(model.sentiments)
    out = np.empty((len(docs), n))
    for i, d in enumerate(docs):
        try:
            pred = embed_predict(d, model, temperature, scoring)
            out[i] = pred.aspect_dist if head == "aspect" else pred.sentiment_dist
        except EmptyDocumentError:
            out[i] = 1.0 / n
    return out


def pretrain(docs, emb: EmbeddingModel, cnn: CnnModel, head: str, temperature: float = 20.0,
             hp: CnnHyperparams | None = None, scoring: str = "combined", log=None):
    """Distill embedding-based soft labels into ``cnn``; returns per-epoch losses.

    Stops early once an epoch improves the loss by less than
    ``hp.min_improvement``.
    """
    hp = hp or CnnHyperparams()
    if head not in HEADS:
        raise ValueError(f"head must be one of {HEADS}")
    docs = [d for d in docs if len(d) > 0]
    if not docs:
        raise ValueError("no non-empty documents to pre-train on")
    targets = soft_labels(docs, emb, head, temperature, scoring)
    rng = np.random.default_rng(hp.seed)
    history = []
    for epoch in range(hp.pretrain_epochs):
        loss = textcnn.train_epoch(cnn, docs, targets, hp, rng)
        history.append(loss)
        if log:
            log(f"stage=pretrain head={head} epoch={epoch + 1} loss={loss:.6f}")
        if epoch > 0 and history[-2] - loss < hp.min_improvement:
            break
    return history


@dataclass
class SelfTrainResult:
    losses: list[float] = field(default_factory=list)
    change_rates: list[float] = field(default_factory=list)

    @property
    def epochs(self) -> int:
        return len(self.change_rates)


def self_train(docs, cnn: CnnModel, hp: CnnHyperparams | None = None, head: str = "",
               threads: int = 1, log=None) -> SelfTrainResult:
    """Refine ``cnn`` on its own sharpened predictions until labels stabilize.

    Each epoch: predict all documents, build targets, train one epoch, and
    measure the fraction of documents whose argmax label changed. Stops when
    that fraction drops below ``hp.change_threshold`` or at the epoch cap.
    """
    hp = hp or CnnHyperparams()
    docs = [d for d in docs if len(d) > 0]
    result = SelfTrainResult()
    if not docs:
        return result
    rng = np.random.default_rng(hp.seed + 1)
    q = textcnn.predict_batch(docs, cnn, threads=threads)
    for epoch in range(hp.max_self_train_epochs):
        labels = q.argmax(axis=1)
        targets = target_distribution(q)
        loss = textcnn.train_epoch(cnn, docs, targets, hp, rng)
        q = textcnn.predict_batch(docs, cnn, threads=threads)
        rate = float(np.mean(q.argmax(axis=1) != labels))
        result.losses.append(loss)
        result.change_rates.append(rate)
        if log:
            log(f"stage=selftrain head={head} epoch={epoch + 1} loss={loss:.6f} change_rate={rate:.6f}")
        if rate < hp.change_threshold:
            break
    return result


@dataclass
class PipelineConfig:
    embed: EmbedHyperparams = field(default_factory=EmbedHyperparams)
    cnn: CnnHyperparams = field(default_factory=CnnHyperparams)
    temperature: float = 20.0
    scoring: str = "combined"
    threads: int = 1
    self_train: bool = True

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")


@dataclass
class PipelineResult:
    embedding: EmbeddingModel
    aspect_cnn: CnnModel
    sentiment_cnn: CnnModel
    vocab: Vocabulary
    embed_history: list
    pretrain_losses: dict[str, list[float]]
    self_train: dict[str, SelfTrainResult]
    pretrained: dict[str, CnnModel]

    def cnn(self, head):
        return self.aspect_cnn if head == "aspect" else self.sentiment_cnn


def run_pipeline(docs: list[Document], vocab: Vocabulary, schema: TopicSchema,
                 config: PipelineConfig | None = None, log=None) -> PipelineResult:
    """Embeddings, then pre-training and self-training for both heads.

    A failing stage is re-raised as :class:`StageError` naming the stage.
    ``pretrained`` keeps a copy of each CNN before self-training.
    """
    config = config or PipelineConfig()
    scoring = config.scoring if config.embed.use_joint else "marginal"
    try:
        emb, history = train_embeddings(docs, vocab, schema, config.embed,
                                        threads=config.threads, log=log)
    except Exception as exc:
        raise StageError("embedding", exc) from exc

    cnns, pre_losses, pretrained, st = {}, {}, {}, {}
    train_docs = [d for d in docs if len(d) > 0]
    for k, head in enumerate(HEADS):
        n_classes = len(emb.aspects) if head == "aspect" else len(emb.sentiments)
        hp = CnnHyperparams(**{**config.cnn.__dict__, "seed": config.cnn.seed + 17 * k})
        cnn = CnnModel.initialize(emb.center, n_classes, np.random.default_rng(hp.seed))
        try:
            pre_losses[head] = pretrain(train_docs, emb, cnn, head, config.temperature, hp,
                                        scoring, log=log)
        except Exception as exc:
            raise StageError(f"pretrain-{head}", exc) from exc
        pretrained[head] = cnn.copy()
        try:
            st[head] = (self_train(train_docs, cnn, hp, head, config.threads, log=log)
                        if config.self_train else SelfTrainResult())
        except Exception as exc:
            raise StageError(f"selftrain-{head}", exc) from exc
        labels = textcnn.predict_batch(train_docs, cnn).argmax(axis=1)
        cnn.fallback_class = int(np.bincount(labels, minlength=n_classes).argmax())
        cnns[head] = cnn
    return PipelineResult(emb, cnns["aspect"], cnns["sentiment"], vocab, history,
                          pre_losses, st, pretrained)
