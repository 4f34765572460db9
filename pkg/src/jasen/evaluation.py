"""Accuracy and macro-averaged P/R/F1 for both sub-tasks, plus the keyword sweep."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import textcnn
from .corpus import TopicSchema, Vocabulary, encode_document, tokenize
from .textcnn import CnnModel


@dataclass
class LabeledExample:
    text: str
    gold_aspect: str
    gold_sentiment: str


@dataclass
class Metrics:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    per_class: dict | None = None

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
        }


def compute_metrics(predicted: Sequence, gold: Sequence, classes: Sequence) -> Metrics:
    """Accuracy plus unweighted per-class means of precision, recall and F1.

    Empty denominators count as 0, and every class in ``classes`` enters the
    macro mean, including classes that never occur.
    """
    if len(predicted) != len(gold):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(gold)} gold labels")
    classes = list(classes)
    pos = {c: i for i, c in enumerate(classes)}
    k = len(classes)
    conf = np.zeros((k, k), dtype=np.int64)  # conf[gold, pred]
    for p, g in zip(predicted, gold):
        conf[pos[g], pos[p]] += 1
    tp = np.diag(conf).astype(np.float64)
    pred_tot = conf.sum(axis=0)
    gold_tot = conf.sum(axis=1)
    prec = np.divide(tp, pred_tot, out=np.zeros(k), where=pred_tot > 0)
    rec = np.divide(tp, gold_tot, out=np.zeros(k), where=gold_tot > 0)
    denom = prec + rec
    f1 = np.divide(2 * prec * rec, denom, out=np.zeros(k), where=denom > 0)
    n = len(gold)
    return Metrics(
        accuracy=float(tp.sum() / n) if n else 0.0,
        macro_precision=float(prec.mean()),
        macro_recall=float(rec.mean()),
        macro_f1=float(f1.mean()),
        per_class={c: (float(prec[i]), float(rec[i]), float(f1[i])) for i, c in enumerate(classes)},
    )


def read_labeled(path) -> list[LabeledExample]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected text<TAB>aspect<TAB>sentiment")
            out.append(LabeledExample(*parts))
    return out


def predict_labels(texts: Sequence[str], cnn: CnnModel, vocab: Vocabulary, threads: int = 1):
    """Argmax class index and its probability per text.

    Texts with no in-vocabulary tokens get the model's fallback class with a
    uniform probability.
    """
    docs = [encode_document(tokenize(t), vocab, i) for i, t in enumerate(texts)]
    keep = [i for i, d in enumerate(docs) if not d.empty]
    labels = np.full(len(docs), cnn.fallback_class, dtype=np.int64)
    probs = np.full(len(docs), 1.0 / cnn.n_classes)
    if keep:
        q = textcnn.predict_batch([docs[i] for i in keep], cnn, threads=threads)
        labels[keep] = q.argmax(axis=1)
        probs[keep] = q.max(axis=1)
    return labels, probs


def evaluate_pipeline(examples: Sequence[LabeledExample], aspect_cnn: CnnModel,
                      sentiment_cnn: CnnModel, vocab: Vocabulary, aspects: Sequence[str],
                      sentiments: Sequence[str], threads: int = 1) -> tuple[Metrics, Metrics]:
    for ex in examples:
        if ex.gold_aspect not in aspects or ex.gold_sentiment not in sentiments:
            raise ValueError(f"unknown gold label in example {ex.text[:40]!r}")
    texts = [ex.text for ex in examples]
    a_idx, _ = predict_labels(texts, aspect_cnn, vocab, threads)
    s_idx, _ = predict_labels(texts, sentiment_cnn, vocab, threads)
    m_a = compute_metrics([aspects[i] for i in a_idx], [ex.gold_aspect for ex in examples], aspects)
    m_s = compute_metrics([sentiments[i] for i in s_idx], [ex.gold_sentiment for ex in examples], sentiments)
    return m_a, m_s


def format_metrics(aspect: Metrics, sentiment: Metrics) -> str:
    """Aligned table followed by a key=value block."""
    rows = [f"{'task':<10}{'accuracy':>10}{'precision':>11}{'recall':>9}{'macro_f1':>10}"]
    for name, m in (("aspect", aspect), ("sentiment", sentiment)):
        rows.append(f"{name:<10}{m.accuracy:>10.4f}{m.macro_precision:>11.4f}"
                    f"{m.macro_recall:>9.4f}{m.macro_f1:>10.4f}")
    rows.append("")
    for name, m in (("aspect", aspect), ("sentiment", sentiment)):
        rows += [f"{name}.{k}={v:.6f}" for k, v in m.as_dict().items()]
    return "\n".join(rows) + "\n"


def keyword_sweep(schema: TopicSchema, ks: Sequence[int], run) -> list[tuple[int, float]]:
    """Aspect macro-F1 for each keyword budget ``k``.

    ``run`` maps a truncated schema to an aspect :class:`Metrics`; the
    keyword lists keep their first ``k`` entries.
    """
    rows = []
    for k in ks:
        if k < 1:
            raise ValueError("keyword count k must be >= 1")
        rows.append((k, run(schema.truncated(k)).macro_f1))
    return rows
