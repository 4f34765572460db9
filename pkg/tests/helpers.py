"""Shared oracles for the test-suite: central finite differences and tiny models."""

import numpy as np

from jasen.corpus import TopicSchema
from jasen.embedding import EmbeddingModel

FD_STEP = 1e-5


def rel_error(analytic, numeric, floor=1e-6):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def numeric_grad(f, x, step=FD_STEP):
    """Central differences of scalar ``f()`` w.r.t. every entry of array ``x`` (mutated in place)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + step
        up = f()
        x[i] = old - step
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * step)
    return g


def densify(rows, shape):
    out = np.zeros(shape)
    for r, g in rows.items():
        out[r] += g
    return out


def check_model_grad(model, loss_fn):
    """Max relative error between ``loss_fn(model) -> (loss, grads)`` and finite differences."""
    _, grads = loss_fn(model)
    worst = 0.0
    for name, rows in grads.items():
        mat = getattr(model, name)
        numeric = numeric_grad(lambda: loss_fn(model)[0], mat)
        worst = max(worst, rel_error(densify(rows, mat.shape), numeric))
    return worst


def tiny_schema(n_aspects=3, n_sentiments=2):
    aspects = [f"a{i}" for i in range(n_aspects)]
    sentiments = [f"s{i}" for i in range(n_sentiments)]
    return TopicSchema(aspects, sentiments,
                       {a: [f"kw_{a}"] for a in aspects},
                       {s: [f"kw_{s}"] for s in sentiments})


def random_model(seed=0, n_vocab=10, dim=8, n_docs=4, n_aspects=3, n_sentiments=2, scale=0.5):
    rng = np.random.default_rng(seed)
    schema = tiny_schema(n_aspects, n_sentiments)

    def r(*shape):
        return rng.normal(scale=scale, size=shape)

    return EmbeddingModel(
        words=[f"w{i}" for i in range(n_vocab)],
        aspects=list(schema.aspects),
        sentiments=list(schema.sentiments),
        center=r(n_vocab, dim),
        context=r(n_vocab, dim),
        docs=r(n_docs, dim),
        aspect_topics=r(n_aspects, dim),
        sentiment_topics=r(n_sentiments, dim),
        joint_topics=r(n_aspects * n_sentiments, dim),
        schema=schema,
    )


def zero_model(**kw):
    m = random_model(**kw)
    for name in ("center", "context", "docs", "aspect_topics", "sentiment_topics", "joint_topics"):
        getattr(m, name)[:] = 0.0
    return m
