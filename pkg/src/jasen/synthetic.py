"""Planted-topic review generator with known (sentiment, aspect) labels.

Each joint topic owns a block of exclusive terms; aspects and sentiments
also own a few seed terms that double as the keyword schema.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import TopicSchema

ASPECT_SEEDS = {
    "food": ["food", "pizza", "sushi", "taste", "dish"],
    "service": ["service", "waiter", "staff", "manager", "waitress"],
    "ambience": ["ambience", "decor", "music", "atmosphere", "lighting"],
}
SENTIMENT_SEEDS = {
    "good": ["good", "great", "nice", "excellent", "amazing"],
    "bad": ["bad", "terrible", "awful", "horrible", "rude"],
}


@dataclass
class SyntheticCorpus:
    schema: TopicSchema
    train_texts: list[str]
    train_labels: list[tuple[str, str]]  # (aspect, sentiment)
    test_texts: list[str]
    test_labels: list[tuple[str, str]]
    planted: dict[str, list[str]]  # "sentiment|aspect" -> exclusive terms


def joint_term(sentiment: str, aspect: str, k: int) -> str:
    return f"{sentiment}{aspect}{k:02d}"


def generate(n_train=2000, n_test=300, terms_per_topic=20, n_background=40,
             min_len=8, max_len=15, p_joint=0.35, p_aspect_seed=0.08, p_sent_seed=0.08,
             p_noise=0.12, n_keywords=4, seed=0) -> SyntheticCorpus:
    """Sample documents; every token is drawn independently from a topic mixture.

    Per token: an exclusive term of the document's joint topic (``p_joint``),
    an aspect seed, a sentiment seed, an exclusive term of a random other
    joint topic (``p_noise``), or a shared background word.
    """
    rng = np.random.default_rng(seed)
    aspects, sentiments = list(ASPECT_SEEDS), list(SENTIMENT_SEEDS)
    planted = {
        f"{s}|{a}": [joint_term(s, a, k) for k in range(terms_per_topic)]
        for s in sentiments for a in aspects
    }
    joint_keys = list(planted)
    background = [f"filler{k:02d}" for k in range(n_background)]
    probs = np.array([p_joint, p_aspect_seed, p_sent_seed, p_noise])
    probs = np.append(probs, 1.0 - probs.sum())

    def sample(n):
        texts, labels = [], []
        for _ in range(n):
            s = sentiments[rng.integers(len(sentiments))]
            a = aspects[rng.integers(len(aspects))]
            key = f"{s}|{a}"
            length = int(rng.integers(min_len, max_len + 1))
            toks = []
            for kind in rng.choice(5, size=length, p=probs):
                if kind == 0:
                    pool = planted[key]
                elif kind == 1:
                    pool = ASPECT_SEEDS[a]
                elif kind == 2:
                    pool = SENTIMENT_SEEDS[s]
                elif kind == 3:
                    other = [k for k in joint_keys if k != key]
                    pool = planted[other[rng.integers(len(other))]]
                else:
                    pool = background
                toks.append(pool[rng.integers(len(pool))])
            texts.append(" ".join(toks))
            labels.append((a, s))
        return texts, labels

    train_texts, train_labels = sample(n_train)
    test_texts, test_labels = sample(n_test)
    schema = TopicSchema(
        aspects, sentiments,
        {a: ASPECT_SEEDS[a][:n_keywords] for a in aspects},
        {s: SENTIMENT_SEEDS[s][:n_keywords] for s in sentiments},
    )
    return SyntheticCorpus(schema, train_texts, train_labels, test_texts, test_labels, planted)


def write_fixture(corpus: SyntheticCorpus, directory) -> dict[str, str]:
    """Write corpus.txt, schema.txt and test.tsv; return their paths."""
    import os

    os.makedirs(directory, exist_ok=True)
    paths = {
        "corpus": os.path.join(directory, "corpus.txt"),
        "schema": os.path.join(directory, "schema.txt"),
        "test": os.path.join(directory, "test.tsv"),
    }
    with open(paths["corpus"], "w", encoding="utf-8") as f:
        f.writelines(t + "\n" for t in corpus.train_texts)
    with open(paths["schema"], "w", encoding="utf-8") as f:
        f.write(corpus.schema.to_text())
    with open(paths["test"], "w", encoding="utf-8") as f:
        for t, (a, s) in zip(corpus.test_texts, corpus.test_labels):
            f.write(f"{t}\t{a}\t{s}\n")
    return paths
