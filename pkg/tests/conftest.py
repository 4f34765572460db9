import numpy as np
import pytest

from jasen import corpus, synthetic
from jasen.embedding import EmbedHyperparams
from jasen.textcnn import CnnHyperparams
from jasen.training import PipelineConfig, run_pipeline


@pytest.fixture(scope="session")
def planted():
    """Default-size planted-topic corpus (2000 train / 300 test)."""
    return synthetic.generate(seed=0)


@pytest.fixture(scope="session")
def planted_encoded(planted):
    vocab = corpus.build_vocabulary((corpus.tokenize(t) for t in planted.train_texts), 3)
    docs = corpus.encode_corpus(planted.train_texts, vocab)
    test = corpus.encode_corpus(planted.test_texts, vocab)
    return vocab, docs, test


@pytest.fixture(scope="session")
def small_planted():
    """A small planted corpus for quick end-to-end checks."""
    sc = synthetic.generate(n_train=400, n_test=100, seed=3)
    vocab = corpus.build_vocabulary((corpus.tokenize(t) for t in sc.train_texts), 2)
    docs = corpus.encode_corpus(sc.train_texts, vocab)
    return sc, vocab, docs


@pytest.fixture(scope="session")
def small_run(small_planted):
    sc, vocab, docs = small_planted
    cfg = PipelineConfig(embed=EmbedHyperparams(dim=20, epochs=3),
                         cnn=CnnHyperparams(pretrain_epochs=3, max_self_train_epochs=5))
    return run_pipeline(docs, vocab, sc.schema, cfg)


def gold_indices(labels, schema):
    a = np.array([schema.aspects.index(x) for x, _ in labels])
    s = np.array([schema.sentiments.index(y) for _, y in labels])
    return a, s
