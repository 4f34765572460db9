"""Weakly-supervised aspect/sentiment classification from keywords.

Joint (sentiment, aspect) topic embeddings are learned from an unlabeled
corpus, turned into soft labels, distilled into two small text CNNs and
refined by self-training.
"""

from .backend import BACKEND
from .corpus import (
    Document,
    TopicSchema,
    Vocabulary,
    build_vocabulary,
    encode_document,
    parse_schema,
    tokenize,
)
from .embedding import EmbedHyperparams, EmbeddingModel, train_embeddings

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Document",
    "EmbedHyperparams",
    "EmbeddingModel",
    "TopicSchema",
    "Vocabulary",
    "build_vocabulary",
    "encode_document",
    "parse_schema",
    "tokenize",
    "train_embeddings",
]
