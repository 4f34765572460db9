"""Embedding-space predictions, representative terms and topic projection."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import Document
from .embedding import EmbeddingModel
from .losses import softmax

logger = logging.getLogger(__name__)

SCORING_VARIANTS = ("combined", "joint", "marginal")


class EmptyDocumentError(ValueError):
    pass


@dataclass
class SoftPrediction:
    aspect_dist: np.ndarray
    sentiment_dist: np.ndarray

    @classmethod
    def uniform(cls, n_aspects: int, n_sentiments: int) -> "SoftPrediction":
        return cls(np.full(n_aspects, 1.0 / n_aspects), np.full(n_sentiments, 1.0 / n_sentiments))


def _ids(doc):
    return list(doc.token_ids) if isinstance(doc, Document) else list(doc)


def document_vector(doc, model: EmbeddingModel) -> np.ndarray:
    """Mean center vector of the document's tokens."""
    ids = _ids(doc)
    if not ids:
        raise EmptyDocumentError("document has no in-vocabulary tokens")
    return model.center[ids].mean(axis=0)


def _cosines(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(mat, axis=1) * np.linalg.norm(vec)
    out = np.zeros(mat.shape[0])
    ok = norms > 0
    out[ok] = (mat[ok] @ vec) / norms[ok]
    return out


def embed_scores(d: np.ndarray, model: EmbeddingModel, scoring: str = "combined"):
    """Cosine scores per aspect and per sentiment before temperature and softmax.

    ``combined`` adds the pure-topic cosine to the mean joint-topic cosine
    over the other dimension; ``joint`` and ``marginal`` keep one part only.
    """
    if scoring not in SCORING_VARIANTS:
        raise ValueError(f"scoring must be one of {SCORING_VARIANTS}")
    if not np.linalg.norm(d) > 0:
        raise EmptyDocumentError("zero-norm document vector")
    n_s, n_a = len(model.sentiments), len(model.aspects)
    a_score = np.zeros(n_a)
    s_score = np.zeros(n_s)
    if scoring in ("combined", "marginal"):
        a_score += _cosines(model.aspect_topics, d)
        s_score += _cosines(model.sentiment_topics, d)
    if scoring in ("combined", "joint"):
        grid = _cosines(model.joint_topics, d).reshape(n_s, n_a)
        a_score += grid.mean(axis=0)
        s_score += grid.mean(axis=1)
    return a_score, s_score


def embed_predict(doc, model: EmbeddingModel, temperature: float = 20.0,
                  scoring: str = "combined") -> SoftPrediction:
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    a_score, s_score = embed_scores(document_vector(doc, model), model, scoring)
    return SoftPrediction(softmax(temperature * a_score), softmax(temperature * s_score))


def top_terms(model: EmbeddingModel, topic: str | np.ndarray, n: int = 10) -> list[str]:
    """Vocabulary words ranked by cosine similarity to a topic vector.

    ``topic`` is a topic name (``food``, ``good|food``) or a raw vector.
    Keywords are not excluded. Ties go to the lower token id.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    vec = model.topic_vector(topic) if isinstance(topic, str) else np.asarray(topic, dtype=np.float64)
    sims = _cosines(model.center, vec)
    order = np.lexsort((np.arange(sims.shape[0]), -sims))
    return [model.words[i] for i in order[:n]]


def _power_iteration(cov, rng, max_iter, tol, against=None):
    v = rng.standard_normal(cov.shape[0])
    if against is not None:
        v -= (v @ against) * against
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = cov @ v
        if against is not None:
            w -= (w @ against) * against
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return v, 0.0
        w /= norm
        lam = float(w @ cov @ w)
        done = min(np.linalg.norm(w - v), np.linalg.norm(w + v)) < tol
        v = w
        if done:
            break
    return v, lam


def principal_components(X: np.ndarray, k: int = 2, max_iter: int = 200, tol: float = 1e-10,
                         seed: int = 0):
    """Top-k eigenvectors of the covariance of ``X`` by power iteration with deflation.

    Returns ``(components, eigenvalues)``; components are rows.
    """
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / max(X.shape[0] - 1, 1)
    rng = np.random.default_rng(seed)
    comps, vals = [], []
    work = cov.copy()
    for _ in range(k):
        v, lam = _power_iteration(work, rng, max_iter, tol)
        for prev in comps:  # guard against drift when eigenvalues are close
            v -= (v @ prev) * prev
        nv = np.linalg.norm(v)
        v = v / nv if nv > 0 else v
        lam = float(v @ cov @ v)
        comps.append(v)
        vals.append(lam)
        work = work - lam * np.outer(v, v)
    return np.array(comps), np.array(vals)


def project_topics_2d(model: EmbeddingModel, max_iter: int = 200, tol: float = 1e-10):
    """2-D PCA coordinates of every pure and joint topic vector: ``[(name, x, y)]``."""
    names = model.topic_names()
    X = np.vstack([model.aspect_topics, model.sentiment_topics, model.joint_topics])
    coords = project_2d(X, max_iter, tol)
    return [(name, float(x), float(y)) for name, (x, y) in zip(names, coords)]


def project_2d(X: np.ndarray, max_iter: int = 200, tol: float = 1e-10) -> np.ndarray:
    if X.shape[0] < 2:
        raise ValueError("need at least 2 points to project")
    Xc = X - X.mean(axis=0)
    comps, vals = principal_components(X, 2, max_iter, tol)
    scale = max(float(vals[0]), 0.0)
    out = np.zeros((X.shape[0], 2))
    if scale <= 1e-24:
        return out
    out[:, 0] = Xc @ comps[0]
    if vals[1] <= 1e-12 * scale:
        logger.warning("topic matrix has rank < 2; second coordinate set to 0")
    else:
        out[:, 1] = Xc @ comps[1]
    return out


def format_projection(rows) -> str:
    return "".join(f"{name}\t{x:.6f}\t{y:.6f}\n" for name, x, y in rows)
