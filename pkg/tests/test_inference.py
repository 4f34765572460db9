import numpy as np
import pytest
from helpers import random_model, zero_model
from hypothesis import given, settings
from hypothesis import strategies as st

from jasen.corpus import Document
from jasen.inference import (
    EmptyDocumentError,
    document_vector,
    embed_predict,
    format_projection,
    principal_components,
    project_2d,
    project_topics_2d,
    top_terms,
)


class TestDocumentVector:
    def test_identical_vectors(self):
        m = random_model(0)
        m.center[[1, 2, 3]] = m.center[1]
        np.testing.assert_allclose(document_vector([1, 2, 3], m), m.center[1])

    def test_mean(self):
        m = zero_model(dim=2)
        m.center[0] = [1, 0]
        m.center[1] = [0, 1]
        np.testing.assert_array_equal(document_vector(Document(0, (0, 1)), m), [0.5, 0.5])

    def test_permutation(self):
        m = random_model(1)
        np.testing.assert_allclose(document_vector([4, 1, 7, 1], m), document_vector([1, 7, 1, 4], m))

    def test_empty(self):
        with pytest.raises(EmptyDocumentError):
            document_vector(Document(0, ()), random_model(0))


class TestEmbedPredict:
    def test_equal_cosines_uniform(self):
        m = zero_model(dim=3)
        m.center[0] = [1, 0, 0]
        m.aspect_topics[:] = [0, 1, 0]
        m.sentiment_topics[:] = [0, 0, 1]
        m.joint_topics[:] = [0, 1, 1]
        for temp in (0.5, 1, 20):
            p = embed_predict([0], m, temp)
            np.testing.assert_allclose(p.aspect_dist, 1 / 3)
            np.testing.assert_allclose(p.sentiment_dist, 1 / 2)

    def test_hand_value(self):
        # |A|=2, |S|=1 is below the schema minimum, so build the matrices directly
        m = zero_model(dim=2, n_aspects=2, n_sentiments=2)
        m.sentiments = ["s"]
        m.sentiment_topics = np.array([[0.0, 1.0]])
        m.joint_topics = np.array([[0.0, 1.0], [0.0, 1.0]])
        m.center[0] = [1, 0]
        m.aspect_topics[:] = [[1, 0], [0, 1]]
        p = embed_predict([0], m, 1.0)
        assert np.round(p.aspect_dist, 6).tolist() == [0.731059, 0.268941]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.01, 100), st.floats(0.01, 100))
    def test_argmax_temperature_and_scale_invariant(self, seed, temp, c):
        m = random_model(seed)
        doc = [0, 3, 5]
        base = embed_predict(doc, m, 1.0)
        p = embed_predict(doc, m, temp)
        assert p.aspect_dist.argmax() == base.aspect_dist.argmax()
        assert abs(p.aspect_dist.sum() - 1) < 1e-9 and abs(p.sentiment_dist.sum() - 1) < 1e-9
        m2 = random_model(seed)
        m2.center *= c
        q = embed_predict(doc, m2, temp)
        np.testing.assert_allclose(q.aspect_dist, p.aspect_dist, atol=1e-9)

    def test_variants(self):
        m = random_model(3)
        for variant in ("combined", "joint", "marginal"):
            p = embed_predict([1, 2], m, 20, scoring=variant)
            assert abs(p.aspect_dist.sum() - 1) < 1e-9
        with pytest.raises(ValueError):
            embed_predict([1], m, 20, scoring="other")
        with pytest.raises(ValueError):
            embed_predict([1], m, 0)

    def test_zero_norm(self):
        m = zero_model()
        with pytest.raises(EmptyDocumentError):
            embed_predict([0], m)


class TestTopTerms:
    def test_self_similarity_first(self):
        m = random_model(2)
        m.joint_topics[4] = m.center[6]
        assert top_terms(m, m.joint_names[4], 1) == [m.words[6]]

    def test_tie_break_by_id(self):
        m = zero_model(dim=2)
        m.center[:] = [1, 0]
        assert top_terms(m, np.array([1.0, 0.0]), 3) == ["w0", "w1", "w2"]

    def test_unknown_and_bad_n(self):
        m = random_model(2)
        with pytest.raises(KeyError):
            top_terms(m, "goood|a0", 3)
        with pytest.raises(ValueError):
            top_terms(m, "a0", 0)


def _pairwise(X):
    return np.linalg.norm(X[:, None] - X[None], axis=2)


class TestProjection:
    def test_2d_is_rotation(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(7, 2))
        X -= X.mean(axis=0)
        np.testing.assert_allclose(_pairwise(project_2d(X)), _pairwise(X), atol=1e-6)

    def test_identical_points(self):
        X = np.tile([1.0, 2.0, 3.0], (5, 1))
        np.testing.assert_array_equal(project_2d(X), 0.0)

    def test_collinear(self):
        X = np.array([[0.0, 0, 0], [1, 2, 3], [2, 4, 6]])
        out = project_2d(X)
        np.testing.assert_array_equal(out[:, 1], 0.0)
        np.testing.assert_allclose(np.abs(out[:, 0]), np.array([1, 0, 1]) * np.sqrt(14), atol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_eigh(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(11, 6)) * np.array([5, 3, 1, 0.5, 0.2, 0.1])
        comps, vals = principal_components(X, 2)
        Xc = X - X.mean(axis=0)
        w, v = np.linalg.eigh(Xc.T @ Xc / (len(X) - 1))
        np.testing.assert_allclose(vals, w[::-1][:2], rtol=1e-6)
        for k in range(2):
            assert abs(abs(comps[k] @ v[:, -1 - k]) - 1) < 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_variance_beats_random_projections(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(11, 8)) @ rng.normal(size=(8, 8))
        Xc = X - X.mean(axis=0)
        captured = project_2d(X).var(axis=0).sum()
        for _ in range(200):
            Q, _ = np.linalg.qr(rng.normal(size=(8, 2)))
            assert (Xc @ Q).var(axis=0).sum() <= captured + 1e-9

    def test_topics_rows_and_format(self):
        m = random_model(0)
        rows = project_topics_2d(m)
        assert len(rows) == 3 + 2 + 6
        assert [r[0] for r in rows] == m.topic_names()
        lines = format_projection(rows).splitlines()
        assert lines[0].split("\t")[0] == "a0" and len(lines[0].split("\t")) == 3
