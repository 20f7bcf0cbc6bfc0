"""Topic clustering, determinant mapping, and weekly quantification."""

import json
import math
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from side.core import Document, Source
from side.dsiq import (
    DETERMINANT_NAMES,
    KEYWORDS_PER_TOPIC,
    OTHER_INDEX,
    DeterminantSet,
    LexiconBackend,
    LlmBackend,
    TopicCluster,
    TopicModel,
    build_impact_series,
    cluster_keywords,
    fit_topic_model,
    kmeans,
    load_lexicon,
    map_topic,
    quantify,
    read_impact_csv,
    tokenize,
    vectorize,
    write_impact_csv,
)

DETS = DeterminantSet()


def doc(i, text, source=Source.SOCIAL, timestep=0):
    return Document(id=f"d{i}", timestep=timestep, text=text, source=source)


class TestVectorize:
    def test_identical_documents_get_identical_vectors(self):
        docs = [doc(0, "dry crop fields"), doc(1, "dry crop fields")]
        _, vectors = vectorize(docs)
        np.testing.assert_array_equal(vectors[0], vectors[1])

    def test_term_in_every_document_weighs_zero(self):
        # ln(N/N) = 0, so the shared term contributes nothing
        docs = [doc(0, "drought crop crop"), doc(1, "drought wells wells"), doc(2, "drought crop wells")]
        vocab, vectors = vectorize(docs)
        assert vectors[:, vocab["drought"]].max() == 0.0
        assert vectors[:, vocab["crop"]].max() > 0.0

    def test_self_cosine_is_one(self):
        docs = [doc(0, "crop crop harvest"), doc(1, "wells water"), doc(2, "crop wells water harvest")]
        _, vectors = vectorize(docs)
        for row in vectors:
            if row.any():
                assert math.isclose(float(row @ row), 1.0, abs_tol=1e-12)

    def test_rare_terms_excluded(self):
        docs = [doc(0, "crop unique1"), doc(1, "crop unique2")]
        vocab, _ = vectorize(docs)
        assert "crop" in vocab
        assert "unique1" not in vocab and "unique2" not in vocab

    def test_stopwords_excluded(self):
        docs = [doc(0, "the crop and the field"), doc(1, "the crop of the field")]
        vocab, _ = vectorize(docs)
        assert "the" not in vocab and "and" not in vocab

    def test_empty_vocabulary_is_error(self):
        docs = [doc(0, "alpha"), doc(1, "beta")]
        with pytest.raises(ValueError, match="vocabulary"):
            vectorize(docs)


class TestKmeans:
    def test_two_blobs_recovered(self):
        # brute-force oracle: every point must sit with its nearest centroid
        rng = np.random.default_rng(3)
        blob_a = rng.normal(0.0, 0.05, size=(20, 2)) + np.array([1.0, 0.0])
        blob_b = rng.normal(0.0, 0.05, size=(20, 2)) + np.array([0.0, 1.0])
        points = np.vstack([blob_a, blob_b])
        assignments, centroids = kmeans(points, 2, seed=0)

        labels = np.array([0] * 20 + [1] * 20)
        first = assignments[0]
        assert np.all(assignments[:20] == first)
        assert np.all(assignments[20:] == 1 - first)
        del labels
        for i, point in enumerate(points):
            dists = ((centroids - point) ** 2).sum(axis=1)
            assert assignments[i] == int(np.argmin(dists))

    def test_more_clusters_than_points_gives_singletons(self):
        points = np.array([[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]])
        assignments, centroids = kmeans(points, 50, seed=0)
        assert centroids.shape[0] == 3
        assert sorted(assignments.tolist()) == [0, 1, 2]

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(11)
        points = rng.normal(size=(40, 6))
        a1, c1 = kmeans(points, 5, seed=7)
        a2, c2 = kmeans(points, 5, seed=7)
        assert np.array_equal(a1, a2) and np.array_equal(c1, c2)


class TestClusterKeywords:
    def test_discriminative_terms_ranked_first(self):
        clusters = [
            [["crop", "crop", "harvest", "shared"], ["crop", "shared"]],
            [["wells", "water", "shared"], ["water", "shared", "shared"]],
        ]
        vocab = {"crop": 0, "harvest": 1, "shared": 2, "water": 3, "wells": 4}
        keywords = cluster_keywords(clusters, vocab)
        assert keywords[0][0] == "crop"
        assert "shared" not in keywords[0]  # appears in every cluster, idf 0
        assert keywords[1][0] == "water"

    def test_single_cluster_falls_back_to_frequency(self):
        clusters = [[["crop", "crop", "harvest"]]]
        vocab = {"crop": 0, "harvest": 1}
        keywords = cluster_keywords(clusters, vocab)
        assert keywords[0] == ("crop", "harvest")

    def test_top_limit(self):
        terms = [f"t{i}" for i in range(20)]
        clusters = [[terms], [["other"]]]
        vocab = {t: i for i, t in enumerate(terms + ["other"])}
        keywords = cluster_keywords(clusters, vocab)
        assert len(keywords[0]) == KEYWORDS_PER_TOPIC


class TestMapTopic:
    def test_agriculture_keywords_match_lexicon_cosine_oracle(self):
        # independent oracle: binary-set cosine against the shipped lexicon
        keywords = ["crop", "harvest", "irrigation"]
        lexicon = load_lexicon()
        backend = LexiconBackend(lexicon)
        oracle = []
        for name in DETS.names:
            lex = set(lexicon.get(name, []))
            inter = len(set(keywords) & lex)
            oracle.append(inter / math.sqrt(len(keywords) * len(lex)) if lex else 0.0)
        assert np.argmax(oracle) == DETS.names.index("Agriculture")
        assert oracle[0] == 3 / math.sqrt(3 * len(lexicon["Agriculture"]))
        np.testing.assert_allclose(backend.score(keywords, DETS), oracle)
        assert map_topic(keywords, DETS, backend) == 0

    def test_all_zero_scores_map_to_other(self):
        class ZeroBackend:
            def score(self, keywords, determinants):
                return [0.0] * len(determinants)

        assert map_topic(["xyzzy"], DETS, ZeroBackend()) == OTHER_INDEX

    def test_tie_breaks_to_lowest_index(self):
        class TieBackend:
            def score(self, keywords, determinants):
                scores = [0.0] * len(determinants)
                scores[2] = 0.9
                scores[6] = 0.9
                return scores

        assert map_topic(["kw"], DETS, TieBackend()) == 2

    def test_below_threshold_maps_to_other(self):
        class WeakBackend:
            def score(self, keywords, determinants):
                return [0.14] + [0.0] * (len(determinants) - 1)

        assert map_topic(["kw"], DETS, WeakBackend(), threshold=0.15) == OTHER_INDEX

    def test_determinism(self):
        backend = LexiconBackend()
        kw = ["water", "reservoir", "rationing"]
        assert map_topic(kw, DETS, backend) == map_topic(kw, DETS, backend)


class _ScoreHandler(BaseHTTPRequestHandler):
    fail_first = 0
    calls = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).calls.append(body)
        if type(self).fail_first > 0:
            type(self).fail_first -= 1
            self.send_response(500)
            self.end_headers()
            return
        scores = [0.0] * len(body["determinants"])
        if "crop" in body["keywords"]:
            scores[0] = 0.95
        else:
            scores[8] = 0.8
        payload = json.dumps({"scores": scores}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def llm_server():
    _ScoreHandler.fail_first = 0
    _ScoreHandler.calls = []
    server = HTTPServer(("127.0.0.1", 0), _ScoreHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/score", _ScoreHandler
    server.shutdown()
    thread.join(timeout=2)


class TestLlmBackend:
    def test_wire_format_and_scores(self, llm_server):
        url, handler = llm_server
        backend = LlmBackend(url, api_key="secret", backoff=0.0)
        scores = backend.score(["crop", "harvest"], DETS)
        assert scores[0] == 0.95
        assert handler.calls[0] == {
            "keywords": ["crop", "harvest"],
            "determinants": list(DETERMINANT_NAMES),
        }

    def test_retries_then_succeeds(self, llm_server):
        url, handler = llm_server
        handler.fail_first = 2
        backend = LlmBackend(url, retries=2, backoff=0.0)
        scores = backend.score(["water"], DETS)
        assert scores[8] == 0.8
        assert len(handler.calls) == 3

    def test_falls_back_to_lexicon_after_retries(self, llm_server):
        url, handler = llm_server
        handler.fail_first = 10
        backend = LlmBackend(url, retries=2, backoff=0.0)
        scores = backend.score(["crop", "harvest", "irrigation"], DETS)
        assert len(handler.calls) == 3
        assert np.argmax(scores) == 0  # lexicon cosine took over

    def test_unreachable_endpoint_falls_back(self):
        backend = LlmBackend("http://127.0.0.1:9/score", retries=1, backoff=0.0, timeout=0.2)
        scores = backend.score(["water", "reservoir"], DETS)
        assert np.argmax(scores) == 8


def _toy_model():
    """Three one-hot centroids mapped to Agriculture, Public Health, Other."""
    vocab = {"clinic": 0, "crop": 1, "zzz": 2}
    centroids = np.eye(3)[[1, 0, 2]]  # cluster 0 reads "crop", 1 "clinic", 2 "zzz"
    clusters = (
        TopicCluster(id=0, member_doc_ids=("a",), keywords=("crop",), determinant_index=0),
        TopicCluster(id=1, member_doc_ids=("b",), keywords=("clinic",), determinant_index=6),
        TopicCluster(id=2, member_doc_ids=("c",), keywords=("zzz",), determinant_index=OTHER_INDEX),
    )
    return TopicModel(
        source=Source.SOCIAL,
        vocabulary=vocab,
        idf=np.ones(3),
        centroids=centroids,
        clusters=clusters,
    )


class TestQuantify:
    def test_distribution_matches_counts(self):
        model = _toy_model()
        docs = [doc(0, "crop"), doc(1, "crop"), doc(2, "clinic"), doc(3, "zzz")]
        out = quantify(docs, model, DETS)
        expected = np.zeros(11)
        expected[0], expected[6], expected[OTHER_INDEX] = 0.5, 0.25, 0.25
        np.testing.assert_allclose(out, expected)

    def test_empty_input_gives_zero_vector(self):
        out = quantify([], _toy_model(), DETS)
        np.testing.assert_array_equal(out, np.zeros(11))

    def test_output_length_is_delta(self):
        assert quantify([doc(0, "crop")], _toy_model(), DETS).shape == (11,)

    def test_permutation_invariance(self):
        model = _toy_model()
        rng = np.random.default_rng(5)
        texts = ["crop", "clinic", "zzz", "crop", "crop", "clinic"]
        docs = [doc(i, t) for i, t in enumerate(texts)]
        base = quantify(docs, model, DETS)
        for _ in range(100):
            perm = rng.permutation(len(docs))
            np.testing.assert_array_equal(quantify([docs[i] for i in perm], model, DETS), base)

    def test_components_bounded_and_normalized(self):
        model = _toy_model()
        rng = np.random.default_rng(6)
        words = ["crop", "clinic", "zzz"]
        for _ in range(100):
            n = int(rng.integers(0, 12))
            docs = [doc(i, words[rng.integers(3)]) for i in range(n)]
            out = quantify(docs, model, DETS)
            assert np.all(out >= 0) and np.all(out <= 1)
            assert out.sum() == 0.0 or abs(out.sum() - 1.0) <= 1e-6


class TestBuildImpactSeries:
    def fit_models(self):
        social = [
            doc(i, text, Source.SOCIAL, timestep=i % 3)
            for i, text in enumerate(
                ["crop harvest dry", "crop harvest", "water wells dry", "water wells"]
            )
        ]
        news = [
            doc(10 + i, text, Source.NEWS, timestep=1)
            for i, text in enumerate(["hospital illness report", "hospital illness"])
        ]
        backend = LexiconBackend()
        sm = fit_topic_model(social, Source.SOCIAL, DETS, backend, topic_count=2, seed=0)
        nman = fit_topic_model(news, Source.NEWS, DETS, backend, topic_count=2, seed=0)
        return social, news, sm, nman

    def test_dimensions_and_source_separation(self):
        social, news, sm, nman = self.fit_models()
        impacts = build_impact_series(social, news, 3, sm, nman, DETS)
        assert len(impacts) == 3
        assert len(impacts[0].concatenated()) == 22
        # week 0 has social docs but no news: news part all-zero, social sums to 1
        assert sum(impacts[0].news_part) == 0.0
        assert abs(sum(impacts[0].social_part) - 1.0) <= 1e-6

    def test_shuffled_documents_give_identical_series(self):
        social, news, sm, nman = self.fit_models()
        base = build_impact_series(social, news, 3, sm, nman, DETS)
        rng = np.random.default_rng(2)
        for _ in range(10):
            s = [social[i] for i in rng.permutation(len(social))]
            n = [news[i] for i in rng.permutation(len(news))]
            assert build_impact_series(s, n, 3, sm, nman, DETS) == base


def test_fit_topic_model_maps_lexicon_terms_correctly():
    docs = [
        doc(0, "crop harvest irrigation farm"),
        doc(1, "crop harvest farm fields"),
        doc(2, "water reservoir rationing wells"),
        doc(3, "water reservoir wells aquifer"),
    ]
    model = fit_topic_model(docs, Source.SOCIAL, DETS, LexiconBackend(), topic_count=2, seed=0)
    assert {c.determinant_index for c in model.clusters} == {0, 8}
    for cluster in model.clusters:
        assert cluster.keywords


def test_impact_csv_round_trip(tmp_path):
    social, news = [doc(0, "crop crop", timestep=0), doc(1, "crop wells", timestep=1)], []
    model = _toy_model()
    impacts = build_impact_series(social, news, 2, model, model, DETS)
    path = tmp_path / "impact.csv"
    write_impact_csv(path, impacts)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:2] == ["timestep", "s_1"] and header[-1] == "n_11"
    assert len(header) == 23
    assert read_impact_csv(path) == impacts


def test_backend_from_env_selection():
    from side.dsiq import backend_from_env

    assert isinstance(backend_from_env("lexicon", env={}), LexiconBackend)
    llm = backend_from_env("llm", env={"SIDE_LLM_URL": "http://x/score", "SIDE_LLM_KEY": "k"})
    assert isinstance(llm, LlmBackend)
    assert llm.url == "http://x/score" and llm.api_key == "k"
    with pytest.raises(ValueError, match="SIDE_LLM_URL"):
        backend_from_env("llm", env={})
    with pytest.raises(ValueError, match="unknown"):
        backend_from_env("oracle", env={})


def test_load_lexicon_custom_path(tmp_path):
    path = tmp_path / "lex.json"
    path.write_text(json.dumps({"Agriculture": ["Crop", "FARM"]}), encoding="utf-8")
    lex = load_lexicon(path)
    assert lex == {"Agriculture": ["crop", "farm"]}


def test_fit_topic_model_with_llm_backend_parallel_mapping(llm_server):
    url, handler = llm_server
    docs = [
        doc(0, "crop harvest irrigation"),
        doc(1, "crop harvest farm"),
        doc(2, "water reservoir wells"),
        doc(3, "water reservoir rationing"),
    ]
    backend = LlmBackend(url, backoff=0.0)
    model = fit_topic_model(
        docs, Source.SOCIAL, DETS, backend, topic_count=2, seed=0, map_parallelism=4
    )
    # the server scores crop-topics as Agriculture, everything else Water Utilities
    assert {c.determinant_index for c in model.clusters} == {0, 8}
    assert len(handler.calls) == len(model.clusters)
