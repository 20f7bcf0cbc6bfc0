"""Determinant-driven societal impact quantification.

Turns weekly buckets of drought-related documents into normalized
distributions over the eleven societal impact determinants: documents
are clustered into topics per source (TF-IDF vectors + k-means), each
topic is mapped to one determinant by a scoring backend (remote LLM or
the shipped lexicon), and weekly document counts per determinant become
the impact vector components.

Topic models are fitted once on the training date range and frozen;
quantification with a fitted model is pure and may run concurrently
across timesteps.
"""

from __future__ import annotations

import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np
import requests

from .core import DETERMINANT_COUNT, Document, ImpactVector, Source
from .errors import ParseError

#: Canonical determinant order; it defines impact vector component indices.
DETERMINANT_NAMES = (
    "Agriculture",
    "Ecosystems",
    "Energy",
    "Hazard Planning & Preparedness",
    "Manufacturing",
    "Navigation and Transportation",
    "Public Health",
    "Recreation and Tourism",
    "Water Utilities",
    "Wildfire Management",
    "Other",
)

OTHER_INDEX = 10

#: Below this likelihood/cosine score a topic is filed under "Other".
MAP_THRESHOLD = 0.15

KEYWORDS_PER_TOPIC = 10

STOPWORDS = frozenset(
    """a about above after again all also am an and any are as at be because been
    before being below between both but by could did do does doing down during
    each few for from further had has have having he her here hers him his how
    i if in into is it its itself just me more most my no nor not now of off
    on once only or other our ours out over own same she should so some such
    than that the their theirs them then there these they this those through
    to too under until up very was we were what when where which while who
    whom why will with you your yours""".split()
)

_TOKEN_RE = re.compile(r"[a-z][a-z']*")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens with stopwords removed."""
    return [t for t in _TOKEN_RE.findall(text.lower()) if t not in STOPWORDS]


@dataclass(frozen=True)
class DeterminantSet:
    """Ordered determinant names; index 10 must be the catch-all "Other"."""

    names: tuple[str, ...] = DETERMINANT_NAMES

    def __post_init__(self):
        if len(self.names) != DETERMINANT_COUNT:
            raise ValueError(f"expected {DETERMINANT_COUNT} determinants, got {len(self.names)}")
        if self.names[OTHER_INDEX] != "Other":
            raise ValueError('determinant index 10 must be "Other"')

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class TopicCluster:
    """One k-means topic: member documents, ranked keywords, determinant."""

    id: int
    member_doc_ids: tuple[str, ...]
    keywords: tuple[str, ...]
    determinant_index: int


@dataclass(frozen=True)
class TopicModel:
    """Frozen per-source topic model: vocabulary, centroids, mapped clusters."""

    source: Source
    vocabulary: dict[str, int]
    idf: np.ndarray
    centroids: np.ndarray
    clusters: tuple[TopicCluster, ...]


# ---------------------------------------------------------------------------
# Vectorization
# ---------------------------------------------------------------------------


def _fit_tfidf(docs: list[Document]) -> tuple[dict[str, int], np.ndarray, np.ndarray, list[list[str]]]:
    if not docs:
        raise ValueError("vectorize needs at least one document")
    token_lists = [tokenize(d.text) for d in docs]
    df: dict[str, int] = {}
    for tokens in token_lists:
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1
    vocab = {term: i for i, term in enumerate(sorted(t for t, c in df.items() if c >= 2))}
    if not vocab:
        raise ValueError("vocabulary is empty: no term appears in two or more documents")

    n = len(docs)
    idf = np.zeros(len(vocab))
    for term, j in vocab.items():
        idf[j] = math.log(n / df[term])
    return vocab, idf, doc_matrix(token_lists, vocab, idf), token_lists


def vectorize(docs: list[Document]) -> tuple[dict[str, int], np.ndarray]:
    """L2-normalized TF-IDF vectors for a document list.

    The vocabulary keeps terms that appear in at least two documents and
    are not stopwords; IDF is ln(N / df), so a term present in every
    document gets zero weight.

    Raises:
        ValueError: no documents, or the vocabulary comes out empty.
    """
    vocab, _, vectors, _ = _fit_tfidf(docs)
    return vocab, vectors


def doc_matrix(token_lists: list[list[str]], vocab: dict[str, int], idf: np.ndarray) -> np.ndarray:
    """TF * IDF rows, L2-normalized; all-out-of-vocabulary rows stay zero."""
    x = np.zeros((len(token_lists), len(vocab)))
    for i, tokens in enumerate(token_lists):
        for t in tokens:
            j = vocab.get(t)
            if j is not None:
                x[i, j] += 1.0
    x *= idf
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    np.divide(x, norms, out=x, where=norms > 0)
    return x


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------


def kmeans(vectors: np.ndarray, n_clusters: int, seed: int, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Seeded k-means++ plus Lloyd iterations; fully deterministic.

    The effective cluster count is min(n_clusters, n_points).  Returns
    (assignments, centroids); every point is assigned to its nearest
    centroid, ties broken by the lowest centroid index.
    """
    if n_clusters < 1:
        raise ValueError(f"n_clusters must be >= 1, got {n_clusters}")
    n = vectors.shape[0]
    k = min(n_clusters, n)
    rng = np.random.default_rng(seed)

    centroids = np.empty((k, vectors.shape[1]))
    centroids[0] = vectors[rng.integers(n)]
    closest = _sq_dists(vectors, centroids[0][None, :])[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centroids[c] = vectors[idx]
        closest = np.minimum(closest, _sq_dists(vectors, centroids[c][None, :])[:, 0])

    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        new_assignments = np.argmin(_sq_dists(vectors, centroids), axis=1)
        for c in range(k):
            members = vectors[new_assignments == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
        if np.array_equal(new_assignments, assignments):
            assignments = new_assignments
            break
        assignments = new_assignments
    return np.argmin(_sq_dists(vectors, centroids), axis=1), centroids


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] + (centroids * centroids).sum(axis=1)[None, :]
    d -= 2.0 * (x @ centroids.T)
    return np.maximum(d, 0.0)


def cluster_keywords(
    member_token_lists: list[list[list[str]]], vocab: dict[str, int], top: int = KEYWORDS_PER_TOPIC
) -> list[tuple[str, ...]]:
    """Rank keywords per cluster by class-based TF-IDF.

    Each cluster's members are concatenated into one pseudo-document;
    a term's weight is its frequency there times ln(C / cf) where cf
    counts the clusters containing it.  When no term has positive weight
    (a single cluster, or fully shared vocabulary) raw frequency decides.
    """
    terms = list(vocab)
    counts = np.zeros((len(member_token_lists), len(vocab)))
    for c, token_lists in enumerate(member_token_lists):
        for tokens in token_lists:
            for t in tokens:
                j = vocab.get(t)
                if j is not None:
                    counts[c, j] += 1.0
    cf = (counts > 0).sum(axis=0)
    with np.errstate(divide="ignore"):
        cluster_idf = np.log(np.where(cf > 0, len(member_token_lists) / np.maximum(cf, 1), 1.0))
    weighted = counts * cluster_idf

    keywords = []
    for c in range(len(member_token_lists)):
        scores = weighted[c] if (weighted[c] > 0).any() else counts[c]
        ranked = sorted(
            (j for j in range(len(terms)) if scores[j] > 0),
            key=lambda j: (-scores[j], terms[j]),
        )
        keywords.append(tuple(terms[j] for j in ranked[:top]))
    return keywords


# ---------------------------------------------------------------------------
# Topic -> determinant mapping backends
# ---------------------------------------------------------------------------


def load_lexicon(path=None) -> dict[str, list[str]]:
    """Determinant name -> seed term list; ships with the package."""
    if path is None:
        text = resources.files("side").joinpath("data/lexicon.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    lexicon = json.loads(text)
    if not isinstance(lexicon, dict):
        raise ParseError("lexicon must be a JSON object mapping determinant -> term list")
    return {str(k): [str(t).lower() for t in v] for k, v in lexicon.items()}


class LexiconBackend:
    """Scores a topic against each determinant by keyword/lexicon cosine.

    Keywords and lexicon entries are treated as binary term sets, so the
    score is |intersection| / sqrt(|keywords| * |lexicon|).
    """

    def __init__(self, lexicon: dict[str, list[str]] | None = None):
        self.lexicon = {k: frozenset(v) for k, v in (lexicon or load_lexicon()).items()}

    def score(self, keywords: list[str], determinants: DeterminantSet) -> list[float]:
        kw = set(keywords)
        scores = []
        for name in determinants.names:
            lex = self.lexicon.get(name, frozenset())
            if not kw or not lex:
                scores.append(0.0)
                continue
            scores.append(len(kw & lex) / math.sqrt(len(kw) * len(lex)))
        return scores


class LlmBackend:
    """Remote likelihood scorer with retries and a lexicon fallback.

    POSTs ``{"keywords": [...], "determinants": [...]}`` and expects
    ``{"scores": [...]}`` with one float per determinant.  After the
    configured retries fail, scoring falls back to the lexicon.
    """

    def __init__(
        self,
        url: str,
        api_key: str | None = None,
        timeout: float = 10.0,
        retries: int = 2,
        backoff: float = 0.5,
        fallback: LexiconBackend | None = None,
        session=None,
    ):
        self.url = url
        self.api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.fallback = fallback or LexiconBackend()
        self.session = session or requests.Session()

    def score(self, keywords: list[str], determinants: DeterminantSet) -> list[float]:
        body = {"keywords": list(keywords), "determinants": list(determinants.names)}
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        for attempt in range(self.retries + 1):
            try:
                resp = self.session.post(self.url, json=body, headers=headers, timeout=self.timeout)
                resp.raise_for_status()
                scores = resp.json()["scores"]
                if len(scores) != len(determinants) or not all(
                    math.isfinite(float(s)) for s in scores
                ):
                    raise ValueError(f"backend returned invalid scores: {scores!r}")
                return [float(s) for s in scores]
            except Exception:
                if attempt < self.retries:
                    time.sleep(self.backoff * (2**attempt))
        return self.fallback.score(keywords, determinants)


def backend_from_env(
    name: str, lexicon: dict[str, list[str]] | None = None, env=None
) -> LexiconBackend | LlmBackend:
    """Build the mapping backend selected by name ("lexicon" or "llm")."""
    import os

    env = env if env is not None else os.environ
    lex = LexiconBackend(lexicon)
    if name == "lexicon":
        return lex
    if name == "llm":
        url = env.get("SIDE_LLM_URL")
        if not url:
            raise ValueError("backend 'llm' requires the SIDE_LLM_URL environment variable")
        return LlmBackend(url, api_key=env.get("SIDE_LLM_KEY"), fallback=lex)
    raise ValueError(f"unknown mapping backend {name!r}")


def map_topic(
    keywords,
    determinants: DeterminantSet,
    backend,
    threshold: float = MAP_THRESHOLD,
) -> int:
    """Determinant index for a topic given its ranked keywords.

    Argmax of the backend scores, lowest index on ties; anything scoring
    below ``threshold`` everywhere lands on "Other".
    """
    scores = backend.score(list(keywords), determinants)
    best = int(np.argmax(scores))
    if scores[best] < threshold:
        return OTHER_INDEX
    return best


# ---------------------------------------------------------------------------
# Fitting and quantification
# ---------------------------------------------------------------------------


def fit_topic_model(
    docs: list[Document],
    source: Source,
    determinants: DeterminantSet,
    backend,
    topic_count: int = 50,
    seed: int = 0,
    map_threshold: float = MAP_THRESHOLD,
    map_parallelism: int = 4,
) -> TopicModel:
    """Cluster one source's documents and map every topic to a determinant.

    Remote-backend mapping calls run with bounded parallelism; the
    lexicon backend is scored inline.
    """
    docs = [d for d in docs if d.source == source]
    if not docs:
        raise ValueError(f"no documents with source {source.value!r} to fit on")
    vocab, idf, vectors, token_lists = _fit_tfidf(docs)
    assignments, centroids = kmeans(vectors, topic_count, seed)
    live = sorted(set(int(a) for a in assignments))
    centroids = centroids[live]
    renumber = {old: new for new, old in enumerate(live)}
    assignments = np.array([renumber[int(a)] for a in assignments])

    member_ids: list[list[str]] = [[] for _ in live]
    member_tokens: list[list[list[str]]] = [[] for _ in live]
    for i, c in enumerate(assignments):
        member_ids[c].append(docs[i].id)
        member_tokens[c].append(token_lists[i])
    keywords = cluster_keywords(member_tokens, vocab)

    def _map(kw):
        return map_topic(kw, determinants, backend, map_threshold)

    if isinstance(backend, LlmBackend) and map_parallelism > 1:
        with ThreadPoolExecutor(max_workers=map_parallelism) as pool:
            det_indices = list(pool.map(_map, keywords))
    else:
        det_indices = [_map(kw) for kw in keywords]

    clusters = tuple(
        TopicCluster(
            id=c,
            member_doc_ids=tuple(member_ids[c]),
            keywords=keywords[c],
            determinant_index=det_indices[c],
        )
        for c in range(len(live))
    )
    return TopicModel(source=source, vocabulary=vocab, idf=idf, centroids=centroids, clusters=clusters)


def assign_clusters(docs: list[Document], model: TopicModel) -> np.ndarray:
    """Nearest-centroid topic ids for documents under a frozen model."""
    token_lists = [tokenize(d.text) for d in docs]
    vectors = doc_matrix(token_lists, model.vocabulary, model.idf)
    return np.argmin(_sq_dists(vectors, model.centroids), axis=1)


def quantify(docs_at_t: list[Document], model: TopicModel, determinants: DeterminantSet) -> np.ndarray:
    """Normalized determinant distribution of one week's documents.

    Counts documents per determinant through their topic assignment and
    divides by the total; an empty week yields the all-zero vector.
    """
    out = np.zeros(len(determinants))
    if not docs_at_t:
        return out
    for topic_id in assign_clusters(docs_at_t, model):
        out[model.clusters[int(topic_id)].determinant_index] += 1.0
    return out / len(docs_at_t)


def build_impact_series(
    social_docs: list[Document],
    news_docs: list[Document],
    total_steps: int,
    social_model: TopicModel,
    news_model: TopicModel,
    determinants: DeterminantSet | None = None,
) -> list[ImpactVector]:
    """One ImpactVector per timestep from the two frozen topic models."""
    determinants = determinants or DeterminantSet()
    by_step_social: dict[int, list[Document]] = {}
    for d in social_docs:
        by_step_social.setdefault(d.timestep, []).append(d)
    by_step_news: dict[int, list[Document]] = {}
    for d in news_docs:
        by_step_news.setdefault(d.timestep, []).append(d)

    series = []
    for t in range(total_steps):
        social = quantify(by_step_social.get(t, []), social_model, determinants)
        news = quantify(by_step_news.get(t, []), news_model, determinants)
        series.append(
            ImpactVector(timestep=t, social_part=tuple(social), news_part=tuple(news))
        )
    return series


# ---------------------------------------------------------------------------
# Impact series CSV interface
# ---------------------------------------------------------------------------


def impact_csv_header(delta: int = DETERMINANT_COUNT) -> list[str]:
    return (
        ["timestep"]
        + [f"s_{i}" for i in range(1, delta + 1)]
        + [f"n_{i}" for i in range(1, delta + 1)]
    )


def write_impact_csv(path, impacts: list[ImpactVector]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(impact_csv_header()) + "\n")
        for vec in impacts:
            cells = [str(vec.timestep)] + [
                repr(float(v)) for v in vec.social_part + vec.news_part
            ]
            fh.write(",".join(cells) + "\n")


def read_impact_csv(path) -> list[ImpactVector]:
    expected = impact_csv_header()
    impacts = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header != expected:
            raise ParseError(f"{path}: unexpected impact CSV header {header}")
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            cells = line.rstrip("\n").split(",")
            if len(cells) != len(expected):
                raise ParseError(f"{path}:{lineno}: expected {len(expected)} columns")
            try:
                t = int(cells[0])
                values = [float(c) for c in cells[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            impacts.append(
                ImpactVector(
                    timestep=t,
                    social_part=tuple(values[:DETERMINANT_COUNT]),
                    news_part=tuple(values[DETERMINANT_COUNT:]),
                )
            )
    return impacts
