"""LDA topic model trained by collapsed Gibbs sampling.

Model file: header "K V alpha beta", then K rows of V whitespace separated
topic-word counts. The vocabulary is stored next to it in "<path>.vocab",
one word per line in column order.
"""

import dataclasses
import logging
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln

from .embeddings import cosine_similarity
from .exceptions import ConfigError, FormatError, NumericalError

__all__ = [
    "LdaConfig",
    "LdaModel",
    "TopicDistribution",
    "train_lda",
    "infer_topics",
    "topic_similarity",
    "log_likelihood",
    "top_words",
    "save_lda",
    "load_lda",
]

logger = logging.getLogger(__name__)

LogLikelihoodEvery: int = 10
"""Training log-likelihood is recorded every n sweeps."""


@dataclasses.dataclass
class LdaConfig:
    topics: int = 100
    alpha: Optional[float] = None  # defaults to 50 / topics
    beta: float = 0.01
    iterations: int = 500
    infer_iterations: int = 50
    seed: int = 1

    def effective_alpha(self) -> float:
        return self.alpha if self.alpha is not None else 50.0 / self.topics

    def validate(self) -> None:
        if self.topics < 2:
            raise ConfigError(f"number of topics must be >= 2, got {self.topics}")
        if not self.effective_alpha() > 0 or not self.beta > 0:
            raise ConfigError("alpha and beta must be positive")
        if self.iterations < 0 or self.infer_iterations < 0:
            raise ConfigError("iterations must be >= 0")


class LdaModel:
    """Topic-word statistics of a trained LDA model."""

    def __init__(self, alpha: float, beta: float, topic_word_counts: np.ndarray, vocabulary: Sequence[str]) -> None:
        self.alpha = alpha
        self.beta = beta
        self.topic_word_counts = topic_word_counts
        self.topic_totals = topic_word_counts.sum(axis=1)
        self.vocabulary: List[str] = list(vocabulary)
        self.index: Dict[str, int] = {word: i for i, word in enumerate(self.vocabulary)}
        self.loglik_history: List[Tuple[int, float]] = []

    @property
    def num_topics(self) -> int:
        return int(self.topic_word_counts.shape[0])

    @property
    def vocab_size(self) -> int:
        return int(self.topic_word_counts.shape[1])

    def check_counts(self) -> None:
        if np.any(self.topic_word_counts < 0) or not np.array_equal(self.topic_totals, self.topic_word_counts.sum(axis=1)):
            raise NumericalError("inconsistent LDA topic counts")

    def __repr__(self) -> str:
        return f"LdaModel(K={self.num_topics}, V={self.vocab_size}, alpha={self.alpha}, beta={self.beta})"


class TopicDistribution(NamedTuple):
    probabilities: np.ndarray
    degenerate: bool


def _corpus_log_likelihood(ndk: np.ndarray, nkw: np.ndarray, alpha: float, beta: float) -> float:
    """Joint log p(w, z) of the collapsed model."""
    num_topics, vocab_size = nkw.shape
    nk = nkw.sum(axis=1)
    nd = ndk.sum(axis=1)
    topic_part = num_topics * (gammaln(vocab_size * beta) - vocab_size * gammaln(beta))
    topic_part += float(np.sum(gammaln(nkw + beta)) - np.sum(gammaln(nk + vocab_size * beta)))
    doc_part = len(ndk) * (gammaln(num_topics * alpha) - num_topics * gammaln(alpha))
    doc_part += float(np.sum(gammaln(ndk + alpha)) - np.sum(gammaln(nd + num_topics * alpha)))
    return float(topic_part + doc_part)


def _sample(rng: np.random.Generator, weights: np.ndarray) -> int:
    cumulative = np.cumsum(weights)
    return min(int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right")), len(weights) - 1)


def train_lda(docs: Sequence[Sequence[str]], topics: int = 100, alpha: Optional[float] = None, beta: float = 0.01,
              iterations: int = 500, seed: int = 1) -> LdaModel:
    """Collapsed Gibbs sampling with the full conditional
    P(z_i = k | .) ~ (n_dk + alpha) (n_kw + beta) / (n_k + V beta).
    """
    config = LdaConfig(topics=topics, alpha=alpha, beta=beta, iterations=iterations, seed=seed)
    config.validate()
    alpha = config.effective_alpha()

    vocabulary = sorted({word for doc in docs for word in doc})
    if not vocabulary:
        raise ConfigError("cannot train LDA on an empty corpus")
    index = {word: i for i, word in enumerate(vocabulary)}
    encoded = [np.array([index[word] for word in doc], dtype=np.int64) for doc in docs]
    vocab_size = len(vocabulary)

    rng = np.random.default_rng(seed)
    assignments = [rng.integers(topics, size=len(doc)) for doc in encoded]
    ndk = np.zeros((len(encoded), topics), dtype=np.int64)
    nkw = np.zeros((topics, vocab_size), dtype=np.int64)
    for d, (doc, z) in enumerate(zip(encoded, assignments)):
        np.add.at(ndk[d], z, 1)
        np.add.at(nkw, (z, doc), 1)
    nk = nkw.sum(axis=1)
    v_beta = vocab_size * beta

    logger.info("training LDA: %d documents, %d words, K=%d, alpha=%g, beta=%g, %d sweeps",
                len(encoded), vocab_size, topics, alpha, beta, iterations)
    history = [(0, _corpus_log_likelihood(ndk, nkw, alpha, beta))]
    for sweep in range(1, iterations + 1):
        for d, (doc, z) in enumerate(zip(encoded, assignments)):
            doc_topics = ndk[d]
            for i, w in enumerate(doc):
                k = z[i]
                doc_topics[k] -= 1
                nkw[k, w] -= 1
                nk[k] -= 1
                k = _sample(rng, (doc_topics + alpha) * (nkw[:, w] + beta) / (nk + v_beta))
                z[i] = k
                doc_topics[k] += 1
                nkw[k, w] += 1
                nk[k] += 1
        if not np.array_equal(nk, nkw.sum(axis=1)) or nkw.min(initial=0) < 0:
            raise NumericalError(f"inconsistent topic counts after sweep {sweep}")
        if sweep % LogLikelihoodEvery == 0:
            loglik = _corpus_log_likelihood(ndk, nkw, alpha, beta)
            history.append((sweep, loglik))
            logger.info("sweep %d/%d: log-likelihood=%.4f", sweep, iterations, loglik)

    model = LdaModel(alpha, beta, nkw, vocabulary)
    model.loglik_history = history
    return model


def infer_topics(model: LdaModel, tokens: Sequence[str], infer_iterations: int = 50, seed: int = 1) -> TopicDistribution:
    """Topic distribution of a new document, holding the model counts fixed.

    Returns the smoothed distribution (n_dk + alpha) / (n_d + K alpha)
    averaged over the second half of the sweeps. Documents without known
    words get the uniform distribution flagged as degenerate.
    """
    num_topics = model.num_topics
    words = np.array([model.index[token] for token in tokens if token in model.index], dtype=np.int64)
    if not len(words):
        return TopicDistribution(np.full(num_topics, 1.0 / num_topics), True)

    rng = np.random.default_rng(seed)
    topic_norm = model.topic_totals + model.vocab_size * model.beta
    word_topic = (model.topic_word_counts[:, words].T + model.beta) / topic_norm  # n_words x K
    z = rng.integers(num_topics, size=len(words))
    ndk = np.bincount(z, minlength=num_topics).astype(np.float64)
    denominator = len(words) + num_topics * model.alpha

    if infer_iterations == 0:
        return TopicDistribution((ndk + model.alpha) / denominator, False)

    burn_in = infer_iterations // 2
    accumulated = np.zeros(num_topics)
    for sweep in range(infer_iterations):
        for i in range(len(words)):
            ndk[z[i]] -= 1
            z[i] = _sample(rng, (ndk + model.alpha) * word_topic[i])
            ndk[z[i]] += 1
        if sweep >= burn_in:
            accumulated += (ndk + model.alpha) / denominator
    probabilities = accumulated / (infer_iterations - burn_in)
    return TopicDistribution(probabilities / probabilities.sum(), False)


def topic_similarity(p: TopicDistribution, q: TopicDistribution) -> float:
    return cosine_similarity(p.probabilities, q.probabilities)


def log_likelihood(model: LdaModel) -> float:
    """Log-likelihood of the topic-word counts, log p(w | z)."""
    num_topics, vocab_size = model.topic_word_counts.shape
    result = num_topics * (gammaln(vocab_size * model.beta) - vocab_size * gammaln(model.beta))
    result += np.sum(gammaln(model.topic_word_counts + model.beta))
    result -= np.sum(gammaln(model.topic_totals + vocab_size * model.beta))
    return float(result)


def top_words(model: LdaModel, topic: int, n: int = 10) -> List[str]:
    order = np.argsort(-model.topic_word_counts[topic], kind="stable")[:n]
    return [model.vocabulary[i] for i in order]


def save_lda(model: LdaModel, path: str) -> None:
    with open(path, "wt", encoding="utf-8") as fp:
        fp.write(f"{model.num_topics} {model.vocab_size} {model.alpha!r} {model.beta!r}\n")
        for row in model.topic_word_counts:
            fp.write(" ".join(str(int(count)) for count in row))
            fp.write("\n")
    with open(f"{path}.vocab", "wt", encoding="utf-8") as fp:
        for word in model.vocabulary:
            fp.write(f"{word}\n")


def load_lda(path: str) -> LdaModel:
    with open(path, "rt", encoding="utf-8") as fp:
        header = fp.readline().split()
        if len(header) != 4:
            raise FormatError(f"{path}: invalid header, expected 'K V alpha beta'")
        try:
            num_topics, vocab_size = int(header[0]), int(header[1])
            alpha, beta = float(header[2]), float(header[3])
        except ValueError:
            raise FormatError(f"{path}: invalid header values {header}")
        rows = [line.split() for line in fp if line.strip()]
    if len(rows) != num_topics or any(len(row) != vocab_size for row in rows):
        raise FormatError(f"{path}: expected {num_topics} rows of {vocab_size} counts")
    try:
        counts = np.array(rows, dtype=np.int64)
    except ValueError:
        raise FormatError(f"{path}: counts must be integers")
    with open(f"{path}.vocab", "rt", encoding="utf-8") as fp:
        vocabulary = [line.rstrip("\n") for line in fp if line.strip()]
    if len(vocabulary) != vocab_size:
        raise FormatError(f"{path}.vocab: expected {vocab_size} words, got {len(vocabulary)}")
    model = LdaModel(alpha, beta, counts, vocabulary)
    model.check_counts()
    return model
