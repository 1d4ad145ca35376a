import math

import numpy as np
import pytest

from cqa_rank import topics
from cqa_rank.exceptions import ConfigError, FormatError
from cqa_rank.topics import TopicDistribution

TopicWords = [[f"alpha{i}" for i in range(10)], [f"beta{i}" for i in range(10)]]


def two_topic_corpus(seed=1, docs=100, length=20):
    rng = np.random.default_rng(seed)
    corpus, generators = [], []
    for i in range(docs):
        topic = i % 2
        corpus.append([str(word) for word in rng.choice(TopicWords[topic], length)])
        generators.append(topic)
    return corpus, generators


@pytest.fixture(scope="module")
def trained():
    corpus, generators = two_topic_corpus()
    model = topics.train_lda(corpus, topics=2, alpha=0.5, beta=0.01, iterations=200, seed=1)
    return model, corpus, generators


def test_train_lda_recovers_topics(trained):
    model, corpus, generators = trained
    dominant = [int(np.argmax(topics.infer_topics(model, doc, 20, seed=2).probabilities)) for doc in corpus]
    agreement = np.mean([d == g for d, g in zip(dominant, generators)])
    assert max(agreement, 1 - agreement) >= 0.95


def test_train_lda_log_likelihood(trained):
    model, _, _ = trained
    history = dict(model.loglik_history)
    assert sorted(history) == list(range(0, 201, 10))
    assert history[200] >= history[10]
    assert history[200] > history[0]


def test_train_lda_counts(trained):
    model, corpus, _ = trained
    model.check_counts()
    assert model.topic_word_counts.sum() == sum(len(doc) for doc in corpus)
    assert model.vocabulary == sorted(TopicWords[0] + TopicWords[1])


def test_infer_topics_words_of_one_topic(trained):
    model, _, _ = trained
    first = topics.infer_topics(model, TopicWords[0], 20)
    second = topics.infer_topics(model, TopicWords[1], 20)
    assert int(np.argmax(first.probabilities)) != int(np.argmax(second.probabilities))
    assert first.probabilities.sum() == pytest.approx(1.0, abs=1e-9)


def test_infer_topics_degenerate(trained):
    model, _, _ = trained
    result = topics.infer_topics(model, [])
    assert result.degenerate
    assert result.probabilities.tolist() == [0.5, 0.5]
    assert topics.infer_topics(model, ["unknown"]).degenerate


def test_train_lda_identical_docs():
    model = topics.train_lda([["visa"]] * 5, topics=2, iterations=5)
    result = topics.infer_topics(model, ["visa"], 4)
    assert not result.degenerate
    assert np.all(result.probabilities >= 0)
    assert result.probabilities.sum() == pytest.approx(1.0, abs=1e-9)


def test_train_lda_no_iterations():
    corpus, _ = two_topic_corpus(docs=6, length=5)
    model = topics.train_lda(corpus, topics=3, iterations=0)
    model.check_counts()
    assert model.loglik_history[0][0] == 0
    for infer_iterations in (0, 3):
        result = topics.infer_topics(model, corpus[0], infer_iterations)
        assert result.probabilities.sum() == pytest.approx(1.0, abs=1e-9)


def test_train_lda_deterministic():
    corpus, _ = two_topic_corpus(docs=10, length=6)
    first = topics.train_lda(corpus, topics=2, iterations=5, seed=4)
    second = topics.train_lda(corpus, topics=2, iterations=5, seed=4)
    assert np.array_equal(first.topic_word_counts, second.topic_word_counts)


def test_train_lda_errors():
    with pytest.raises(ConfigError):
        topics.train_lda([[], []], topics=2)
    with pytest.raises(ConfigError):
        topics.train_lda([["a"]], topics=1)


def test_default_alpha():
    assert topics.LdaConfig(topics=100).effective_alpha() == 0.5


@pytest.mark.parametrize("p, q, expected", [
    ((0.3, 0.7), (0.3, 0.7), 1.0),
    ((1.0, 0.0), (0.0, 1.0), 0.0),
    ((0.5, 0.5), (1.0, 0.0), 1 / math.sqrt(2)),
])
def test_topic_similarity(p, q, expected):
    similarity = topics.topic_similarity(TopicDistribution(np.array(p), False), TopicDistribution(np.array(q), False))
    assert similarity == pytest.approx(expected)


def test_lda_file(tmp_path, trained):
    model, _, _ = trained
    path = str(tmp_path / "lda.txt")
    topics.save_lda(model, path)
    loaded = topics.load_lda(path)
    assert np.array_equal(loaded.topic_word_counts, model.topic_word_counts)
    assert loaded.vocabulary == model.vocabulary
    assert loaded.alpha == model.alpha
    assert topics.log_likelihood(loaded) == pytest.approx(topics.log_likelihood(model))
    assert len(topics.top_words(loaded, 0, 3)) == 3


def test_lda_file_errors(tmp_path):
    path = tmp_path / "lda.txt"
    path.write_text("2 2 0.5 0.01\n1 2\n")
    (tmp_path / "lda.txt.vocab").write_text("a\nb\n")
    with pytest.raises(FormatError):
        topics.load_lda(str(path))
    path.write_text("2 2 0.5\n")
    with pytest.raises(FormatError):
        topics.load_lda(str(path))
