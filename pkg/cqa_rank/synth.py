"""Synthetic CQA threads with a planted relevance signal.

Every thread is about one topic with its own vocabulary of pseudo-words.
With signal "centroid", Good comments reuse the topic vocabulary of their
question while Bad comments draw from a shared noise vocabulary; comment
length, question marks, authors and positions are independent of the label.
With signal "metadata" all comments mix topic and noise words alike and only
the comment length depends on the label.

Besides the labeled threads an unannotated corpus (one sentence per line) is
produced for embedding training.
"""

import dataclasses
import json
import logging
import os
from typing import Any, Dict, List, Tuple

import numpy as np

from .corpus import Comment, Label, Question, Thread, default_stopwords, dump_dataset
from .exceptions import ConfigError

__all__ = [
    "SynthConfig",
    "SyntheticCorpus",
    "generate",
    "write_synthetic",
    "pipeline_defaults",
]

logger = logging.getLogger(__name__)

Signals: Tuple[str, ...] = ("centroid", "metadata")

Consonants = "bdfgklmnprstvz"
Vowels = "aeiou"

Categories: Tuple[str, ...] = ("Visas", "Lounge", "Family", "Work")

PennTags: Tuple[str, ...] = ("NN", "NNS", "VB", "VBZ", "JJ", "RB")

DatasetFile = "synth.jsonl"
CorpusFile = "synth_corpus.txt"
ConfigFile = "synth_config.json"


@dataclasses.dataclass
class SynthConfig:
    threads: int = 50
    seed: int = 7
    signal: str = "centroid"
    topics: int = 10
    topic_words: int = 12
    noise_words: int = 40
    min_comments: int = 5
    max_comments: int = 8
    sentences_per_topic: int = 30
    noise_sentences: int = 60

    def validate(self) -> None:
        if self.signal not in Signals:
            raise ConfigError(f"unknown signal: {self.signal!r} (choose from {', '.join(Signals)})")
        if self.threads < 1:
            raise ConfigError(f"number of threads must be >= 1, got {self.threads}")
        if self.min_comments < 2 or self.max_comments < self.min_comments:
            raise ConfigError("comments per thread must satisfy 2 <= min <= max")
        if self.topics < 1 or self.topic_words < 1 or self.noise_words < 1:
            raise ConfigError("topic and noise vocabularies must not be empty")


@dataclasses.dataclass
class SyntheticCorpus:
    threads: List[Thread]
    sentences: List[str]
    topic_vocabularies: List[List[str]]
    noise_vocabulary: List[str]
    thread_topics: List[int]


def _pseudo_words(rng: np.random.Generator, count: int) -> List[str]:
    """Distinct three-syllable words that are no stopwords."""
    stopwords = default_stopwords()
    words: List[str] = []
    seen = set()
    while len(words) < count:
        word = "".join(rng.choice(list(Consonants)) + rng.choice(list(Vowels)) for _ in range(3))
        if word not in seen and word not in stopwords:
            seen.add(word)
            words.append(word)
    return words


class _Writer:
    def __init__(self, rng: np.random.Generator, config: SynthConfig) -> None:
        self.rng = rng
        self.config = config
        words = _pseudo_words(rng, config.topics * config.topic_words + config.noise_words)
        self.topics = [words[i * config.topic_words:(i + 1) * config.topic_words] for i in range(config.topics)]
        self.noise = words[config.topics * config.topic_words:]
        self.tags = {word: PennTags[int(rng.integers(len(PennTags)))] for word in words}

    def words(self, topic: int, count: int, topic_share: float) -> List[str]:
        result = []
        for _ in range(count):
            pool = self.topics[topic] if self.rng.random() < topic_share else self.noise
            result.append(pool[int(self.rng.integers(len(pool)))])
        return result

    def text(self, words: List[str], mark: str) -> str:
        return " ".join(words).capitalize() + mark

    def pos(self, words: List[str]) -> List[Tuple[str, str]]:
        return [(word, self.tags[word]) for word in words]

    def comment_words(self, topic: int, label: Label) -> List[str]:
        rng = self.rng
        if self.config.signal == "centroid":
            share = {Label.GOOD: 0.85, Label.POTENTIALLY_USEFUL: 0.3, Label.BAD: 0.0}[label]
            return self.words(topic, int(rng.integers(5, 10)), share)
        length = int(rng.integers(12, 17)) if label is Label.GOOD else int(rng.integers(3, 7))
        return self.words(topic, length, 0.5)


def generate(config: SynthConfig) -> SyntheticCorpus:
    """Generate labeled threads and an unannotated sentence corpus."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    writer = _Writer(rng, config)
    labels_pool = (Label.GOOD, Label.POTENTIALLY_USEFUL, Label.BAD)

    threads = []
    thread_topics = []
    for i in range(config.threads):
        topic = int(rng.integers(config.topics))
        qid = f"Q{i + 1}"
        qauthor = f"U{int(rng.integers(1000))}"
        subject = writer.words(topic, int(rng.integers(3, 6)), 1.0)
        body = writer.words(topic, int(rng.integers(8, 13)), 1.0)
        question = Question(
            id=qid,
            author_id=qauthor,
            subject_raw=writer.text(subject, ""),
            body_raw=writer.text(body, "?"),
            category=Categories[int(rng.integers(len(Categories)))],
            pos_tags=writer.pos(body),
        )
        n_comments = int(rng.integers(config.min_comments, config.max_comments + 1))
        labels = [Label.GOOD, Label.BAD] + [labels_pool[int(j)] for j in rng.choice(3, n_comments - 2, p=[0.4, 0.2, 0.4])]
        labels = [labels[int(j)] for j in rng.permutation(n_comments)]
        comments = []
        for rank, label in enumerate(labels, start=1):
            words = writer.comment_words(topic, label)
            author = qauthor if rng.random() < 0.15 else f"U{int(rng.integers(1000))}"
            mark = "?" if rng.random() < 0.3 else "."
            comments.append(Comment(
                id=f"{qid}_C{rank}",
                author_id=author,
                raw_text=writer.text(words, mark),
                rank_in_thread=rank,
                gold_label=label,
                pos_tags=writer.pos(words),
            ))
        threads.append(Thread(question, comments))
        thread_topics.append(topic)

    sentences = []
    for topic in range(config.topics):
        for _ in range(config.sentences_per_topic):
            sentences.append(writer.text(writer.words(topic, int(rng.integers(6, 11)), 1.0), "."))
    for _ in range(config.noise_sentences):
        sentences.append(writer.text(writer.words(0, int(rng.integers(6, 11)), 0.0), "."))

    logger.info("generated %d synthetic threads (%s signal) and %d sentences", len(threads), config.signal,
                len(sentences))
    return SyntheticCorpus(threads, sentences, writer.topics, writer.noise, thread_topics)


def pipeline_defaults(directory: str, seed: int) -> Dict[str, Any]:
    """Pipeline configuration sized for the synthetic data."""
    return {
        "seed": seed,
        "subtask": "A",
        "paths": {
            "train": os.path.join(directory, DatasetFile),
            "unannotated": os.path.join(directory, CorpusFile),
            "work_dir": os.path.join(directory, "work"),
        },
        "embeddings": {"dim": 20, "window": 3, "min_count": 1, "negative_samples": 5, "epochs": 10},
        "lda": {"topics": 10, "iterations": 50, "infer_iterations": 10},
        "kmeans": {"k": 20, "max_iters": 50},
        "features": {"groups": ["all"], "test_fraction": 0.2},
        "train": {"folds": 5},
    }


def write_synthetic(corpus: SyntheticCorpus, directory: str, seed: int) -> Tuple[str, str, str]:
    """Write dataset, unannotated corpus and a matching pipeline config.

    Returns the three file paths.
    """
    os.makedirs(directory, exist_ok=True)
    dataset = os.path.join(directory, DatasetFile)
    sentences = os.path.join(directory, CorpusFile)
    config = os.path.join(directory, ConfigFile)
    dump_dataset(corpus.threads, dataset)
    with open(sentences, "wt", encoding="utf-8") as fp:
        for sentence in corpus.sentences:
            fp.write(f"{sentence}\n")
    with open(config, "wt") as fp:
        json.dump(pipeline_defaults(directory, seed), fp, indent=2)
        fp.write("\n")
    logger.info("written %r, %r and %r", dataset, sentences, config)
    return dataset, sentences, config
