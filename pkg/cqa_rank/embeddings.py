"""Skip-gram word embeddings with negative sampling (SGNS).

Training follows the word2vec tool: a reduced window sampled uniformly from
1..window for every position, negatives drawn from the unigram distribution
raised to the power 3/4 and a learning rate decaying linearly to
1e-4 * initial over the total number of (center, context) pairs.

Models are read and written in the word2vec text and binary formats:

  text    "V dim" header, then V lines "word f1 f2 ... fdim"
  binary  "V dim" header, then per entry the UTF-8 word, a single space and
          dim little-endian float32 values (the writer appends a newline after
          each entry like the word2vec tool; the reader accepts both)
"""

import collections
import dataclasses
import logging
import math
import threading
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from .exceptions import ConfigError, FormatError, NumericalError

__all__ = [
    "Vocabulary",
    "EmbeddingConfig",
    "EmbeddingModel",
    "Centroid",
    "build_vocabulary",
    "train_skipgram",
    "sgns_pair_gradients",
    "centroid",
    "cosine_distance",
    "cosine_similarity",
    "most_similar",
    "save_text",
    "load_text",
    "save_binary",
    "load_binary",
]

logger = logging.getLogger(__name__)

REAL = np.float32
"""Storage precision of word vectors."""

NegativePower: float = 0.75
MinLearningRateRatio: float = 1e-4
ResampleRounds: int = 10


class Vocabulary:
    """Word to index map with corpus frequencies.

    Indices are dense 0..V-1 and ordered by descending frequency, ties broken
    lexicographically.
    """

    def __init__(self, words: Sequence[str], counts: Dict[str, int], min_count: int) -> None:
        self.words: List[str] = list(words)
        self.index: Dict[str, int] = {word: i for i, word in enumerate(self.words)}
        self.counts: Dict[str, int] = dict(counts)
        self.min_count = min_count
        if len(self.index) != len(self.words):
            raise FormatError("vocabulary contains duplicate words")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: object) -> bool:
        return word in self.index

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)}, min_count={self.min_count})"

    def frequencies(self) -> np.ndarray:
        return np.array([self.counts.get(word, 0) for word in self.words], dtype=np.float64)


@dataclasses.dataclass
class EmbeddingConfig:
    dim: int = 100
    window: int = 5
    min_count: int = 5
    negative_samples: int = 5
    epochs: int = 5
    initial_learning_rate: float = 0.025
    sample: float = 0.0
    workers: int = 1
    seed: int = 1

    def validate(self) -> None:
        if self.dim < 1:
            raise ConfigError(f"embedding dim must be >= 1, got {self.dim}")
        if self.window < 1:
            raise ConfigError(f"embedding window must be >= 1, got {self.window}")
        if self.min_count < 1:
            raise ConfigError(f"min_count must be >= 1, got {self.min_count}")
        if self.negative_samples < 1:
            raise ConfigError(f"negative_samples must be >= 1, got {self.negative_samples}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if not self.initial_learning_rate > 0:
            raise ConfigError(f"initial_learning_rate must be > 0, got {self.initial_learning_rate}")
        if self.sample < 0:
            raise ConfigError(f"sample must be >= 0, got {self.sample}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


class EmbeddingModel:
    """Vocabulary and dense word vectors.

    *input_vectors* are the word vectors used for features; *output_vectors*
    are the SGNS context weights and only present after training.
    """

    def __init__(self, vocabulary: Vocabulary, input_vectors: np.ndarray,
                 output_vectors: Optional[np.ndarray] = None, config: Optional[EmbeddingConfig] = None) -> None:
        if input_vectors.ndim != 2 or input_vectors.shape[0] != len(vocabulary):
            raise FormatError(f"vector matrix shape {input_vectors.shape} does not match vocabulary size {len(vocabulary)}")
        if not np.all(np.isfinite(input_vectors)):
            raise NumericalError("word vectors contain non-finite values")
        self.vocabulary = vocabulary
        self.input_vectors = input_vectors
        self.output_vectors = output_vectors
        self.config = config
        self.epoch_losses: List[float] = []

    @property
    def dim(self) -> int:
        return int(self.input_vectors.shape[1])

    def __len__(self) -> int:
        return len(self.vocabulary)

    def __contains__(self, word: object) -> bool:
        return word in self.vocabulary

    def __getitem__(self, word: str) -> np.ndarray:
        return self.input_vectors[self.vocabulary.index[word]]

    def __repr__(self) -> str:
        return f"EmbeddingModel(words={len(self)}, dim={self.dim})"


class Centroid(NamedTuple):
    vector: np.ndarray
    degenerate: bool


def build_vocabulary(corpus: Iterable[Sequence[str]], min_count: int) -> Vocabulary:
    """Count words of token lists and keep those with frequency >= *min_count*."""
    counter: collections.Counter = collections.Counter()
    for sentence in corpus:
        counter.update(sentence)
    kept = sorted((word for word, count in counter.items() if count >= min_count), key=lambda word: (-counter[word], word))
    if not kept:
        raise ConfigError(f"empty vocabulary: no word occurs at least {min_count} time(s)")
    logger.info("vocabulary: %d of %d word types with min_count=%d", len(kept), len(counter), min_count)
    return Vocabulary(kept, {word: counter[word] for word in kept}, min_count)


def sgns_pair_gradients(center: np.ndarray, context: np.ndarray, negatives: np.ndarray
                        ) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Returns SGNS objective log s(u.v) + sum_j log s(-u.v_j) of one
    (center, context, negatives) triple and its gradients with respect to the
    center vector u, the context vector v and every negative vector v_j.
    """
    positive = float(np.dot(center, context))
    negative = negatives @ center
    objective = math.log(expit(positive)) + float(np.sum(np.log(expit(-negative))))
    g_pos = 1.0 - expit(positive)
    g_neg = expit(negative)
    grad_center = g_pos * context - g_neg @ negatives
    grad_context = g_pos * center
    grad_negatives = -np.outer(g_neg, center)
    return objective, grad_center, grad_context, grad_negatives


class _Trainer:
    """Runs SGNS epochs over an encoded corpus."""

    def __init__(self, sentences: List[np.ndarray], vocabulary: Vocabulary, config: EmbeddingConfig) -> None:
        self.sentences = sentences
        self.config = config
        self.vocab_size = len(vocabulary)
        frequencies = vocabulary.frequencies()
        weights = frequencies ** NegativePower
        self.cum_table = np.cumsum(weights) / np.sum(weights)
        self.keep_probability = np.ones(self.vocab_size)
        if config.sample > 0:
            threshold = config.sample * np.sum(frequencies)
            self.keep_probability = np.minimum(1.0, (np.sqrt(frequencies / threshold) + 1.0) * threshold / frequencies)
        self.labels = np.zeros(config.negative_samples + 1, dtype=REAL)
        self.labels[0] = 1.0
        self.total_pairs = 0
        self.processed_pairs = 0
        self.lock = threading.Lock()  # guards processed_pairs across worker threads

    def epoch_plan(self, epoch: int) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Returns (word ids, reduced windows) per sentence; identical on every call."""
        rng = np.random.default_rng([self.config.seed, epoch, 0])
        plan = []
        for words in self.sentences:
            if self.config.sample > 0:
                words = words[rng.random(len(words)) < self.keep_probability[words]]
            windows = rng.integers(1, self.config.window + 1, size=len(words))
            plan.append((words, windows))
        return plan

    @staticmethod
    def count_pairs(words: np.ndarray, windows: np.ndarray) -> int:
        positions = np.arange(len(words))
        left = np.minimum(windows, positions)
        right = np.minimum(windows, len(words) - 1 - positions)
        return int(np.sum(left + right))

    def learning_rate(self) -> float:
        initial = self.config.initial_learning_rate
        progress = self.processed_pairs / self.total_pairs if self.total_pairs else 0.0
        return initial - (initial - MinLearningRateRatio * initial) * min(1.0, progress)

    def draw_negatives(self, rng: np.random.Generator, contexts: np.ndarray) -> np.ndarray:
        k = self.config.negative_samples
        draws = np.minimum(np.searchsorted(self.cum_table, rng.random((len(contexts), k)), side="right"), self.vocab_size - 1)
        if self.vocab_size > 1:
            for _ in range(ResampleRounds):
                clash = draws == contexts[:, None]
                if not clash.any():
                    break
                redraw = np.searchsorted(self.cum_table, rng.random(int(clash.sum())), side="right")
                draws[clash] = np.minimum(redraw, self.vocab_size - 1)
        return draws

    def train_sentence(self, w_in: np.ndarray, w_out: np.ndarray, words: np.ndarray, windows: np.ndarray,
                       rng: np.random.Generator) -> float:
        """One SGD step per (center, context) pair of a sentence; returns summed loss."""
        n = len(words)
        pairs = [(i, j) for i in range(n) for j in range(max(0, i - windows[i]), min(n, i + windows[i] + 1)) if j != i]
        if not pairs:
            return 0.0
        centers = words[[i for i, _ in pairs]]
        contexts = words[[j for _, j in pairs]]
        targets = np.column_stack([contexts, self.draw_negatives(rng, contexts)])
        loss = 0.0
        for center, target in zip(centers, targets):
            alpha = self.learning_rate()
            l1 = w_in[center]
            l2 = w_out[target]
            f = expit(l2 @ l1)
            g = (self.labels - f) * alpha
            np.add.at(w_out, target, np.outer(g, l1))
            l1 += g @ l2
            loss -= math.log(max(f[0], 1e-12)) + float(np.sum(np.log(np.maximum(1.0 - f[1:], 1e-12))))
            with self.lock:
                self.processed_pairs += 1
        return loss


def train_skipgram(corpus: Sequence[Sequence[str]], config: EmbeddingConfig,
                   vocabulary: Optional[Vocabulary] = None) -> EmbeddingModel:
    """Train SGNS word vectors on a corpus of token lists.

    With workers=1 (default) training is single-threaded and bit-reproducible
    for a fixed seed. With workers>1 sentences are split among threads updating
    the shared matrices without locks; results are then nondeterministic.
    """
    config.validate()
    if vocabulary is None:
        vocabulary = build_vocabulary(corpus, config.min_count)
    rng = np.random.default_rng(config.seed)
    vocab_size = len(vocabulary)
    w_in = ((rng.random((vocab_size, config.dim)) - 0.5) / config.dim).astype(REAL)
    w_out = np.zeros((vocab_size, config.dim), dtype=REAL)

    index = vocabulary.index
    sentences = [np.array([index[word] for word in sentence if word in index], dtype=np.int64) for sentence in corpus]
    sentences = [sentence for sentence in sentences if len(sentence)]

    trainer = _Trainer(sentences, vocabulary, config)
    trainer.total_pairs = sum(trainer.count_pairs(words, windows) for epoch in range(config.epochs) for words, windows in trainer.epoch_plan(epoch))
    logger.info("training skip-gram: %d words, dim=%d, window=%d, negative=%d, epochs=%d, %d pairs",
                vocab_size, config.dim, config.window, config.negative_samples, config.epochs, trainer.total_pairs)

    model = EmbeddingModel(vocabulary, w_in, w_out, config)
    for epoch in range(config.epochs):
        plan = trainer.epoch_plan(epoch)
        if config.workers > 1:
            loss = _run_parallel_epoch(trainer, w_in, w_out, plan, epoch)
        else:
            negatives_rng = np.random.default_rng([config.seed, epoch, 1])
            loss = sum(trainer.train_sentence(w_in, w_out, words, windows, negatives_rng) for words, windows in plan)
        model.epoch_losses.append(loss)
        logger.info("epoch %d/%d: loss=%.4f, alpha=%.6f", epoch + 1, config.epochs, loss, trainer.learning_rate())

    if not (np.all(np.isfinite(w_in)) and np.all(np.isfinite(w_out))):
        raise NumericalError("skip-gram training diverged (non-finite vectors)")
    return model


def _run_parallel_epoch(trainer: _Trainer, w_in: np.ndarray, w_out: np.ndarray,
                        plan: List[Tuple[np.ndarray, np.ndarray]], epoch: int) -> float:
    """Train an epoch with lock-free concurrent matrix updates from several threads."""
    workers = trainer.config.workers
    chunks = [plan[i::workers] for i in range(workers)]
    losses = [0.0] * workers

    def worker(worker_id: int) -> None:
        rng = np.random.default_rng([trainer.config.seed, epoch, 1, worker_id])
        for words, windows in chunks[worker_id]:
            losses[worker_id] += trainer.train_sentence(w_in, w_out, words, windows, rng)

    threads = [threading.Thread(target=worker, args=(worker_id,)) for worker_id in range(workers)]
    for thread in threads:
        thread.start()
    for thread in threads:  # waits for all threads to finish
        thread.join()
    return sum(losses)


def centroid(model: EmbeddingModel, tokens: Iterable[str]) -> Centroid:
    """Mean of the vectors of in-vocabulary tokens; zero vector flagged as
    degenerate if no token is known.
    """
    index = model.vocabulary.index
    rows = [index[token] for token in tokens if token in index]
    if not rows:
        return Centroid(np.zeros(model.dim, dtype=np.float64), True)
    return Centroid(model.input_vectors[rows].astype(np.float64).mean(axis=0), False)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Returns u.v / (|u| |v|), or 0 if either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    norm = np.linalg.norm(u) * np.linalg.norm(v)
    if norm == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / norm, -1.0, 1.0))


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Returns 1 - u.v / (|u| |v|) in [0, 2], or 1 if either vector has zero norm."""
    return 1.0 - cosine_similarity(u, v)


def most_similar(model: EmbeddingModel, word: str, topn: int = 10) -> List[Tuple[str, float]]:
    """Nearest neighbours of *word* by cosine similarity."""
    if word not in model:
        return []
    vectors = model.input_vectors.astype(np.float64)
    norms = np.linalg.norm(vectors, axis=1)
    norms[norms == 0.0] = 1.0
    normed = vectors / norms[:, None]
    scores = normed @ normed[model.vocabulary.index[word]]
    order = [i for i in np.argsort(-scores, kind="stable") if model.vocabulary.words[i] != word]
    return [(model.vocabulary.words[i], float(scores[i])) for i in order[:topn]]


#
# word2vec file formats
#

def _loaded_model(words: List[str], vectors: np.ndarray) -> EmbeddingModel:
    if not np.all(np.isfinite(vectors)):
        raise FormatError("vectors contain non-finite values")
    # Files carry no frequencies, file order is kept as index order.
    vocabulary = Vocabulary(words, {word: 0 for word in words}, 0)
    return EmbeddingModel(vocabulary, vectors)


def _parse_header(line: str) -> Tuple[int, int]:
    parts = line.split()
    if len(parts) != 2 or not all(part.isdigit() for part in parts):
        raise FormatError(f"invalid header {line.strip()!r}, expected 'V dim'")
    vocab_size, dim = int(parts[0]), int(parts[1])
    if dim < 1:
        raise FormatError(f"invalid vector size in header: {dim}")
    return vocab_size, dim


def save_text(model: EmbeddingModel, path: str) -> None:
    with open(path, "wt", encoding="utf-8") as fp:
        fp.write(f"{len(model)} {model.dim}\n")
        for word, vector in zip(model.vocabulary.words, model.input_vectors):
            fp.write(word)
            fp.write(" ")
            fp.write(" ".join(format(float(value), ".9g") for value in vector))
            fp.write("\n")


def load_text(path: str) -> EmbeddingModel:
    with open(path, "rt", encoding="utf-8") as fp:
        vocab_size, dim = _parse_header(fp.readline())
        words: List[str] = []
        vectors = np.zeros((vocab_size, dim), dtype=REAL)
        for lineno, line in enumerate(fp, start=2):
            if not line.strip():
                continue
            if len(words) == vocab_size:
                raise FormatError(f"line {lineno}: more vectors than announced in header ({vocab_size})")
            parts = line.rstrip().split(" ")
            if len(parts) != dim + 1:
                raise FormatError(f"line {lineno}: expected {dim} values, got {len(parts) - 1}")
            try:
                vectors[len(words)] = np.array(parts[1:], dtype=REAL)
            except ValueError:
                raise FormatError(f"line {lineno}: invalid vector value")
            words.append(parts[0])
    if len(words) != vocab_size:
        raise FormatError(f"header announces {vocab_size} vectors, file contains {len(words)}")
    return _loaded_model(words, vectors)


def save_binary(model: EmbeddingModel, path: str) -> None:
    with open(path, "wb") as fp:
        fp.write(f"{len(model)} {model.dim}\n".encode("utf-8"))
        for word, vector in zip(model.vocabulary.words, model.input_vectors):
            fp.write(word.encode("utf-8"))
            fp.write(b" ")
            fp.write(vector.astype("<f4").tobytes())
            fp.write(b"\n")


def load_binary(path: str) -> EmbeddingModel:
    """Read word2vec binary format as written by the word2vec tool."""
    with open(path, "rb") as fp:
        data = fp.read()
    end = data.find(b"\n")
    if end < 0:
        raise FormatError("missing header line")
    vocab_size, dim = _parse_header(data[:end].decode("ascii", errors="replace"))
    binary_len = 4 * dim
    offset = end + 1
    words: List[str] = []
    vectors = np.zeros((vocab_size, dim), dtype=REAL)
    for i in range(vocab_size):
        while offset < len(data) and data[offset:offset + 1] in (b"\n", b"\r"):
            offset += 1
        space = data.find(b" ", offset)
        if space < 0 or space + 1 + binary_len > len(data):
            raise FormatError(f"header announces {vocab_size} vectors, file ends after {i}")
        try:
            words.append(data[offset:space].decode("utf-8"))
        except UnicodeDecodeError:
            raise FormatError(f"entry {i}: word is not valid UTF-8")
        vectors[i] = np.frombuffer(data, dtype="<f4", count=dim, offset=space + 1)
        offset = space + 1 + binary_len
    if data[offset:].strip():
        raise FormatError(f"file contains more data than the {vocab_size} vectors announced in header")
    return _loaded_model(words, vectors)
