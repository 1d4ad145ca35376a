"""Pipeline stages shared by the command line front end and the ablation harness."""

import logging
import os
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import utils
from .clustering import ClusterModel, kmeans, load_clusters
from .config import PipelineConfig
from .corpus import (Comment, Label, Question, RelatedQuestionSet, SubtaskA, SubtaskC, Thread, TokenizerConfig,
                     detect_format, iter_texts, load_dataset, load_stopwords, default_stopwords, preprocess,
                     preprocess_related_set, preprocess_thread, read_sentences, split_threads)
from .embeddings import EmbeddingConfig, EmbeddingModel, load_binary, load_text, most_similar, train_skipgram
from .exceptions import ConfigError, DegenerateDataError, IntegrityError
from .features import (FeatureGroup, FeatureMatrix, FeatureModels, PairKey, extract_matrix, fit_scaler, apply_scaler,
                       parse_groups)
from .model import LogRegModel, TrainOptions, cross_validate_c, predict_proba_matrix, train
from .ranking import RankedThread, ScoredComment, make_combiner, rank_subtask_c, rank_thread
from .topics import LdaModel, load_lda, train_lda

__all__ = [
    "WorkFiles",
    "tokenizer_config",
    "load_items",
    "load_splits",
    "embedding_sentences",
    "lda_documents",
    "train_embeddings",
    "load_embeddings",
    "iter_pairs",
    "feature_models",
    "extract_features",
    "fit_classifier",
    "rank_matrix",
    "gold_labels",
    "embeddings_path",
    "enabled_groups",
    "run_kmeans",
    "run_lda",
]

logger = logging.getLogger(__name__)

Pair = Tuple[PairKey, Question, Comment, Optional[Label]]


class WorkFiles:
    """Names of the files produced in the work directory."""

    def __init__(self, work_dir: str) -> None:
        self.root = work_dir

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def embeddings(self, stamp: str = "") -> str:
        return self.path(f"embeddings_{stamp}.bin" if stamp else "embeddings.bin")

    def clusters(self, stamp: str = "") -> str:
        return self.path(f"clusters_{stamp}.txt" if stamp else "clusters.txt")

    @property
    def lda(self) -> str:
        return self.path("lda.txt")

    def features(self, split: str) -> str:
        return self.path(f"features_{split}.csv")

    @property
    def model(self) -> str:
        return self.path("model.json")

    @property
    def predictions(self) -> str:
        return self.path("predictions.tsv")

    @property
    def report(self) -> str:
        return self.path("report.json")

    @property
    def ablation(self) -> str:
        return self.path("ablation.txt")

    def run_stamp(self, stage: str) -> str:
        return self.path(f"{stage}.run.json")

    def makedirs(self) -> None:
        os.makedirs(self.root, exist_ok=True)


def tokenizer_config(config: PipelineConfig) -> TokenizerConfig:
    stopwords = load_stopwords(config.paths.stopwords) if config.paths.stopwords else default_stopwords()
    if not config.features.remove_stopwords:
        stopwords = set()
    return TokenizerConfig(stopword_set=frozenset(stopwords))


def load_items(path: str, subtask: str, tokenizer: TokenizerConfig) -> list:
    """Load and preprocess a dataset of the given subtask."""
    expected = SubtaskA if subtask == "A" else SubtaskC
    found = detect_format(path)
    if found != expected:
        raise ConfigError(f"{path!r} holds {found} data but subtask {subtask} was requested")
    items = load_dataset(path, expected)
    if expected == SubtaskA:
        return [preprocess_thread(thread, tokenizer) for thread in items]
    return [preprocess_related_set(item, tokenizer) for item in items]


def load_splits(config: PipelineConfig) -> Tuple[list, list]:
    """Training and test items; without a test set the training set is split."""
    config.paths.require("train")
    tokenizer = tokenizer_config(config)
    items = load_items(config.paths.train, config.subtask, tokenizer)
    if config.paths.test:
        config.paths.require("test")
        return items, load_items(config.paths.test, config.subtask, tokenizer)
    train_items, test_items = split_threads(items, config.features.test_fraction, config.seed)
    logger.info("split %d items into %d for training and %d for testing", len(items), len(train_items), len(test_items))
    return train_items, test_items


def embedding_sentences(config: PipelineConfig, train_items: Sequence) -> List[List[str]]:
    """Unannotated corpus (when given) plus all texts of the training items, stopwords kept."""
    tokenizer = tokenizer_config(config).without_stopwords()
    sentences = []
    if config.paths.unannotated:
        config.paths.require("unannotated")
        sentences.extend(read_sentences(config.paths.unannotated, tokenizer))
    for text in iter_texts(train_items):
        tokens = preprocess(text, tokenizer)
        if tokens:
            sentences.append(tokens)
    if not sentences:
        raise ConfigError("no sentences to train embeddings on")
    return sentences


def _threads(items: Sequence) -> Iterator[Thread]:
    for item in items:
        if isinstance(item, Thread):
            yield item
        else:
            for related in item.related:
                yield related.thread


def lda_documents(train_items: Sequence) -> List[List[str]]:
    """Question bodies and comments of the training items as LDA documents."""
    docs = []
    for thread in _threads(train_items):
        docs.append(thread.question.body_tokens)
        docs.extend(comment.tokens for comment in thread.comments)
    return [doc for doc in docs if doc]


def train_embeddings(sentences: List[List[str]], config: EmbeddingConfig) -> EmbeddingModel:
    workers = min(config.workers, utils.thread_count())
    if workers != config.workers:
        logger.warning("embedding workers capped to %d by %s", workers, utils.ThreadsEnvVar)
        config.workers = workers
    model = train_skipgram(sentences, config)
    for word in model.vocabulary.words[:5]:
        neighbours = ", ".join(f"{other} ({score:.3f})" for other, score in most_similar(model, word, 5))
        logger.info("nearest to %r: %s", word, neighbours)
    return model


def load_embeddings(path: str) -> EmbeddingModel:
    """Read a word2vec model; ".txt" files use the text format, all others binary."""
    if path.endswith(".txt"):
        return load_text(path)
    return load_binary(path)


def embeddings_path(config: PipelineConfig) -> str:
    return config.paths.embeddings or WorkFiles(config.paths.work_dir).embeddings()


#
# Features
#

def iter_pairs(items: Sequence, subtask: str) -> Iterator[Pair]:
    """(key, question, comment, label) per comment.

    Subtask C pairs the related question with its comment and carries the
    label relative to the original question.
    """
    for item in items:
        if subtask == "A":
            assert isinstance(item, Thread)
            for comment in item.comments:
                key = PairKey(item.id, item.id, comment.id, comment.rank_in_thread, 1)
                yield key, item.question, comment, comment.gold_label
        else:
            assert isinstance(item, RelatedQuestionSet)
            for related in item.related:
                thread = related.thread
                for comment in thread.comments:
                    key = PairKey(item.id, thread.id, comment.id, comment.rank_in_thread, related.search_rank)
                    yield key, thread.question, comment, related.labels.get(comment.id)


def feature_models(config: PipelineConfig, groups: Sequence[FeatureGroup], train_items: Sequence) -> FeatureModels:
    """Load the models needed by *groups* from the work directory."""
    files = WorkFiles(config.paths.work_dir)
    needs = set(groups)
    embeddings: Optional[EmbeddingModel] = None
    clusters: Optional[ClusterModel] = None
    lda: Optional[LdaModel] = None
    if needs & {FeatureGroup.QUESTION_TO_COMMENT, FeatureGroup.MAXIMIZED, FeatureGroup.ALIGNED,
                FeatureGroup.POS_SIM, FeatureGroup.RAW_VECTORS, FeatureGroup.WORD_CLUSTERS}:
        embeddings = load_embeddings(_existing(embeddings_path(config), "train-embeddings"))
    if FeatureGroup.WORD_CLUSTERS in needs:
        clusters = load_clusters(_existing(files.clusters(), "cluster"), embeddings)
    if FeatureGroup.LDA_SIM in needs:
        lda = load_lda(_existing(files.lda, "train-lda"))
    categories = sorted({question.category for _, question, _, _ in iter_pairs(train_items, config.subtask)})
    return FeatureModels(embeddings, clusters, lda, categories, config.features.tagset,
                         config.lda.infer_iterations, config.lda.seed)


def _existing(path: str, stage: str) -> str:
    if not os.path.exists(path):
        raise FileNotFoundError(f"missing {path!r}, run '{stage}' first")
    return path


def extract_features(items: Sequence, subtask: str, models: FeatureModels,
                     groups: Sequence[FeatureGroup]) -> FeatureMatrix:
    pairs = list(iter_pairs(items, subtask))
    logger.info("extracting features of %d pairs ...", len(pairs))
    return extract_matrix(pairs, models, groups, utils.thread_count())


def enabled_groups(config: PipelineConfig) -> List[FeatureGroup]:
    return sorted(parse_groups(config.features.groups), key=list(FeatureGroup).index)


#
# Classifier and ranking
#

def fit_classifier(matrix: FeatureMatrix, opts: TrainOptions) -> LogRegModel:
    """Scale, select C (unless fixed) and train on a labeled feature matrix."""
    y = matrix.binary_labels()
    if len(np.unique(y)) < 2:
        raise DegenerateDataError("training data contains a single class")
    scaler = fit_scaler(matrix.values)
    X = apply_scaler(scaler, matrix.values)
    if opts.fixed_c is not None:
        cost_c = opts.fixed_c
    else:
        cost_c, _ = cross_validate_c(X, y, opts, utils.thread_count())
    model = train(X, y, cost_c, opts)
    model.scaler = scaler
    model.schema_hash = matrix.schema.hash()
    return model


def rank_matrix(model: LogRegModel, matrix: FeatureMatrix, subtask: str, combiner: str = "product",
                combiner_weight: float = 0.5) -> List[RankedThread]:
    """Score and rank all rows, one ranked list per query."""
    if model.schema_hash != matrix.schema.hash():
        raise IntegrityError("feature schema of the matrix does not match the model, refusing to predict")
    probabilities = predict_proba_matrix(model, matrix.values, scale=True)
    grouped: Dict[str, List[ScoredComment]] = {}
    for key, probability, label in zip(matrix.keys, probabilities, matrix.labels):
        grouped.setdefault(key.query_id, []).append(
            ScoredComment(key.comment_id, float(probability), key.rank_in_thread, label,
                          thread_id=key.thread_id, search_rank=key.search_rank))
    if subtask == "A":
        return [rank_thread(query_id, items) for query_id, items in grouped.items()]
    combine = make_combiner(combiner, combiner_weight)
    return [rank_subtask_c(query_id, items, combine) for query_id, items in grouped.items()]


def gold_labels(items: Sequence, subtask: str) -> Dict[Tuple[str, str], Label]:
    """Gold labels keyed by (query id, comment id)."""
    labels = {}
    for key, _, _, label in iter_pairs(items, subtask):
        if label is not None:
            labels[(key.query_id, key.comment_id)] = label
    return labels


def run_kmeans(config: PipelineConfig, embeddings: EmbeddingModel) -> ClusterModel:
    return kmeans(embeddings, config.kmeans.k, config.kmeans.max_iters, config.kmeans.seed, utils.thread_count())


def run_lda(config: PipelineConfig, train_items: Sequence) -> LdaModel:
    lda = config.lda
    return train_lda(lda_documents(train_items), lda.topics, lda.alpha, lda.beta, lda.iterations, lda.seed)

