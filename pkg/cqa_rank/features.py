"""Feature extraction for (question, comment) pairs.

Features are organized in groups, the unit of ablation. Dense column order
is fixed by a FeatureSchema built from the enabled groups:

  QuestionToComment  body and subject centroid cosine to comment centroid
  Maximized          mean of top 1, 2, 3, 5 comment word similarities to the body centroid
  Aligned            mean over body words of best matching comment word
  PosSim             per tag cosine of body/comment centroids of words with that tag
  WordClusters       cosine of cluster bags
  LdaSim             cosine of inferred topic distributions
  Metadata           question mark, lengths, length ratio, same author, rank
  MetaCategories     one-hot question category
  RawVectors         body centroid followed by comment centroid
"""

import concurrent.futures
import dataclasses
import enum
import hashlib
import json
import logging
import threading
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from .clustering import ClusterModel, cluster_bag, cluster_similarity
from .corpus import Comment, Label, PosTags, Question
from .embeddings import EmbeddingModel, centroid, cosine_similarity
from .exceptions import ConfigError, FormatError, IntegrityError
from .topics import LdaModel, TopicDistribution, infer_topics, topic_similarity

__all__ = [
    "FeatureGroup",
    "FeatureSchema",
    "FeatureVector",
    "FeatureModels",
    "FeatureMatrix",
    "ScalerParams",
    "UNIVERSAL_TAGSET",
    "PENN_TO_UNIVERSAL",
    "PRESETS",
    "STANDARD_REMOVAL_SETS",
    "parse_groups",
    "build_schema",
    "qc_similarity",
    "maximized_similarity",
    "aligned_similarity",
    "pos_similarity",
    "metadata_features",
    "raw_vector_features",
    "assemble",
    "fit_scaler",
    "apply_scaler",
]

logger = logging.getLogger(__name__)


class FeatureGroup(str, enum.Enum):
    QUESTION_TO_COMMENT = "QuestionToComment"
    MAXIMIZED = "Maximized"
    ALIGNED = "Aligned"
    POS_SIM = "PosSim"
    WORD_CLUSTERS = "WordClusters"
    LDA_SIM = "LdaSim"
    METADATA = "Metadata"
    META_CATEGORIES = "MetaCategories"
    RAW_VECTORS = "RawVectors"


ALL_GROUPS: Tuple[FeatureGroup, ...] = tuple(FeatureGroup)

MaximizedTopN: Tuple[int, ...] = (1, 2, 3, 5)

UNIVERSAL_TAGSET: Tuple[str, ...] = ("ADJ", "ADP", "ADV", "CONJ", "DET", "NOUN", "NUM", "PRT", "PRON", "VERB", ".", "X")

PENN_TO_UNIVERSAL: Dict[str, str] = {
    "!": ".", "#": ".", "$": ".", "''": ".", "``": ".", "(": ".", ")": ".", ",": ".",
    "-LRB-": ".", "-RRB-": ".", ".": ".", ":": ".", "?": ".",
    "CC": "CONJ",
    "CD": "NUM",
    "DT": "DET", "EX": "DET", "PDT": "DET", "WDT": "DET",
    "FW": "X", "LS": "X", "SYM": "X", "UH": "X",
    "IN": "ADP",
    "JJ": "ADJ", "JJR": "ADJ", "JJS": "ADJ",
    "MD": "VERB", "VB": "VERB", "VBD": "VERB", "VBG": "VERB", "VBN": "VERB", "VBP": "VERB", "VBZ": "VERB",
    "NN": "NOUN", "NNS": "NOUN", "NNP": "NOUN", "NNPS": "NOUN",
    "POS": "PRT", "RP": "PRT", "TO": "PRT",
    "PRP": "PRON", "PRP$": "PRON", "WP": "PRON", "WP$": "PRON",
    "RB": "ADV", "RBR": "ADV", "RBS": "ADV", "WRB": "ADV",
}

METADATA_NAMES: Tuple[str, ...] = ("has_qmark", "answer_len", "question_len", "len_ratio", "same_author", "rank")

# Flags attached to a FeatureVector; they never become columns.
FlagPosMissing = "pos_missing"
FlagQuestionOov = "question_oov"
FlagCommentOov = "comment_oov"

PRESETS: Dict[str, FrozenSet[FeatureGroup]] = {
    "all": frozenset(ALL_GROUPS),
    "primary-submission": frozenset(ALL_GROUPS) - {FeatureGroup.POS_SIM, FeatureGroup.META_CATEGORIES},
}

STANDARD_REMOVAL_SETS: Dict[str, FrozenSet[FeatureGroup]] = {
    "Q-to-C": frozenset({FeatureGroup.QUESTION_TO_COMMENT}),
    "Maximized": frozenset({FeatureGroup.MAXIMIZED}),
    "WC sim": frozenset({FeatureGroup.WORD_CLUSTERS}),
    "WC sim & Meta cat": frozenset({FeatureGroup.WORD_CLUSTERS, FeatureGroup.META_CATEGORIES}),
    "Meta cat": frozenset({FeatureGroup.META_CATEGORIES}),
    "Meta cat & LDA": frozenset({FeatureGroup.META_CATEGORIES, FeatureGroup.LDA_SIM}),
    "POS sim & WC sim": frozenset({FeatureGroup.POS_SIM, FeatureGroup.WORD_CLUSTERS}),
    "POS sim & Meta cat": frozenset({FeatureGroup.POS_SIM, FeatureGroup.META_CATEGORIES}),
    "Aligned": frozenset({FeatureGroup.ALIGNED}),
    "Meta cat & WC sim & LDA": frozenset({FeatureGroup.META_CATEGORIES, FeatureGroup.WORD_CLUSTERS,
                                          FeatureGroup.LDA_SIM}),
    "WC sim & LDA": frozenset({FeatureGroup.WORD_CLUSTERS, FeatureGroup.LDA_SIM}),
    "LDA": frozenset({FeatureGroup.LDA_SIM}),
    "POS sim": frozenset({FeatureGroup.POS_SIM}),
    "Metadata full": frozenset({FeatureGroup.METADATA, FeatureGroup.META_CATEGORIES}),
    "Word vectors": frozenset({FeatureGroup.RAW_VECTORS}),
}


def parse_group(name: str) -> FeatureGroup:
    """Resolve a group by its name, case insensitive."""
    for group in FeatureGroup:
        if name.lower() in (group.value.lower(), group.name.lower()):
            return group
    raise ConfigError(f"unknown feature group: {name!r} (choose from {', '.join(g.value for g in FeatureGroup)})")


def parse_groups(names: Iterable[str]) -> FrozenSet[FeatureGroup]:
    """Resolve group names; a single preset name expands to its groups."""
    names = list(names)
    if len(names) == 1 and names[0] in PRESETS:
        return PRESETS[names[0]]
    return frozenset(parse_group(name) for name in names)


def resolve_tagset(tagset: Sequence[str]) -> Tuple[str, ...]:
    """Returns the tags of a tagset given as list of tags or the name "universal"."""
    if isinstance(tagset, str):
        tagset = [tagset]
    if len(tagset) == 1 and tagset[0].lower() == "universal":
        return UNIVERSAL_TAGSET
    if not tagset or len(set(tagset)) != len(tagset):
        raise ConfigError("tagset must be a non-empty list of distinct tags")
    return tuple(tagset)


def map_tag(tag: str, tagset: Sequence[str]) -> Optional[str]:
    """Map an input tag onto the configured tagset, None if it has no image."""
    if tag in tagset:
        return tag
    mapped = PENN_TO_UNIVERSAL.get(tag.upper())
    if mapped is not None and mapped in tagset:
        return mapped
    return None


@dataclasses.dataclass(frozen=True)
class FeatureSchema:
    """Ordered (group, name) columns of a feature matrix."""
    columns: Tuple[Tuple[FeatureGroup, str], ...]

    @property
    def names(self) -> List[str]:
        return [name for _, name in self.columns]

    @property
    def groups(self) -> List[FeatureGroup]:
        return sorted({group for group, _ in self.columns}, key=ALL_GROUPS.index)

    def __len__(self) -> int:
        return len(self.columns)

    def hash(self) -> str:
        """SHA-256 over the ordered column names."""
        return hashlib.sha256("\n".join(self.names).encode("utf-8")).hexdigest()

    def indices(self, groups: Iterable[FeatureGroup]) -> List[int]:
        wanted = set(groups)
        return [i for i, (group, _) in enumerate(self.columns) if group in wanted]

    def select(self, groups: Iterable[FeatureGroup]) -> "FeatureSchema":
        wanted = set(groups)
        return FeatureSchema(tuple(column for column in self.columns if column[0] in wanted))

    def to_json(self) -> Dict:
        return {
            "hash": self.hash(),
            "columns": [{"group": group.value, "name": name} for group, name in self.columns],
        }

    @classmethod
    def from_json(cls, data: Dict) -> "FeatureSchema":
        try:
            columns = tuple((FeatureGroup(item["group"]), str(item["name"])) for item in data["columns"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"invalid feature schema: {exc}")
        schema = cls(columns)
        if "hash" in data and data["hash"] != schema.hash():
            raise IntegrityError("feature schema hash does not match its columns")
        return schema


@dataclasses.dataclass
class FeatureVector:
    """Named feature values of one (question, comment) pair."""
    entries: List[Tuple[FeatureGroup, str, float]]
    flags: Set[str] = dataclasses.field(default_factory=set)

    @property
    def names(self) -> List[str]:
        return [name for _, name, _ in self.entries]

    @property
    def values(self) -> np.ndarray:
        return np.array([value for _, _, value in self.entries], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.entries)


class _QuestionView(NamedTuple):
    body: np.ndarray
    subject: np.ndarray
    topics: Optional[TopicDistribution]


class FeatureModels:
    """Read-only models consulted by feature extraction.

    Per-question data (centroids, topic distribution) is cached by question id.
    """

    def __init__(self, embeddings: Optional[EmbeddingModel] = None, clusters: Optional[ClusterModel] = None,
                 lda: Optional[LdaModel] = None, categories: Sequence[str] = (),
                 tagset: Sequence[str] = UNIVERSAL_TAGSET, lda_infer_iterations: int = 50, seed: int = 1) -> None:
        self.embeddings = embeddings
        self.clusters = clusters
        self.lda = lda
        self.categories: Tuple[str, ...] = tuple(sorted(set(categories)))
        self.tagset = resolve_tagset(tagset)
        self.lda_infer_iterations = lda_infer_iterations
        self.seed = seed
        self._lock = threading.Lock()
        self._questions: Dict[Tuple[str, Tuple[str, ...], Tuple[str, ...]], _QuestionView] = {}

    def topics(self, tokens: Sequence[str]) -> TopicDistribution:
        assert self.lda is not None
        return infer_topics(self.lda, tokens, self.lda_infer_iterations, self.seed)

    def question_view(self, question: Question) -> _QuestionView:
        key = (question.id, tuple(question.subject_tokens), tuple(question.body_tokens))
        with self._lock:
            view = self._questions.get(key)
        if view is None:
            if self.embeddings is not None:
                body = centroid(self.embeddings, question.body_tokens).vector
                subject = centroid(self.embeddings, question.subject_tokens).vector
            else:
                body = subject = np.zeros(0)
            topics = self.topics(question.body_tokens) if self.lda is not None else None
            view = _QuestionView(body, subject, topics)
            with self._lock:
                self._questions[key] = view
        return view


_Requirements: Dict[FeatureGroup, str] = {
    FeatureGroup.QUESTION_TO_COMMENT: "embeddings",
    FeatureGroup.MAXIMIZED: "embeddings",
    FeatureGroup.ALIGNED: "embeddings",
    FeatureGroup.POS_SIM: "embeddings",
    FeatureGroup.RAW_VECTORS: "embeddings",
    FeatureGroup.WORD_CLUSTERS: "clusters",
    FeatureGroup.LDA_SIM: "lda",
}


def _check_models(models: FeatureModels, groups: Iterable[FeatureGroup]) -> List[FeatureGroup]:
    ordered = sorted(set(groups), key=ALL_GROUPS.index)
    if not ordered:
        raise ConfigError("no feature groups enabled")
    for group in ordered:
        required = _Requirements.get(group)
        if required is not None and getattr(models, required) is None:
            raise ConfigError(f"feature group {group.value} requires a loaded {required} model")
    return ordered


def _group_names(group: FeatureGroup, models: FeatureModels) -> List[str]:
    if group is FeatureGroup.QUESTION_TO_COMMENT:
        return ["qc_body", "qc_subject"]
    if group is FeatureGroup.MAXIMIZED:
        return [f"max_top{n}" for n in MaximizedTopN]
    if group is FeatureGroup.ALIGNED:
        return ["aligned"]
    if group is FeatureGroup.POS_SIM:
        return [f"pos_{tag}" for tag in models.tagset]
    if group is FeatureGroup.WORD_CLUSTERS:
        return ["cluster_sim"]
    if group is FeatureGroup.LDA_SIM:
        return ["lda_sim"]
    if group is FeatureGroup.METADATA:
        return list(METADATA_NAMES)
    if group is FeatureGroup.META_CATEGORIES:
        return [f"category={category}" for category in models.categories]
    assert models.embeddings is not None
    dim = models.embeddings.dim
    return [f"q_vec_{i}" for i in range(dim)] + [f"c_vec_{i}" for i in range(dim)]


def build_schema(groups: Iterable[FeatureGroup], models: FeatureModels) -> FeatureSchema:
    columns = []
    for group in _check_models(models, groups):
        columns.extend((group, name) for name in _group_names(group, models))
    return FeatureSchema(tuple(columns))


#
# Feature families
#

def qc_similarity(q: Question, c: Comment, emb: EmbeddingModel) -> List[float]:
    """Cosine of body and subject centroids to the comment centroid."""
    comment = centroid(emb, c.tokens).vector
    return [
        cosine_similarity(centroid(emb, q.body_tokens).vector, comment),
        cosine_similarity(centroid(emb, q.subject_tokens).vector, comment),
    ]


def _unit_rows(emb: EmbeddingModel, tokens: Iterable[str]) -> np.ndarray:
    index = emb.vocabulary.index
    rows = emb.input_vectors[[index[token] for token in tokens if token in index]].astype(np.float64)
    norms = np.linalg.norm(rows, axis=1)
    norms[norms == 0.0] = 1.0
    return rows / norms[:, None]


def maximized_similarity(q_body_centroid: np.ndarray, c_tokens: Sequence[str], emb: EmbeddingModel,
                         n_values: Sequence[int] = MaximizedTopN) -> List[float]:
    """Mean of the top N word-to-centroid similarities for every N in *n_values*."""
    rows = _unit_rows(emb, c_tokens)
    if not len(rows):
        return [0.0] * len(n_values)
    norm = np.linalg.norm(q_body_centroid)
    if norm == 0.0:
        similarities = np.zeros(len(rows))
    else:
        similarities = np.clip(rows @ (np.asarray(q_body_centroid, dtype=np.float64) / norm), -1.0, 1.0)
    ranked = np.sort(similarities)[::-1]
    return [float(np.mean(ranked[:n])) for n in n_values]


def aligned_similarity(q_tokens: Sequence[str], c_tokens: Sequence[str], emb: EmbeddingModel) -> float:
    """Mean over question words of the best cosine match among comment words."""
    q_rows = _unit_rows(emb, q_tokens)
    c_rows = _unit_rows(emb, c_tokens)
    if not len(q_rows) or not len(c_rows):
        return 0.0
    pairwise = np.clip(q_rows @ c_rows.T, -1.0, 1.0)
    return float(np.mean(pairwise.max(axis=1)))


def _tagged_words(pos_tags: PosTags, tagset: Sequence[str]) -> Dict[str, List[str]]:
    words: Dict[str, List[str]] = {}
    for word, tag in pos_tags:
        mapped = map_tag(tag, tagset)
        if mapped is not None:
            words.setdefault(mapped, []).append(word)
    return words


def pos_similarity(q: Question, c: Comment, emb: EmbeddingModel,
                   tagset: Sequence[str] = UNIVERSAL_TAGSET) -> Tuple[List[float], bool]:
    """Per tag cosine of body and comment centroids of words with that tag.

    Returns (features, present); absent annotations on either side yield zeros.
    """
    if q.pos_tags is None or c.pos_tags is None:
        return [0.0] * len(tagset), False
    q_words = _tagged_words(q.pos_tags, tagset)
    c_words = _tagged_words(c.pos_tags, tagset)
    features = []
    for tag in tagset:
        features.append(cosine_similarity(centroid(emb, q_words.get(tag, [])).vector,
                                          centroid(emb, c_words.get(tag, [])).vector))
    return features, True


def metadata_features(q: Question, c: Comment, categories: Sequence[str] = ()) -> Tuple[List[float], List[float]]:
    """Returns (scalar metadata features, category one-hot)."""
    answer_len = len(c.tokens)
    question_len = len(q.body_tokens)
    scalars = [
        1.0 if "?" in c.raw_text else 0.0,
        float(answer_len),
        float(question_len),
        question_len / (answer_len + 1),
        1.0 if q.author_id == c.author_id else 0.0,
        float(c.rank_in_thread),
    ]
    one_hot = [1.0 if q.category == category else 0.0 for category in categories]
    return scalars, one_hot


def raw_vector_features(q: Question, c: Comment, emb: EmbeddingModel) -> List[float]:
    return list(centroid(emb, q.body_tokens).vector) + list(centroid(emb, c.tokens).vector)


def assemble(q: Question, c: Comment, models: FeatureModels, enabled_groups: Iterable[FeatureGroup]) -> FeatureVector:
    """Concatenate the enabled feature groups in schema order."""
    groups = _check_models(models, enabled_groups)
    emb = models.embeddings
    view = models.question_view(q)
    comment_centroid = centroid(emb, c.tokens) if emb is not None else None

    vector = FeatureVector([])
    if comment_centroid is not None:
        if comment_centroid.degenerate:
            vector.flags.add(FlagCommentOov)
        if not np.any(view.body):
            vector.flags.add(FlagQuestionOov)

    for group in groups:
        if group is FeatureGroup.QUESTION_TO_COMMENT:
            assert comment_centroid is not None
            values = [cosine_similarity(view.body, comment_centroid.vector),
                      cosine_similarity(view.subject, comment_centroid.vector)]
        elif group is FeatureGroup.MAXIMIZED:
            values = maximized_similarity(view.body, c.tokens, emb)
        elif group is FeatureGroup.ALIGNED:
            values = [aligned_similarity(q.body_tokens, c.tokens, emb)]
        elif group is FeatureGroup.POS_SIM:
            values, present = pos_similarity(q, c, emb, models.tagset)
            if not present:
                vector.flags.add(FlagPosMissing)
        elif group is FeatureGroup.WORD_CLUSTERS:
            assert models.clusters is not None
            values = [cluster_similarity(cluster_bag(q.body_tokens, models.clusters),
                                         cluster_bag(c.tokens, models.clusters))]
        elif group is FeatureGroup.LDA_SIM:
            assert view.topics is not None
            values = [topic_similarity(view.topics, models.topics(c.tokens))]
        elif group is FeatureGroup.METADATA:
            values = metadata_features(q, c)[0]
        elif group is FeatureGroup.META_CATEGORIES:
            values = metadata_features(q, c, models.categories)[1]
        else:
            assert comment_centroid is not None
            values = list(view.body) + list(comment_centroid.vector)
        names = _group_names(group, models)
        assert len(names) == len(values), group
        vector.entries.extend((group, name, float(value)) for name, value in zip(names, values))
    return vector


#
# Scaling
#

@dataclasses.dataclass(frozen=True)
class ScalerParams:
    """Per column (min, max) learned on training rows."""
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self) -> None:
        if self.minimum.shape != self.maximum.shape or np.any(self.maximum < self.minimum):
            raise ValueError("scaler requires max >= min per column")


def fit_scaler(matrix: np.ndarray) -> ScalerParams:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or not len(matrix):
        raise ValueError("scaler must be fitted on a non-empty 2-D matrix")
    return ScalerParams(matrix.min(axis=0), matrix.max(axis=0))


def apply_scaler(params: ScalerParams, values: np.ndarray) -> np.ndarray:
    """Min-max scale a vector or matrix, clamped to [0, 1]; constant columns map to 0."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[-1] != len(params.minimum):
        raise ValueError(f"dimension mismatch: {values.shape[-1]} vs {len(params.minimum)}")
    span = params.maximum - params.minimum
    constant = span == 0.0
    scaled = (values - params.minimum) / np.where(constant, 1.0, span)
    scaled = np.where(constant, 0.0, scaled)
    return np.clip(scaled, 0.0, 1.0)


#
# Feature matrix
#

class PairKey(NamedTuple):
    """Identifies one row: query (original question), thread and comment."""
    query_id: str
    thread_id: str
    comment_id: str
    rank_in_thread: int
    search_rank: int


KeyColumns: Tuple[str, ...] = ("query_id", "thread_id", "comment_id", "rank_in_thread", "search_rank", "label")


@dataclasses.dataclass
class FeatureMatrix:
    """Dense feature rows with their keys and gold labels."""
    schema: FeatureSchema
    keys: List[PairKey]
    values: np.ndarray
    labels: List[Optional[Label]]
    flags: List[Set[str]] = dataclasses.field(default_factory=list)

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.keys), len(self.schema)):
            raise IntegrityError(f"feature matrix shape {self.values.shape} does not match "
                                 f"{len(self.keys)} rows x {len(self.schema)} columns")
        if len(self.labels) != len(self.keys):
            raise IntegrityError("feature matrix needs one label entry per row")

    def __len__(self) -> int:
        return len(self.keys)

    def binary_labels(self) -> np.ndarray:
        """Good -> +1, Bad and PotentiallyUseful -> -1."""
        if any(label is None for label in self.labels):
            raise IntegrityError("feature matrix has rows without gold label")
        return np.array([1.0 if label is Label.GOOD else -1.0 for label in self.labels])

    def select_groups(self, groups: Iterable[FeatureGroup]) -> "FeatureMatrix":
        """Keep only the columns of *groups* (ablation)."""
        groups = set(groups)
        if not groups:
            raise ConfigError("no feature groups enabled")
        columns = self.schema.indices(groups)
        return FeatureMatrix(self.schema.select(groups), list(self.keys), self.values[:, columns],
                             list(self.labels), list(self.flags))

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=self.schema.names)
        keys = pd.DataFrame(self.keys, columns=list(KeyColumns[:-1]))
        keys["label"] = [label.value if label is not None else "" for label in self.labels]
        return pd.concat([keys, frame], axis=1)

    def to_csv(self, path: str) -> None:
        """Write rows to CSV and the schema to "<path>.schema.json"."""
        self.to_frame().to_csv(path, index=False)
        with open(f"{path}.schema.json", "wt") as fp:
            json.dump(self.schema.to_json(), fp, indent=2)
            fp.write("\n")
        logger.info("written feature matrix %r: %d rows, %d columns", path, len(self), len(self.schema))

    @classmethod
    def read_csv(cls, path: str) -> "FeatureMatrix":
        try:
            with open(f"{path}.schema.json", "rt") as fp:
                schema = FeatureSchema.from_json(json.load(fp))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}.schema.json: {exc}")
        dtypes = {"query_id": str, "thread_id": str, "comment_id": str, "label": str}
        frame = pd.read_csv(path, dtype=dtypes, keep_default_na=False, float_precision="round_trip")
        expected = list(KeyColumns) + schema.names
        if list(frame.columns) != expected:
            raise IntegrityError(f"{path}: columns do not match feature schema")
        keys = [PairKey(row.query_id, row.thread_id, row.comment_id, int(row.rank_in_thread), int(row.search_rank))
                for row in frame[list(KeyColumns[:-1])].itertuples(index=False)]
        try:
            labels = [Label(value) if value else None for value in frame["label"]]
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}")
        values = frame[schema.names].to_numpy(dtype=np.float64) if len(schema) else np.zeros((len(frame), 0))
        return cls(schema, keys, values, labels, [set() for _ in keys])


def extract_matrix(pairs: Sequence[Tuple[PairKey, Question, Comment, Optional[Label]]], models: FeatureModels,
                   groups: Iterable[FeatureGroup], workers: int = 1) -> FeatureMatrix:
    """Assemble feature rows of all pairs; rows are independent and extracted in parallel."""
    schema = build_schema(groups, models)

    def extract(pair: Tuple[PairKey, Question, Comment, Optional[Label]]) -> FeatureVector:
        return assemble(pair[1], pair[2], models, schema.groups)

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            vectors = list(executor.map(extract, pairs))
    else:
        vectors = [extract(pair) for pair in pairs]

    values = np.array([vector.values for vector in vectors], dtype=np.float64).reshape(len(vectors), len(schema))
    flags = [vector.flags for vector in vectors]
    missing_pos = sum(FlagPosMissing in flag for flag in flags)
    if missing_pos:
        logger.warning("%d of %d pairs lack POS annotations, POS similarities set to 0", missing_pos, len(flags))
    return FeatureMatrix(schema, [pair[0] for pair in pairs], values, [pair[3] for pair in pairs], flags)
