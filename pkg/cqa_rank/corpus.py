"""CQA data model, JSONL dataset ingestion and text preprocessing.

Threads are read from JSONL files, one thread per line:

  {"qid": "Q1", "qauthor": "U1", "subject": "...", "body": "...", "category": "Visas",
   "comments": [{"cid": "Q1_C1", "author": "U2", "text": "...", "rank": 1, "label": "Good"}]}

Related question sets (Subtask C) wrap an original question and up to ten
related threads:

  {"orig": {...question fields...},
   "related": [{"thread": {...thread...}, "search_rank": 1, "labels": {"Q1_C1": "Good"}}]}

Preprocessing replaces URLs, numbers, images and emoticons by canonical
tokens, extracts runs of [A-Za-z_], lowercases and drops stopwords.

  URL       (?:scheme://|www.) followed by a non-space run
  number    digit run with optional decimal part
  image     <img ...> tag, [img]...[/img] markup or a file name ending in an
            image extension (jpg, jpeg, png, gif, bmp, webp)
  emoticon  one of EMOTICONS; emoticons starting (ending) with a letter must not
            be preceded (followed) by a letter, digit or underscore
"""

import dataclasses
import enum
import json
import logging
import os
import re
from typing import Any, Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .exceptions import ConfigError, IntegrityError, SchemaError

__all__ = [
    "Label",
    "Comment",
    "Question",
    "Thread",
    "RelatedThread",
    "RelatedQuestionSet",
    "TokenizerConfig",
    "load_dataset",
    "dump_dataset",
    "detect_format",
    "preprocess",
    "preprocess_question",
    "preprocess_thread",
    "preprocess_related_set",
    "load_stopwords",
    "default_stopwords",
    "default_tokenizer_config",
    "iter_texts",
    "read_sentences",
    "split_threads",
]

logger = logging.getLogger(__name__)

SubtaskA: str = "subtask_a"
SubtaskC: str = "subtask_c"

DefaultStopwordsFile: str = os.path.join(os.path.dirname(__file__), "data", "english_stopwords.txt")
"""Bundled 127-word English stopword list."""

EMOTICONS: Tuple[str, ...] = (
    ":)", ":-)", ":(", ":-(", ":D", ":-D", ";)", ";-)", ";D", ":P", ":-P", ":p", ":-p",
    ":o", ":O", ":-O", ":/", ":-/", ":\\", ":|", ":-|", ":*", ":-*", ":'(", ":')",
    ":]", ":[", ":}", ":{", ":$", ":@", ">:(", "=)", "=(", "=D", "xD", "XD",
    "^_^", "^^", "-_-", "o_O", "O_o", "B-)",
)
"""Fixed list of ASCII emoticons replaced by the emoticon token."""


def _emoticon_pattern(emoticon: str) -> str:
    pattern = re.escape(emoticon)
    if emoticon[0].isalnum():
        pattern = r"(?<![A-Za-z0-9_])" + pattern
    if emoticon[-1].isalnum():
        pattern = pattern + r"(?![A-Za-z0-9_])"
    return pattern


UrlRegex = re.compile(r"(?:[a-z][a-z0-9+.\-]*://|www\.)\S+", re.IGNORECASE)
NumberRegex = re.compile(r"\d+(?:\.\d+)?")
ImageRegex = re.compile(
    r"<img\b[^>]*>|\[img\].*?\[/img\]|[^\s\"'<>]+\.(?:jpe?g|png|gif|bmp|webp)\b",
    re.IGNORECASE
)
EmoticonRegex = re.compile("|".join(_emoticon_pattern(e) for e in sorted(EMOTICONS, key=len, reverse=True)))
TokenRegex = re.compile(r"[A-Za-z_]+")
TokenAlphabetRegex = re.compile(r"^[A-Za-z_]+$")


class Label(str, enum.Enum):
    """Comment relevance label."""
    GOOD = "Good"
    POTENTIALLY_USEFUL = "PotentiallyUseful"
    BAD = "Bad"

    @property
    def is_good(self) -> bool:
        return self is Label.GOOD


PosTags = List[Tuple[str, str]]


@dataclasses.dataclass(frozen=True)
class Comment:
    id: str
    author_id: str
    raw_text: str
    rank_in_thread: int
    gold_label: Optional[Label] = None
    tokens: List[str] = dataclasses.field(default_factory=list)
    pos_tags: Optional[PosTags] = None


@dataclasses.dataclass(frozen=True)
class Question:
    id: str
    author_id: str
    subject_raw: str
    body_raw: str
    category: str
    subject_tokens: List[str] = dataclasses.field(default_factory=list)
    body_tokens: List[str] = dataclasses.field(default_factory=list)
    pos_tags: Optional[PosTags] = None


@dataclasses.dataclass(frozen=True)
class Thread:
    question: Question
    comments: List[Comment]

    @property
    def id(self) -> str:
        return self.question.id


@dataclasses.dataclass(frozen=True)
class RelatedThread:
    """Related thread of a Subtask C set with comment labels relative to the original question."""
    thread: Thread
    search_rank: int
    labels: Dict[str, Label]


@dataclasses.dataclass(frozen=True)
class RelatedQuestionSet:
    original_question: Question
    related: List[RelatedThread]

    @property
    def id(self) -> str:
        return self.original_question.id


Dataset = Union[List[Thread], List[RelatedQuestionSet]]


@dataclasses.dataclass(frozen=True)
class TokenizerConfig:
    url_token: str = "TOKEN_URL"
    num_token: str = "TOKEN_NUM"
    img_token: str = "TOKEN_IMG"
    emo_token: str = "TOKEN_EMO"
    stopword_set: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        for name in ("url_token", "num_token", "img_token", "emo_token"):
            value = getattr(self, name)
            if not TokenAlphabetRegex.match(value):
                raise ConfigError(f"replacement token {name}={value!r} must consist of letters and underscores only")
        object.__setattr__(self, "stopword_set", frozenset(word.lower() for word in self.stopword_set))

    def without_stopwords(self) -> "TokenizerConfig":
        """Returns copy keeping all words (used for embedding training corpora)."""
        return dataclasses.replace(self, stopword_set=frozenset())


def preprocess(raw: str, config: TokenizerConfig) -> List[str]:
    """Returns lowercased tokens of *raw* text.
    >>> preprocess("Check www.qatarliving.com for 500 flats :)", TokenizerConfig(stopword_set=frozenset({"for"})))
    ['check', 'token_url', 'token_num', 'flats', 'token_emo']
    """
    # images first: their markup and file names contain URLs and digits
    text = ImageRegex.sub(f" {config.img_token} ", raw)
    text = UrlRegex.sub(f" {config.url_token} ", text)
    text = NumberRegex.sub(f" {config.num_token} ", text)
    text = EmoticonRegex.sub(f" {config.emo_token} ", text)
    tokens = (token.lower() for token in TokenRegex.findall(text))
    return [token for token in tokens if token not in config.stopword_set]


def load_stopwords(path: str) -> Set[str]:
    """Read stopword file, one word per line. Blank lines are ignored."""
    with open(path, "rt", encoding="utf-8") as fp:
        return {line.strip().lower() for line in fp if line.strip()}


def default_stopwords() -> Set[str]:
    """Returns the bundled English stopword list."""
    return load_stopwords(DefaultStopwordsFile)


def default_tokenizer_config() -> TokenizerConfig:
    return TokenizerConfig(stopword_set=frozenset(default_stopwords()))


def _normalize_pos(pos_tags: Optional[PosTags], tokens: Sequence[str]) -> Optional[PosTags]:
    """Lowercase tagged words, keeping only those that survived preprocessing."""
    if pos_tags is None:
        return None
    vocabulary = set(tokens)
    return [(word.lower(), tag) for word, tag in pos_tags if word.lower() in vocabulary]


def preprocess_question(question: Question, config: TokenizerConfig) -> Question:
    body_tokens = preprocess(question.body_raw, config)
    return dataclasses.replace(
        question,
        subject_tokens=preprocess(question.subject_raw, config),
        body_tokens=body_tokens,
        pos_tags=_normalize_pos(question.pos_tags, body_tokens),
    )


def _preprocess_comment(comment: Comment, config: TokenizerConfig) -> Comment:
    tokens = preprocess(comment.raw_text, config)
    return dataclasses.replace(comment, tokens=tokens, pos_tags=_normalize_pos(comment.pos_tags, tokens))


def preprocess_thread(thread: Thread, config: TokenizerConfig) -> Thread:
    """Returns copy of *thread* with all token fields filled."""
    return Thread(
        question=preprocess_question(thread.question, config),
        comments=[_preprocess_comment(comment, config) for comment in thread.comments],
    )


def preprocess_related_set(item: RelatedQuestionSet, config: TokenizerConfig) -> RelatedQuestionSet:
    return RelatedQuestionSet(
        original_question=preprocess_question(item.original_question, config),
        related=[dataclasses.replace(related, thread=preprocess_thread(related.thread, config)) for related in item.related],
    )


#
# JSONL schema
#

def _require(record: Dict[str, Any], key: str, kind: type, lineno: int) -> Any:
    if not isinstance(record, dict):
        raise SchemaError(f"expected object, got {type(record).__name__}", lineno)
    if key not in record:
        raise SchemaError(f"missing required field {key!r}", lineno)
    value = record[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise SchemaError(f"field {key!r} must be of type {kind.__name__}", lineno)
    return value


def _parse_label(value: Any, lineno: int) -> Label:
    try:
        return Label(value)
    except ValueError:
        raise SchemaError(f"invalid label {value!r}", lineno)


def _parse_pos(value: Any, lineno: int) -> Optional[PosTags]:
    if value is None:
        return None
    if not isinstance(value, list):
        raise SchemaError("POS annotations must be a list of [word, tag] pairs", lineno)
    pairs = []
    for pair in value:
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(item, str) for item in pair)):
            raise SchemaError(f"invalid POS pair {pair!r}", lineno)
        pairs.append((pair[0], pair[1]))
    return pairs


def _parse_question(record: Dict[str, Any], lineno: int) -> Question:
    category = _require(record, "category", str, lineno)
    if not category:
        raise SchemaError("field 'category' must not be empty", lineno)
    return Question(
        id=_require(record, "qid", str, lineno),
        author_id=_require(record, "qauthor", str, lineno),
        subject_raw=_require(record, "subject", str, lineno),
        body_raw=_require(record, "body", str, lineno),
        category=category,
        pos_tags=_parse_pos(record.get("qpos"), lineno),
    )


def _parse_comment(record: Dict[str, Any], lineno: int) -> Comment:
    label = record.get("label") if isinstance(record, dict) else None
    return Comment(
        id=_require(record, "cid", str, lineno),
        author_id=_require(record, "author", str, lineno),
        raw_text=_require(record, "text", str, lineno),
        rank_in_thread=_require(record, "rank", int, lineno),
        gold_label=None if label is None else _parse_label(label, lineno),
        pos_tags=_parse_pos(record.get("pos"), lineno),
    )


def _parse_thread(record: Dict[str, Any], lineno: int) -> Thread:
    question = _parse_question(record, lineno)
    comments = [_parse_comment(item, lineno) for item in _require(record, "comments", list, lineno)]
    ids = [comment.id for comment in comments]
    if len(set(ids)) != len(ids):
        duplicates = sorted({cid for cid in ids if ids.count(cid) > 1})
        raise IntegrityError(f"line {lineno}: duplicate comment id(s) {duplicates} in thread {question.id!r}")
    ranks = sorted(comment.rank_in_thread for comment in comments)
    if ranks != list(range(1, len(comments) + 1)):
        raise IntegrityError(f"line {lineno}: comment ranks {ranks} of thread {question.id!r} are not 1..{len(comments)}")
    comments.sort(key=lambda comment: comment.rank_in_thread)
    return Thread(question=question, comments=comments)


def _parse_related_set(record: Dict[str, Any], lineno: int) -> RelatedQuestionSet:
    original = _parse_question(_require(record, "orig", dict, lineno), lineno)
    related = []
    for item in _require(record, "related", list, lineno):
        thread = _parse_thread(_require(item, "thread", dict, lineno), lineno)
        search_rank = _require(item, "search_rank", int, lineno)
        if not 1 <= search_rank <= 10:
            raise SchemaError(f"search_rank must be within 1..10, got {search_rank}", lineno)
        labels = {cid: _parse_label(label, lineno) for cid, label in _require(item, "labels", dict, lineno).items()}
        missing = [comment.id for comment in thread.comments if comment.id not in labels]
        if missing:
            raise IntegrityError(f"line {lineno}: no label versus original question for comment(s) {missing}")
        related.append(RelatedThread(thread=thread, search_rank=search_rank, labels=labels))
    search_ranks = [item.search_rank for item in related]
    if len(set(search_ranks)) != len(search_ranks):
        raise IntegrityError(f"line {lineno}: duplicate search ranks in related set {original.id!r}")
    return RelatedQuestionSet(original_question=original, related=related)


def detect_format(path: str) -> str:
    """Returns dataset format of JSONL file by inspecting its first record."""
    with open(path, "rt", encoding="utf-8") as fp:
        for line in fp:
            if line.strip():
                record = json.loads(line)
                return SubtaskC if isinstance(record, dict) and "orig" in record else SubtaskA
    return SubtaskA


def load_dataset(path: str, format: str = SubtaskA) -> Dataset:
    """Load threads (subtask_a) or related question sets (subtask_c) from JSONL file."""
    if format not in (SubtaskA, SubtaskC):
        raise ConfigError(f"unknown dataset format: {format!r}")
    parse = _parse_thread if format == SubtaskA else _parse_related_set
    items: List[Any] = []
    with open(path, "rt", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", lineno)
            items.append(parse(record, lineno))
    logger.debug("loaded %d records from %r", len(items), path)
    return items


def _dump_question(question: Question) -> Dict[str, Any]:
    record: Dict[str, Any] = {
        "qid": question.id,
        "qauthor": question.author_id,
        "subject": question.subject_raw,
        "body": question.body_raw,
        "category": question.category,
    }
    if question.pos_tags is not None:
        record["qpos"] = [list(pair) for pair in question.pos_tags]
    return record


def _dump_comment(comment: Comment) -> Dict[str, Any]:
    record: Dict[str, Any] = {
        "cid": comment.id,
        "author": comment.author_id,
        "text": comment.raw_text,
        "rank": comment.rank_in_thread,
    }
    if comment.gold_label is not None:
        record["label"] = comment.gold_label.value
    if comment.pos_tags is not None:
        record["pos"] = [list(pair) for pair in comment.pos_tags]
    return record


def _dump_thread(thread: Thread) -> Dict[str, Any]:
    record = _dump_question(thread.question)
    record["comments"] = [_dump_comment(comment) for comment in thread.comments]
    return record


def _dump_related_set(item: RelatedQuestionSet) -> Dict[str, Any]:
    return {
        "orig": _dump_question(item.original_question),
        "related": [
            {
                "thread": _dump_thread(related.thread),
                "search_rank": related.search_rank,
                "labels": {cid: label.value for cid, label in related.labels.items()},
            }
            for related in item.related
        ],
    }


def dump_dataset(items: Iterable[Union[Thread, RelatedQuestionSet]], path: str) -> None:
    """Write dataset in canonical JSONL form."""
    with open(path, "wt", encoding="utf-8") as fp:
        for item in items:
            record = _dump_thread(item) if isinstance(item, Thread) else _dump_related_set(item)
            fp.write(json.dumps(record, ensure_ascii=False))
            fp.write("\n")


#
# Corpus streams
#

def _thread_texts(thread: Thread) -> Iterator[str]:
    yield thread.question.subject_raw
    yield thread.question.body_raw
    for comment in thread.comments:
        yield comment.raw_text


def iter_texts(items: Iterable[Union[Thread, RelatedQuestionSet]]) -> Iterator[str]:
    """Yields every question subject, body and comment text of a dataset."""
    for item in items:
        if isinstance(item, Thread):
            yield from _thread_texts(item)
        else:
            yield item.original_question.subject_raw
            yield item.original_question.body_raw
            for related in item.related:
                yield from _thread_texts(related.thread)


def read_sentences(path: str, config: TokenizerConfig) -> List[List[str]]:
    """Read training sentences from a JSONL dataset or a plain text file with
    one sentence per line. Empty sentences are skipped.
    """
    if path.endswith(".jsonl"):
        texts: Iterable[str] = iter_texts(load_dataset(path, detect_format(path)))
    else:
        with open(path, "rt", encoding="utf-8") as fp:
            texts = fp.read().splitlines()
    sentences = [preprocess(text, config) for text in texts]
    return [sentence for sentence in sentences if sentence]


def split_threads(items: Sequence[Any], test_fraction: float, seed: int) -> Tuple[List[Any], List[Any]]:
    """Deterministic train/test split preserving the original order in both parts."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test fraction must be within (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(len(items))
    n_test = max(1, int(round(test_fraction * len(items)))) if items else 0
    if items and n_test >= len(items):
        raise ConfigError(f"cannot split {len(items)} item(s) with test fraction {test_fraction}: no training items left")
    test_indices = set(order[:n_test].tolist())
    train = [item for index, item in enumerate(items) if index not in test_indices]
    test = [item for index, item in enumerate(items) if index in test_indices]
    return train, test
