"""Ranking of comments by predicted probability and MAP/accuracy evaluation.

Prediction file, one line per comment in rank order per query:

  query_id<TAB>comment_id<TAB>rank<TAB>score<TAB>label

with 1-based rank, score printed with 6 decimals and label "true" for
comments predicted Good, "false" otherwise.
"""

import dataclasses
import json
import logging
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .corpus import Label
from .exceptions import ConfigError, FormatError, IntegrityError

__all__ = [
    "ScoredComment",
    "RankedThread",
    "EvalReport",
    "rank_thread",
    "rank_subtask_c",
    "subtask_c_score",
    "make_combiner",
    "average_precision",
    "map_score",
    "accuracy",
    "evaluate",
    "write_predictions",
    "read_predictions",
    "evaluate_predictions",
    "write_report",
    "format_report",
    "random_baseline_map",
    "thread_order_baseline",
]

logger = logging.getLogger(__name__)

DecisionThreshold: float = 0.5

Combiner = Callable[[float, int], float]


class ScoredComment(NamedTuple):
    comment_id: str
    score: float
    rank_in_thread: int
    gold_label: Optional[Label] = None
    probability: Optional[float] = None  # defaults to score
    thread_id: str = ""
    search_rank: int = 1

    @property
    def predicted_good(self) -> bool:
        probability = self.score if self.probability is None else self.probability
        return probability >= DecisionThreshold


@dataclasses.dataclass
class RankedThread:
    """Comments of one query in descending score order."""
    query_id: str
    items: List[ScoredComment]

    @property
    def comment_ids(self) -> List[str]:
        return [item.comment_id for item in self.items]

    def relevances(self) -> List[bool]:
        if any(item.gold_label is None for item in self.items):
            raise IntegrityError(f"query {self.query_id}: ranked comment without gold label")
        return [item.gold_label is Label.GOOD for item in self.items]


@dataclasses.dataclass
class EvalReport:
    map: float
    accuracy: float
    per_query: Dict[str, Optional[float]]
    comments: int = 0

    def to_json(self) -> Dict:
        return {
            "map": self.map,
            "acc": self.accuracy,
            "comments": self.comments,
            "per_query": [{"query_id": query_id, "ap": ap} for query_id, ap in self.per_query.items()],
        }


def _order_key(item: ScoredComment) -> Tuple[float, int, int]:
    return -item.score, item.search_rank, item.rank_in_thread


def rank_thread(query_id: str, comments: Iterable[ScoredComment]) -> RankedThread:
    """Sort by descending score; ties keep thread order (search rank, then rank in thread)."""
    return RankedThread(query_id, sorted(comments, key=_order_key))


#
# Subtask C
#

def product_combiner(prob_good: float, search_rank: int) -> float:
    return prob_good / search_rank


def sum_combiner(prob_good: float, search_rank: int) -> float:
    return prob_good + 1.0 / search_rank


def weighted_combiner(weight: float) -> Combiner:
    if not 0.0 <= weight <= 1.0:
        raise ConfigError(f"combiner weight must be within [0, 1], got {weight}")

    def combine(prob_good: float, search_rank: int) -> float:
        return weight * prob_good + (1.0 - weight) / search_rank

    return combine


def make_combiner(name: str, weight: float = 0.5) -> Combiner:
    if name == "product":
        return product_combiner
    if name == "sum":
        return sum_combiner
    if name == "weighted":
        return weighted_combiner(weight)
    raise ConfigError(f"unknown combiner: {name!r} (choose from product, sum, weighted)")


def subtask_c_score(prob_good: float, search_rank: int, combiner: Combiner = product_combiner) -> float:
    """Combine a comment probability with the reciprocal rank of its related question."""
    if search_rank < 1:
        raise ValueError(f"search rank must be >= 1, got {search_rank}")
    return combiner(prob_good, search_rank)


def rank_subtask_c(query_id: str, comments: Iterable[ScoredComment], combiner: Combiner = product_combiner) -> RankedThread:
    """Rank comments of all related threads of one original question.

    Input scores are Good probabilities; output scores are combined values.
    """
    combined = [item._replace(score=subtask_c_score(item.score, item.search_rank, combiner), probability=item.score)
                for item in comments]
    return rank_thread(query_id, combined)


#
# Metrics
#

def average_precision(relevances: Sequence[bool]) -> Optional[float]:
    """Average of precision at every relevant position, None without relevant items."""
    hits = 0
    total = 0.0
    for position, relevant in enumerate(relevances, start=1):
        if relevant:
            hits += 1
            total += hits / position
    if not hits:
        return None
    return total / hits


def _per_query_ap(ranked: Sequence[RankedThread], exclude_no_good: bool) -> Dict[str, Optional[float]]:
    result: Dict[str, Optional[float]] = {}
    for thread in ranked:
        ap = average_precision(thread.relevances())
        if ap is None and not exclude_no_good:
            ap = 0.0
        result[thread.query_id] = ap
    return result


def _mean_ap(per_query: Dict[str, Optional[float]]) -> float:
    values = [ap for ap in per_query.values() if ap is not None]
    if not values:
        logger.warning("no query with a Good comment, MAP set to 0")
        return 0.0
    return sum(values) / len(values)


def map_score(ranked: Sequence[RankedThread], exclude_no_good: bool = True) -> float:
    """Mean average precision with Good as the only relevant label.

    Queries without Good comments are skipped unless *exclude_no_good* is
    cleared, in which case they count with AP 0.
    """
    return _mean_ap(_per_query_ap(ranked, exclude_no_good))


def accuracy(predicted: Sequence[bool], gold: Sequence[bool]) -> float:
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predictions for {len(gold)} gold labels")
    if not len(gold):
        raise ValueError("accuracy of an empty set is undefined")
    return sum(p == g for p, g in zip(predicted, gold)) / len(gold)


def evaluate(ranked: Sequence[RankedThread], exclude_no_good: bool = True) -> EvalReport:
    per_query = _per_query_ap(ranked, exclude_no_good)
    items = [item for thread in ranked for item in thread.items]
    acc = accuracy([item.predicted_good for item in items], [item.gold_label is Label.GOOD for item in items])
    return EvalReport(_mean_ap(per_query), acc, per_query, len(items))


def random_baseline_map(ranked: Sequence[RankedThread], shuffles: int = 100, seed: int = 1,
                        exclude_no_good: bool = True) -> float:
    """Empirical MAP of uniformly random orderings."""
    rng = np.random.default_rng(seed)
    relevances = [np.array(thread.relevances(), dtype=bool) for thread in ranked]
    scores = []
    for _ in range(shuffles):
        per_query = {}
        for i, relevance in enumerate(relevances):
            ap = average_precision(list(relevance[rng.permutation(len(relevance))]))
            per_query[str(i)] = 0.0 if ap is None and not exclude_no_good else ap
        scores.append(_mean_ap(per_query))
    return float(np.mean(scores)) if scores else 0.0


def thread_order_baseline(ranked: Sequence[RankedThread]) -> List[RankedThread]:
    """Re-rank by original order (search rank, then rank in thread)."""
    return [RankedThread(thread.query_id, sorted(thread.items, key=lambda item: (item.search_rank, item.rank_in_thread)))
            for thread in ranked]


#
# Files
#

def write_predictions(path: str, ranked: Iterable[RankedThread]) -> None:
    with open(path, "wt") as fp:
        for thread in ranked:
            for rank, item in enumerate(thread.items, start=1):
                label = "true" if item.predicted_good else "false"
                fp.write(f"{thread.query_id}\t{item.comment_id}\t{rank}\t{item.score:.6f}\t{label}\n")
    logger.info("written predictions: %r", path)


def read_predictions(path: str) -> List[RankedThread]:
    """Read a prediction file back; comments keep their file rank."""
    threads: Dict[str, List[Tuple[int, ScoredComment]]] = {}
    with open(path, "rt") as fp:
        for lineno, line in enumerate(fp, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 5 or parts[4] not in ("true", "false"):
                raise FormatError(f"{path}:{lineno}: expected 'query_id<TAB>comment_id<TAB>rank<TAB>score<TAB>label'")
            try:
                rank, score = int(parts[2]), float(parts[3])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: invalid rank or score")
            # probability only carries the predicted label
            probability = 1.0 if parts[4] == "true" else 0.0
            threads.setdefault(parts[0], []).append((rank, ScoredComment(parts[1], score, rank, probability=probability)))
    return [RankedThread(query_id, [item for _, item in sorted(items, key=lambda pair: pair[0])])
            for query_id, items in threads.items()]


def evaluate_predictions(path: str, gold: Dict[Tuple[str, str], Label], exclude_no_good: bool = True) -> EvalReport:
    """Score a prediction file against gold labels keyed by (query_id, comment_id)."""
    ranked = []
    for thread in read_predictions(path):
        items = []
        for item in thread.items:
            label = gold.get((thread.query_id, item.comment_id))
            if label is None:
                raise IntegrityError(f"no gold label for query {thread.query_id}, comment {item.comment_id}")
            items.append(item._replace(gold_label=label))
        ranked.append(RankedThread(thread.query_id, items))
    return evaluate(ranked, exclude_no_good)


def write_report(report: EvalReport, path: str) -> None:
    with open(path, "wt") as fp:
        json.dump(report.to_json(), fp, indent=2)
        fp.write("\n")
    logger.info("written evaluation report: %r", path)


def format_report(report: EvalReport, title: str = "Evaluation") -> List[str]:
    """Fixed-width summary table of an evaluation report."""
    evaluated = sum(ap is not None for ap in report.per_query.values())
    lines = [
        "+------------------------------------------+",
        f"| {title:<40} |",
        "+----------------------------+-------------+",
        f"| {'MAP':<26} | {100 * report.map:>11.2f} |",
        f"| {'Accuracy':<26} | {100 * report.accuracy:>11.2f} |",
        f"| {'Queries (evaluated/total)':<26} | {f'{evaluated}/{len(report.per_query)}':>11} |",
        f"| {'Comments':<26} | {report.comments:>11} |",
        "+----------------------------+-------------+",
    ]
    return lines
