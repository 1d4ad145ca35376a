"""Feature group ablation: retrain and evaluate with groups removed."""

import logging
from typing import FrozenSet, Iterable, List, NamedTuple, Sequence, Tuple

from .exceptions import ConfigError
from .features import STANDARD_REMOVAL_SETS, FeatureGroup, FeatureMatrix, FeatureSchema, parse_group
from .model import TrainOptions
from .pipeline import fit_classifier, rank_matrix
from .ranking import evaluate

__all__ = [
    "AblationRow",
    "parse_removal_set",
    "applicable_removal_sets",
    "ablation_run",
    "format_ablation_table",
]

logger = logging.getLogger(__name__)

AllFeatures: str = "All"


class AblationRow(NamedTuple):
    name: str
    removed: FrozenSet[FeatureGroup]
    map: float
    accuracy: float
    comments: int
    columns: int


def parse_removal_set(name: str) -> Tuple[str, FrozenSet[FeatureGroup]]:
    """Resolve a named removal set or groups joined by "+".
    >>> parse_removal_set("LDA")
    ('LDA', frozenset({<FeatureGroup.LDA_SIM: 'LdaSim'>}))
    """
    if name in STANDARD_REMOVAL_SETS:
        return name, STANDARD_REMOVAL_SETS[name]
    parts = [part.strip() for part in name.split("+") if part.strip()]
    if not parts:
        raise ConfigError(f"empty removal set: {name!r}")
    return name, frozenset(parse_group(part) for part in parts)


def applicable_removal_sets(schema: FeatureSchema, names: Iterable[str]) -> List[str]:
    """Removal sets that drop at least one column of *schema*, others are skipped."""
    present = set(schema.groups)
    names = list(names)
    kept = [name for name in names if parse_removal_set(name)[1] & present]
    for name in names:
        if name not in kept:
            logger.warning("skipping removal set %r: none of its groups is in the feature matrix", name)
    return kept


def _evaluate_columns(name: str, removed: FrozenSet[FeatureGroup], train: FeatureMatrix, test: FeatureMatrix,
                      opts: TrainOptions, subtask: str, combiner: str, combiner_weight: float,
                      exclude_no_good: bool) -> AblationRow:
    kept = [group for group in train.schema.groups if group not in removed]
    if not kept:
        raise ConfigError(f"removal set {name!r} leaves no features")
    train_part = train.select_groups(kept)
    test_part = test.select_groups(kept)
    model = fit_classifier(train_part, opts)
    report = evaluate(rank_matrix(model, test_part, subtask, combiner, combiner_weight), exclude_no_good)
    logger.info("%-32s MAP=%.4f acc=%.4f (%d columns)", name, report.map, report.accuracy, len(train_part.schema))
    return AblationRow(name, removed, report.map, report.accuracy, report.comments, len(train_part.schema))


def ablation_run(train: FeatureMatrix, test: FeatureMatrix, removal_sets: Iterable[str], opts: TrainOptions,
                 subtask: str = "A", combiner: str = "product", combiner_weight: float = 0.5,
                 exclude_no_good: bool = True) -> List[AblationRow]:
    """Evaluate all features and every removal set; rows sorted by MAP descending.

    Every row is trained from the same matrices and options, only the
    columns of the removed groups differ.
    """
    if train.schema != test.schema:
        raise ConfigError("training and test feature matrices have different schemas")
    resolved = [parse_removal_set(name) for name in removal_sets]
    present = set(train.schema.groups)
    for name, removed in resolved:
        if not removed & present:
            raise ConfigError(f"removal set {name!r} removes no feature column "
                              f"(matrix groups: {', '.join(group.value for group in train.schema.groups)})")
    rows = [_evaluate_columns(AllFeatures, frozenset(), train, test, opts, subtask, combiner, combiner_weight,
                              exclude_no_good)]
    for name, removed in resolved:
        rows.append(_evaluate_columns(f"{AllFeatures} - {name}", removed, train, test, opts, subtask, combiner,
                                      combiner_weight, exclude_no_good))
    return sorted(rows, key=lambda row: -row.map)


def format_ablation_table(rows: Sequence[AblationRow], title: str = "Feature ablation") -> List[str]:
    """Fixed-width table, one row per removal set."""
    width = max([len(row.name) for row in rows] + [len(title), 8])
    rule = f"+-{'-' * width}-+---------+---------+"
    lines = [
        rule,
        f"| {title:<{width}} |   MAP   |   Acc   |",
        rule,
    ]
    for row in rows:
        lines.append(f"| {row.name:<{width}} | {100 * row.map:>7.2f} | {100 * row.accuracy:>7.2f} |")
    lines.append(rule)
    return lines
