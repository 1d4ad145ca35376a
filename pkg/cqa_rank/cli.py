"""Command line front end of the answer ranking pipeline.

Typical run on the bundled synthetic data:

  cqa-rank synth -o data
  cqa-rank train-embeddings -c data/synth_config.json
  cqa-rank cluster -c data/synth_config.json
  cqa-rank train-lda -c data/synth_config.json
  cqa-rank extract -c data/synth_config.json
  cqa-rank train -c data/synth_config.json
  cqa-rank predict -c data/synth_config.json
  cqa-rank evaluate -c data/synth_config.json

Exit codes: 0 success, 2 usage or configuration error, 3 data integrity
error, 4 numerical failure.
"""

import argparse
import dataclasses
import logging
import os
import sys
from typing import Callable, Dict, List, Optional, Sequence

from . import __version__
from . import utils
from .ablation import ablation_run, applicable_removal_sets, format_ablation_table
from .clustering import save_clusters
from .config import PipelineConfig, add_config_arguments, config_from_args
from .corpus import detect_format, iter_texts, load_dataset, preprocess
from .embeddings import save_binary
from .exceptions import ConfigError, FormatError, IntegrityError, NumericalError, SchemaError
from .features import STANDARD_REMOVAL_SETS, FeatureMatrix
from .model import load_model, save_model
from .pipeline import (WorkFiles, embedding_sentences, embeddings_path, enabled_groups, extract_features,
                       feature_models, fit_classifier, gold_labels, iter_pairs, load_embeddings, load_splits,
                       rank_matrix, run_kmeans, run_lda, tokenizer_config, train_embeddings)
from .ranking import (RankedThread, ScoredComment, evaluate_predictions, format_report, random_baseline_map,
                      evaluate, thread_order_baseline, write_predictions, write_report)
from .synth import SynthConfig, generate, write_synthetic
from .topics import save_lda, top_words

logger = logging.getLogger(__name__)

ExitConfig: int = 2
ExitIntegrity: int = 3
ExitNumerical: int = 4


def _log_lines(lines: Sequence[str]) -> None:
    for line in lines:
        logger.info(line)


def _stamp(files: WorkFiles, stage: str, config: PipelineConfig, **extra) -> None:
    data = config.to_dict()
    data.update(extra)
    utils.write_run_stamp(files.run_stamp(stage), stage, data)


def _skip(path: str, resume: bool) -> bool:
    if resume and os.path.exists(path):
        logger.info("skipping existing %r", path)
        return True
    return False


def cmd_preprocess(args: argparse.Namespace, config: PipelineConfig) -> None:
    """Write one line of space separated tokens per input text."""
    tokenizer = tokenizer_config(config)
    if args.input.endswith(".jsonl"):
        texts: Sequence[str] = list(iter_texts(load_dataset(args.input, detect_format(args.input))))
    else:
        with open(args.input, "rt", encoding="utf-8") as fp:
            texts = fp.read().splitlines()
    with open(args.output, "wt", encoding="utf-8") as fp:
        for text in texts:
            fp.write(" ".join(preprocess(text, tokenizer)))
            fp.write("\n")
    logger.info("written %d tokenized lines to %r", len(texts), args.output)


def cmd_train_embeddings(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    files.makedirs()
    if args.grid:
        jobs = [(files.embeddings(utils.grid_stamp(entry)),
                 dataclasses.replace(config.embeddings, dim=entry[0], window=entry[1], min_count=entry[2],
                                     negative_samples=entry[3])) for entry in args.grid]
    else:
        jobs = [(files.embeddings(), config.embeddings)]
    jobs = [(path, embedding_config) for path, embedding_config in jobs if not _skip(path, args.resume)]
    if not jobs:
        return
    train_items, _ = load_splits(config)
    sentences = embedding_sentences(config, train_items)
    for path, embedding_config in jobs:
        logger.info(utils.hr())
        logger.info("training embeddings %r", path)
        model = train_embeddings(sentences, embedding_config)
        save_binary(model, path)
        logger.info("written %r (%d words, dim %d)", path, len(model), model.dim)
    _stamp(files, "train-embeddings", config, outputs=[path for path, _ in jobs])


def cmd_cluster(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    files.makedirs()
    if args.grid:
        jobs = [(files.embeddings(utils.grid_stamp(entry)), files.clusters(utils.grid_stamp(entry)))
                for entry in args.grid]
    else:
        jobs = [(embeddings_path(config), files.clusters())]
    for source, target in jobs:
        if _skip(target, args.resume):
            continue
        logger.info(utils.hr())
        model = run_kmeans(config, load_embeddings(source))
        save_clusters(model, target)
        logger.info("written %r (k=%d)", target, model.k)
    _stamp(files, "cluster", config, outputs=[target for _, target in jobs])


def cmd_train_lda(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    files.makedirs()
    if _skip(files.lda, args.resume):
        return
    train_items, _ = load_splits(config)
    logger.info(utils.hr())
    model = run_lda(config, train_items)
    for topic in range(min(model.num_topics, 10)):
        logger.info("topic %d: %s", topic, " ".join(top_words(model, topic, 8)))
    save_lda(model, files.lda)
    logger.info("written %r", files.lda)
    _stamp(files, "train-lda", config)


def cmd_extract(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    files.makedirs()
    groups = enabled_groups(config)
    train_items, test_items = load_splits(config)
    models = feature_models(config, groups, train_items)
    for split, items in (("train", train_items), ("test", test_items)):
        logger.info(utils.hr())
        matrix = extract_features(items, config.subtask, models, groups)
        matrix.to_csv(files.features(split))
    _stamp(files, "extract", config)


def cmd_train(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    matrix = FeatureMatrix.read_csv(files.features("train"))
    logger.info(utils.hr())
    logger.info("training on %d rows, %d features", len(matrix), len(matrix.schema))
    model = fit_classifier(matrix, config.train)
    save_model(model, files.model)
    _stamp(files, "train", config, cost_c=model.cost_c)


def cmd_predict(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    if not os.path.exists(files.model):
        raise FileNotFoundError(f"missing model {files.model!r}, run 'train' first")
    model = load_model(files.model)
    matrix = FeatureMatrix.read_csv(files.features(args.split))
    ranked = rank_matrix(model, matrix, config.subtask, config.features.combiner, config.features.combiner_weight)
    output = args.output or files.predictions
    write_predictions(output, ranked)
    _stamp(files, "predict", config)


def _gold_rankings(items: list, subtask: str) -> List[RankedThread]:
    """Rankings in original order with gold labels, for baselines."""
    grouped: Dict[str, List[ScoredComment]] = {}
    for key, _, _, label in iter_pairs(items, subtask):
        grouped.setdefault(key.query_id, []).append(
            ScoredComment(key.comment_id, 0.0, key.rank_in_thread, label, thread_id=key.thread_id,
                          search_rank=key.search_rank))
    return thread_order_baseline([RankedThread(query_id, comments) for query_id, comments in grouped.items()])


def cmd_evaluate(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    _, test_items = load_splits(config)
    predictions = args.predictions or files.predictions
    exclude = config.features.exclude_no_good
    report = evaluate_predictions(predictions, gold_labels(test_items, config.subtask), exclude)
    write_report(report, args.output or files.report)
    _log_lines(format_report(report, f"Subtask {config.subtask}"))

    baseline = _gold_rankings(test_items, config.subtask)
    logger.info("thread order baseline MAP: %.2f", 100 * evaluate(baseline, exclude).map)
    logger.info("random baseline MAP (%d shuffles): %.2f", args.shuffles,
                100 * random_baseline_map(baseline, args.shuffles, config.seed, exclude))
    print(f"MAP {100 * report.map:.2f} ACC {100 * report.accuracy:.2f}")


def cmd_ablate(args: argparse.Namespace, config: PipelineConfig) -> None:
    files = WorkFiles(config.paths.work_dir)
    train = FeatureMatrix.read_csv(files.features("train"))
    test = FeatureMatrix.read_csv(files.features("test"))
    removal_sets = args.remove or applicable_removal_sets(train.schema, STANDARD_REMOVAL_SETS)
    rows = ablation_run(train, test, removal_sets, config.train, config.subtask, config.features.combiner,
                        config.features.combiner_weight, config.features.exclude_no_good)
    lines = format_ablation_table(rows, f"Subtask {config.subtask}")
    with open(files.ablation, "wt") as fp:
        fp.write("\n".join(lines))
        fp.write("\n")
    print("\n".join(lines))
    _stamp(files, "ablate", config, removal_sets=removal_sets)


def cmd_synth(args: argparse.Namespace, config: PipelineConfig) -> None:
    seed = args.seed if args.seed is not None else SynthConfig.seed
    corpus = generate(SynthConfig(threads=args.threads, seed=seed, signal=args.signal))
    write_synthetic(corpus, args.output, seed)


Commands: Dict[str, Callable[[argparse.Namespace, PipelineConfig], None]] = {
    "preprocess": cmd_preprocess,
    "train-embeddings": cmd_train_embeddings,
    "cluster": cmd_cluster,
    "train-lda": cmd_train_lda,
    "extract": cmd_extract,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "synth": cmd_synth,
}


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_const", const=logging.DEBUG, default=logging.INFO,
                        help="enables debug prints to console")
    add_config_arguments(common)

    parser = argparse.ArgumentParser(prog="cqa-rank", description="Community question answering comment ranking")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="<command>")
    subparsers.required = True

    sub = subparsers.add_parser("preprocess", parents=[common], help="tokenize raw text")
    sub.add_argument("input", help="JSONL dataset or plain text file, one text per line")
    sub.add_argument("-o", "--output", required=True, metavar="<file>", help="token file")

    for name, helptext in (("train-embeddings", "train skip-gram embeddings"), ("cluster", "k-means word clusters")):
        sub = subparsers.add_parser(name, parents=[common], help=helptext)
        sub.add_argument("--grid", type=utils.grid_t, action="append", metavar="<size:window:freq:skip>",
                         help="sweep entry, may be repeated")
        sub.add_argument("--resume", action="store_true", help="skip outputs that already exist")

    sub = subparsers.add_parser("train-lda", parents=[common], help="train LDA topic model")
    sub.add_argument("--resume", action="store_true", help="skip outputs that already exist")

    subparsers.add_parser("extract", parents=[common], help="extract feature matrices")
    subparsers.add_parser("train", parents=[common], help="train classifier")

    sub = subparsers.add_parser("predict", parents=[common], help="rank comments")
    sub.add_argument("--split", default="test", choices=["train", "test"], help="feature matrix to rank (default is 'test')")
    sub.add_argument("-o", "--output", metavar="<file>", help="prediction file")

    sub = subparsers.add_parser("evaluate", parents=[common], help="score predictions")
    sub.add_argument("--predictions", metavar="<file>", help="prediction file")
    sub.add_argument("--shuffles", type=utils.positive_int_t, default=100, metavar="<n>",
                     help="random baseline shuffles (default is 100)")
    sub.add_argument("-o", "--output", metavar="<file>", help="JSON report file")

    sub = subparsers.add_parser("ablate", parents=[common], help="feature group ablation")
    sub.add_argument("--remove", action="append", metavar="<set>",
                     help="removal set name or groups joined by '+', may be repeated (default: all named sets)")

    sub = subparsers.add_parser("synth", parents=[common], help="generate synthetic data")
    sub.add_argument("--threads", type=utils.positive_int_t, default=50, metavar="<n>",
                     help="number of threads (default is 50)")
    sub.add_argument("--signal", default="centroid", choices=["centroid", "metadata"],
                     help="feature family carrying the planted signal (default is 'centroid')")
    sub.add_argument("-o", "--output", required=True, metavar="<dir>", help="output directory")

    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main routine."""

    # Parse command line arguments.
    args = parse_args(argv)

    # Setup console logging
    utils.setup_logging(args.verbose)

    try:
        config = config_from_args(args)
        Commands[args.command](args, config)
    except ConfigError as exc:
        logger.error("%s", exc)
        return ExitConfig
    except (SchemaError, IntegrityError, FormatError) as exc:
        logger.error("%s", exc)
        return ExitIntegrity
    except NumericalError as exc:
        logger.error("%s", exc)
        return ExitNumerical
    except (OSError, ValueError) as exc:
        logger.error("%s", exc)
        return ExitConfig
    return 0


if __name__ == "__main__":
    sys.exit(main())
