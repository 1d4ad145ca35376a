"""Pipeline configuration: one JSON file with sections, mirrored by flags.

  {
    "seed": 1,
    "subtask": "A",
    "paths":      {"train": "train.jsonl", "test": "test.jsonl", "unannotated": "corpus.txt", "work_dir": "work"},
    "embeddings": {"dim": 100, "window": 5, "min_count": 5, ...},
    "lda":        {"topics": 100, "iterations": 500, ...},
    "kmeans":     {"k": 1000, "max_iters": 100},
    "features":   {"groups": ["all"], "tagset": ["universal"], "combiner": "product"},
    "train":      {"cost_grid": [0.01, 0.05, 0.1, 0.55, 1, 5, 10], "folds": 5}
  }

Every key is also a command line flag --<section>-<key> (underscores become
dashes), e.g. --embeddings-dim 200 or --train-cost-grid 0.55. Flags win over
the file. The root seed is copied into every section that does not set its
own seed.
"""

import argparse
import dataclasses
import json
import logging
import os
import typing
from typing import Any, Callable, Dict, List, Optional, Set, Tuple

from .embeddings import EmbeddingConfig
from .exceptions import ConfigError
from .model import TrainOptions
from .topics import LdaConfig
from . import utils

__all__ = [
    "PathsConfig",
    "KMeansConfig",
    "FeatureConfig",
    "PipelineConfig",
    "load_config",
    "add_config_arguments",
    "config_from_args",
]

logger = logging.getLogger(__name__)


@dataclasses.dataclass
class PathsConfig:
    train: str = ""
    test: str = ""
    unannotated: str = ""
    stopwords: str = ""
    embeddings: str = ""  # pre-trained word2vec file used instead of training
    work_dir: str = "work"

    def require(self, *names: str) -> None:
        """Raise unless the named input paths are set and exist."""
        for name in names:
            path = getattr(self, name)
            if not path:
                raise ConfigError(f"missing path: paths.{name} (--paths-{name.replace('_', '-')})")
            if not os.path.exists(path):
                raise FileNotFoundError(f"no such file: {path!r} (paths.{name})")


@dataclasses.dataclass
class KMeansConfig:
    k: int = 1000
    max_iters: int = 100
    seed: int = 1

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"number of clusters must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclasses.dataclass
class FeatureConfig:
    groups: List[str] = dataclasses.field(default_factory=lambda: ["all"])
    tagset: List[str] = dataclasses.field(default_factory=lambda: ["universal"])
    combiner: str = "product"
    combiner_weight: float = 0.5
    exclude_no_good: bool = True
    test_fraction: float = 0.2  # used when no test set is given
    remove_stopwords: bool = True


@dataclasses.dataclass
class PipelineConfig:
    seed: int = 1
    subtask: str = "A"
    paths: PathsConfig = dataclasses.field(default_factory=PathsConfig)
    embeddings: EmbeddingConfig = dataclasses.field(default_factory=EmbeddingConfig)
    lda: LdaConfig = dataclasses.field(default_factory=LdaConfig)
    kmeans: KMeansConfig = dataclasses.field(default_factory=KMeansConfig)
    features: FeatureConfig = dataclasses.field(default_factory=FeatureConfig)
    train: TrainOptions = dataclasses.field(default_factory=TrainOptions)

    def validate(self) -> None:
        if self.subtask not in ("A", "C"):
            raise ConfigError(f"subtask must be 'A' or 'C', got {self.subtask!r}")
        self.embeddings.validate()
        self.lda.validate()
        self.kmeans.validate()
        self.train.validate()

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


Sections: Tuple[str, ...] = ("paths", "embeddings", "lda", "kmeans", "features", "train")


def _section_types() -> Dict[str, type]:
    hints = typing.get_type_hints(PipelineConfig)
    return {name: hints[name] for name in Sections}


def _unwrap_optional(hint: Any) -> Tuple[Any, bool]:
    if typing.get_origin(hint) is typing.Union:
        args = [arg for arg in typing.get_args(hint) if arg is not type(None)]
        return args[0], True
    return hint, False


def _coerce(hint: Any, value: Any, where: str) -> Any:
    """Check a JSON value against a field type."""
    hint, optional = _unwrap_optional(hint)
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{where}: value must not be null")
    origin = typing.get_origin(hint)
    if origin in (tuple, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        item_type = typing.get_args(hint)[0]
        items = [_coerce(item_type, item, where) for item in value]
        return tuple(items) if origin is tuple else items
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{where}: unsupported field type {hint!r}")


def _apply_section(section: Any, values: Dict[str, Any], name: str) -> Set[str]:
    if not isinstance(values, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    hints = typing.get_type_hints(type(section))
    for key, value in values.items():
        if key not in hints:
            raise ConfigError(f"unknown config key: {name}.{key}")
        setattr(section, key, _coerce(hints[key], value, f"{name}.{key}"))
    return set(values)


def _propagate_seed(config: PipelineConfig, pinned: Dict[str, Set[str]]) -> None:
    for name in Sections:
        section = getattr(config, name)
        if hasattr(section, "seed") and "seed" not in pinned.get(name, set()):
            section.seed = config.seed


def _apply(config: PipelineConfig, data: Dict[str, Any]) -> Dict[str, Set[str]]:
    pinned: Dict[str, Set[str]] = {}
    for key, value in data.items():
        if key in Sections:
            pinned[key] = _apply_section(getattr(config, key), value, key)
        elif key == "seed":
            config.seed = _coerce(int, value, key)
        elif key == "subtask":
            try:
                config.subtask = utils.subtask_t(_coerce(str, value, key))
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(str(exc))
        else:
            raise ConfigError(f"unknown config key: {key}")
    return pinned


def _read_json(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    with open(path, "rt") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: configuration must be a JSON object")
    return data


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """Read a JSON configuration file; missing keys keep their defaults."""
    config = PipelineConfig()
    _propagate_seed(config, _apply(config, _read_json(path)))
    config.validate()
    return config


#
# Command line flags
#

def _bool_t(value: str) -> bool:
    if value.lower() in ("1", "true", "yes", "on"):
        return True
    if value.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _converter(hint: Any) -> Callable[[str], Any]:
    hint, _ = _unwrap_optional(hint)
    origin = typing.get_origin(hint)
    if origin in (tuple, list):
        item = _converter(typing.get_args(hint)[0])

        def convert(value: str) -> Any:
            items = [item(part.strip()) for part in value.split(",") if part.strip()]
            return tuple(items) if origin is tuple else items
        return convert
    if hint is bool:
        return _bool_t
    return hint


def _dest(section: str, key: str) -> str:
    return f"cfg__{section}__{key}"


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    """Add --config, --seed, --subtask and one flag per config key."""
    parser.add_argument("-c", "--config", metavar="<file>", help="JSON configuration file")
    parser.add_argument("--seed", type=int, metavar="<n>", help="seed of every stochastic component")
    parser.add_argument("--subtask", type=utils.subtask_t, metavar="<A|C>", help="ranking subtask")
    group = parser.add_argument_group("configuration overrides")
    for section, section_type in _section_types().items():
        for key, hint in typing.get_type_hints(section_type).items():
            flag = f"--{section}-{key}".replace("_", "-")
            group.add_argument(flag, dest=_dest(section, key), type=_converter(hint), metavar="<value>")


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    """Load the config file named by --config and apply flag overrides."""
    config = PipelineConfig()
    pinned = _apply(config, _read_json(getattr(args, "config", None)))
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "subtask", None) is not None:
        config.subtask = args.subtask
    for section, section_type in _section_types().items():
        for key in typing.get_type_hints(section_type):
            value = getattr(args, _dest(section, key), None)
            if value is not None:
                setattr(getattr(config, section), key, value)
                pinned.setdefault(section, set()).add(key)
    _propagate_seed(config, pinned)
    config.validate()
    return config
