"""L2-regularized logistic regression for Good vs. not-Good comments.

Minimizes the liblinear primal objective

  f(w, b) = 1/2 |w|^2 + C sum_i log(1 + exp(-y_i (w.x_i + b)))

with y_i in {-1, +1}. The intercept b is not regularized unless
``regularize_bias`` is set (liblinear's bias augmentation). The optimizer is
scipy's trust-region Newton-CG, stopped once |grad f| <= tolerance * max(1, |grad f(0)|).
"""

import concurrent.futures
import dataclasses
import json
import logging
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .exceptions import ConfigError, DegenerateDataError, FormatError, NumericalError
from .features import ScalerParams, apply_scaler

__all__ = [
    "TrainOptions",
    "LogRegModel",
    "CvRow",
    "objective_and_gradient",
    "train",
    "predict_proba",
    "predict_proba_matrix",
    "cross_validate_c",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

DefaultCostGrid: Tuple[float, ...] = (0.01, 0.05, 0.1, 0.55, 1.0, 5.0, 10.0)

DecisionThreshold: float = 0.5


@dataclasses.dataclass
class TrainOptions:
    cost_grid: Tuple[float, ...] = DefaultCostGrid
    folds: int = 5
    tolerance: float = 1e-6
    max_iterations: int = 1000
    seed: int = 1
    regularize_bias: bool = False
    fixed_c: Optional[float] = None  # skips cross-validation

    def validate(self) -> None:
        if not self.cost_grid or any(not c > 0 for c in self.cost_grid):
            raise ConfigError(f"cost grid must be a non-empty list of positive values, got {list(self.cost_grid)}")
        if self.folds < 2:
            raise ConfigError(f"number of folds must be >= 2, got {self.folds}")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.fixed_c is not None and not self.fixed_c > 0:
            raise ConfigError(f"fixed C must be positive, got {self.fixed_c}")


@dataclasses.dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    cost_c: float
    scaler: Optional[ScalerParams] = None
    schema_hash: str = ""
    regularize_bias: bool = False
    objective_history: List[float] = dataclasses.field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.weights)


class CvRow(NamedTuple):
    cost_c: float
    accuracy: float
    fold_accuracies: Tuple[float, ...]
    single_class_folds: Tuple[int, ...]


def _split(theta: np.ndarray) -> Tuple[np.ndarray, float]:
    return theta[:-1], float(theta[-1])


def objective_and_gradient(theta: np.ndarray, X: np.ndarray, y: np.ndarray, c: float,
                           regularize_bias: bool = False) -> Tuple[float, np.ndarray]:
    """Objective value and gradient at theta = (w_1 .. w_d, b)."""
    w, b = _split(theta)
    margins = y * (X @ w + b)
    loss = float(np.sum(np.logaddexp(0.0, -margins)))
    reg = 0.5 * float(w @ w) + (0.5 * b * b if regularize_bias else 0.0)
    coef = -c * y * expit(-margins)
    grad = np.empty_like(theta)
    grad[:-1] = w + X.T @ coef
    grad[-1] = np.sum(coef) + (b if regularize_bias else 0.0)
    return reg + c * loss, grad


def _hessian_product(theta: np.ndarray, vector: np.ndarray, X: np.ndarray, y: np.ndarray, c: float,
                     regularize_bias: bool) -> np.ndarray:
    w, b = _split(theta)
    p = expit(X @ w + b)
    d = c * p * (1.0 - p)
    v_w, v_b = vector[:-1], vector[-1]
    dz = d * (X @ v_w + v_b)
    result = np.empty_like(vector)
    result[:-1] = v_w + X.T @ dz
    result[-1] = np.sum(dz) + (v_b if regularize_bias else 0.0)
    return result


def train(X: np.ndarray, y: np.ndarray, c: float, opts: Optional[TrainOptions] = None) -> LogRegModel:
    """Fit weights and bias on scaled rows X with labels y in {-1, +1}."""
    opts = opts or TrainOptions()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError(f"X has {X.shape[0] if X.ndim == 2 else '?'} rows but y has {len(y)} labels")
    if not c > 0:
        raise ConfigError(f"cost C must be positive, got {c}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise DegenerateDataError("training set contains a single class")

    args = (X, y, c, opts.regularize_bias)
    theta0 = np.zeros(X.shape[1] + 1)
    f0, g0 = objective_and_gradient(theta0, *args)
    gtol = opts.tolerance * max(1.0, float(np.linalg.norm(g0)))
    history = [f0]

    def record(theta: np.ndarray) -> None:
        history.append(objective_and_gradient(theta, *args)[0])

    result = minimize(objective_and_gradient, theta0, args=args, method="trust-ncg", jac=True,
                      hessp=_hessian_product,
                      callback=record, options={"gtol": gtol, "maxiter": opts.max_iterations})
    if not np.all(np.isfinite(result.x)):
        raise NumericalError(f"logistic regression diverged: {result.message}")
    if not result.success:
        logger.warning("logistic regression (C=%g) stopped early: %s", c, result.message)
    logger.debug("logistic regression (C=%g): objective %.6g after %d iteration(s)", c, result.fun, result.nit)
    w, b = _split(result.x)
    return LogRegModel(w.copy(), b, c, regularize_bias=opts.regularize_bias, objective_history=history)


def predict_proba(model: LogRegModel, x: np.ndarray) -> float:
    """sigma(w.x + b) for one scaled feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != model.weights.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {model.weights.shape}")
    return float(expit(model.weights @ x + model.bias))


def predict_proba_matrix(model: LogRegModel, X: np.ndarray, scale: bool = False) -> np.ndarray:
    """Probabilities of rows of X; unscaled rows are scaled first when *scale* is set."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise ValueError(f"dimension mismatch: {X.shape} vs {model.dim} weights")
    if scale:
        if model.scaler is None:
            raise ConfigError("model carries no scaler")
        X = apply_scaler(model.scaler, X)
    return expit(X @ model.weights + model.bias)


def _accuracy(probabilities: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.where(probabilities >= DecisionThreshold, 1.0, -1.0) == y))


def _fold_accuracy(X: np.ndarray, y: np.ndarray, train_rows: np.ndarray, test_rows: np.ndarray, c: float,
                   opts: TrainOptions) -> Tuple[float, bool]:
    y_train = y[train_rows]
    single_class = len(np.unique(y_train)) < 2 or len(np.unique(y[test_rows])) < 2
    if len(np.unique(y_train)) < 2:
        # constant prediction of the only class seen
        predicted = np.full(len(test_rows), y_train[0] if len(y_train) else -1.0)
        return float(np.mean(predicted == y[test_rows])), single_class
    model = train(X[train_rows], y_train, c, opts)
    return _accuracy(predict_proba_matrix(model, X[test_rows]), y[test_rows]), single_class


def cross_validate_c(X: np.ndarray, y: np.ndarray, opts: Optional[TrainOptions] = None,
                     workers: int = 1) -> Tuple[float, List[CvRow]]:
    """Select C by k-fold cross-validated accuracy.

    Folds are contiguous chunks of one seeded permutation; ties go to the
    smaller C. Returns (best C, one row per C in ascending order).
    """
    opts = opts or TrainOptions()
    opts.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) < opts.folds:
        raise ConfigError(f"need at least {opts.folds} rows for {opts.folds}-fold cross-validation, got {len(y)}")

    permutation = np.random.default_rng(opts.seed).permutation(len(y))
    folds = np.array_split(permutation, opts.folds)
    splits = [(np.concatenate(folds[:i] + folds[i + 1:]), folds[i]) for i in range(opts.folds)]

    table = []
    for c in sorted(set(opts.cost_grid)):
        jobs = [(X, y, train_rows, test_rows, c, opts) for train_rows, test_rows in splits]
        if workers > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
                results = list(executor.map(lambda job: _fold_accuracy(*job), jobs))
        else:
            results = [_fold_accuracy(*job) for job in jobs]
        accuracies = tuple(accuracy for accuracy, _ in results)
        flagged = tuple(i for i, (_, single_class) in enumerate(results) if single_class)
        row = CvRow(c, float(np.mean(accuracies)), accuracies, flagged)
        logger.info("C=%g: %d-fold accuracy %.4f%s", c, opts.folds, row.accuracy,
                    f" (single class folds: {list(flagged)})" if flagged else "")
        table.append(row)

    best = max(table, key=lambda row: (row.accuracy, -row.cost_c))
    logger.info("selected C=%g (accuracy %.4f)", best.cost_c, best.accuracy)
    return best.cost_c, table


def _to_json(model: LogRegModel) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "schema_hash": model.schema_hash,
        "cost_c": model.cost_c,
        "bias": model.bias,
        "weights": [float(value) for value in model.weights],
        "regularize_bias": model.regularize_bias,
    }
    if model.scaler is not None:
        data["scaler"] = {
            "min": [float(value) for value in model.scaler.minimum],
            "max": [float(value) for value in model.scaler.maximum],
        }
    return data


def save_model(model: LogRegModel, path: str) -> None:
    with open(path, "wt") as fp:
        json.dump(_to_json(model), fp, indent=2)
        fp.write("\n")
    logger.info("written model %r (%d weights, C=%g)", path, model.dim, model.cost_c)


def _float_list(values: Sequence[Any], what: str) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    if array.ndim != 1 or not np.all(np.isfinite(array)):
        raise FormatError(f"{what} must be a list of finite numbers")
    return array


def load_model(path: str) -> LogRegModel:
    with open(path, "rt") as fp:
        try:
            data = json.load(fp)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: {exc}")
    try:
        weights = _float_list(data["weights"], "weights")
        scaler = None
        if "scaler" in data:
            minimum = _float_list(data["scaler"]["min"], "scaler min")
            maximum = _float_list(data["scaler"]["max"], "scaler max")
            if minimum.shape != weights.shape or maximum.shape != weights.shape:
                raise FormatError(f"{path}: scaler does not match weight dimension")
            scaler = ScalerParams(minimum, maximum)
        return LogRegModel(weights, float(data["bias"]), float(data["cost_c"]), scaler, str(data["schema_hash"]),
                           bool(data.get("regularize_bias", False)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: invalid model file: {exc}")
