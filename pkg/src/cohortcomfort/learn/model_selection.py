"""Grid search with k-fold cross-validation, and personal comfort models."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..data import ONBOARDING_FEATURES, OccupantRecord
from ..errors import ConfigurationError, InsufficientDataError, ParameterError
from .forest import FittedForest, RfHyperparams, fit_forest
from .metrics import f1_micro

FULL_GRID_AXES = {
    "n_trees": (100, 300, 500),
    "max_depth": tuple(range(1, 11)),
    "min_samples_split": (2, 3, 4),
    "min_samples_leaf": (1, 2, 3),
}
DESK_GRID_AXES = {
    "n_trees": (100,),
    "max_depth": (3, 6, 10),
    "min_samples_split": (2,),
    "min_samples_leaf": (1,),
}


def make_grid(axes=None, **fixed) -> list[RfHyperparams]:
    """Cartesian product of hyperparameter axes in enumeration order."""
    axes = DESK_GRID_AXES if axes is None else axes
    keys = list(axes)
    return [RfHyperparams(**dict(zip(keys, combo)), **fixed)
            for combo in itertools.product(*(axes[k] for k in keys))]


def desk_grid() -> list[RfHyperparams]:
    return make_grid(DESK_GRID_AXES)


def full_grid() -> list[RfHyperparams]:
    return make_grid(FULL_GRID_AXES)


def grid_by_name(name: str) -> list[RfHyperparams]:
    if name == "desk":
        return desk_grid()
    if name == "full":
        return full_grid()
    raise ConfigurationError(f"unknown grid profile {name!r}; expected 'desk' or 'full'")


@dataclass(frozen=True)
class GridSearchResult:
    best: RfHyperparams
    cv_scores: dict

    @property
    def best_score(self) -> float:
        return self.cv_scores[self.best]


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle once under `seed`, then cut into contiguous folds."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def grid_search_cv(X, y, feature_names: Sequence[str], grid: Sequence[RfHyperparams],
                   folds: int = 5, seed: int = 0) -> GridSearchResult:
    """Score every grid point by mean held-out F1-micro; first maximum wins.

    Every grid point is refitted with ``seed`` so results depend only on the
    call arguments.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if folds < 2:
        raise ParameterError("folds must be >= 2")
    if len(X) < folds:
        raise InsufficientDataError(f"{len(X)} rows cannot be split into {folds} folds")
    if not grid:
        raise ParameterError("empty hyperparameter grid")
    parts = kfold_indices(len(X), folds, seed)
    scores = {}
    best = None
    for params in grid:
        params = replace(params, seed=seed)
        fold_scores = []
        for i, held in enumerate(parts):
            train = np.concatenate([p for j, p in enumerate(parts) if j != i])
            forest = fit_forest(X[train], y[train], feature_names, params)
            fold_scores.append(f1_micro(y[held], forest.predict(X[held])))
        scores[params] = float(np.mean(fold_scores))
        if best is None or scores[params] > scores[best]:
            best = params
    return GridSearchResult(best=best, cv_scores=scores)


def fit_best(X, y, feature_names, grid, folds=5, seed=0) -> tuple[FittedForest, GridSearchResult]:
    result = grid_search_cv(X, y, feature_names, grid, folds, seed)
    return fit_forest(X, y, feature_names, result.best), result


def check_pcm_features(features: Sequence[str]):
    constant = [f for f in features if f in ONBOARDING_FEATURES]
    if constant:
        raise ConfigurationError(
            f"PCM features must exclude per-occupant constants, got {constant}"
        )


def train_pcm(record: OccupantRecord, features: Sequence[str], grid, folds=5, seed=0,
              return_search: bool = False):
    """Personal comfort model: grid search on the occupant's own rows, refit on all."""
    check_pcm_features(features)
    X = record.feature_matrix(features)
    forest, result = fit_best(X, record.labels, features, grid, folds, seed)
    return (forest, result) if return_search else forest
