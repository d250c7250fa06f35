from .forest import (
    DecisionTree,
    FittedForest,
    RfHyperparams,
    fit_forest,
    load_forest,
    predict,
    save_forest,
)
from .metrics import f1_micro
from .model_selection import (
    GridSearchResult,
    desk_grid,
    fit_best,
    full_grid,
    grid_by_name,
    grid_search_cv,
    kfold_indices,
    make_grid,
    train_pcm,
)

__all__ = [
    "DecisionTree",
    "FittedForest",
    "GridSearchResult",
    "RfHyperparams",
    "desk_grid",
    "f1_micro",
    "fit_best",
    "fit_forest",
    "full_grid",
    "grid_by_name",
    "grid_search_cv",
    "kfold_indices",
    "load_forest",
    "make_grid",
    "predict",
    "save_forest",
    "train_pcm",
]
