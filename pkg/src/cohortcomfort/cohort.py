"""Cohort construction (cold and warm start), cohort models and assignment of new occupants."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .cluster import KSelectionTrace, select_k, standardize_scores
from .data import (
    B5P_TRAITS,
    ONBOARDING_FEATURES,
    OccupantRecord,
    OnboardingProfile,
    design_matrix,
)
from .errors import (
    AssignmentError,
    ConfigurationError,
    DegenerateSplitError,
    ParameterError,
    RecipeIncompatibleError,
    SparseCohortError,
    ValidationError,
)
from .learn import FittedForest, RfHyperparams, desk_grid, f1_micro, fit_best, load_forest, save_forest, train_pcm
from .seeding import derive_seed
from .similarity import AffinityMatrix, BlendWeights, blend, cross_model_matrix, distribution_matrix

logger = logging.getLogger(__name__)

DEFAULT_K_RANGE = (2, 10)


class StartType(str, Enum):
    COLD = "cold"
    WARM = "warm"


@dataclass(frozen=True)
class CohortRecipe:
    """How a cohort set is built.

    ``parameters["kind"]`` is one of ``value`` (one cohort per categorical
    value), ``median`` (low/high split of one score), ``datadriven``
    (spectral clustering of survey scores) or ``warm`` (spectral clustering
    of the blended affinity).
    """

    name: str
    start_type: StartType
    parameters: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "start_type", StartType(self.start_type))
        params = dict(self.parameters)
        kind = params.get("kind")
        if self.start_type is StartType.WARM:
            if kind != "warm":
                raise ValidationError(f"warm recipe {self.name!r} must have kind 'warm'")
            if "alpha" not in params:
                raise ValidationError(f"warm recipe {self.name!r} needs blend weights")
            BlendWeights.from_alpha(float(params["alpha"]))
        else:
            need = {"value": "attribute", "median": "score", "datadriven": "features"}
            if kind not in need or need[kind] not in params:
                raise ValidationError(f"cold recipe {self.name!r} needs a survey/score specification")
        if "k_range" in params:
            params["k_range"] = tuple(int(v) for v in params["k_range"])
        if "features" in params:
            params["features"] = tuple(params["features"])
        object.__setattr__(self, "parameters", params)

    @property
    def kind(self) -> str:
        return self.parameters["kind"]

    @property
    def weights(self) -> BlendWeights:
        return BlendWeights.from_alpha(float(self.parameters["alpha"]))

    @property
    def k_range(self) -> tuple[int, int]:
        return tuple(self.parameters.get("k_range", DEFAULT_K_RANGE))

    def required_fields(self) -> tuple[str, ...]:
        if self.kind == "value":
            return (self.parameters["attribute"],)
        if self.kind == "median":
            return (self.parameters["score"],)
        if self.kind == "datadriven":
            return tuple(self.parameters["features"])
        return ()

    def to_dict(self) -> dict:
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in self.parameters.items()}
        return {"name": self.name, "start_type": self.start_type.value, "parameters": params}


_RECIPES = {
    "sex": (StartType.COLD, {"kind": "value", "attribute": "sex"}),
    "surveys": (StartType.COLD, {"kind": "datadriven", "features": ("hsps", "swls") + B5P_TRAITS}),
    "sensitive": (StartType.COLD, {"kind": "median", "score": "hsps", "iqr_filter": True}),
    "life-satisfaction": (StartType.COLD, {"kind": "median", "score": "swls", "iqr_filter": True}),
    "personality": (StartType.COLD, {"kind": "datadriven", "features": B5P_TRAITS}),
    "dist-cross": (StartType.WARM, {"kind": "warm", "alpha": 0.5}),
    "cross": (StartType.WARM, {"kind": "warm", "alpha": 1.0}),
}
for _trait in B5P_TRAITS:
    _RECIPES[_trait.replace("_", "-")] = (StartType.COLD, {"kind": "median", "score": _trait, "iqr_filter": False})

RECIPE_NAMES = tuple(_RECIPES)


def make_recipe(name: str, **overrides) -> CohortRecipe:
    """Named cohort approach with optional parameter overrides (e.g. ``alpha=0.75``)."""
    key = name.lower().replace("_", "-").replace(" ", "-")
    if key not in _RECIPES:
        raise ConfigurationError(f"unknown recipe {name!r}; expected one of {', '.join(RECIPE_NAMES)}")
    start, params = _RECIPES[key]
    overrides = dict(overrides)
    if "beta" in overrides:
        beta = float(overrides.pop("beta"))
        alpha = float(overrides.get("alpha", 1.0 - beta))
        BlendWeights(alpha, beta)
        overrides["alpha"] = alpha
    return CohortRecipe(key, start, {**params, **overrides})


@dataclass(frozen=True)
class TrainingConfig:
    """Model settings shared by PCMs and cohort models.

    `features` are the longitudinal (sensor/survey) features; cohort and
    general-purpose models add the onboarding attributes on top.
    """

    features: tuple[str, ...]
    onboarding: tuple[str, ...] = ONBOARDING_FEATURES
    grid: tuple[RfHyperparams, ...] = field(default_factory=lambda: tuple(desk_grid()))
    folds: int = 5

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "onboarding", tuple(self.onboarding))
        object.__setattr__(self, "grid", tuple(self.grid))

    @property
    def model_features(self) -> tuple[str, ...]:
        return self.features + tuple(f for f in self.onboarding if f not in self.features)


@dataclass(frozen=True, eq=False)
class Cohort:
    members: tuple[str, ...]
    model: FittedForest
    n_rows: int
    summary: Mapping = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class CohortSet:
    recipe: CohortRecipe
    cohorts: tuple[Cohort, ...]
    assignment: Mapping = field(default_factory=dict)
    k_trace: KSelectionTrace | None = None
    excluded: tuple[str, ...] = ()
    affinity: AffinityMatrix | None = None

    def __post_init__(self):
        seen = set()
        for c in self.cohorts:
            if seen & set(c.members):
                raise ValidationError("cohort member sets overlap")
            seen |= set(c.members)
        object.__setattr__(self, "cohorts", tuple(self.cohorts))

    @property
    def k(self) -> int:
        return len(self.cohorts)

    def membership(self) -> dict[str, int]:
        return {m: i for i, c in enumerate(self.cohorts) for m in c.members}


# --------------------------------------------------------------------------
# building
# --------------------------------------------------------------------------


def check_compatible(recipe: CohortRecipe, records: Sequence[OccupantRecord]):
    missing = sorted({f for f in recipe.required_fields() for r in records if not r.profile.has(f)})
    if missing:
        raise RecipeIncompatibleError(
            f"recipe {recipe.name!r} needs onboarding field(s) missing from the data: {', '.join(missing)}",
            missing=missing,
        )


def train_pcms(records: Sequence[OccupantRecord], training: TrainingConfig, seed: int) -> dict[str, FittedForest]:
    return {
        r.occupant_id: train_pcm(r, training.features, training.grid, training.folds,
                                 derive_seed(seed, "pcm", r.occupant_id))
        for r in records
    }


def _train_cohorts(groups: Sequence[Sequence[OccupantRecord]], summaries, training: TrainingConfig,
                   seed: int) -> tuple[Cohort, ...]:
    out = []
    for i, (members, summary) in enumerate(zip(groups, summaries)):
        X, y = design_matrix(members, training.model_features)
        model, _ = fit_best(X, y, training.model_features, training.grid, training.folds,
                            derive_seed(seed, "cohort", i))
        out.append(Cohort(tuple(r.occupant_id for r in members), model, len(y), summary))
    return tuple(out)


def build_cold_value(records: Sequence[OccupantRecord], attribute: str, training: TrainingConfig,
                     seed: int = 0, recipe: CohortRecipe | None = None) -> CohortSet:
    recipe = recipe or CohortRecipe(attribute, StartType.COLD, {"kind": "value", "attribute": attribute})
    check_compatible(recipe, records)
    values = sorted({r.profile.value(attribute) for r in records})
    if len(values) < 2:
        raise SparseCohortError(f"{attribute!r} takes a single value; no cohorts to build")
    groups = [[r for r in records if r.profile.value(attribute) == v] for v in values]
    for v, g in zip(values, groups):
        if len(g) < 2:
            raise SparseCohortError(f"value {v!r} of {attribute!r} has fewer than 2 occupants")
    cohorts = _train_cohorts(groups, [{"value": v} for v in values], training, seed)
    return CohortSet(recipe, cohorts, assignment={"attribute": attribute, "values": values})


def iqr_extremes(scores, q_low: float = 25, q_high: float = 75) -> np.ndarray:
    """Mask of scores outside the open interquartile interval (linear percentiles)."""
    scores = np.asarray(scores, dtype=np.float64)
    lo, hi = np.percentile(scores, [q_low, q_high])
    return ~((scores > lo) & (scores < hi))


def build_cold_median(records: Sequence[OccupantRecord], score: str, iqr_filter: bool,
                      training: TrainingConfig, seed: int = 0,
                      recipe: CohortRecipe | None = None) -> CohortSet:
    recipe = recipe or CohortRecipe(score, StartType.COLD,
                                    {"kind": "median", "score": score, "iqr_filter": iqr_filter})
    check_compatible(recipe, records)
    values = np.array([r.profile.numeric(score) for r in records])
    keep = iqr_extremes(values) if iqr_filter else np.ones(len(records), dtype=bool)
    kept = [r for r, k in zip(records, keep) if k]
    median = float(np.median(values[keep]))
    low = [r for r in kept if r.profile.numeric(score) <= median]
    high = [r for r in kept if r.profile.numeric(score) > median]
    if not low or not high:
        raise DegenerateSplitError(f"median split of {score!r} leaves one side empty")
    cohorts = _train_cohorts([low, high], [{"side": "low"}, {"side": "high"}], training, seed)
    excluded = tuple(r.occupant_id for r, k in zip(records, keep) if not k)
    return CohortSet(recipe, cohorts, assignment={"score": score, "median": median}, excluded=excluded)


def build_cold_datadriven(records: Sequence[OccupantRecord], feature_set: Sequence[str], k_range,
                          training: TrainingConfig, seed: int = 0,
                          recipe: CohortRecipe | None = None) -> CohortSet:
    recipe = recipe or CohortRecipe("datadriven", StartType.COLD,
                                    {"kind": "datadriven", "features": tuple(feature_set)})
    check_compatible(recipe, records)
    if len(records) < 4:
        raise ParameterError("data-driven cohorts need at least 4 occupants")
    scores = standardize_scores([r.profile for r in records], feature_set)
    ids = tuple(r.occupant_id for r in records)
    trace = select_k(scores.values, k_range, derive_seed(seed, "select_k"), space="features", occupant_ids=ids)
    labels = trace.assignments[trace.chosen_k].labels
    groups = [[r for r, l in zip(records, labels) if l == c] for c in range(trace.chosen_k)]
    centroids = [scores.values[labels == c].mean(axis=0) for c in range(trace.chosen_k)]
    cohorts = _train_cohorts(groups, [{"centroid": c.tolist()} for c in centroids], training, seed)
    assignment = {
        "features": list(scores.names),
        "mean": scores.mean.tolist(),
        "std": scores.std.tolist(),
        "centroids": [c.tolist() for c in centroids],
    }
    return CohortSet(recipe, cohorts, assignment=assignment, k_trace=trace)


def build_warm(records: Sequence[OccupantRecord], pcms: Mapping[str, FittedForest], weights: BlendWeights,
               k_range, training: TrainingConfig, seed: int = 0, recipe: CohortRecipe | None = None,
               silhouette_space: str = "embedding") -> CohortSet:
    recipe = recipe or CohortRecipe("warm", StartType.WARM, {"kind": "warm", "alpha": weights.alpha})
    affinity = blend(cross_model_matrix(records, pcms), distribution_matrix(records), weights)
    trace = select_k(affinity, k_range, derive_seed(seed, "select_k"), space=silhouette_space)
    labels = trace.assignments[trace.chosen_k].labels
    groups = [[r for r, l in zip(records, labels) if l == c] for c in range(trace.chosen_k)]
    cohorts = _train_cohorts(groups, [{} for _ in groups], training, seed)
    return CohortSet(recipe, cohorts, assignment={"alpha": weights.alpha, "beta": weights.beta},
                     k_trace=trace, affinity=affinity)


def build_cohorts(recipe: CohortRecipe, records: Sequence[OccupantRecord], training: TrainingConfig,
                  seed: int = 0, pcms: Mapping[str, FittedForest] | None = None) -> CohortSet:
    check_compatible(recipe, records)
    p = recipe.parameters
    if recipe.kind == "value":
        return build_cold_value(records, p["attribute"], training, seed, recipe)
    if recipe.kind == "median":
        return build_cold_median(records, p["score"], bool(p.get("iqr_filter", False)), training, seed, recipe)
    if recipe.kind == "datadriven":
        return build_cold_datadriven(records, p["features"], recipe.k_range, training, seed, recipe)
    if pcms is None:
        pcms = train_pcms(records, training, seed)
    return build_warm(records, pcms, recipe.weights, recipe.k_range, training, seed, recipe,
                      p.get("silhouette_space", "embedding"))


# --------------------------------------------------------------------------
# assignment
# --------------------------------------------------------------------------


def _profile(obj) -> OnboardingProfile:
    return obj.profile if isinstance(obj, OccupantRecord) else obj


def _centroid_distances(cs: CohortSet, profile: OnboardingProfile) -> np.ndarray:
    a = cs.assignment
    raw = np.array([profile.numeric(n) for n in a["features"]])
    z = (raw - np.asarray(a["mean"])) / np.asarray(a["std"])
    return np.linalg.norm(np.asarray(a["centroids"]) - z[None, :], axis=1)


def assign_cold(cs: CohortSet, profile) -> int:
    profile = _profile(profile)
    kind = cs.recipe.kind
    try:
        if kind == "value":
            v = profile.value(cs.assignment["attribute"])
            if v not in cs.assignment["values"]:
                raise AssignmentError(f"unseen value {v!r} for {cs.assignment['attribute']!r}")
            return list(cs.assignment["values"]).index(v)
        if kind == "median":
            return 0 if profile.numeric(cs.assignment["score"]) <= cs.assignment["median"] else 1
        if kind == "datadriven":
            return int(np.argmin(_centroid_distances(cs, profile)))
    except KeyError as exc:
        raise AssignmentError(f"profile lacks {exc.args[0]!r} needed by recipe {cs.recipe.name!r}") from exc
    raise ParameterError(f"recipe {cs.recipe.name!r} is warm-start; assign with labeled probe rows")


def cohort_scores(cs: CohortSet, probe: OccupantRecord) -> np.ndarray:
    """F1-micro of each cohort model on the probe rows."""
    if len(probe) == 0:
        raise ParameterError("warm assignment needs at least one labeled probe row")
    return np.array([
        f1_micro(probe.labels, c.model.predict(probe.feature_matrix(c.model.feature_names)))
        for c in cs.cohorts
    ])


def assign_warm(cs: CohortSet, probe: OccupantRecord) -> int:
    """Cohort whose model scores best on the m probe rows; ties to the lowest index."""
    return int(np.argmax(cohort_scores(cs, probe)))


def assign_worst(cs: CohortSet, probe_or_profile) -> int:
    """Deliberately wrong assignment used as an ablation."""
    if cs.recipe.start_type is StartType.WARM:
        if not isinstance(probe_or_profile, OccupantRecord):
            raise ParameterError("warm worst-assignment needs labeled probe rows")
        return int(np.argmin(cohort_scores(cs, probe_or_profile)))
    profile = _profile(probe_or_profile)
    if cs.k == 2:
        return 1 - assign_cold(cs, profile)
    if cs.recipe.kind == "datadriven":
        return int(np.argmax(_centroid_distances(cs, profile)))
    raise AssignmentError(f"no opposite cohort is defined for {cs.k} cohorts of recipe {cs.recipe.name!r}")


def assign(cs: CohortSet, occupant: OccupantRecord, probe: OccupantRecord | None = None,
           worst: bool = False) -> int:
    if cs.recipe.start_type is StartType.WARM:
        if probe is None:
            raise ParameterError("warm recipes need probe rows")
        return assign_worst(cs, probe) if worst else assign_warm(cs, probe)
    return assign_worst(cs, occupant.profile) if worst else assign_cold(cs, occupant.profile)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def save_cohort_set(cs: CohortSet, directory) -> Path:
    """Directory with manifest.json, membership.csv, one model per cohort and the k trace."""
    directory = Path(directory)
    (directory / "models").mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": 1,
        "recipe": cs.recipe.to_dict(),
        "k": cs.k,
        "assignment": cs.assignment,
        "excluded": list(cs.excluded),
        "cohorts": [
            {"members": list(c.members), "n_rows": c.n_rows, "summary": c.summary,
             "model": f"models/cohort_{i}.npz"}
            for i, c in enumerate(cs.cohorts)
        ],
    }
    if cs.k_trace is not None:
        manifest["chosen_k"] = cs.k_trace.chosen_k
        cs.k_trace.save(directory / "k_selection.csv")
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
    rows = [(m, i) for i, c in enumerate(cs.cohorts) for m in c.members]
    pd.DataFrame(rows, columns=["occupant_id", "cohort"]).to_csv(directory / "membership.csv", index=False)
    for i, c in enumerate(cs.cohorts):
        save_forest(c.model, directory / "models" / f"cohort_{i}.npz")
    return directory


def load_cohort_set(directory) -> CohortSet:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    r = manifest["recipe"]
    recipe = CohortRecipe(r["name"], r["start_type"], r["parameters"])
    cohorts = tuple(
        Cohort(tuple(c["members"]), load_forest(directory / c["model"]), c["n_rows"], c["summary"])
        for c in manifest["cohorts"]
    )
    trace = None
    trace_path = directory / "k_selection.csv"
    if trace_path.exists():
        frame = pd.read_csv(trace_path, float_precision="round_trip")
        ks = tuple(int(k) for k in frame["k"])
        trace = KSelectionTrace(ks, dict(zip(ks, frame["mean_silhouette"].astype(float))), manifest["chosen_k"])
    return CohortSet(recipe, cohorts, manifest["assignment"], trace, tuple(manifest["excluded"]))
