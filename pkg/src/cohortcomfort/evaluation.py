"""Repeated participant-wise evaluation of cohort approaches against baselines."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
import pandas as pd

from .cohort import (
    CohortRecipe,
    StartType,
    TrainingConfig,
    assign_cold,
    assign_warm,
    assign_worst,
    build_cohorts,
    check_compatible,
    make_recipe,
    train_pcms,
)
from .data import ONBOARDING_FEATURES, OccupantRecord, design_matrix, split_participants
from .errors import AssignmentError, CohortComfortError, ConfigurationError, ParameterError, ValidationError
from .learn import f1_micro, fit_best, grid_by_name, grid_search_cv
from .learn.model_selection import check_pcm_features
from .pmv import PmvSettings, pmv_baseline
from .seeding import derive_seed

try:  # pragma: no cover
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger(__name__)

GENERAL_PURPOSE = "general-purpose"
PCM = "pcm"
PMV = "pmv"
BASELINES = (GENERAL_PURPOSE, PCM, PMV)
RESULT_COLUMNS = ["iteration", "approach", "occupant_id", "f1", "assignment_kind"]
ASSIGNMENT_COLUMNS = ["iteration", "approach", "occupant_id", "assignment_kind", "cohort", "k"]


@dataclass(frozen=True)
class ExperimentConfig:
    approaches: tuple[CohortRecipe, ...]
    features: tuple[str, ...] | None = None  # longitudinal features; None = all record features
    onboarding: tuple[str, ...] = ONBOARDING_FEATURES
    train_ratio: float = 0.8
    iterations: int = 100
    probe_m: int = 1
    seed: int = 0
    grid: str = "desk"
    folds: int = 5
    pmv: PmvSettings | None = field(default_factory=PmvSettings)

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.probe_m < 1:
            raise ValidationError("probe_m must be >= 1")
        if not 0 < self.train_ratio < 1:
            raise ValidationError("train_ratio must lie in (0, 1)")
        object.__setattr__(self, "approaches", tuple(self.approaches))
        if self.features is not None:
            object.__setattr__(self, "features", tuple(self.features))
            check_pcm_features(self.features)
        names = [a.name for a in self.approaches]
        if len(set(names)) != len(names):
            raise ConfigurationError("approach names must be unique")
        grid_by_name(self.grid)

    def training_config(self, records: Sequence[OccupantRecord]) -> TrainingConfig:
        features = self.features
        if features is None:
            features = tuple(f for f in records[0].feature_names if f not in ONBOARDING_FEATURES)
        return TrainingConfig(features, self.onboarding, tuple(grid_by_name(self.grid)), self.folds)

    def to_dict(self) -> dict:
        return {
            "approaches": [a.to_dict() for a in self.approaches],
            "features": list(self.features) if self.features is not None else None,
            "onboarding": list(self.onboarding),
            "train_ratio": self.train_ratio,
            "iterations": self.iterations,
            "probe_m": self.probe_m,
            "seed": self.seed,
            "grid": self.grid,
            "folds": self.folds,
            "pmv": None if self.pmv is None else {
                "air_temperature": self.pmv.air_temperature,
                "relative_humidity": self.pmv.relative_humidity,
                "clothing": self.pmv.clothing,
                "mean_radiant_temperature": self.pmv.mean_radiant_temperature,
                "air_velocity": self.pmv.air_velocity,
                "met": self.pmv.met,
                "cool_above": self.pmv.thresholds.cool_above,
                "warm_below": self.pmv.thresholds.warm_below,
            },
        }


def approach_from_dict(entry: Mapping) -> CohortRecipe:
    entry = dict(entry)
    recipe = entry.pop("recipe")
    name = entry.pop("name", None)
    r = make_recipe(recipe, **entry)
    return replace(r, name=name) if name else r


def config_from_dict(cfg: Mapping) -> ExperimentConfig:
    exp = dict(cfg.get("experiment", {}))
    for key in ("data", "dataset_config", "workers"):
        exp.pop(key, None)
    feats = cfg.get("features", {})
    pmv_cfg = dict(cfg.get("pmv", {}))
    enabled = pmv_cfg.pop("enabled", True)
    approaches = tuple(approach_from_dict(a) for a in cfg.get("approaches", []))
    if not approaches:
        raise ConfigurationError("experiment config lists no [[approaches]]")
    return ExperimentConfig(
        approaches=approaches,
        features=feats.get("longitudinal"),
        onboarding=tuple(feats.get("onboarding", ONBOARDING_FEATURES)),
        pmv=PmvSettings.from_dict(pmv_cfg) if enabled else None,
        **exp,
    )


def load_experiment_config(path) -> tuple[ExperimentConfig, dict]:
    """Parsed config plus the raw mapping (for data paths and worker count)."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return config_from_dict(raw), raw


# --------------------------------------------------------------------------
# baselines
# --------------------------------------------------------------------------


def percent_change(cohort_score: float, general_score: float) -> float:
    """Relative change in percent; NaN (flagged, excluded from means) when general is 0."""
    if general_score < 0:
        raise ParameterError("general_score must be >= 0")
    if general_score == 0:
        return math.nan
    return 100.0 * (cohort_score - general_score) / general_score


def score_model(model, record: OccupantRecord) -> float:
    return f1_micro(record.labels, model.predict(record.feature_matrix(model.feature_names)))


def general_purpose(train: Sequence[OccupantRecord], test: Sequence[OccupantRecord],
                    training: TrainingConfig, seed: int = 0) -> dict[str, float]:
    """One model on every training row, scored on each test occupant's full label set."""
    if not train or not test:
        raise ParameterError("general-purpose baseline needs non-empty train and test sets")
    X, y = design_matrix(train, training.model_features)
    model, _ = fit_best(X, y, training.model_features, training.grid, training.folds, seed)
    return {r.occupant_id: score_model(model, r) for r in test}


def pcm_baseline(test: Sequence[OccupantRecord], training: TrainingConfig, seed: int = 0) -> dict[str, float]:
    """Cross-validated F1-micro of each occupant's own PCM (best grid point, mean over folds)."""
    check_pcm_features(training.features)
    out = {}
    for r in test:
        result = grid_search_cv(r.feature_matrix(training.features), r.labels, training.features,
                                training.grid, training.folds, derive_seed(seed, r.occupant_id))
        out[r.occupant_id] = result.best_score
    return out


# --------------------------------------------------------------------------
# one iteration
# --------------------------------------------------------------------------


def draw_probe(record: OccupantRecord, m: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random probe row indices and the disjoint remaining (scoring) indices."""
    n = len(record)
    if m >= n:
        raise ParameterError(f"probe_m={m} leaves no scoring rows for {record.occupant_id} ({n} rows)")
    probe = np.sort(np.random.default_rng(seed).choice(n, size=m, replace=False))
    rest = np.setdiff1d(np.arange(n), probe)
    return probe, rest


def run_iteration(config: ExperimentConfig, records: Sequence[OccupantRecord], iteration: int):
    """Rows of the long results table and of the assignment table for one split."""
    it_seed = config.seed + iteration
    train, test = split_participants(records, config.train_ratio, it_seed)
    training = config.training_config(records)
    results, assignments = [], []

    def add(approach, occ, f1, kind="best"):
        results.append((iteration, approach, occ, float(f1), kind))

    gp = general_purpose(train, test, training, derive_seed(it_seed, GENERAL_PURPOSE))
    for occ, f1 in gp.items():
        add(GENERAL_PURPOSE, occ, f1)
    for occ, f1 in pcm_baseline(test, training, derive_seed(it_seed, PCM)).items():
        add(PCM, occ, f1)
    if config.pmv is not None:
        for occ, f1 in pmv_baseline(test, config.pmv).items():
            add(PMV, occ, f1)

    pcms = None
    if any(a.start_type is StartType.WARM for a in config.approaches):
        pcms = train_pcms(train, training, derive_seed(it_seed, "pcms"))

    probes = {r.occupant_id: draw_probe(r, config.probe_m, derive_seed(it_seed, "probe", r.occupant_id))
              for r in test}
    for recipe in config.approaches:
        cs = build_cohorts(recipe, train, training, derive_seed(it_seed, recipe.name), pcms)
        for r in test:
            if recipe.start_type is StartType.WARM:
                probe_idx, score_idx = probes[r.occupant_id]
                if np.intersect1d(probe_idx, score_idx).size:
                    raise AssertionError("probe rows leaked into scoring rows")
                probe, scoring = r.take(probe_idx), r.take(score_idx)
                picks = {"best": assign_warm(cs, probe), "worst": assign_worst(cs, probe)}
            else:
                scoring = r
                picks = {"best": assign_cold(cs, r.profile)}
                try:
                    picks["worst"] = assign_worst(cs, r.profile)
                except AssignmentError as exc:
                    logger.info("no worst assignment for %s: %s", recipe.name, exc)
            for kind, idx in picks.items():
                add(recipe.name, r.occupant_id, score_model(cs.cohorts[idx].model, scoring), kind)
                assignments.append((iteration, recipe.name, r.occupant_id, kind, idx, cs.k))
    return results, assignments


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


@dataclass(eq=False)
class EvaluationReport:
    results: pd.DataFrame
    assignments: pd.DataFrame
    config: ExperimentConfig | None = None
    failed_iterations: tuple[int, ...] = ()

    @classmethod
    def from_rows(cls, results, assignments, config=None, failed=()):
        res = pd.DataFrame(results, columns=RESULT_COLUMNS)
        asg = pd.DataFrame(assignments, columns=ASSIGNMENT_COLUMNS)
        return cls(res, asg, config, tuple(failed))

    @property
    def approaches(self) -> list[str]:
        return [a for a in dict.fromkeys(self.results["approach"]) if a not in BASELINES]

    def scores(self, approach: str, kind: str = "best") -> np.ndarray:
        r = self.results
        return r[(r.approach == approach) & (r.assignment_kind == kind)]["f1"].to_numpy()

    def median(self, approach: str, kind: str = "best") -> float:
        return float(np.median(self.scores(approach, kind)))

    def percent_changes(self) -> pd.DataFrame:
        """Per (iteration, approach, occupant) change of the best assignment against general-purpose."""
        r = self.results
        gp = r[r.approach == GENERAL_PURPOSE][["iteration", "occupant_id", "f1"]].rename(columns={"f1": "general"})
        coh = r[(~r.approach.isin(BASELINES)) & (r.assignment_kind == "best")]
        merged = coh.merge(gp, on=["iteration", "occupant_id"], how="left")
        merged["percent_change"] = [percent_change(c, g) for c, g in zip(merged.f1, merged.general)]
        merged["flagged"] = merged["general"] == 0
        return merged[["iteration", "approach", "occupant_id", "f1", "general", "percent_change", "flagged"]]

    def occupant_changes(self) -> pd.DataFrame:
        """Mean percent change per (approach, occupant), flagged rows excluded."""
        pc = self.percent_changes()
        pc = pc[~pc.flagged]
        out = pc.groupby(["approach", "occupant_id"], sort=False)["percent_change"].mean().reset_index()
        return out.rename(columns={"percent_change": "mean_percent_change"})

    def summary(self) -> dict:
        stats = {}
        for (approach, kind), grp in self.results.groupby(["approach", "assignment_kind"], sort=False):
            v = grp["f1"].to_numpy()
            q1, med, q3 = np.percentile(v, [25, 50, 75])
            stats.setdefault(approach, {})[kind] = {
                "n": int(len(v)), "median": float(med), "q1": float(q1), "q3": float(q3),
                "mean": float(v.mean()),
            }
        changes = {}
        for approach, grp in self.occupant_changes().groupby("approach", sort=False):
            changes[approach] = {o: float(v) for o, v in zip(grp.occupant_id, grp.mean_percent_change)}
        ks = {}
        a = self.assignments
        for approach, grp in a[a.assignment_kind == "best"].groupby("approach", sort=False):
            per_it = grp.groupby("iteration")["k"].first()
            ks[approach] = {str(k): int(n) for k, n in per_it.value_counts().sort_index().items()}
        return {
            "scores": stats,
            "mean_percent_change": changes,
            "chosen_k_counts": ks,
            "failed_iterations": list(self.failed_iterations),
        }

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "results": out / "results.csv",
            "assignments": out / "assignments.csv",
            "percent_change": out / "percent_change.csv",
            "summary": out / "summary.json",
        }
        self.results.to_csv(paths["results"], index=False, float_format="%.17g")
        self.assignments.to_csv(paths["assignments"], index=False)
        self.percent_changes().to_csv(paths["percent_change"], index=False, float_format="%.17g")
        paths["summary"].write_text(json.dumps(self.summary(), indent=2, sort_keys=True))
        return paths


def metadata_breakdown(report: EvaluationReport, records: Sequence[OccupantRecord]) -> pd.DataFrame:
    """Better-off / worse-off groups per approach with sex counts and height/weight mean and std."""
    profiles = {r.occupant_id: r.profile for r in records}
    rows = []
    changes = report.occupant_changes()
    for approach, grp in changes.groupby("approach", sort=False):
        for group, mask in (("better-off", grp.mean_percent_change > 0), ("worse-off", ~(grp.mean_percent_change > 0))):
            ps = [profiles[o] for o in grp.occupant_id[mask]]
            h = np.array([p.height_cm for p in ps])
            w = np.array([p.weight_kg for p in ps])
            rows.append({
                "approach": approach,
                "group": group,
                "n": len(ps),
                "n_male": sum(p.sex == "M" for p in ps),
                "n_female": sum(p.sex == "F" for p in ps),
                "height_mean": float(h.mean()) if len(h) else math.nan,
                "height_std": float(h.std()) if len(h) else math.nan,
                "weight_mean": float(w.mean()) if len(w) else math.nan,
                "weight_std": float(w.std()) if len(w) else math.nan,
            })
    return pd.DataFrame(rows)


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


class ExperimentFailed(CohortComfortError):
    def __init__(self, message, partial: EvaluationReport, iteration: int):
        super().__init__(message)
        self.partial = partial
        self.iteration = iteration


_WORKER_STATE = {}


def _init_worker(config, records):
    _WORKER_STATE["args"] = (config, records)


def _worker_iteration(iteration):
    config, records = _WORKER_STATE["args"]
    return run_iteration(config, records, iteration)


def check_experiment(config: ExperimentConfig, records: Sequence[OccupantRecord]):
    for recipe in config.approaches:
        check_compatible(recipe, records)
    training = config.training_config(records)
    missing = sorted({f for f in training.model_features for r in records[:1]
                      if f not in r.feature_names and not r.profile.has(f)})
    if missing:
        raise ConfigurationError(f"features missing from the dataset: {missing}")


def run_experiment(config: ExperimentConfig, records: Sequence[OccupantRecord], workers: int = 1,
                   progress: Callable[[int, int], None] | None = None) -> EvaluationReport:
    """Run every iteration and merge the results in iteration order.

    Iteration ``i`` depends only on ``config.seed + i``, so the worker count
    never changes the output.
    """
    records = list(records)
    check_experiment(config, records)
    done: dict[int, tuple] = {}
    total = config.iterations

    def finish(failed=()):
        res, asg = [], []
        for i in sorted(done):
            res.extend(done[i][0])
            asg.extend(done[i][1])
        return EvaluationReport.from_rows(res, asg, config, failed)

    if workers <= 1:
        for i in range(total):
            try:
                done[i] = run_iteration(config, records, i)
            except CohortComfortError as exc:
                raise ExperimentFailed(f"iteration {i} failed: {exc}", finish((i,)), i) from exc
            if progress:
                progress(i, total)
        return finish()

    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                             initargs=(config, records)) as pool:
        futures = {pool.submit(_worker_iteration, i): i for i in range(total)}
        for fut in as_completed(futures):
            i = futures[fut]
            try:
                done[i] = fut.result()
            except Exception as exc:
                for f in futures:
                    f.cancel()
                raise ExperimentFailed(f"iteration {i} failed: {exc}", finish((i,)), i) from exc
            if progress:
                progress(i, total)
    return finish()
