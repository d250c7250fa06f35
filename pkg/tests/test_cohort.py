import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import cohortcomfort.cohort as cohort_mod
from cohortcomfort.cohort import (
    Cohort,
    CohortSet,
    StartType,
    TrainingConfig,
    assign,
    assign_cold,
    assign_warm,
    assign_worst,
    build_cold_datadriven,
    build_cold_median,
    build_cold_value,
    build_cohorts,
    iqr_extremes,
    load_cohort_set,
    make_recipe,
    save_cohort_set,
)
from cohortcomfort.data import B5P_TRAITS, OnboardingProfile
from cohortcomfort.errors import (
    AssignmentError,
    ConfigurationError,
    DegenerateSplitError,
    RecipeIncompatibleError,
    SparseCohortError,
    ValidationError,
)
from cohortcomfort.learn import DecisionTree, FittedForest, RfHyperparams
from cohortcomfort.synth import FEATURES

from conftest import make_profile, make_record

FAST = TrainingConfig(("air_temperature",), grid=(RfHyperparams(n_trees=5, max_depth=4),), folds=3)


def records_with(profiles_kw, n=12, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i, kw in enumerate(profiles_kw):
        out.append(make_record(f"o{i:02d}", rng.uniform(18, 30, n), rng.integers(-1, 2, n), **kw))
    return out


def const_set(labels, recipe_name="cross", assignment=None):
    cohorts = tuple(Cohort((f"m{i}",), FittedForest.from_trees([DecisionTree.constant(l)], ["air_temperature"]), 1)
                    for i, l in enumerate(labels))
    return CohortSet(make_recipe(recipe_name), cohorts, assignment or {})


def test_recipe_registry():
    assert make_recipe("surveys").parameters["features"] == ("hsps", "swls") + B5P_TRAITS
    assert make_recipe("personality").parameters["features"] == B5P_TRAITS
    assert make_recipe("dist-cross").weights.alpha == 0.5
    assert make_recipe("cross").weights.alpha == 1.0 and make_recipe("cross").weights.beta == 0.0
    assert make_recipe("dist-cross", alpha=0.75).weights.beta == pytest.approx(0.25)
    assert make_recipe("Life Satisfaction").parameters["score"] == "swls"
    assert make_recipe("emotional_stability").start_type is StartType.COLD
    with pytest.raises(ConfigurationError):
        make_recipe("astrology")
    with pytest.raises(ValidationError):
        make_recipe("cross", alpha=0.5, beta=0.6)


def test_value_cohorts_by_sex():
    recs = records_with([{"sex": "M"}] * 10 + [{"sex": "F"}] * 10)
    cs = build_cold_value(recs, "sex", FAST)
    assert cs.k == 2 and [len(c.members) for c in cs.cohorts] == [10, 10]
    female = cs.assignment["values"].index("F")
    assert assign_cold(cs, make_profile("new", sex="F")) == female
    assert assign_cold(cs, make_profile("new", sex="M")) == 1 - female
    assert assign_worst(cs, make_profile("new", sex="F")) == 1 - female
    with pytest.raises(SparseCohortError):
        build_cold_value(records_with([{"sex": "M"}] * 4), "sex", FAST)


def test_median_split_example():
    recs = records_with([{"hsps": v} for v in (1.0, 2.0, 3.0, 4.0)])
    cs = build_cold_median(recs, "hsps", False, FAST)
    assert cs.cohorts[0].members == ("o00", "o01") and cs.cohorts[1].members == ("o02", "o03")
    assert cs.assignment["median"] == 2.5
    assert assign_cold(cs, make_profile("x", hsps=2.5)) == 0
    assert assign_cold(cs, make_profile("x", hsps=2.6)) == 1
    with pytest.raises(DegenerateSplitError):
        build_cold_median(records_with([{"hsps": 3.0}] * 4), "hsps", False, FAST)


def test_iqr_filter_keeps_half():
    scores = np.arange(20.0)
    assert iqr_extremes(scores).sum() == 10
    recs = records_with([{"swls": v} for v in scores], n=6)
    cs = build_cold_median(recs, "swls", True, FAST)
    assert sum(len(c.members) for c in cs.cohorts) == 10 and len(cs.excluded) == 10


def test_datadriven_blobs_and_centroid_assignment():
    rng = np.random.default_rng(1)
    kws = []
    for center in (2.0, 5.0):
        for _ in range(5):
            s = center + rng.normal(0, 0.1, 7)
            kws.append({"hsps": s[0], "swls": s[1], "traits": dict(zip(B5P_TRAITS, s[2:]))})
    recs = records_with(kws)
    cs = build_cold_datadriven(recs, ("hsps", "swls") + B5P_TRAITS, (2, 5), FAST)
    assert cs.k == 2 and cs.k_trace.chosen_k == 2
    assert cs.cohorts[0].members == tuple(f"o{i:02d}" for i in range(5))
    centroid = np.array(cs.assignment["centroids"][1]) * cs.assignment["std"] + cs.assignment["mean"]
    names = cs.assignment["features"]
    probe = make_profile("x", hsps=centroid[0], swls=centroid[1], traits=dict(zip(names[2:], centroid[2:])))
    assert assign_cold(cs, probe) == 1 and assign_worst(cs, probe) == 0


def test_incompatible_recipe():
    recs = [make_record("a", [20.0], [0], hsps=None), make_record("b", [20.0], [0], hsps=None)]
    with pytest.raises(RecipeIncompatibleError):
        build_cohorts(make_recipe("sensitive"), recs, FAST)


def test_warm_assignment_rules():
    cs = const_set([0, 1])
    probe = make_record("p", [20.0, 21.0], [1, 1])
    assert assign_warm(cs, probe) == 1 and assign_worst(cs, probe) == 0
    assert assign_warm(const_set([0]), probe) == 0
    tied = make_record("p", [20.0, 21.0], [-1, -1])
    assert assign_warm(cs, tied) == 0


def test_warm_worst_is_argmin(monkeypatch):
    cs = const_set([0, 1, -1])
    monkeypatch.setattr(cohort_mod, "cohort_scores", lambda cs, probe: np.array([0.9, 0.2, 0.5]))
    assert assign_worst(cs, make_record("p", [20.0], [0])) == 1
    assert assign_warm(cs, make_record("p", [20.0], [0])) == 0


@settings(max_examples=50)
@given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=7), st.lists(st.sampled_from([-1, 0, 1]),
                                                                               min_size=2, max_size=4))
def test_worst_differs_from_best_unless_tied(labels, cohort_labels):
    cs = const_set(cohort_labels)
    probe = make_record("p", np.arange(len(labels), dtype=float), labels)
    scores = cohort_mod.cohort_scores(cs, probe)
    if scores.min() < scores.max():
        assert assign_worst(cs, probe) != assign_warm(cs, probe)
    assert assign(cs, probe, probe=probe) == assign_warm(cs, probe)


def test_worst_undefined_for_many_values():
    recs = records_with([{"sex": "M"}] * 2 + [{"sex": "F"}] * 2)
    cs = build_cold_value(recs, "sex", FAST)
    assert assign_worst(cs, recs[0].profile) == 1 - assign_cold(cs, recs[0].profile)
    three = CohortSet(cs.recipe, cs.cohorts + (Cohort(("z",), cs.cohorts[0].model, 1),),
                      {"attribute": "sex", "values": ["F", "M", "X"]})
    with pytest.raises(AssignmentError):
        assign_worst(three, recs[0].profile)


def test_warm_build_save_load(small_planted, tmp_path):
    records, _ = small_planted
    training = TrainingConfig(FEATURES, grid=(RfHyperparams(n_trees=10, max_depth=6),), folds=3)
    cs = build_cohorts(make_recipe("dist-cross", k_range=[2, 4]), records, training, seed=5)
    assert cs.affinity is not None and cs.k == cs.k_trace.chosen_k
    assert sorted(m for c in cs.cohorts for m in c.members) == sorted(r.occupant_id for r in records)
    back = load_cohort_set(save_cohort_set(cs, tmp_path / "cs"))
    assert back.membership() == cs.membership()
    assert back.k_trace.mean_silhouettes == cs.k_trace.mean_silhouettes
    X = records[0].feature_matrix(cs.cohorts[0].model.feature_names)
    for a, b in zip(cs.cohorts, back.cohorts):
        np.testing.assert_array_equal(a.model.predict(X), b.model.predict(X))
    again = build_cohorts(make_recipe("dist-cross", k_range=[2, 4]), records, training, seed=5)
    assert again.membership() == cs.membership()
