import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cohortcomfort.errors import ConfigurationError, InsufficientDataError, MetricInputError, SchemaError
from cohortcomfort.learn import (
    DecisionTree,
    FittedForest,
    RfHyperparams,
    desk_grid,
    f1_micro,
    fit_forest,
    full_grid,
    grid_search_cv,
    kfold_indices,
    load_forest,
    make_grid,
    save_forest,
    train_pcm,
)
from cohortcomfort.learn.model_selection import check_pcm_features

from conftest import make_record

PCM_FEATURES = ("air_temperature", "relative_humidity", "near_body_temperature", "heart_rate", "clothing")


def stump(feature, thr, left_label, right_label):
    idx = {-1: 0, 0: 1, 1: 2}
    return DecisionTree(np.array([feature, -1, -1], np.int32), np.array([thr, 0, 0.0]),
                        np.array([1, -1, -1], np.int32), np.array([2, -1, -1], np.int32),
                        np.array([0, idx[left_label], idx[right_label]], np.int8))


def test_constant_labels_constant_predictor():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    f = fit_forest(X, np.zeros(30, int), ["a", "b", "c"], RfHyperparams(n_trees=10))
    assert np.all(f.predict(rng.normal(size=(50, 3)) * 100) == 0)


def test_single_threshold_separable():
    x = np.linspace(18, 32, 57)
    x = x[x != 25]
    y = np.sign(x - 25).astype(int)
    f = fit_forest(x[:, None], y, ["t"], RfHyperparams(n_trees=20, max_depth=3))
    assert f1_micro(y, f.predict(x[:, None])) == 1.0


def test_deterministic_predictions():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(80, 4))
    y = rng.integers(-1, 2, 80)
    probe = rng.normal(size=(40, 4))
    p = RfHyperparams(n_trees=15, max_depth=6, seed=9)
    a = fit_forest(X, y, list("abcd"), p).predict(probe)
    b = fit_forest(X, y, list("abcd"), p).predict(probe)
    np.testing.assert_array_equal(a, b)


def test_empty_input_and_wrong_columns(tmp_path):
    f = FittedForest.from_trees([DecisionTree.constant(1)], ["a"])
    assert f.predict(np.empty((0, 1))).shape == (0,)
    assert f.predict(np.zeros((5, 1))).tolist() == [1] * 5
    with pytest.raises(SchemaError):
        f.predict(np.zeros((2, 3)))
    with pytest.raises(InsufficientDataError):
        fit_forest(np.empty((0, 1)), np.empty(0, int), ["a"], RfHyperparams())


def test_hand_built_majority_vote():
    forest = FittedForest.from_trees([stump(0, 1.0, -1, 1), stump(0, 2.0, -1, 1), stump(0, 0.0, 1, 0)], ["x"])
    # x = 0.5: trees vote -1, -1, 0
    assert forest.predict([[0.5]]).tolist() == [-1]
    assert forest.votes([[0.5]]).tolist() == [[2, 1, 0]]


def test_vote_tie_prefers_frequent_training_class():
    # two trees, one vote each for -1 and +1; training priority decides
    trees = [stump(0, 1.0, -1, -1), stump(0, 1.0, 1, 1)]
    f_warm = FittedForest.from_trees(trees, ["x"], priority=[0, 1, 2])
    f_cool = FittedForest.from_trees(trees, ["x"], priority=[2, 1, 0])
    assert f_warm.predict([[0.0]]).tolist() == [-1]
    assert f_cool.predict([[0.0]]).tolist() == [1]


def gini_stump_oracle(x, y):
    """Exhaustive best midpoint threshold on one feature (minimum weighted Gini)."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    best, best_thr = np.inf, None
    for i in range(1, len(xs)):
        if xs[i] == xs[i - 1]:
            continue
        left, right = ys[:i], ys[i:]
        g = sum(len(part) * (1 - sum((np.mean(part == c)) ** 2 for c in (-1, 0, 1))) for part in (left, right))
        if g < best - 1e-12:
            best, best_thr = g, 0.5 * (xs[i] + xs[i - 1])
    return best_thr


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_root_split_matches_exhaustive_gini(seed):
    rng = np.random.default_rng(seed)
    x = np.round(rng.uniform(0, 10, 25), 1)
    y = rng.integers(-1, 2, 25)
    if len(np.unique(y)) == 1 or len(np.unique(x)) == 1:
        return
    f = fit_forest(x[:, None], y, ["x"], RfHyperparams(n_trees=1, max_depth=1, bootstrap=False))
    tree = f.trees[0]
    assert tree.feature[0] == 0
    assert tree.threshold[0] == pytest.approx(gini_stump_oracle(x, y), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 6))
def test_tree_structure_invariants(seed, min_leaf, depth):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    y = rng.integers(-1, 2, 60)
    f = fit_forest(X, y, list("abc"), RfHyperparams(n_trees=3, max_depth=depth, min_samples_leaf=min_leaf,
                                                    bootstrap=False, seed=seed))
    for tree in f.trees:
        assert tree.depth() <= depth
        sizes = tree.leaf_sizes(X)
        leaves = tree.feature < 0
        assert np.all(sizes[leaves] >= min_leaf)
    assert set(f.predict(rng.normal(size=(20, 3))).tolist()) <= {-1, 0, 1}


def test_save_load_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(50, 2))
    y = rng.integers(-1, 2, 50)
    f = fit_forest(X, y, ["a", "b"], RfHyperparams(n_trees=7, seed=3))
    g = load_forest(save_forest(f, tmp_path / "m.npz"))
    assert g.feature_names == f.feature_names and g.hyperparams == f.hyperparams
    np.testing.assert_array_equal(g.predict(X), f.predict(X))


def test_f1_micro_examples():
    assert f1_micro([1, 0, -1], [1, 0, -1]) == 1.0
    assert f1_micro([-1, 0, 1, 0], [0, 0, 1, 1]) == 0.5
    y = np.array([0] * 4 + [1] * 3 + [-1] * 3)
    assert f1_micro(y, np.zeros(10, int)) == pytest.approx(0.4, abs=1e-12)
    with pytest.raises(MetricInputError):
        f1_micro([0, 1], [0])
    with pytest.raises(MetricInputError):
        f1_micro([], [])


@given(st.lists(st.tuples(st.sampled_from([-1, 0, 1]), st.sampled_from([-1, 0, 1])), min_size=1, max_size=50))
def test_f1_micro_equals_accuracy(pairs):
    t, p = map(np.array, zip(*pairs))
    assert f1_micro(t, p) == pytest.approx(np.mean(t == p), abs=1e-12)


def test_grid_sizes():
    assert len(full_grid()) == 3 * 10 * 3 * 3 == 270
    assert len(desk_grid()) == 3
    assert len(make_grid({"max_depth": [2, 3]}, n_trees=5)) == 2


def test_grid_of_one_is_best():
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(30, 2)), rng.integers(-1, 2, 30)
    only = RfHyperparams(n_trees=5, max_depth=4)
    res = grid_search_cv(X, y, ["a", "b"], [only], folds=3)
    assert res.best == only and len(res.cv_scores) == 1


def test_cv_preconditions():
    X, y = np.zeros((4, 1)), np.zeros(4, int)
    with pytest.raises(InsufficientDataError):
        grid_search_cv(X, y, ["a"], desk_grid(), folds=5)


def test_kfold_partition():
    folds = kfold_indices(23, 5, seed=4)
    assert sorted(np.concatenate(folds).tolist()) == list(range(23))
    assert [len(f) for f in folds] == [5, 5, 5, 4, 4]


def test_pcm_features_exclude_onboarding():
    check_pcm_features(PCM_FEATURES)
    with pytest.raises(ConfigurationError):
        check_pcm_features(PCM_FEATURES + ("height_cm",))


def test_single_class_pcm_is_constant():
    r = make_record("x", np.linspace(18, 30, 20), np.ones(20, int))
    model = train_pcm(r, ["air_temperature"], [RfHyperparams(n_trees=5)], folds=5)
    assert np.all(model.predict(np.array([[0.0], [100.0]])) == 1)


def test_pcm_beats_majority_on_own_data(planted):
    r = planted[0][0]
    model = train_pcm(r, PCM_FEATURES, desk_grid(), folds=5, seed=1)
    own = f1_micro(r.labels, model.predict(r.feature_matrix(PCM_FEATURES)))
    majority = np.bincount(r.labels + 1).max() / len(r)
    assert own >= majority
