import numpy as np
import pytest

from rfit.lib.data import NOMINAL, ColumnMeta, TrialDataset
from rfit.lib.baseline import fit_sr, grow_regression_tree, predict_sr, sse_best_cut
from rfit.lib.errors import GrowthError
from rfit.lib.forest import ForestParams
from rfit.lib.simlab import gen_ite_model, gen_test_points
from rfit.lib.tree import TreeParams

from conftest import random_trial

SMALL = ForestParams(b=10, tree=TreeParams(min_arm=3, min_node=10), seed=5)


def test_sse_recovers_step():
    x = np.random.default_rng(0).uniform(size=200)
    y = (x <= 0.5).astype(float)
    cut, gain = sse_best_cut(x, y, 5)
    assert x[x <= 0.5].max() < cut < x[x > 0.5].min()
    assert gain == pytest.approx(y.var() * 200)


def test_sse_two_points():
    cut, gain = sse_best_cut([0.0, 1.0], [0.0, 1.0], 1)
    assert cut == 0.5
    assert gain == 0.5


@pytest.mark.parametrize(
    "x, y, min_leaf",
    [
        (np.arange(10.0), np.full(10, 2.0), 1),
        (np.full(10, 1.0), np.arange(10.0), 1),
        (np.arange(10.0), np.arange(10.0), 6),
    ],
)
def test_sse_no_cut(x, y, min_leaf):
    assert sse_best_cut(x, y, min_leaf) is None


def test_regression_tree_two_points():
    tree = grow_regression_tree([0.0, 1.0], [[0.0], [1.0]], None, TreeParams(min_arm=1, min_node=2), np.random.default_rng(0))
    assert tree.nodes[0].cutpoint == 0.5
    np.testing.assert_array_equal(tree.predict([[0.2], [0.8]]), [0.0, 1.0])


def test_regression_tree_arm_slot():
    y = np.arange(30.0)
    x = np.linspace(0, 1, 30).reshape(-1, 1)
    tree = grow_regression_tree(y, x, None, TreeParams(), np.random.default_rng(0), arm=0)
    assert all(node.n1 == 0.0 for node in tree.nodes)
    assert tree.nodes[0].n0 == 30.0


def test_regression_tree_nominal_levels():
    rng = np.random.default_rng(1)
    codes = rng.integers(0, 3, size=90)
    y = np.array([5.0, 0.0, 5.0])[codes] + rng.normal(scale=0.1, size=90)
    columns = (ColumnMeta("g", kind=NOMINAL, levels=("a", "b", "c")),)
    tree = grow_regression_tree(y, codes.reshape(-1, 1).astype(float), None, TreeParams(max_depth=1), rng, columns=columns)
    root = tree.to_dict()["nodes"][0]
    assert root["left_levels"] == ["b"]


def test_sr_arms_cover_the_data(trial):
    model = fit_sr(trial, SMALL, n_jobs=1)
    assert model.forest1.n + model.forest0.n == trial.n
    assert model.forest1.n == int(trial.t.sum())


def test_sr_constant_arms():
    data = random_trial(80, 2, seed=2)
    y = np.where(data.t == 1, 3.0, 1.0)
    flat = TrialDataset(y=y, t=data.t, x=data.x, columns=data.columns)
    model = fit_sr(flat, SMALL, n_jobs=1)
    np.testing.assert_array_equal(model.predict(data.x[:5]), np.full(5, 2.0))
    assert predict_sr(model, data.x[0]) == 2.0


def test_sr_treated_forest_ignores_control_rows(trial):
    y = np.array(trial.y)
    control = np.flatnonzero(trial.t == 0)
    y[control] = np.random.default_rng(3).permutation(y[control])
    shuffled = TrialDataset(y=y, t=trial.t, x=trial.x, columns=trial.columns)
    a = fit_sr(trial, SMALL, n_jobs=1)
    b = fit_sr(shuffled, SMALL, n_jobs=1)
    np.testing.assert_array_equal(a.forest1.predict(trial.x), b.forest1.predict(trial.x))


def test_sr_is_reproducible(trial):
    a = fit_sr(trial, SMALL, n_jobs=1)
    b = fit_sr(trial, SMALL, n_jobs=1)
    np.testing.assert_array_equal(a.predict(trial.x), b.predict(trial.x))
    np.testing.assert_allclose(a.forest1.predict(trial.x), a.forest1.predict_matrix(trial.x).mean(axis=1))


def test_sr_arm_too_small():
    data = random_trial(30, 2, seed=4)
    with pytest.raises(GrowthError):
        fit_sr(data, ForestParams(b=2), n_jobs=1)


def test_sr_tracks_linear_effect():
    rng = np.random.default_rng(2019)
    data, _, _, _ = gen_ite_model("I", 500, rng)
    x_test, delta = gen_test_points("I", 200, rng)
    model = fit_sr(data, ForestParams(b=50, seed=1), n_jobs=1)
    assert np.corrcoef(model.predict(x_test), delta)[0, 1] > 0
