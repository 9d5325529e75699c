import json

import numpy as np
import pytest

from rfit.lib.data import NOMINAL, ColumnMeta, TrialDataset
from rfit.lib.errors import ConfigError, GrowthError, PredictionError
from rfit.lib.simlab import gen_ite_model
from rfit.lib.splits import SplitMethod, greedy_best_cut
from rfit.lib.tree import InteractionTree, TreeNode, TreeParams, grow_tree, predict_tree, terminal_effect

from conftest import random_trial

GS = TreeParams(split_method="GS")


@pytest.mark.parametrize(
    "y, t, expected",
    [
        ([2.0, 4.0, 1.0, 1.0], [1, 1, 0, 0], 2.0),
        ([3.0, 3.0, 3.0, 3.0], [1, 0, 1, 0], 0.0),
        ([5.0, 3.0], [1, 0], 2.0),
    ],
)
def test_terminal_effect(y, t, expected):
    effect, n1, n0 = terminal_effect(y, t)
    assert effect == expected
    assert n1 + n0 == len(y)


def test_terminal_effect_empty_arm():
    with pytest.raises(GrowthError):
        terminal_effect([1.0, 2.0], [1, 1])


def test_terminal_effect_weights():
    effect, n1, n0 = terminal_effect([2.0, 4.0, 1.0, 3.0], [1, 1, 0, 0], [3, 1, 1, 0])
    assert effect == pytest.approx(2.5 - 1.0)
    assert (n1, n0) == (4.0, 1.0)


def test_params_validation():
    with pytest.raises(ConfigError):
        TreeParams(min_arm=5, min_node=9)
    with pytest.raises(ConfigError):
        TreeParams(max_depth=-1)
    with pytest.raises(ConfigError):
        TreeParams(split_method="CART")
    assert TreeParams().resolve_mtry(18) == 6
    assert TreeParams().resolve_mtry(2) == 1
    with pytest.raises(ConfigError):
        TreeParams(mtry=4).resolve_mtry(3)


def test_params_accept_enum_members():
    assert TreeParams().split_method is SplitMethod.SSS
    assert TreeParams(split_method=SplitMethod.GS).split_method is SplitMethod.GS
    assert TreeParams(split_method=SplitMethod.SSS) == TreeParams()


def test_params_dict_round_trip():
    params = TreeParams(mtry=2, min_arm=3, min_node=10, max_depth=4, split_method="gs")
    assert TreeParams.from_dict(json.loads(json.dumps(params.to_dict()))) == params


def test_constant_response_single_leaf():
    data = random_trial(100, 2, seed=1)
    flat = TrialDataset(y=np.full(100, 5.0), t=data.t, x=data.x, columns=data.columns)
    tree = grow_tree(flat, None, TreeParams(), np.random.default_rng(0))
    assert len(tree.nodes) == 1
    assert tree.nodes[0].value == 0.0


def test_depth_zero_is_root_effect(trial):
    tree = grow_tree(trial, None, TreeParams(max_depth=0), np.random.default_rng(0))
    assert len(tree.nodes) == 1
    assert tree.nodes[0].value == pytest.approx(trial.mean_difference())
    assert predict_tree(tree, [0.1, 0.5, 0.9]) == tree.nodes[0].value


def _one_split_tree():
    nodes = [
        TreeNode(depth=0, value=0.0, n1=10, n0=10, covariate=0, cutpoint=0.5, left=1, right=2),
        TreeNode(depth=1, value=1.0, n1=5, n0=5),
        TreeNode(depth=1, value=2.0, n1=5, n0=5),
    ]
    return InteractionTree(nodes=nodes, columns=(ColumnMeta("x"),))


def test_boundary_goes_left():
    tree = _one_split_tree()
    assert predict_tree(tree, [0.5]) == 1.0
    assert predict_tree(tree, [0.5000001]) == 2.0
    np.testing.assert_array_equal(tree.apply([[0.0], [0.5], [1.0]]), [1, 1, 2])


def test_missing_tested_covariate():
    with pytest.raises(PredictionError):
        _one_split_tree().predict([[np.nan]])


def test_wrong_width():
    with pytest.raises(PredictionError):
        _one_split_tree().predict([[0.1, 0.2]])


def test_leaf_counts_match_routing(trial):
    w = np.random.default_rng(3).multinomial(trial.n, np.full(trial.n, 1.0 / trial.n))
    tree = grow_tree(trial, w, TreeParams(mtry=3), np.random.default_rng(4))
    assert tree.n_leaves > 1
    leaf = tree.apply(trial.x)
    assert all(tree.nodes[k].is_leaf for k in np.unique(leaf))
    n1 = np.bincount(leaf, weights=w * trial.t, minlength=len(tree.nodes))
    n0 = np.bincount(leaf, weights=w * (1 - trial.t), minlength=len(tree.nodes))
    for k, node in enumerate(tree.nodes):
        if node.is_leaf:
            assert node.n1 == n1[k]
            assert node.n0 == n0[k]
            assert node.n1 >= 5 and node.n0 >= 5


def test_preorder_layout(trial):
    tree = grow_tree(trial, None, TreeParams(mtry=3), np.random.default_rng(5))
    for k, node in enumerate(tree.nodes):
        if not node.is_leaf:
            assert node.left == k + 1
            assert node.right > node.left
            assert tree.nodes[node.left].depth == node.depth + 1
            assert tree.nodes[node.right].depth == node.depth + 1


@pytest.mark.parametrize("method", ["GS", "SSS"])
def test_same_generator_same_tree(trial, method):
    params = TreeParams(split_method=method)
    a = grow_tree(trial, None, params, np.random.default_rng(9))
    b = grow_tree(trial, None, params, np.random.default_rng(9))
    assert a.to_dict() == b.to_dict()


def test_weights_equal_replication():
    data = random_trial(200, 3, seed=2, integer_y=True)
    w = np.random.default_rng(6).integers(0, 3, size=data.n)
    copies = data.subset(np.repeat(np.arange(data.n), w))
    a = grow_tree(data, w, GS, np.random.default_rng(1))
    b = grow_tree(copies, None, GS, np.random.default_rng(1))
    assert a.to_dict() == b.to_dict()


def test_sss_weights_equal_replication():
    data = random_trial(200, 3, seed=2, integer_y=True)
    w = np.random.default_rng(6).integers(0, 3, size=data.n)
    copies = data.subset(np.repeat(np.arange(data.n), w))
    params = TreeParams(mtry=3)
    a = grow_tree(data, w, params, np.random.default_rng(1))
    b = grow_tree(copies, None, params, np.random.default_rng(1))
    assert a.n_leaves > 1
    assert [nd.covariate for nd in a.nodes] == [nd.covariate for nd in b.nodes]
    assert [(nd.n1, nd.n0) for nd in a.nodes] == [(nd.n1, nd.n0) for nd in b.nodes]
    np.testing.assert_allclose([nd.cutpoint for nd in a.nodes], [nd.cutpoint for nd in b.nodes], atol=1e-6)
    np.testing.assert_allclose(a.predict(data.x), b.predict(data.x), atol=1e-9)


def test_root_split_has_largest_q(trial):
    params = TreeParams(mtry=3, split_method="GS", max_depth=1)
    tree = grow_tree(trial, None, params, np.random.default_rng(0))
    qs = [greedy_best_cut(trial.x[:, j], trial.y, trial.t, params.min_arm).q for j in range(trial.p)]
    root = tree.nodes[0]
    assert root.q == max(qs)
    assert root.covariate == int(np.argmax(qs))


def test_root_arm_too_small():
    data = random_trial(40, 2, seed=3)
    w = np.where(data.t == 1, 0, 1)
    w[np.flatnonzero(data.t == 1)[:3]] = 1
    with pytest.raises(GrowthError):
        grow_tree(data, w, TreeParams(), np.random.default_rng(0))


def test_model_ii_root_variable():
    params = TreeParams(mtry=5, max_depth=1)
    hits = 0
    for r in range(100):
        rng = np.random.default_rng([2019, r])
        data, _, _, _ = gen_ite_model("II", 500, rng)
        tree = grow_tree(data, None, params, rng)
        hits += tree.nodes[0].covariate in (0, 1, 2)
    assert hits >= 90


def _nominal_trial(n=240, seed=0):
    rng = np.random.default_rng(seed)
    site = rng.integers(0, 3, size=n)
    x = np.column_stack([rng.uniform(size=n), site.astype(float)])
    t = np.tile([0, 1], n // 2)
    # site "b" responds, the others do not
    y = rng.normal(size=n) + 3.0 * t * (site == 1)
    columns = (ColumnMeta("x1"), ColumnMeta("site", kind=NOMINAL, levels=("a", "b", "c")))
    return TrialDataset(y=y, t=t, x=x, columns=columns)


def test_nominal_split_is_a_level_set():
    data = _nominal_trial()
    params = TreeParams(mtry=2, max_depth=1)
    tree = grow_tree(data, None, params, np.random.default_rng(0))
    root = tree.to_dict()["nodes"][0]
    assert root["name"] == "site"
    assert set(root["left_levels"]) in ({"a", "c"}, {"b"})
    assert "site" in tree.to_dict()["encodings"]


def test_unseen_nominal_level_uses_fallback():
    data = _nominal_trial()
    tree = grow_tree(data, None, TreeParams(mtry=2), np.random.default_rng(0))
    out = tree.predict([[0.3, np.nan], [0.3, 1.0]])
    assert np.isfinite(out).all()


def test_nominal_with_one_level_is_skipped():
    data = _nominal_trial()
    x = data.x.copy()
    x[:, 1] = 0.0
    flat = TrialDataset(y=data.y, t=data.t, x=x, columns=data.columns)
    tree = grow_tree(flat, None, TreeParams(mtry=2), np.random.default_rng(0))
    assert all(node.covariate in (-1, 0) for node in tree.nodes)
    assert tree.encodings == {}


def test_declared_single_level_column_is_never_split():
    data = _nominal_trial()
    x = data.x.copy()
    x[:, 1] = 0.0
    columns = (data.columns[0], ColumnMeta("site", kind=NOMINAL, levels=("a",)))
    single = TrialDataset(y=data.y, t=data.t, x=x, columns=columns)
    tree = grow_tree(single, None, TreeParams(mtry=2), np.random.default_rng(0))
    assert all(node.covariate in (-1, 0) for node in tree.nodes)
    assert np.isfinite(tree.predict(x)).all()


def test_json_round_trip():
    data = _nominal_trial()
    tree = grow_tree(data, None, TreeParams(mtry=2), np.random.default_rng(2))
    back = InteractionTree.from_dict(json.loads(json.dumps(tree.to_dict())), data.columns)
    np.testing.assert_array_equal(back.predict(data.x), tree.predict(data.x))
    assert back.to_dict() == tree.to_dict()
