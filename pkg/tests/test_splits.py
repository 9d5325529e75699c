import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfit.lib.errors import ConfigError
from rfit.lib.splits import (
    NodeTable,
    SplitMethod,
    SssConfig,
    brent_maximize,
    expit,
    greedy_best_cut,
    greedy_best_cut_naive,
    node_table,
    pooled_sigma2,
    q_profile,
    q_statistic,
    sss_best_cut,
    sss_objective,
)
from rfit.lib.simlab import gen_model_a


def _integer_instance(seed, n_max=60, k_max=20):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, n_max + 1))
    k = int(rng.integers(2, k_max + 1))
    x = rng.integers(1, k + 1, size=n).astype(float)
    y = rng.integers(-5, 6, size=n).astype(float)
    t = rng.integers(0, 2, size=n)
    return x, y, t


def test_node_table_example():
    tab = node_table([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1], [True, False, True, False])
    assert tab.counts == (1.0, 1.0, 1.0, 1.0)
    assert (tab.s0L, tab.s0R, tab.s1L, tab.s1R) == (1.0, 2.0, 3.0, 4.0)
    assert tab.sumYsq == 30.0
    assert tab.cell_mean(1, "R") == 4.0


def test_node_table_all_left():
    tab = node_table([1.0, 2.0, 3.0], [0, 1, 1], [True, True, True])
    assert tab.n0R == 0 and tab.n1R == 0
    assert tab.cell_mean(0, "R") is None


def test_node_table_weights_count_as_copies():
    y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    t = np.array([0, 1, 0, 1, 1])
    left = np.array([True, True, False, False, True])
    w = np.array([2, 0, 1, 3, 1])
    weighted = node_table(y, t, left, w)
    copies = node_table(np.repeat(y, w), np.repeat(t, w), np.repeat(left, w))
    assert weighted == copies


def _balanced_table():
    # cells (0,2), (0,2), (1,3), (1,3): within-cell SS = 8, n - 4 = 4
    y = [0.0, 2.0, 0.0, 2.0, 1.0, 3.0, 1.0, 3.0]
    t = [0, 0, 0, 0, 1, 1, 1, 1]
    left = [True, True, False, False, True, True, False, False]
    return node_table(y, t, left)


def test_pooled_sigma2_example():
    assert pooled_sigma2(_balanced_table()) == 2.0


def test_pooled_sigma2_one_row_per_cell():
    tab = node_table([1.0, 2.0, 3.0, 4.0], [0, 0, 1, 1], [True, False, True, False])
    assert pooled_sigma2(tab) is None


def test_pooled_sigma2_constant_response():
    tab = node_table([5.0] * 8, [0, 0, 0, 0, 1, 1, 1, 1], [True, True, False, False] * 2)
    assert pooled_sigma2(tab) == 0.0
    assert q_statistic(tab, 0.0) is None


def _table(n, means, sumYsq=0.0):
    m0L, m0R, m1L, m1R = means
    return NodeTable(n0L=n, n0R=n, n1L=n, n1R=n, s0L=n * m0L, s0R=n * m0R, s1L=n * m1L, s1R=n * m1R, sumYsq=sumYsq)


def test_q_statistic_example():
    # DID = (4 - 1) - (2 - 1) = 2, sum of 1/n = 2
    assert q_statistic(_table(2.0, (1.0, 1.0, 4.0, 2.0)), 2.0) == 1.0


def test_q_statistic_no_interaction():
    assert q_statistic(_table(2.0, (1.0, 3.0, 2.0, 4.0)), 2.0) == 0.0


def test_q_statistic_scales_with_counts():
    means = (0.5, 1.5, 3.0, 1.0)
    q2 = q_statistic(_table(2.0, means), 1.5)
    q4 = q_statistic(_table(4.0, means), 1.5)
    assert q4 == pytest.approx(2.0 * q2)


def test_q_statistic_empty_cell():
    tab = NodeTable(n0L=0.0, n0R=2.0, n1L=2.0, n1R=2.0, s0L=0.0, s0R=1.0, s1L=1.0, s1R=1.0, sumYsq=3.0)
    assert q_statistic(tab, 1.0) is None


@pytest.mark.parametrize("min_arm", [1, 2, 5])
def test_greedy_matches_naive(min_arm):
    for seed in range(1000):
        x, y, t = _integer_instance(seed)
        fast = greedy_best_cut(x, y, t, min_arm=min_arm)
        slow = greedy_best_cut_naive(x, y, t, min_arm=min_arm)
        assert fast.valid == slow.valid, seed
        if fast.valid:
            assert fast.cutpoint == slow.cutpoint, seed
            assert fast.q == slow.q, seed
            assert fast.did == slow.did, seed


def test_greedy_weights_equal_replication():
    for seed in range(200):
        x, y, t = _integer_instance(seed)
        w = np.random.default_rng(seed + 10_000).integers(0, 4, size=x.shape[0])
        weighted = greedy_best_cut(x, y, t, min_arm=2, weights=w)
        copies = greedy_best_cut(np.repeat(x, w), np.repeat(y, w), np.repeat(t, w), min_arm=2)
        assert weighted == copies, seed


def test_greedy_two_values_single_candidate():
    x = np.array([0.0] * 10 + [1.0] * 10)
    t = np.tile([0, 1], 10)
    y = np.random.default_rng(1).normal(size=20)
    cand = greedy_best_cut(x, y, t, min_arm=5)
    assert cand.valid
    assert cand.cutpoint == 0.5
    assert cand.method is SplitMethod.GS


def test_greedy_constant_covariate():
    cand = greedy_best_cut(np.ones(20), np.arange(20.0), np.tile([0, 1], 10))
    assert not cand.valid
    assert cand.cutpoint is None


def test_greedy_and_naive_agree_on_mirrored_cuts():
    # the cuts at 1.5 and 3.5 give the same table up to relabelling
    x = np.repeat([1.0, 2.0, 3.0, 4.0], 4)
    t = np.tile([0, 1], 8)
    y = np.array([0, 3, 1, 4] * 1 + [0, 1, 1, 2] * 2 + [0, 3, 1, 4], dtype=float)
    fast = greedy_best_cut(x, y, t, min_arm=1)
    slow = greedy_best_cut_naive(x, y, t, min_arm=1)
    assert fast.cutpoint == slow.cutpoint
    assert fast.cutpoint in (1.5, 3.5)


@pytest.mark.parametrize("scale", [0.5, 2.0, 10.0])
def test_greedy_response_scale(scale):
    rng = np.random.default_rng(21)
    x = rng.uniform(size=120)
    t = rng.integers(0, 2, size=120)
    y = rng.normal(size=120) + 2.0 * t * (x > 0.4)
    base = greedy_best_cut(x, y, t)
    scaled = greedy_best_cut(x, scale * y, t)
    assert scaled.cutpoint == base.cutpoint
    assert scaled.q == pytest.approx(base.q, rel=1e-9)


def test_greedy_noiseless_model_a(model_a):
    x = model_a.x[:, 0]
    cand = greedy_best_cut(x, model_a.y, model_a.t)
    assert abs(cand.cutpoint - 0.5) <= 0.05


def test_greedy_recovers_cutpoint_with_noise():
    errors = []
    for seed in range(20):
        data = gen_model_a(500, 0, 0.5, np.random.default_rng(seed), noise_sd=1.0)
        errors.append(abs(greedy_best_cut(data.x[:, 0], data.y, data.t).cutpoint - 0.5))
    assert np.median(errors) < 0.1


def test_expit_values():
    assert expit(0.3, 10.0, 0.3) == 0.5
    assert expit(0.1, 10.0, 0.0) == pytest.approx(0.7310585786300049, abs=1e-15)


def test_expit_saturates_quietly():
    with np.errstate(all="raise"):
        hi = expit(1e6, 10.0, 0.0)
        lo = expit(-1e6, 10.0, 0.0)
    assert hi == 1.0
    assert lo == 0.0


def test_expit_rejects_nonpositive_shape():
    with pytest.raises(ConfigError):
        expit(0.0, 0.0, 0.0)


@pytest.mark.parametrize("value", [SplitMethod.SSS, "SSS", "sss"])
def test_split_method_parse(value):
    assert SplitMethod.parse(value) is SplitMethod.SSS


def test_split_method_parse_rejects_unknown():
    with pytest.raises(ConfigError):
        SplitMethod.parse("CART")


def test_sss_config_range():
    with pytest.raises(ConfigError):
        SssConfig(a=0.5)
    with pytest.raises(ConfigError):
        SssConfig(a=2000.0)


def test_surrogate_is_zero_far_left():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(100)
    y = rng.standard_normal(100)
    t = np.tile([0, 1], 50)
    assert sss_objective(-100.0, x, y, t, SssConfig()) == 0.0


def test_surrogate_approaches_exact_for_steep_curve():
    checked = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        x = rng.integers(1, 11, size=200).astype(float)
        t = rng.integers(0, 2, size=200)
        y = rng.normal(size=200) + t * (x > 5)
        cuts = np.arange(1.5, 10.5)
        exact, smooth = q_profile(x, y, t, cuts, a=1000.0)
        for c, q, qs in zip(cuts, exact, smooth):
            tab = node_table(y, t, x <= c)
            if not np.isfinite(q) or min(tab.counts) < 5:
                continue
            assert abs(qs - q) <= 1e-4 * max(q, 1.0), (seed, c)
            checked += 1
    assert checked > 1000


def test_surrogate_is_continuous():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(150)
    t = np.tile([0, 1], 75)
    y = rng.standard_normal(150) + t * (x > 0)
    cfg = SssConfig(a=10.0)
    for c in (-1.0, -0.2, 0.0, 0.7):
        q0 = sss_objective(c, x, y, t, cfg)
        q1 = sss_objective(c + 1e-9, x, y, t, cfg)
        assert abs(q1 - q0) <= 1e-4 * max(1.0, q0)


def test_brent_quadratic():
    res = brent_maximize(lambda c: -(c - 0.3) ** 2, 0.0, 1.0, tol=1e-5)
    assert res.converged
    assert abs(res.argmax - 0.3) <= 1e-4
    assert res.value == pytest.approx(0.0, abs=1e-8)


def test_brent_monotone_goes_to_bound():
    res = brent_maximize(lambda c: c, 0.0, 1.0, tol=1e-5)
    assert res.argmax > 1.0 - 1e-3


def test_brent_constant():
    res = brent_maximize(lambda c: 3.0, -1.0, 1.0)
    assert res.value == 3.0
    assert -1.0 <= res.argmax <= 1.0


def test_brent_degenerate_interval():
    res = brent_maximize(lambda c: c * c, 2.0, 2.0)
    assert res.argmax == 2.0
    assert res.iterations == 0


def test_sss_single_value():
    cand = sss_best_cut(np.full(30, 2.0), np.arange(30.0), np.tile([0, 1], 15))
    assert not cand.valid
    assert cand.method is SplitMethod.SSS


def test_sss_converges_on_sharp_signal():
    data = gen_model_a(500, 0, 0.5, np.random.default_rng(3), noise_sd=0.2)
    cfg = SssConfig()
    cand = sss_best_cut(data.x[:, 0], data.y, data.t, cfg, min_arm=5)
    assert cand.valid
    assert cand.converged
    assert 0 < cand.iterations < cfg.brent_max_iter
    assert abs(cand.cutpoint - 0.5) < 0.05


def test_sss_noiseless_reports_cutpoint(model_a):
    cand = sss_best_cut(model_a.x[:, 0], model_a.y, model_a.t)
    assert cand.cutpoint is not None
    assert abs(cand.cutpoint - 0.5) < 0.05


def test_sss_affine_equivariance():
    rng = np.random.default_rng(12)
    x = rng.uniform(size=300)
    t = rng.integers(0, 2, size=300)
    y = rng.normal(size=300) + 1.5 * t * (x > 0.6)
    base = sss_best_cut(x, y, t, min_arm=5)
    moved = sss_best_cut(10.0 * x + 3.0, y, t, min_arm=5)
    assert moved.cutpoint == pytest.approx(10.0 * base.cutpoint + 3.0, rel=1e-6)
    assert moved.q == pytest.approx(base.q, rel=1e-9)


def test_sss_min_arm_keeps_cells_populated():
    rng = np.random.default_rng(13)
    x = rng.uniform(size=80)
    t = rng.integers(0, 2, size=80)
    y = rng.normal(size=80) + 3.0 * t * (x > 0.95)
    cand = sss_best_cut(x, y, t, min_arm=5)
    if cand.valid:
        tab = node_table(y, t, x <= cand.cutpoint)
        assert min(tab.counts) >= 5


def test_sss_weighted_drops_zero_rows():
    rng = np.random.default_rng(14)
    x = rng.uniform(size=100)
    t = np.tile([0, 1], 50)
    y = rng.normal(size=100) + t * (x > 0.5)
    w = np.ones(100)
    w[:10] = 0
    weighted = sss_best_cut(x, y, t, weights=w, min_arm=5)
    kept = sss_best_cut(x[10:], y[10:], t[10:], min_arm=5)
    assert weighted.cutpoint == pytest.approx(kept.cutpoint, rel=1e-9)


def test_sss_doubled_rows_keep_admissible_range():
    rng = np.random.default_rng(15)
    x = np.linspace(0.0, 1.0, 16)
    t = np.tile([0, 1], 8)
    y = 3.0 * t * (x > 0.5) + rng.normal(scale=0.3, size=16)
    weighted = sss_best_cut(x, y, t, min_arm=5, weights=np.full(16, 2))
    copies = sss_best_cut(np.repeat(x, 2), np.repeat(y, 2), np.repeat(t, 2), min_arm=5)
    assert copies.valid
    assert weighted.valid
    assert weighted.cutpoint == pytest.approx(copies.cutpoint, abs=1e-6)
    assert weighted.q == pytest.approx(copies.q, rel=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_sss_weights_equal_replication(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=60)
    t = np.tile([0, 1], 30)
    y = rng.normal(size=60) + 2.0 * t * (x > 0.4)
    w = rng.integers(0, 4, size=60)
    weighted = sss_best_cut(x, y, t, min_arm=5, weights=w)
    copies = sss_best_cut(np.repeat(x, w), np.repeat(y, w), np.repeat(t, w), min_arm=5)
    assert weighted.valid == copies.valid
    if copies.cutpoint is None:
        assert weighted.cutpoint is None
    else:
        assert weighted.cutpoint == pytest.approx(copies.cutpoint, abs=1e-6)
    if copies.valid:
        assert weighted.q == pytest.approx(copies.q, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(shift=st.floats(-100.0, 100.0), seed=st.integers(0, 10_000))
def test_q_location_invariance(shift, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=60)
    t = np.tile([0, 1], 30)
    y = rng.normal(size=60)
    cuts = np.linspace(0.1, 0.9, 17)
    base, _ = q_profile(x, y, t, cuts)
    moved, _ = q_profile(x, y + shift, t, cuts)
    np.testing.assert_allclose(moved, base, rtol=1e-6, atol=1e-8)


def test_q_profile_shapes():
    rng = np.random.default_rng(15)
    x = rng.uniform(size=50)
    t = np.tile([0, 1], 25)
    y = rng.normal(size=50)
    cuts = np.array([-1.0, 0.5, 2.0])
    exact, smooth = q_profile(x, y, t, cuts, a=10.0)
    assert np.isnan(exact[0]) and np.isnan(exact[2])
    assert np.isfinite(exact[1])
    assert smooth.shape == (3,)
    assert smooth[0] == 0.0
    exact_only, none = q_profile(x, y, t, cuts)
    assert none is None
    np.testing.assert_array_equal(np.isnan(exact_only), np.isnan(exact))
