import itertools

import numpy as np
import pytest
from scipy.special import logsumexp

from conftest import random_qt, random_std
from querytrain import oracle
from querytrain.baselines import GibbsChainState, gibbs_sweep
from querytrain.data_io import generate_synthetic
from querytrain.errors import OracleSizeError
from querytrain.model import RbmParamsQT, energy_qt, from_standard, to_standard
from querytrain.oracle import (
    ExactBackend,
    enumerate_joint,
    exact_conditional,
    exact_conditionals,
    exact_nce,
    sample_visible,
    visible_marginals,
)
from querytrain.queries import QueryDistribution, generate_query_set


def brute_log_z(params):
    V, H = params.n_visible, params.n_hidden
    states = np.array(list(itertools.product([0, 1], repeat=V + H)), dtype=float)
    return logsumexp(energy_qt(params, states[:, :V], states[:, V:]))


def test_normalization_and_partition_function(rng):
    p = random_qt(rng, 5, 3, scale=2.0)
    t = enumerate_joint(p)
    assert np.exp(t.log_probs).sum() == pytest.approx(1.0, abs=1e-12)
    assert np.exp(t.visible_log_marginal).sum() == pytest.approx(1.0, abs=1e-12)
    assert t.log_z == pytest.approx(brute_log_z(p), abs=1e-12)


def test_visible_marginal_matches_free_energy(rng):
    std = random_std(rng, 6, 4, scale=1.5)
    t = enumerate_joint(std)
    vs = oracle.state_bits(0, 64, 6)
    free = vs @ std.b_v + np.logaddexp(0.0, vs @ std.W_std.T + std.b_h).sum(axis=1)
    np.testing.assert_allclose(t.visible_log_marginal, free - logsumexp(free), atol=1e-12)


def test_joint_index_layout(rng):
    p = random_qt(rng, 3, 2)
    t = enumerate_joint(p)
    v, h = np.array([1, 0, 1.0]), np.array([0, 1.0])
    idx = 0b101 + (0b10 << 3)
    assert t.log_probs[idx] == pytest.approx(energy_qt(p, v, h) - t.log_z, abs=1e-12)


def test_streamed_blocks_match_single_block(rng, monkeypatch):
    p = random_qt(rng, 6, 5, scale=1.5)
    whole = enumerate_joint(p)
    monkeypatch.setattr(oracle, "_BLOCK", 16)
    small = enumerate_joint(p)
    np.testing.assert_allclose(small.visible_log_marginal, whole.visible_log_marginal, atol=1e-12)
    np.testing.assert_allclose(small.log_probs, whole.log_probs, atol=1e-12)


def test_two_routes_agree(rng):
    for _ in range(4):
        p = random_qt(rng, 6, 4, scale=2.0)
        t = enumerate_joint(p)
        v = rng.integers(0, 2, (12, 6))
        q = rng.integers(0, 2, (12, 6))
        a = exact_conditionals(t, v, q, "visible")
        b = exact_conditionals(t, v, q, "joint")
        np.testing.assert_allclose(a, b, atol=1e-12)
        np.testing.assert_array_equal(a[q == 1], v[q == 1])


def test_conditional_by_definition(rng):
    p = random_qt(rng, 4, 2, scale=2.0)
    t = enumerate_joint(p)
    probs = np.exp(t.visible_log_marginal)
    vs = oracle.state_bits(0, 16, 4)
    # p(v_2 = 1 | v_0 = 1, v_3 = 0)
    cons = (vs[:, 0] == 1) & (vs[:, 3] == 0)
    want = probs[cons & (vs[:, 2] == 1)].sum() / probs[cons].sum()
    got = exact_conditional(p, np.array([1, 1, 1, 0]), np.array([1, 0, 0, 1]))
    assert got.shape == (2,)
    assert got[1] == pytest.approx(want, abs=1e-12)


def test_no_observation_gives_marginals(rng):
    p = random_qt(rng, 5, 3)
    t = enumerate_joint(p)
    cond = exact_conditionals(t, np.zeros((1, 5)), np.zeros((1, 5)))[0]
    np.testing.assert_allclose(cond, visible_marginals(t), atol=1e-12)


def test_gibbs_cross_check(rng):
    std = random_std(rng, 3, 2, scale=1.0)
    t = enumerate_joint(std)
    state = GibbsChainState(rng.integers(0, 2, (2000, 3)).astype(float), np.zeros((2000, 2)), rng)
    acc, n = np.zeros(3), 0
    for sweep in range(600):
        state = gibbs_sweep(std, state)
        if sweep >= 100:
            acc += state.v.sum(axis=0)
            n += state.v.shape[0]
    np.testing.assert_allclose(acc / n, visible_marginals(t), atol=0.01)


def test_size_limits():
    with pytest.raises(OracleSizeError):
        enumerate_joint(RbmParamsQT.zeros(17, 8))
    with pytest.raises(OracleSizeError):
        enumerate_joint(RbmParamsQT.zeros(15, 6), materialize=True)
    t = enumerate_joint(RbmParamsQT.zeros(16, 6))
    assert t.log_probs is None
    assert t.log_z == pytest.approx(22 * np.log(2))
    with pytest.raises(OracleSizeError):
        exact_conditionals(t, np.zeros((1, 16)), np.zeros((1, 16)), "joint")


def test_exact_sampling_frequencies(rng):
    p = random_qt(rng, 3, 2, scale=1.5)
    t = enumerate_joint(p)
    s = sample_visible(t, 200_000, rng)
    np.testing.assert_allclose(s.mean(axis=0), visible_marginals(t), atol=0.005)


def test_parameterizations_give_same_table(rng):
    std = random_std(rng, 4, 3, scale=1.5)
    a = enumerate_joint(std)
    b = enumerate_joint(from_standard(std))
    np.testing.assert_allclose(a.visible_log_marginal, b.visible_log_marginal, atol=1e-12)
    c = enumerate_joint(to_standard(from_standard(std)))
    np.testing.assert_allclose(a.log_probs, c.log_probs, atol=1e-12)


def test_exact_nce_floor_regression():
    ds, truth = generate_synthetic(8, 4, 1.5, 2000, seed=7)
    q = generate_query_set(2000, 8, QueryDistribution(), 11)
    value = exact_nce(truth, ds.data, q)
    assert 0 < value < 1
    assert value == pytest.approx(0.8629306625690948, abs=1e-9)
    assert ExactBackend(truth).predict(ds.data[:3], q[:3]).shape == (3, 8)


def test_uncoupled_conditionals_ignore_evidence(rng):
    p = RbmParamsQT(np.zeros((2, 4)), rng.normal(size=4), rng.normal(size=2))
    out = exact_conditional(p, np.array([1, 0, 1, 1]), np.array([1, 1, 0, 0]))
    np.testing.assert_allclose(out, 1 / (1 + np.exp(-p.c_V[2:])), atol=1e-12)
    assert exact_conditional(p, np.ones(4), np.ones(4)).size == 0


def test_saturated_model_reaches_zero():
    p = RbmParamsQT(np.zeros((1, 3)), [-30.0, -30.0, -30.0], [0.0])
    data = np.zeros((20, 3), dtype=int)
    q = generate_query_set(20, 3, QueryDistribution(), 0)
    assert exact_nce(p, data, q) < 1e-10


def test_zero_model_scores_one(rng):
    data = rng.integers(0, 2, (50, 4))
    q = generate_query_set(50, 4, QueryDistribution(), 1)
    assert exact_nce(RbmParamsQT.zeros(4, 2), data, q) == pytest.approx(1.0, abs=1e-12)
