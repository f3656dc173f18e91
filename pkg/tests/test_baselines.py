import numpy as np
import pytest

from conftest import random_std
from querytrain.baselines import (
    GIBBS_EPS,
    GibbsBackend,
    GibbsChainState,
    PcdConfig,
    gibbs_conditional_inference,
    gibbs_conditional_marginals,
    gibbs_sweep,
    init_chains,
    pcd_to_bp_backend,
    pcd_train,
    pcd_train_lr_search,
    pcd_update,
    pcd_valid_nce,
)
from querytrain.data_io import generate_synthetic, split_dataset
from querytrain.evaluation import nce
from querytrain.model import RbmParamsStd
from querytrain.oracle import enumerate_joint, exact_conditionals, visible_marginals
from querytrain.queries import QueryDistribution, generate_query_set


def sigmoid(x):
    return 1 / (1 + np.exp(-x))


def run_chains(std, n_chains, sweeps, burn_in, rng):
    state = init_chains(std, n_chains, rng)
    kept = []
    for s in range(burn_in + sweeps):
        state = gibbs_sweep(std, state)
        if s >= burn_in:
            kept.append(state.v.copy())
    return np.concatenate(kept)


def test_uncoupled_gibbs_marginals(rng):
    std = RbmParamsStd(np.zeros((2, 4)), [-1.0, 0.0, 0.5, 2.0], [0.3, -0.3])
    samples = run_chains(std, 100, 1000, 10, rng)
    np.testing.assert_allclose(samples.mean(axis=0), sigmoid(std.b_v), atol=0.01)


def test_stationary_distribution_total_variation(rng):
    std = random_std(rng, 3, 2, scale=1.0)
    samples = run_chains(std, 200, 500, 50, rng)
    idx = (samples * (1 << np.arange(3))).sum(axis=1).astype(int)
    freq = np.bincount(idx, minlength=8) / idx.size
    exact = np.exp(enumerate_joint(std).visible_log_marginal)
    assert 0.5 * np.abs(freq - exact).sum() < 0.02


def test_pcd_update_by_hand():
    std = RbmParamsStd([[0.5, -1.0], [0.25, 0.75]], [0.1, -0.2], [0.3, -0.4])
    batch = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    chain_v = np.array([[0.0, 0.0], [1.0, 1.0]])
    chains = GibbsChainState(chain_v, np.zeros((2, 2)), np.random.default_rng(0))
    lr = 0.1
    new, _ = pcd_update(std, batch, chains, lr, steps=0)

    def stats(vs):
        dW = np.zeros((2, 2))
        dbh = np.zeros(2)
        for v in vs:
            for i in range(2):
                ph = sigmoid(std.b_h[i] + std.W_std[i, 0] * v[0] + std.W_std[i, 1] * v[1])
                dbh[i] += ph / len(vs)
                for j in range(2):
                    dW[i, j] += ph * v[j] / len(vs)
        return dW, dbh, vs.mean(axis=0)

    pw, ph, pv = stats(batch)
    nw, nh, nv = stats(chain_v)
    np.testing.assert_allclose(new.W_std, std.W_std + lr * (pw - nw), atol=1e-15)
    np.testing.assert_allclose(new.b_v, std.b_v + lr * (pv - nv), atol=1e-15)
    np.testing.assert_allclose(new.b_h, std.b_h + lr * (ph - nh), atol=1e-15)


def test_pcd_update_advances_chains_first(rng):
    std = random_std(rng, 3, 2)
    batch = rng.integers(0, 2, (4, 3)).astype(float)
    start = rng.integers(0, 2, (5, 3)).astype(float)
    a = GibbsChainState(start, np.zeros((5, 2)), np.random.default_rng(9))
    b = GibbsChainState(start, np.zeros((5, 2)), np.random.default_rng(9))
    new, chains = pcd_update(std, batch, a, 0.05, steps=2)
    b = gibbs_sweep(std, gibbs_sweep(std, b))
    np.testing.assert_array_equal(chains.v, b.v)
    same, _ = pcd_update(std, batch, GibbsChainState(b.v, b.h, rng), 0.05, steps=0)
    np.testing.assert_allclose(new.W_std, same.W_std, atol=1e-15)


def test_zero_learning_rate_leaves_params(rng):
    std = random_std(rng, 4, 3)
    chains = init_chains(std, 6, rng)
    new, _ = pcd_update(std, rng.integers(0, 2, (5, 4)).astype(float), chains, 0.0)
    np.testing.assert_array_equal(new.W_std, std.W_std)
    np.testing.assert_array_equal(new.b_v, std.b_v)
    np.testing.assert_array_equal(new.b_h, std.b_h)


def test_conditional_gibbs_uncoupled(rng):
    std = RbmParamsStd(np.zeros((2, 3)), [1.0, -0.5, 0.0], [0.0, 0.0])
    est = gibbs_conditional_marginals(std, np.array([[1.0, 0.0, 0.0]]), np.array([[1, 0, 0]]),
                                      40_000, 10, rng, n_chains=20)
    assert est[0, 0] == 1 - GIBBS_EPS
    np.testing.assert_allclose(est[0, 1:], sigmoid(std.b_v[1:]), atol=0.01)


def test_conditional_gibbs_matches_exact(rng):
    std = random_std(rng, 5, 3, scale=1.0)
    table = enumerate_joint(std)
    v = rng.integers(0, 2, (4, 5)).astype(float)
    q = rng.integers(0, 2, (4, 5))
    q[:, 0] = 0
    est = gibbs_conditional_marginals(std, v, q, 20_000, 100, rng, n_chains=20)
    exact = exact_conditionals(table, v, q)
    np.testing.assert_allclose(est[q == 0], exact[q == 0], atol=0.02)


def test_conditional_inference_outputs_only(rng):
    std = random_std(rng, 4, 2)
    out = gibbs_conditional_inference(std, np.array([1, 0, 1, 0]), np.array([1, 0, 0, 1]), 200, 10, seed=1)
    assert out.shape == (2,) and np.all((out >= GIBBS_EPS) & (out <= 1 - GIBBS_EPS))
    again = gibbs_conditional_inference(std, np.array([1, 0, 1, 0]), np.array([1, 0, 0, 1]), 200, 10, seed=1)
    np.testing.assert_array_equal(out, again)
    assert gibbs_conditional_inference(std, np.ones(4), np.ones(4), 10, 1, 0).size == 0


def test_gibbs_backend_seeding(rng):
    std = random_std(rng, 4, 2)
    v = rng.integers(0, 2, (3, 4)).astype(float)
    q = np.zeros((3, 4))
    b = GibbsBackend(std, 100, 10, seed=4)
    np.testing.assert_array_equal(b.predict(v, q, 0), b.predict(v, q, 0))
    assert not np.array_equal(b.predict(v, q, 0), b.predict(v, q, 128))


def test_bp_backend_exact_on_tree(rng):
    std = random_std(rng, 6, 1, scale=2.0)
    table = enumerate_joint(std)
    v = rng.integers(0, 2, (8, 6)).astype(float)
    q = rng.integers(0, 2, (8, 6))
    p = pcd_to_bp_backend(std).predict(v, q)
    np.testing.assert_allclose(p[q == 0], exact_conditionals(table, v, q)[q == 0], atol=1e-9)


def test_gibbs_and_bp_agree_on_mixing_model(rng):
    std = random_std(rng, 5, 1, scale=0.8)
    data = rng.integers(0, 2, (200, 5)).astype(float)
    q = generate_query_set(200, 5, QueryDistribution(), 2)
    a = nce(GibbsBackend(std, 2000, 50, seed=0), data, q).nce
    b = nce(pcd_to_bp_backend(std), data, q).nce
    assert abs(a - b) < 0.02


@pytest.fixture(scope="module")
def pcd_data():
    ds, _ = generate_synthetic(8, 4, 1.5, 1500, seed=3)
    return split_dataset(ds, (0.8, 0.1, 0.1), seed=0)


def test_pcd_trains_below_trivial(pcd_data):
    train, valid, test = pcd_data
    cfg = PcdConfig(hidden_units=4, epochs=150, learning_rate=0.1, batch_size=200, eval_samples=300, eval_burn_in=30)
    std = pcd_train(train.data, cfg)
    q = generate_query_set(test.n_samples, 8, QueryDistribution(), 5)
    assert nce(GibbsBackend(std, 300, 30), test.data, q).nce < 1.0
    assert nce(pcd_to_bp_backend(std), test.data, q).nce < 1.0
    again = pcd_train(train.data, cfg)
    np.testing.assert_array_equal(again.W_std, std.W_std)


def test_pcd_lr_search(pcd_data):
    train, valid, _ = pcd_data
    cfg = PcdConfig(hidden_units=3, epochs=20, batch_size=300, eval_samples=100, eval_burn_in=10)
    std, hist = pcd_train_lr_search(train.data, valid.data, cfg, grid=(0.1, 0.01))
    assert set(hist.lr_scores) == {0.1, 0.01}
    assert hist.valid_nce == min(hist.lr_scores.values())
    assert hist.lr_scores[hist.learning_rate] == hist.valid_nce
    from dataclasses import replace
    assert pcd_valid_nce(std, valid.data, replace(cfg, learning_rate=hist.learning_rate)) == hist.valid_nce


def test_pcd_marginals_track_data(pcd_data):
    train, _, _ = pcd_data
    std = pcd_train(train.data, PcdConfig(hidden_units=4, epochs=100, learning_rate=0.1, batch_size=200))
    np.testing.assert_allclose(visible_marginals(enumerate_joint(std)), train.data.mean(axis=0), atol=0.06)


def test_joint_detailed_balance(rng):
    std = random_std(rng, 3, 2, scale=1.0)
    table = enumerate_joint(std)
    state = init_chains(std, 400, rng)
    counts = np.zeros(32)
    for s in range(550):
        state = gibbs_sweep(std, state)
        if s >= 50:
            idx = (state.v @ (1 << np.arange(3)) + (state.h @ (1 << np.arange(2))) * 8).astype(int)
            counts += np.bincount(idx, minlength=32)
    assert counts.sum() == 200_000
    assert 0.5 * np.abs(counts / counts.sum() - np.exp(table.log_probs)).sum() < 0.02


def test_positive_phase_matches_enumeration(rng):
    std = random_std(rng, 3, 2, scale=1.5)
    table = enumerate_joint(std)
    batch = rng.integers(0, 2, (5, 3)).astype(float)
    zeros = GibbsChainState(np.zeros((4, 3)), np.zeros((4, 2)), rng)
    lr = 0.5
    new, _ = pcd_update(std, batch, zeros, lr, steps=0)
    # with all-zero chains the negative phase contributes nothing to dW
    positive = (new.W_std - std.W_std) / lr
    joint = np.exp(table.log_probs).reshape(4, 8)  # [h_idx, v_idx]
    want = np.zeros((2, 3))
    for v in batch:
        col = joint[:, int(v @ (1 << np.arange(3)))]
        ph = col / col.sum()
        h_states = (np.arange(4)[:, None] >> np.arange(2)) & 1
        want += np.outer(ph @ h_states, v) / len(batch)
    np.testing.assert_allclose(positive, want, atol=1e-12)
