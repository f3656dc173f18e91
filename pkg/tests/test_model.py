import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import logsumexp

from conftest import random_std
from querytrain.errors import CheckpointError, DimensionError
from querytrain.model import (
    RbmParamsQT,
    RbmParamsStd,
    energy_qt,
    energy_std,
    from_standard,
    load_checkpoint,
    params_from_dict,
    params_to_dict,
    save_checkpoint,
    to_standard,
)


def all_states(n):
    return np.array(list(itertools.product([0, 1], repeat=n)), dtype=float)


def test_energy_zero_params():
    p = RbmParamsQT.zeros(4, 3)
    assert energy_qt(p, [1, 0, 1, 1], [0, 1, 1]) == 0.0


def test_energy_all_ones_cancels_weights(rng):
    p = RbmParamsQT(rng.normal(size=(3, 5)), rng.normal(size=5), rng.normal(size=3))
    assert energy_qt(p, np.ones(5), np.ones(3)) == pytest.approx(p.c_H.sum() + p.c_V.sum(), abs=1e-12)


def test_energy_worked_example():
    p = RbmParamsQT([[0.5, -0.3]], [0.1, 0.2], [-0.4])
    # 2*0.5 + (-0.4 - 0.2) + (0.1 - 0.5)
    assert energy_qt(p, [1, 0], [1]) == pytest.approx(0.0, abs=1e-15)


def test_energy_shape_mismatch():
    p = RbmParamsQT.zeros(3, 2)
    with pytest.raises(DimensionError):
        energy_qt(p, [1, 0], [1, 0])


def test_pair_scores_zero_on_agreement_minus_w_on_disagreement():
    w = 0.8
    p = RbmParamsQT([[w]], [0.0], [0.0])
    assert energy_qt(p, [0], [0]) == 0.0
    assert energy_qt(p, [1], [1]) == 0.0
    assert energy_qt(p, [1], [0]) == -w
    assert energy_qt(p, [0], [1]) == -w


def test_from_standard_zero_coupling():
    std = RbmParamsStd(np.zeros((2, 3)), [0.1, -0.2, 0.3], [0.5, -0.5])
    qt = from_standard(std)
    np.testing.assert_array_equal(qt.W, 0)
    np.testing.assert_array_equal(qt.c_V, std.b_v)
    np.testing.assert_array_equal(qt.c_H, std.b_h)
    assert qt.log_t == 0.0


def test_to_standard_zero_coupling():
    qt = RbmParamsQT(np.zeros((2, 3)), [0.1, -0.2, 0.3], [0.5, -0.5], 0.7)
    std = to_standard(qt)
    np.testing.assert_array_equal(std.W_std, 0)
    np.testing.assert_array_equal(std.b_v, qt.c_V)
    np.testing.assert_array_equal(std.b_h, qt.c_H)


def test_joint_tables_agree_by_enumeration(rng):
    std = random_std(rng, 4, 3, scale=1.5)
    qt = from_standard(std)
    states = all_states(7)
    v, h = states[:, :4], states[:, 4:]
    a = energy_qt(qt, v, h)
    b = energy_std(std, v, h)
    np.testing.assert_allclose(np.exp(a - logsumexp(a)), np.exp(b - logsumexp(b)), atol=1e-12, rtol=0)


finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


@st.composite
def std_params(draw, max_v=6, max_h=6):
    V = draw(st.integers(1, max_v))
    H = draw(st.integers(1, max_h))
    W = np.array(draw(st.lists(finite, min_size=V * H, max_size=V * H))).reshape(H, V)
    b_v = np.array(draw(st.lists(finite, min_size=V, max_size=V)))
    b_h = np.array(draw(st.lists(finite, min_size=H, max_size=H)))
    return RbmParamsStd(W, b_v, b_h)


@given(std_params())
def test_round_trip(std):
    back = to_standard(from_standard(std))
    # the bias shift (b + s) - s rounds at the last bit; halving can flush subnormals
    np.testing.assert_allclose(back.W_std, std.W_std, rtol=0, atol=1e-300)
    np.testing.assert_allclose(back.b_v, std.b_v, rtol=0, atol=1e-13)
    np.testing.assert_allclose(back.b_h, std.b_h, rtol=0, atol=1e-13)


@given(std_params())
def test_round_trip_other_direction(std):
    qt = from_standard(std)
    again = from_standard(to_standard(qt))
    np.testing.assert_array_equal(again.W, qt.W)
    np.testing.assert_allclose(again.c_V, qt.c_V, rtol=0, atol=1e-13)
    np.testing.assert_allclose(again.c_H, qt.c_H, rtol=0, atol=1e-13)


@given(std_params())
def test_energy_matches_standard_for_every_state(std):
    qt = from_standard(std)
    states = all_states(std.n_visible + std.n_hidden)
    v, h = states[:, : std.n_visible], states[:, std.n_visible:]
    np.testing.assert_allclose(energy_qt(qt, v, h), energy_std(std, v, h), atol=1e-11)


def test_rejects_non_finite_and_bad_shapes():
    with pytest.raises(ValueError):
        RbmParamsQT([[np.nan]], [0.0], [0.0])
    with pytest.raises(DimensionError):
        RbmParamsQT(np.zeros((2, 3)), np.zeros(2), np.zeros(2))
    with pytest.raises(ValueError):
        RbmParamsQT(np.zeros((1, 1)), [0.0], [0.0], np.inf)


def test_temperature_positive():
    assert RbmParamsQT.zeros(2, 2).replace(log_t=-30.0).temperature > 0


def test_checkpoint_round_trip(tmp_path, rng):
    qt = RbmParamsQT(rng.normal(size=(2, 3)), rng.normal(size=3), rng.normal(size=2), -0.3)
    save_checkpoint(qt, tmp_path / "a.json")
    back = load_checkpoint(tmp_path / "a.json")
    assert isinstance(back, RbmParamsQT) and back.same_as(qt)

    std = to_standard(qt)
    save_checkpoint(std, tmp_path / "b.json")
    back = load_checkpoint(tmp_path / "b.json")
    assert isinstance(back, RbmParamsStd)
    np.testing.assert_array_equal(back.W_std, std.W_std)


def test_checkpoint_schema(tmp_path):
    doc = params_to_dict(RbmParamsQT.zeros(3, 2))
    assert set(doc) == {"version", "v", "h", "w", "c_v", "c_h", "log_t", "parameterization"}
    assert doc["version"] == 1 and doc["v"] == 3 and doc["h"] == 2
    assert np.shape(doc["w"]) == (2, 3)
    json.dumps(doc)


def test_checkpoint_rejects_unknown_version(tmp_path):
    doc = params_to_dict(RbmParamsQT.zeros(3, 2))
    doc["version"] = 2
    with pytest.raises(CheckpointError):
        params_from_dict(doc)
    doc["version"] = 1
    doc["parameterization"] = "bogus"
    with pytest.raises(CheckpointError):
        params_from_dict(doc)
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "x.json")
