import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minimaxq import (
    AssumptionViolation,
    GameSpec,
    LoadError,
    ParameterError,
    SamplingModel,
    flat_index,
    generate_random_game,
    generate_random_model,
    load_game,
    occupation_frequency,
    read_game_file,
    save_game,
    unflat_index,
    validate_game,
)
from minimaxq.game import game_to_dict

from conftest import brute_occupation


def test_flat_index_examples():
    assert flat_index(0, 0, 0, (2, 2, 3)) == 0
    assert flat_index(1, 0, 2, (2, 2, 3)) == 8


def test_flat_index_round_trip_223():
    seen = set()
    for a, b, s in itertools.product(range(2), range(2), range(3)):
        i = flat_index(a, b, s, (2, 2, 3))
        assert unflat_index(i, (2, 2, 3)) == (a, b, s)
        seen.add(i)
    assert seen == set(range(12))


@pytest.mark.parametrize("coords", [(2, 0, 0), (0, 2, 0), (0, 0, 3), (-1, 0, 0)])
def test_flat_index_out_of_range(coords):
    with pytest.raises(IndexError):
        flat_index(*coords, (2, 2, 3))


@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 6))
def test_flat_index_bijective(n_a, n_b, n_s):
    dims = (n_a, n_b, n_s)
    idx = [flat_index(a, b, s, dims) for a, b, s in itertools.product(range(n_a), range(n_b), range(n_s))]
    assert sorted(idx) == list(range(n_a * n_b * n_s))
    assert all(flat_index(*unflat_index(i, dims), dims) == i for i in idx)


def test_mp2_is_valid(mp2):
    assert validate_game(mp2).ok
    assert np.allclose(mp2.transition.sum(axis=-1), 1.0)
    assert np.all(np.abs(mp2.reward) <= 1)
    assert mp2.reward_vector.tolist() == [1.0, -1.0, -1.0, 1.0]


def _with(spec, transition=None, reward=None, discount=None):
    return GameSpec(
        spec.num_states,
        spec.num_actions_user,
        spec.num_actions_adv,
        spec.transition if transition is None else transition,
        spec.reward if reward is None else reward,
        spec.discount if discount is None else discount,
    )


def test_validate_row_sum(mp2):
    p = mp2.transition.copy()
    p[0, 0, 0, 0] = 0.9
    report = validate_game(_with(mp2, transition=p))
    assert not report.ok
    assert "row sum ≠ 1 at (a=0,b=0,s=0)" in report.violations


def test_validate_reward_bound(mp2):
    r = mp2.reward.copy()
    r[0, 0, 0] = 1.5
    report = validate_game(_with(mp2, reward=r))
    assert "reward bound at (a=0,b=0,s=0)" in report.violations


def test_validate_negative_probability_and_discount():
    spec = generate_random_game((1, 1, 2), 0.5, 0)
    p = spec.transition.copy()
    p[0, 0, 1] = [1.2, -0.2]
    report = validate_game(_with(spec, transition=p, discount=1.0))
    assert any(v.startswith("negative probability at (a=0,b=0,s=1)") for v in report.violations)
    assert any("discount" in v for v in report.violations)


def test_occupation_uniform(mp2_model):
    d, d_min, d_max = occupation_frequency(mp2_model)
    assert np.allclose(d, 0.25)
    assert d_min == d_max == 0.25


def test_occupation_nonuniform():
    model = SamplingModel(np.array([1.0]), np.array([[0.9, 0.1]]), np.array([[0.5, 0.5]]))
    d, d_min, d_max = occupation_frequency(model)
    np.testing.assert_allclose(d, [0.45, 0.45, 0.05, 0.05], atol=1e-15)
    assert d_min == pytest.approx(0.05)
    assert d_max == pytest.approx(0.45)


def test_occupation_rejects_zero():
    model = SamplingModel(np.array([1.0]), np.array([[1.0, 0.0]]), np.array([[0.5, 0.5]]))
    with pytest.raises(AssumptionViolation):
        occupation_frequency(model)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32))
def test_occupation_matches_product_and_sums_to_one(n_a, n_b, n_s, seed):
    model = generate_random_model((n_a, n_b, n_s), seed)
    d, d_min, d_max = occupation_frequency(model)
    np.testing.assert_allclose(d, brute_occupation(model), rtol=0, atol=1e-15)
    assert abs(d.sum() - 1.0) < 1e-9
    assert 0 < d_min <= d_max <= 1


def test_sampling_model_rejects_non_simplex():
    with pytest.raises(ParameterError):
        SamplingModel(np.array([0.6, 0.6]), np.full((2, 2), 0.5), np.full((2, 2), 0.5))


def test_generate_deterministic():
    a = generate_random_game((2, 2, 3), 0.8, 123)
    b = generate_random_game((2, 2, 3), 0.8, 123)
    assert a == b
    assert a.transition.tobytes() == b.transition.tobytes()
    assert a != generate_random_game((2, 2, 3), 0.8, 124)


def test_generate_rejects_bad_input():
    with pytest.raises(ParameterError):
        generate_random_game((2, 2, 0), 0.8, 0)
    with pytest.raises(ParameterError):
        generate_random_game((2, 2, 3), 1.0, 0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**63 - 1))
def test_generated_games_validate(seed):
    spec = generate_random_game((2, 2, 3), 0.8, seed)
    assert validate_game(spec).ok
    assert np.all(spec.transition > 0)


def test_spec_arrays_are_read_only(mp2):
    with pytest.raises(ValueError):
        mp2.reward[0, 0, 0] = 0.0


def test_save_load_round_trip(tmp_path, mp2, game223):
    path = tmp_path / "mp2.json"
    save_game(mp2, path)
    assert load_game(path) == mp2
    spec, model = game223
    save_game(spec, path, model)
    spec2, model2 = read_game_file(path)
    assert np.max(np.abs(spec2.transition - spec.transition)) <= 1e-15
    assert np.max(np.abs(spec2.reward - spec.reward)) <= 1e-15
    assert spec2.discount == spec.discount
    np.testing.assert_array_equal(model2.user_policy, model.user_policy)


def _write(tmp_path, doc):
    path = tmp_path / "g.json"
    path.write_text(json.dumps(doc))
    return path


def test_load_missing_discount(tmp_path, mp2):
    doc = game_to_dict(mp2)
    del doc["discount"]
    with pytest.raises(LoadError, match="discount"):
        load_game(_write(tmp_path, doc))


def test_load_short_transition_row(tmp_path):
    spec = generate_random_game((1, 1, 3), 0.5, 0)
    doc = game_to_dict(spec)
    doc["transition"][0][0][1] = doc["transition"][0][0][1][:2]
    with pytest.raises(LoadError, match="transition shape"):
        load_game(_write(tmp_path, doc))


def test_load_rejects_extra_key_and_bad_json(tmp_path, mp2):
    doc = game_to_dict(mp2)
    doc["comment"] = "x"
    with pytest.raises(LoadError, match="comment"):
        load_game(_write(tmp_path, doc))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(LoadError):
        load_game(bad)


def test_load_rejects_invalid_game(tmp_path, mp2):
    doc = game_to_dict(mp2)
    doc["reward"][0][0][0] = 2.0
    with pytest.raises(LoadError, match="reward bound"):
        load_game(_write(tmp_path, doc))


def test_load_reduces_per_successor_reward(tmp_path):
    spec = generate_random_game((1, 1, 2), 0.5, 3)
    r4 = np.array([[[[1.0, -1.0], [0.5, 0.25]]]])
    doc = game_to_dict(spec)
    doc["reward"] = r4.tolist()
    loaded = load_game(_write(tmp_path, doc))
    p = spec.transition
    expected = [p[0, 0, 0, 0] * 1.0 - p[0, 0, 0, 1], p[0, 0, 1, 0] * 0.5 + p[0, 0, 1, 1] * 0.25]
    np.testing.assert_allclose(loaded.reward[0, 0], expected, atol=1e-15)
