"""Shared fixtures and brute-force oracles used across the suite.

The oracles deliberately avoid the package's reshape/selector machinery and
work with explicit loops over (a, b, s) so they can catch indexing slips.
"""

import itertools

import numpy as np
import pytest

from minimaxq import SamplingModel, generate_random_game, generate_random_model, matching_pennies


@pytest.fixture
def mp2():
    return matching_pennies(0.5)


@pytest.fixture
def mp2_model():
    return SamplingModel.uniform((2, 2, 1))


@pytest.fixture
def game223():
    spec = generate_random_game((2, 2, 3), 0.8, 11)
    return spec, generate_random_model(spec.dims, 11)


def loop_index(a, b, s, dims):
    n_a, n_b, n_s = dims
    return (a * n_b + b) * n_s + s


def brute_maxmin(q, dims):
    n_a, n_b, n_s = dims
    out = np.empty(n_s)
    for s in range(n_s):
        best = -np.inf
        for a in range(n_a):
            worst = min(q[loop_index(a, b, s, dims)] for b in range(n_b))
            best = max(best, worst)
        out[s] = best
    return out


def brute_bellman(q, spec):
    n_a, n_b, n_s = spec.dims
    v = brute_maxmin(q, spec.dims)
    out = np.empty(spec.n)
    for a, b, s in itertools.product(range(n_a), range(n_b), range(n_s)):
        nxt = sum(spec.transition[a, b, s, t] * v[t] for t in range(n_s))
        out[loop_index(a, b, s, spec.dims)] = spec.reward[a, b, s] + spec.discount * nxt
    return out


def brute_occupation(model):
    n_a, n_b, n_s = model.dims
    d = np.empty(n_a * n_b * n_s)
    for a, b, s in itertools.product(range(n_a), range(n_b), range(n_s)):
        d[loop_index(a, b, s, model.dims)] = model.state_dist[s] * model.user_policy[s, a] * model.adv_policy[s, b]
    return d


def outcomes(spec, model):
    """Every (probability, s, a, b, s') outcome of one sampling step."""
    n_a, n_b, n_s = spec.dims
    d = brute_occupation(model)
    for a, b, s, t in itertools.product(range(n_a), range(n_b), range(n_s), range(n_s)):
        prob = d[loop_index(a, b, s, spec.dims)] * spec.transition[a, b, s, t]
        if prob > 0:
            yield prob, s, a, b, t


def random_games(count, dims=(2, 2, 3), gammas=(0.5, 0.9), seed0=0):
    games = []
    for i in range(count):
        spec = generate_random_game(dims, gammas[i % len(gammas)], seed0 + i)
        games.append((spec, generate_random_model(spec.dims, seed0 + i)))
    return games
