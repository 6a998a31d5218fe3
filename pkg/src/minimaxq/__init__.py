"""Minimax Q-learning for alternating two-player zero-sum Markov games.

Exact Q-value iteration, the sampled learner, lockstep comparison systems
sharing one noise process, and evaluators for the finite-time error bounds.
"""

__version__ = "0.1.0"

from .errors import AssumptionViolation, LoadError, NonConvergenceError, ParameterError
from .game import (
    GameSpec,
    SamplingModel,
    flat_index,
    generate_random_game,
    generate_random_model,
    load_game,
    matching_pennies,
    occupation_frequency,
    read_game_file,
    save_game,
    unflat_index,
    validate_game,
)
from .operators import bellman_operator, maxmin_values
from .value_iteration import greedy_policies, solve_optimal_q
