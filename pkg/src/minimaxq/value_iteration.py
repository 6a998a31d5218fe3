"""Q-value iteration for the max-min Bellman operator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonConvergenceError, ParameterError
from .game import Dims, GameSpec
from .operators import (
    apply_min_selector,
    argmax_a,
    argmin_b,
    bellman_operator,
    max_selector,
    min_selector,
    stacked_transition,
)

SANDWICH_TOL = 1e-12


@dataclass
class ViResult:
    q_star: np.ndarray
    iterations: int
    residual: float  # ||F Q_prev - Q_prev||_inf at exit
    error_certificate: float  # residual * gamma / (1 - gamma) >= ||q_star - Q*||_inf
    history: list[np.ndarray] = field(default_factory=list, repr=False)


def qvi_step(q, spec: GameSpec) -> np.ndarray:
    return bellman_operator(q, spec)


def iteration_cap(tol: float, gamma: float) -> int:
    if gamma == 0.0:
        return 11
    ratio = math.log(tol * (1.0 - gamma)) / math.log(gamma)
    return 10 * max(math.ceil(ratio), 0) + 10


def solve_optimal_q(spec: GameSpec, tol: float = 1e-12, record: bool = False) -> ViResult:
    """Iterate Q <- FQ from zero until the contraction certificate drops below ``tol``.

    Stops once ``||Q_{k+1} - Q_k|| <= tol (1 - gamma) / gamma``, which bounds
    ``||Q_{k+1} - Q*||`` by ``tol``. With ``record=True`` every iterate
    (starting from Q_0 = 0) is kept in ``history``.
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    gamma = spec.discount
    q = np.zeros(spec.n)
    history = [q.copy()] if record else []
    if gamma == 0.0:
        q_next = qvi_step(q, spec)
        if record:
            history.append(q_next.copy())
        return ViResult(q_next, 1, float(np.max(np.abs(q_next - q))), 0.0, history)

    threshold = tol * (1.0 - gamma) / gamma
    cap = iteration_cap(tol, gamma)
    for k in range(1, cap + 1):
        q_next = qvi_step(q, spec)
        if record:
            history.append(q_next.copy())
        residual = float(np.max(np.abs(q_next - q)))
        if residual <= threshold:
            return ViResult(q_next, k, residual, residual * gamma / (1.0 - gamma), history)
        q = q_next
    raise NonConvergenceError(f"Q-VI did not reach tol={tol} within {cap} iterations")


def greedy_policies(q, dims: Dims) -> tuple[np.ndarray, np.ndarray]:
    """Greedy pair (pi, mu): pi[s] = argmax_a min_b Q, mu[s, a] = argmin_b Q, lowest index on ties."""
    q = np.asarray(q, dtype=float)
    b_idx = argmin_b(q, dims)  # (A, S)
    pi = argmax_a(apply_min_selector(q, b_idx, dims), dims)
    mu = b_idx.T.copy()  # (S, A)
    return pi, mu


def vi_sandwich_check(q_k, q_star, spec: GameSpec, tol: float = SANDWICH_TOL):
    """Evaluate the lower and upper linear bounds on one VI error step.

    lower = gamma P Pi_{Gamma_Qk Q*} Gamma_Qk (Qk - Q*),
    upper = gamma P Pi_{Gamma_Q* Qk} Gamma_Q* (Qk - Q*),
    and report whether lower <= F Qk - Q* <= upper holds to ``tol``.
    """
    q_k = np.asarray(q_k, dtype=float)
    q_star = np.asarray(q_star, dtype=float)
    dims = spec.dims
    gp = spec.discount * stacked_transition(spec)
    err = q_k - q_star

    gamma_k = min_selector(q_k, dims)
    gamma_star = min_selector(q_star, dims)
    lower = gp @ max_selector(gamma_k @ q_star, dims) @ gamma_k @ err
    upper = gp @ max_selector(gamma_star @ q_k, dims) @ gamma_star @ err
    actual = bellman_operator(q_k, spec) - q_star
    holds = bool(np.all(lower <= actual + tol) and np.all(actual <= upper + tol))
    return lower, upper, holds


def vi_error_trace(history: list[np.ndarray], q_star) -> np.ndarray:
    """||Q_k - Q*||_inf along a recorded VI run."""
    q_star = np.asarray(q_star)
    return np.array([np.max(np.abs(q - q_star)) for q in history])

