"""Selector matrices, the max-min Bellman operator and the switched-system matrices.

Two representations of the greedy selections are provided. The dense binary
matrices (``min_selector``, ``max_selector``) are the reference objects. The
index helpers (``argmin_b``, ``argmax_a``, ``selected_flat_index``) compute the
same selections as integer arrays with arbitrary leading batch axes, which is
what the simulators use in their inner loops. Ties go to the lowest index in
both.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .game import Dims, GameSpec, SamplingModel, occupation_frequency, occupation_tensor


def _check_len(q: np.ndarray, n: int, what: str = "Q") -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != n:
        raise ValueError(f"{what} has length {q.shape[-1]}, expected {n}")
    return q


# ---------------------------------------------------------------------------
# index form


def argmin_b(q: np.ndarray, dims: Dims) -> np.ndarray:
    """Adversary greedy choice i(s,a) for each (a, s); shape ``(..., A, S)``."""
    n_a, n_b, n_s = dims
    q = _check_len(q, n_a * n_b * n_s)
    return q.reshape(q.shape[:-1] + (n_a, n_b, n_s)).argmin(axis=-2)


def argmax_a(qp: np.ndarray, dims: Dims) -> np.ndarray:
    """User greedy choice i(s) from a vector over (a, s) pairs; shape ``(..., S)``."""
    n_a, _, n_s = dims
    qp = _check_len(qp, n_a * n_s, "Q'")
    return qp.reshape(qp.shape[:-1] + (n_a, n_s)).argmax(axis=-2)


def apply_min_selector(q: np.ndarray, b_idx: np.ndarray, dims: Dims) -> np.ndarray:
    """Gamma q for the selector encoded by ``b_idx``; result over (a, s) pairs, a-major."""
    n_a, n_b, n_s = dims
    qr = q.reshape(q.shape[:-1] + (n_a, n_b, n_s))
    picked = np.take_along_axis(qr, b_idx[..., :, None, :], axis=-2)[..., 0, :]
    return picked.reshape(q.shape[:-1] + (n_a * n_s,))


def selected_flat_index(b_idx: np.ndarray, a_idx: np.ndarray, dims: Dims) -> np.ndarray:
    """Flat column picked by row s of ``Pi Gamma``: ``(a*B + b)*S + s`` with a = a_idx[s], b = b_idx[a, s]."""
    n_a, n_b, n_s = dims
    b_idx = np.asarray(b_idx)
    a_idx = np.asarray(a_idx)
    batch = np.broadcast_shapes(b_idx.shape[:-2], a_idx.shape[:-1])
    b_idx = np.broadcast_to(b_idx, batch + (n_a, n_s))
    a_idx = np.broadcast_to(a_idx, batch + (n_s,))
    if b_idx.ndim == 3:  # common batched case, plain fancy indexing is much faster
        b_at_a = b_idx[np.arange(b_idx.shape[0])[:, None], a_idx, np.arange(n_s)]
    else:
        b_at_a = np.take_along_axis(b_idx, a_idx[..., None, :], axis=-2)[..., 0, :]
    return (a_idx * n_b + b_at_a) * n_s + np.arange(n_s)


def maxmin(q: np.ndarray, dims: Dims) -> np.ndarray:
    """max_a min_b Q(s, a, b) per state, batched over leading axes."""
    n_a, n_b, n_s = dims
    q = _check_len(q, n_a * n_b * n_s)
    return q.reshape(q.shape[:-1] + (n_a, n_b, n_s)).min(axis=-2).max(axis=-2)


# ---------------------------------------------------------------------------
# dense matrix form


def min_selector(q, dims: Dims) -> np.ndarray:
    """Gamma_Q, shape (|S||A|, n): row a*S + s has a single 1 at column (a*B + i(s,a))*S + s."""
    n_a, n_b, n_s = dims
    q = _check_len(q, n_a * n_b * n_s)
    if q.ndim != 1:
        raise ValueError("min_selector expects a single Q vector")
    b_idx = argmin_b(q, dims)
    gamma_q = np.zeros((n_a * n_s, n_a * n_b * n_s))
    a, s = np.meshgrid(np.arange(n_a), np.arange(n_s), indexing="ij")
    gamma_q[(a * n_s + s).ravel(), ((a * n_b + b_idx) * n_s + s).ravel()] = 1.0
    return gamma_q


def max_selector(qp, dims: Dims) -> np.ndarray:
    """Pi_{Q'}, shape (|S|, |S||A|): row s has a single 1 at column i(s)*S + s."""
    n_a, _, n_s = dims
    qp = _check_len(qp, n_a * n_s, "Q'")
    if qp.ndim != 1:
        raise ValueError("max_selector expects a single vector")
    a_idx = argmax_a(qp, dims)
    pi = np.zeros((n_s, n_a * n_s))
    s = np.arange(n_s)
    pi[s, a_idx * n_s + s] = 1.0
    return pi


def policy_selector(q, dims: Dims) -> np.ndarray:
    """Pi_{Gamma_Q Q} Gamma_Q, shape (|S|, n)."""
    gamma_q = min_selector(q, dims)
    return max_selector(gamma_q @ q, dims) @ gamma_q


def maxmin_values(q, dims: Dims) -> np.ndarray:
    """Pi_{Gamma_Q Q} Gamma_Q Q, evaluated through the dense selectors."""
    q = np.asarray(q, dtype=float)
    return policy_selector(q, dims) @ q


def stacked_transition(spec: GameSpec) -> np.ndarray:
    """P stacked over (a, b) blocks, shape (n, |S|)."""
    return spec.transition.reshape(spec.n, spec.num_states)


def occupation_matrix(model: SamplingModel) -> np.ndarray:
    d, _, _ = occupation_frequency(model)
    return np.diag(d)


def infinity_norm(m) -> float:
    """Maximum absolute row sum."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return float(np.abs(m).sum(axis=1).max())


def bellman_operator(q, spec: GameSpec) -> np.ndarray:
    """(FQ)(s,a,b) = R(s,a,b) + gamma * sum_s' P(s'|s,a,b) max_a' min_b' Q(s',a',b')."""
    q = _check_len(q, spec.n)
    v = maxmin(q, spec.dims)
    return spec.reward_vector + spec.discount * (v @ stacked_transition(spec).T)


@dataclass(frozen=True)
class SystemMatrices:
    A: np.ndarray
    b_affine: np.ndarray
    kind: str  # "VI" or "QL"
    context: np.ndarray


def vi_system_matrices(q, q_star, spec: GameSpec) -> SystemMatrices:
    """Switched affine form of one Q-VI step: F Q - Q* = A (Q - Q*) + b."""
    q = _check_len(q, spec.n)
    q_star = _check_len(q_star, spec.n, "Q*")
    p = stacked_transition(spec)
    sel_q = policy_selector(q, spec.dims)
    sel_star = policy_selector(q_star, spec.dims)
    a = spec.discount * p @ sel_q
    b = spec.discount * p @ (sel_q - sel_star) @ q_star
    return SystemMatrices(a, b, "VI", q.copy())


def check_step_size(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"step size must lie in (0, 1), got {alpha}")
    return alpha


def ql_system_matrices(q, q_star, spec: GameSpec, model: SamplingModel, alpha: float) -> SystemMatrices:
    """Switched affine form of the expected Q-learning step.

    A = I + alpha (gamma D P Pi Gamma - D), b = alpha gamma D P (Pi Gamma - Pi* Gamma*) Q*.
    """
    alpha = check_step_size(alpha)
    q = _check_len(q, spec.n)
    q_star = _check_len(q_star, spec.n, "Q*")
    dmat = occupation_matrix(model)
    p = stacked_transition(spec)
    sel_q = policy_selector(q, spec.dims)
    sel_star = policy_selector(q_star, spec.dims)
    gamma = spec.discount
    a = np.eye(spec.n) + alpha * (gamma * dmat @ p @ sel_q - dmat)
    b = alpha * gamma * dmat @ p @ (sel_q - sel_star) @ q_star
    return SystemMatrices(a, b, "QL", q.copy())


def expected_update_direction(q, spec: GameSpec, model: SamplingModel) -> np.ndarray:
    """D R + gamma D P Pi Gamma Q - D Q (batched); the conditional mean of the sampled TD step."""
    d = occupation_tensor(model)
    q = np.asarray(q, dtype=float)
    v = maxmin(q, spec.dims)
    return d * (spec.reward_vector + spec.discount * (v @ stacked_transition(spec).T) - q)
