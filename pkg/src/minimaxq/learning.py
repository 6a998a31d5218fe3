"""Minimax Q-learning with i.i.d. behaviour sampling and a constant step size."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import AssumptionViolation
from .game import GameSpec, SamplingModel, flat_index, occupation_frequency
from .operators import check_step_size, expected_update_direction

RNG_NAME = "numpy.random.Generator(PCG64)"


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def trial_seed(base_seed: int, trial: int) -> np.random.SeedSequence:
    """Seed for trial ``trial`` of an experiment; a pure function of both arguments."""
    return np.random.SeedSequence([int(base_seed), int(trial)])


@dataclass(frozen=True)
class Experience:
    s: int
    a: int
    b: int
    s_next: int
    r: float


@dataclass(frozen=True)
class SampleStream:
    """Column-wise batch of experiences: integer arrays s, a, b, s_next and rewards r."""

    s: np.ndarray
    a: np.ndarray
    b: np.ndarray
    s_next: np.ndarray
    r: np.ndarray

    def __len__(self):
        return len(self.s)

    def __getitem__(self, k) -> Experience:
        return Experience(int(self.s[k]), int(self.a[k]), int(self.b[k]), int(self.s_next[k]), float(self.r[k]))

    def flat(self, dims) -> np.ndarray:
        _, n_b, n_s = dims
        return (self.a * n_b + self.b) * n_s + self.s


def _inverse_cdf(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # rows are renormalized so the last entry is exactly 1.0 and u < 1 always lands
    cdf = cdf_rows / cdf_rows[..., -1:]
    return (u[:, None] < cdf).argmax(axis=1)


def sample_stream(spec: GameSpec, model: SamplingModel, steps: int, rng: np.random.Generator) -> SampleStream:
    """Draw ``steps`` i.i.d. tuples (s ~ p, a ~ beta(.|s), b ~ phi(.|s), s' ~ P(.|s,a,b)).

    Four uniforms are consumed per step, so drawing k steps at once or one at
    a time yields the same stream.
    """
    u = rng.random((steps, 4))
    s = _inverse_cdf(np.cumsum(model.state_dist)[None, :].repeat(steps, 0), u[:, 0])
    a = _inverse_cdf(np.cumsum(model.user_policy, axis=1)[s], u[:, 1])
    b = _inverse_cdf(np.cumsum(model.adv_policy, axis=1)[s], u[:, 2])
    s_next = _inverse_cdf(np.cumsum(spec.transition, axis=-1)[a, b, s], u[:, 3])
    r = spec.reward[a, b, s]
    return SampleStream(s, a, b, s_next, r)


def sample_experience(spec: GameSpec, model: SamplingModel, rng: np.random.Generator) -> Experience:
    return sample_stream(spec, model, 1, rng)[0]


@dataclass(frozen=True)
class LearnerState:
    q: np.ndarray
    step: int
    alpha: float
    td_error: float = float("nan")


def td_error(q: np.ndarray, e: Experience, spec: GameSpec) -> float:
    """r + gamma max_a' min_b' Q(s',a',b') - Q(s,a,b)."""
    i = flat_index(e.a, e.b, e.s, spec.dims)
    n_a, n_b, n_s = spec.dims
    v_next = q.reshape(n_a, n_b, n_s)[:, :, e.s_next].min(axis=1).max()
    return float(e.r + spec.discount * v_next - q[i])


def ql_update(state: LearnerState, e: Experience, spec: GameSpec) -> LearnerState:
    """One minimax Q-learning update; only the sampled (s, a, b) entry moves."""
    alpha = check_step_size(state.alpha)
    delta = td_error(state.q, e, spec)
    q = state.q.copy()
    q[flat_index(e.a, e.b, e.s, spec.dims)] += alpha * delta
    return replace(state, q=q, step=state.step + 1, td_error=delta)


def noise_vector(q, e: Experience, spec: GameSpec, model: SamplingModel) -> np.ndarray:
    """w = e_(a,b,s) delta - (D R + gamma D P Pi Gamma Q - D Q)."""
    q = np.asarray(q, dtype=float)
    w = -expected_update_direction(q, spec, model)
    w[flat_index(e.a, e.b, e.s, spec.dims)] += td_error(q, e, spec)
    return w


def q_max(q0, gamma: float) -> float:
    return max(1.0, float(np.max(np.abs(q0)))) / (1.0 - gamma)


def check_initial_q(q0, n: int) -> np.ndarray:
    q0 = np.array(q0, dtype=float)
    if q0.shape != (n,):
        raise ValueError(f"Q0 has shape {q0.shape}, expected ({n},)")
    if np.max(np.abs(q0)) > 1.0:
        raise AssumptionViolation("initial Q must satisfy ||Q0||_inf <= 1")
    return q0


def default_stride(n: int) -> int:
    return 1 if n <= 64 else 10


@dataclass
class LearningRun:
    steps: np.ndarray  # recorded step indices
    snapshots: np.ndarray  # (len(steps), n)
    max_abs: float  # max_k ||Q_k||_inf over every step, recorded or not
    seed: int
    rng: str = RNG_NAME

    @property
    def final(self) -> np.ndarray:
        return self.snapshots[-1]


def run_q_learning(
    spec: GameSpec,
    model: SamplingModel,
    alpha: float,
    steps: int,
    seed,
    q0=None,
    stride: int | None = None,
) -> LearningRun:
    """Run minimax Q-learning for ``steps`` updates from ``q0``.

    Snapshots are kept every ``stride`` steps plus the final table.
    """
    alpha = check_step_size(alpha)
    occupation_frequency(model)  # every triple must be reachable
    q = check_initial_q(np.zeros(spec.n) if q0 is None else q0, spec.n)
    stride = default_stride(spec.n) if stride is None else int(stride)
    if steps < 0 or stride < 1:
        raise ValueError("steps must be >= 0 and stride >= 1")

    rng = make_rng(seed)
    stream = sample_stream(spec, model, steps, rng)
    flat = stream.flat(spec.dims)
    n_a, n_b, n_s = spec.dims
    gamma = spec.discount

    recorded_k = [0]
    snaps = [q.copy()]
    max_abs = float(np.max(np.abs(q)))
    for k in range(steps):
        v_next = q.reshape(n_a, n_b, n_s)[:, :, stream.s_next[k]].min(axis=1).max()
        i = flat[k]
        q[i] += alpha * (stream.r[k] + gamma * v_next - q[i])
        max_abs = max(max_abs, abs(q[i]))
        if (k + 1) % stride == 0 or k + 1 == steps:
            recorded_k.append(k + 1)
            snaps.append(q.copy())
    return LearningRun(np.array(recorded_k), np.array(snaps), max_abs, seed)

