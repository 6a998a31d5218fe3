"""Game definitions, sampling distributions, the flat index convention and file I/O.

A Q-table is a flat vector over (a, b, s) triples. The user action is the
slowest index and the state the fastest, so ``Q.reshape(A, B, S)[a, b, s]``
recovers the entry for (s, a, b).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AssumptionViolation, LoadError, ParameterError

SIMPLEX_TOL = 1e-9

Dims = tuple[int, int, int]  # (|A|, |B|, |S|)


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def flat_index(a: int, b: int, s: int, dims: Dims) -> int:
    """Position of Q(s, a, b) in the flat vector, i.e. ``(a*|B| + b)*|S| + s``."""
    n_a, n_b, n_s = dims
    if not (0 <= a < n_a and 0 <= b < n_b and 0 <= s < n_s):
        raise IndexError(f"(a={a}, b={b}, s={s}) out of range for dims {dims}")
    return (a * n_b + b) * n_s + s


def unflat_index(i: int, dims: Dims) -> tuple[int, int, int]:
    """Inverse of :func:`flat_index`; returns ``(a, b, s)``."""
    n_a, n_b, n_s = dims
    if not 0 <= i < n_a * n_b * n_s:
        raise IndexError(f"flat index {i} out of range for dims {dims}")
    ab, s = divmod(i, n_s)
    a, b = divmod(ab, n_b)
    return a, b, s


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Alternating two-player zero-sum Markov game.

    ``transition[a, b, s, s']`` is P(s'|s,a,b) and ``reward[a, b, s]`` the
    expected reward R(s,a,b). Shapes are checked on construction; the
    probabilistic invariants are reported by :func:`validate_game`.
    """

    num_states: int
    num_actions_user: int
    num_actions_adv: int
    transition: np.ndarray
    reward: np.ndarray
    discount: float

    def __post_init__(self):
        n_a, n_b, n_s = self.num_actions_user, self.num_actions_adv, self.num_states
        if min(n_a, n_b, n_s) < 1:
            raise ParameterError(f"dimensions must be positive, got {self.dims}")
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "discount", float(self.discount))
        if self.transition.shape != (n_a, n_b, n_s, n_s):
            raise ParameterError(
                f"transition shape {self.transition.shape} != {(n_a, n_b, n_s, n_s)}"
            )
        if self.reward.shape != (n_a, n_b, n_s):
            raise ParameterError(f"reward shape {self.reward.shape} != {(n_a, n_b, n_s)}")

    @property
    def dims(self) -> Dims:
        return (self.num_actions_user, self.num_actions_adv, self.num_states)

    @property
    def n(self) -> int:
        return self.num_states * self.num_actions_user * self.num_actions_adv

    @property
    def gamma(self) -> float:
        return self.discount

    @property
    def reward_vector(self) -> np.ndarray:
        return self.reward.reshape(-1)

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.discount == other.discount
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.reward, other.reward)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SamplingModel:
    """Behaviour distributions: state law p(s), user policy beta(a|s), adversary policy phi(b|s).

    Construction checks that every distribution is a simplex. Strict positivity
    of the induced occupation frequency is checked where it is needed
    (:func:`occupation_frequency`), so point-mass models can still be built.
    """

    state_dist: np.ndarray
    user_policy: np.ndarray
    adv_policy: np.ndarray

    def __post_init__(self):
        p = _frozen(self.state_dist)
        beta = _frozen(self.user_policy)
        phi = _frozen(self.adv_policy)
        object.__setattr__(self, "state_dist", p)
        object.__setattr__(self, "user_policy", beta)
        object.__setattr__(self, "adv_policy", phi)
        if p.ndim != 1 or beta.ndim != 2 or phi.ndim != 2:
            raise ParameterError("state_dist must be 1-D, policies 2-D")
        if beta.shape[0] != p.shape[0] or phi.shape[0] != p.shape[0]:
            raise ParameterError("policy rows must match the number of states")
        for name, arr in (("p", p), ("beta", beta), ("phi", phi)):
            if np.any(arr < 0):
                raise ParameterError(f"{name} has negative entries")
            sums = arr.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > SIMPLEX_TOL):
                raise ParameterError(f"{name} rows do not sum to 1")

    @property
    def dims(self) -> Dims:
        return (self.user_policy.shape[1], self.adv_policy.shape[1], self.state_dist.shape[0])

    @classmethod
    def uniform(cls, dims: Dims) -> SamplingModel:
        n_a, n_b, n_s = dims
        return cls(
            np.full(n_s, 1.0 / n_s),
            np.full((n_s, n_a), 1.0 / n_a),
            np.full((n_s, n_b), 1.0 / n_b),
        )


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_game(spec: GameSpec) -> ValidationReport:
    """Check stochasticity of every transition row, |R| <= 1 and discount in [0, 1)."""
    report = ValidationReport()
    n_a, n_b, n_s = spec.dims
    sums = spec.transition.sum(axis=-1)
    for a in range(n_a):
        for b in range(n_b):
            for s in range(n_s):
                row = spec.transition[a, b, s]
                where = f"(a={a},b={b},s={s})"
                if not np.all(np.isfinite(row)):
                    report.violations.append(f"non-finite probability at {where}")
                    continue
                if np.any(row < 0):
                    report.violations.append(f"negative probability at {where}")
                if abs(sums[a, b, s] - 1.0) > SIMPLEX_TOL:
                    report.violations.append(f"row sum ≠ 1 at {where}")
                r = spec.reward[a, b, s]
                if not np.isfinite(r) or abs(r) > 1.0:
                    report.violations.append(f"reward bound at {where}")
    if not (0.0 <= spec.discount < 1.0):
        report.violations.append(f"discount {spec.discount} outside [0,1)")
    return report


def occupation_tensor(model: SamplingModel) -> np.ndarray:
    """d(s,a,b) = p(s) beta(a|s) phi(b|s) in flat order, without the positivity check."""
    p, beta, phi = model.state_dist, model.user_policy, model.adv_policy
    d = beta.T[:, None, :] * phi.T[None, :, :] * p[None, None, :]
    return d.reshape(-1)


def occupation_frequency(model: SamplingModel) -> tuple[np.ndarray, float, float]:
    """Return ``(d, d_min, d_max)``; raises if any triple is never visited."""
    d = occupation_tensor(model)
    if np.any(d <= 0):
        i = int(np.argmin(d))
        a, b, s = unflat_index(i, model.dims)
        raise AssumptionViolation(
            f"occupation frequency is zero at (a={a},b={b},s={s}); every triple must be visited"
        )
    return d, float(d.min()), float(d.max())


def generate_random_game(dims: Dims, gamma: float, seed: int) -> GameSpec:
    """Random game with positive normalized transition rows and rewards uniform on [-1, 1]."""
    n_a, n_b, n_s = dims
    if min(dims) < 1:
        raise ParameterError(f"dimensions must be positive, got {dims}")
    if not 0.0 <= gamma < 1.0:
        raise ParameterError(f"discount must lie in [0, 1), got {gamma}")
    rng = np.random.default_rng(seed)
    # 1 - U[0,1) lies in (0, 1], so every row is strictly positive
    raw = 1.0 - rng.random((n_a, n_b, n_s, n_s))
    transition = raw / raw.sum(axis=-1, keepdims=True)
    reward = rng.uniform(-1.0, 1.0, size=(n_a, n_b, n_s))
    return GameSpec(n_s, n_a, n_b, transition, reward, gamma)


def generate_random_model(dims: Dims, seed: int, floor: float = 0.05) -> SamplingModel:
    """Random strictly positive behaviour model; each probability is at least ``floor / k``."""
    n_a, n_b, n_s = dims
    rng = np.random.default_rng(seed)

    def simplex(shape):
        x = rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])
        return (1.0 - floor) * x + floor / shape[-1]

    return SamplingModel(simplex((n_s,)), simplex((n_s, n_a)), simplex((n_s, n_b)))


def matching_pennies(gamma: float = 0.5) -> GameSpec:
    """Single-state self-loop matching pennies, R = [1, -1, -1, 1] in flat order."""
    reward = np.array([[[1.0], [-1.0]], [[-1.0], [1.0]]])
    transition = np.ones((2, 2, 1, 1))
    return GameSpec(1, 2, 2, transition, reward, gamma)


# ---------------------------------------------------------------------------
# File format

_REQUIRED = ("num_states", "num_actions_user", "num_actions_adv", "discount", "transition", "reward")
_ALLOWED = set(_REQUIRED) | {"sampling"}


def game_to_dict(spec: GameSpec, model: SamplingModel | None = None) -> dict:
    doc = {
        "num_states": spec.num_states,
        "num_actions_user": spec.num_actions_user,
        "num_actions_adv": spec.num_actions_adv,
        "discount": spec.discount,
        "transition": spec.transition.tolist(),
        "reward": spec.reward.tolist(),
    }
    if model is not None:
        doc["sampling"] = {
            "p": model.state_dist.tolist(),
            "beta": model.user_policy.tolist(),
            "phi": model.adv_policy.tolist(),
        }
    return doc


def _array(doc: dict, key: str, label: str) -> np.ndarray:
    try:
        arr = np.array(doc[key], dtype=float)
    except (ValueError, TypeError) as exc:  # ragged or non-numeric
        raise LoadError(f"{label} shape: {exc}") from None
    return arr


def game_from_dict(doc: dict) -> tuple[GameSpec, SamplingModel | None]:
    if not isinstance(doc, dict):
        raise LoadError("document must be a JSON object")
    for key in _REQUIRED:
        if key not in doc:
            raise LoadError(f"missing required field: {key}")
    extra = sorted(set(doc) - _ALLOWED)
    if extra:
        raise LoadError(f"unexpected top-level field: {extra[0]}")
    try:
        n_s = int(doc["num_states"])
        n_a = int(doc["num_actions_user"])
        n_b = int(doc["num_actions_adv"])
        gamma = float(doc["discount"])
    except (TypeError, ValueError) as exc:
        raise LoadError(f"bad scalar field: {exc}") from None
    if min(n_a, n_b, n_s) < 1:
        raise LoadError("num_states / num_actions_* must be positive")

    transition = _array(doc, "transition", "transition")
    if transition.shape != (n_a, n_b, n_s, n_s):
        raise LoadError(f"transition shape {transition.shape} != {(n_a, n_b, n_s, n_s)}")
    reward = _array(doc, "reward", "reward")
    if reward.shape == (n_a, n_b, n_s, n_s):
        if np.any(np.abs(reward) > 1.0):
            raise LoadError("reward bound: |r(s,a,b,s')| must be <= 1")
        # expected reward R(s,a,b) = sum_s' P(s'|s,a,b) r(s,a,b,s')
        reward = np.einsum("abst,abst->abs", transition, reward)
    elif reward.shape != (n_a, n_b, n_s):
        raise LoadError(f"reward shape {reward.shape} != {(n_a, n_b, n_s)}")

    spec = GameSpec(n_s, n_a, n_b, transition, reward, gamma)
    report = validate_game(spec)
    if not report.ok:
        raise LoadError("validation failed: " + "; ".join(report.violations))

    model = None
    if "sampling" in doc:
        samp = doc["sampling"]
        if not isinstance(samp, dict) or set(samp) != {"p", "beta", "phi"}:
            raise LoadError("sampling must have exactly the fields p, beta, phi")
        p = _array(samp, "p", "sampling.p")
        beta = _array(samp, "beta", "sampling.beta")
        phi = _array(samp, "phi", "sampling.phi")
        if p.shape != (n_s,) or beta.shape != (n_s, n_a) or phi.shape != (n_s, n_b):
            raise LoadError("sampling shape does not match game dimensions")
        try:
            model = SamplingModel(p, beta, phi)
        except ParameterError as exc:
            raise LoadError(f"sampling: {exc}") from None
    return spec, model


def read_game_file(path) -> tuple[GameSpec, SamplingModel | None]:
    """Load a game and its optional sampling model from a JSON document."""
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise LoadError(f"cannot read game file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise LoadError(f"malformed JSON: {exc}") from None
    return game_from_dict(doc)


def load_game(path) -> GameSpec:
    return read_game_file(path)[0]


def save_game(spec: GameSpec, path, model: SamplingModel | None = None) -> None:
    # repr-precision floats make save/load an exact round trip
    Path(path).write_text(json.dumps(game_to_dict(spec, model), indent=1) + "\n")
