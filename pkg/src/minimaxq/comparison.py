"""Lockstep simulation of minimax Q-learning and its four comparison systems.

All five systems consume the noise vector w_k computed from the original
learner's current table:

* original:    Q_{k+1}   from the single-entry TD update
* lower:       x^L  <- (I + a(g D P Pi_{G_Q* Q*} G_{x^L} - D)) x^L + a w
* upper:       x^U  <- (I + a(g D P Pi_{G_Q* x^U} G_Q* - D)) x^U + a w
* lower-upper: x^LU <- A x^LU + a w,  A = I + a(g D P Pi_{G_Q* Q*} G_Q* - D)
* upper-lower: x^UL <- A x^UL + a w

where x = (table - Q*). The functions ``step_lower`` and friends build the
dense matrices and serve as the reference; ``CoupledBatch`` advances many
independent trials at once using integer selections.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import GameSpec, SamplingModel, occupation_frequency, occupation_tensor
from .learning import RNG_NAME, check_initial_q, default_stride, make_rng, q_max, sample_stream
from .operators import (
    apply_min_selector,
    argmax_a,
    argmin_b,
    check_step_size,
    max_selector,
    min_selector,
    selected_flat_index,
    stacked_transition,
)

ORDER_TOL = 1e-9
IDENTITY_TOL = 1e-12
SYSTEMS = ("orig", "L", "U", "LU", "UL")


# ---------------------------------------------------------------------------
# dense reference steps


def _gdp(spec: GameSpec, model: SamplingModel) -> tuple[np.ndarray, np.ndarray]:
    d = occupation_tensor(model)
    return spec.discount * d[:, None] * stacked_transition(spec), d


def _mode_matrix(selector: np.ndarray, spec, model, alpha) -> np.ndarray:
    """I + alpha (gamma D P selector - D)."""
    gdp, d = _gdp(spec, model)
    return np.eye(spec.n) + alpha * (gdp @ selector - np.diag(d))


def star_selector(q_star, dims) -> np.ndarray:
    g = min_selector(q_star, dims)
    return max_selector(g @ q_star, dims) @ g


def lower_selector(x_low, q_star, dims) -> np.ndarray:
    """Pi_{Gamma_Q* Q*} Gamma_{x}: user choice frozen at Q*, adversary greedy on the shifted error."""
    g_star = min_selector(q_star, dims)
    return max_selector(g_star @ q_star, dims) @ min_selector(x_low, dims)


def upper_selector(x_up, q_star, dims) -> np.ndarray:
    """Pi_{Gamma_Q* x} Gamma_Q*: adversary choice frozen at Q*, user greedy on the shifted error."""
    g_star = min_selector(q_star, dims)
    return max_selector(g_star @ x_up, dims) @ g_star


def step_lower(q_low, q_star, w, spec: GameSpec, model: SamplingModel, alpha: float) -> np.ndarray:
    alpha = check_step_size(alpha)
    x = np.asarray(q_low, dtype=float) - q_star
    a = _mode_matrix(lower_selector(x, q_star, spec.dims), spec, model, alpha)
    return q_star + a @ x + alpha * np.asarray(w)


def step_upper(q_up, q_star, w, spec: GameSpec, model: SamplingModel, alpha: float) -> np.ndarray:
    alpha = check_step_size(alpha)
    x = np.asarray(q_up, dtype=float) - q_star
    a = _mode_matrix(upper_selector(x, q_star, spec.dims), spec, model, alpha)
    return q_star + a @ x + alpha * np.asarray(w)


def linear_system_matrix(q_star, spec: GameSpec, model: SamplingModel, alpha: float) -> np.ndarray:
    """The fixed matrix A shared by the lower-upper and upper-lower systems."""
    return _mode_matrix(star_selector(q_star, spec.dims), spec, model, check_step_size(alpha))


def step_linear(x, w, spec: GameSpec, model: SamplingModel, alpha: float, q_star) -> np.ndarray:
    """x' = A x + alpha w for an error vector x = table - Q*."""
    a = linear_system_matrix(q_star, spec, model, alpha)
    return a @ np.asarray(x, dtype=float) + alpha * np.asarray(w)


@dataclass(frozen=True)
class ErrorSystemMatrices:
    A_mode: np.ndarray
    B_mode: np.ndarray
    side: str


def error_system_matrices(q_mode, q_star, spec: GameSpec, model: SamplingModel, alpha: float, side: str) -> ErrorSystemMatrices:
    """Matrices of the noise-free error recursion between a switching system and its linear bound.

    side="lower": (x^L - x^LU)' = A (x^L - x^LU) + B x^LU with the mode of ``q_mode``.
    side="upper": (x^U - x^UL)' = A (x^U - x^UL) + B x^UL.
    """
    alpha = check_step_size(alpha)
    q_star = np.asarray(q_star, dtype=float)
    x = np.asarray(q_mode, dtype=float) - q_star
    dims = spec.dims
    if side == "lower":
        mode_sel = lower_selector(x, q_star, dims)
    elif side == "upper":
        mode_sel = upper_selector(x, q_star, dims)
    else:
        raise ValueError(f"side must be 'lower' or 'upper', got {side!r}")
    gdp, _ = _gdp(spec, model)
    a = _mode_matrix(mode_sel, spec, model, alpha)
    b = alpha * gdp @ (mode_sel - star_selector(q_star, dims))
    return ErrorSystemMatrices(a, b, side)


# ---------------------------------------------------------------------------
# batched engine


@dataclass
class StepDiagnostics:
    order_violations: np.ndarray  # (T,) count of violated entries this step
    consistency_residual: float  # TD update vs switched-affine matrix form
    lower_identity_residual: float
    upper_identity_residual: float
    max_abs_q: float


class CoupledBatch:
    """T independent coupled trajectories advanced in lockstep, one sample stream per trial."""

    def __init__(self, spec: GameSpec, model: SamplingModel, alpha: float, q_star, q0, seeds, steps: int):
        self.spec = spec
        self.model = model
        self.alpha = check_step_size(alpha)
        occupation_frequency(model)
        self.dims = spec.dims
        n = spec.n
        self.q_star = np.asarray(q_star, dtype=float)
        q0 = check_initial_q(q0, n)
        self.seeds = list(seeds)
        t = len(self.seeds)
        self.steps = steps

        streams = [sample_stream(spec, model, steps, make_rng(sd)) for sd in self.seeds]
        self.flat = np.stack([st.flat(self.dims) for st in streams]) if steps else np.zeros((t, 0), int)
        self.s_next = np.stack([st.s_next for st in streams]) if steps else np.zeros((t, 0), int)
        self.r = np.stack([st.r for st in streams]) if steps else np.zeros((t, 0))

        self.d = occupation_tensor(model)
        self.p_t = stacked_transition(spec).T  # (S, n)
        self.gamma = spec.discount
        self.reward = spec.reward_vector

        self.b_star = argmin_b(self.q_star, self.dims)
        self.a_star = argmax_a(apply_min_selector(self.q_star, self.b_star, self.dims), self.dims)
        self.idx_star = selected_flat_index(self.b_star, self.a_star, self.dims)  # (S,)
        self.v_star = self.q_star[self.idx_star]

        self.q = np.tile(q0, (t, 1))
        x0 = q0 - self.q_star
        self.x_low = np.tile(x0, (t, 1))
        self.x_up = self.x_low.copy()
        self.x_lu = self.x_low.copy()
        self.x_ul = self.x_low.copy()
        self.k = 0
        self.q_max = q_max(q0, self.gamma)
        self._rows = np.arange(t)

    @property
    def trials(self) -> int:
        return len(self.seeds)

    def _lift(self, sel_vals: np.ndarray) -> np.ndarray:
        """gamma D P applied to selected values of shape (..., S)."""
        return self.gamma * self.d * (sel_vals @ self.p_t)

    def errors(self) -> dict[str, np.ndarray]:
        return {
            "orig": self.q - self.q_star,
            "L": self.x_low,
            "U": self.x_up,
            "LU": self.x_lu,
            "UL": self.x_ul,
        }

    def noise(self) -> tuple[np.ndarray, np.ndarray]:
        """(w_k, TD errors) for every trial at the current step, from the original tables."""
        k = self.k
        rows, i = self._rows, self.flat[:, k]
        v = self.q.reshape(-1, *self.dims).min(axis=2).max(axis=1)  # (T, S)
        delta = self.r[:, k] + self.gamma * v[rows, self.s_next[:, k]] - self.q[rows, i]
        mean = self.d * (self.reward + self.gamma * (v @ self.p_t) - self.q)
        w = -mean
        w[rows, i] += delta
        return w, delta

    def step(self) -> tuple[np.ndarray, StepDiagnostics]:
        alpha, d, dims = self.alpha, self.d, self.dims
        t = self.trials
        rows, i = self._rows, self.flat[:, self.k]
        w, delta = self.noise()

        # original system: single-entry TD update
        q_new = self.q.copy()
        q_new[rows, i] += alpha * delta

        # mode selections: original (for the matrix-form cross-check), lower, upper, then the fixed one
        x = self.q - self.q_star
        b_q = argmin_b(self.q, dims)
        idx_q = selected_flat_index(b_q, argmax_a(apply_min_selector(self.q, b_q, dims), dims), dims)
        idx_low = selected_flat_index(argmin_b(self.x_low, dims), self.a_star, dims)
        a_up = argmax_a(apply_min_selector(self.x_up, np.broadcast_to(self.b_star, (t,) + self.b_star.shape), dims), dims)
        idx_up = selected_flat_index(self.b_star, a_up, dims)
        idx_fixed = np.broadcast_to(self.idx_star, idx_q.shape)

        # all five matrix recursions x' = x + alpha (gamma D P x[sel] - D x) + alpha w in one pass;
        # the last two rows are the noise-free error recursions driven by the fixed-system states
        gap_low = self.x_low - self.x_lu
        gap_up = self.x_up - self.x_ul
        states = np.stack([x, self.x_low, self.x_up, self.x_lu, self.x_ul, gap_low, gap_up])
        sel = np.stack([idx_q, idx_low, idx_up, idx_fixed, idx_fixed, idx_low, idx_up])
        picked = np.take_along_axis(states, sel, axis=2)
        stepped = states + alpha * (self._lift(picked) - d * states)
        stepped[:5] += alpha * w

        x_matrix = stepped[0] + alpha * self._lift(self.q_star[idx_q] - self.v_star)
        consistency = float(np.max(np.abs(x_matrix - (q_new - self.q_star)), initial=0.0))
        low_new, up_new, lu_new, ul_new = stepped[1], stepped[2], stepped[3], stepped[4]

        # B x^LU / B x^UL terms of the error recursions
        drive = np.stack([self.x_lu, self.x_ul])
        drive_sel = np.take_along_axis(drive, np.stack([idx_low, idx_up]), axis=2) - drive[:, :, self.idx_star]
        pred = stepped[5:] + alpha * self._lift(drive_sel)
        lower_res = float(np.max(np.abs(pred[0] - (low_new - lu_new)), initial=0.0))
        upper_res = float(np.max(np.abs(pred[1] - (up_new - ul_new)), initial=0.0))

        self.q, self.x_low, self.x_up, self.x_lu, self.x_ul = q_new, low_new, up_new, lu_new, ul_new
        self.k += 1
        diag = StepDiagnostics(
            order_violations=self.order_violations(),
            consistency_residual=consistency,
            lower_identity_residual=lower_res,
            upper_identity_residual=upper_res,
            max_abs_q=float(np.max(np.abs(q_new))),
        )
        return w, diag

    def order_violations(self, tol: float = ORDER_TOL) -> np.ndarray:
        """Per-trial count of entries breaking x^L <= x <= x^U, x^L <= x^LU, x^UL <= x^U."""
        x = self.q - self.q_star
        bad = (
            (self.x_low > x + tol).sum(axis=1)
            + (x > self.x_up + tol).sum(axis=1)
            + (self.x_low > self.x_lu + tol).sum(axis=1)
            + (self.x_ul > self.x_up + tol).sum(axis=1)
        )
        return bad


# ---------------------------------------------------------------------------
# drivers


@dataclass
class CoupledTrajectory:
    """One trial: per-step errors of the five systems and the shared noise."""

    err_inf: np.ndarray  # (steps + 1, 5) in SYSTEMS order
    err_2: np.ndarray
    noise: np.ndarray  # (steps, n)
    final: dict[str, np.ndarray]  # absolute tables at the last step
    order_violations: int
    max_consistency_residual: float
    max_lower_identity_residual: float
    max_upper_identity_residual: float
    max_abs_q: float
    q_max: float
    seed: object
    rng: str = RNG_NAME


def _norms(batch: CoupledBatch) -> tuple[np.ndarray, np.ndarray]:
    errs = batch.errors()
    stacked = np.stack([errs[name] for name in SYSTEMS], axis=1)  # (T, 5, n)
    return np.abs(stacked).max(axis=2), np.sqrt(np.einsum("tsn,tsn->ts", stacked, stacked))


def run_coupled(spec, model, alpha, steps: int, seed, q0, q_star) -> CoupledTrajectory:
    """Simulate one coupled trajectory, keeping every step's errors and noise."""
    batch = CoupledBatch(spec, model, alpha, q_star, q0, [seed], steps)
    inf, two = _norms(batch)
    err_inf, err_2 = [inf[0]], [two[0]]
    noise = np.zeros((steps, spec.n))
    viol = 0
    cons = low = up = 0.0
    max_abs = float(np.max(np.abs(batch.q)))
    for k in range(steps):
        w, diag = batch.step()
        noise[k] = w[0]
        inf, two = _norms(batch)
        err_inf.append(inf[0])
        err_2.append(two[0])
        viol += int(diag.order_violations.sum())
        cons = max(cons, diag.consistency_residual)
        low = max(low, diag.lower_identity_residual)
        up = max(up, diag.upper_identity_residual)
        max_abs = max(max_abs, diag.max_abs_q)
    final = {name: e[0] + batch.q_star for name, e in batch.errors().items()}
    return CoupledTrajectory(
        np.array(err_inf), np.array(err_2), noise, final, viol, cons, low, up, max_abs, batch.q_max, seed
    )


@dataclass
class CoupledStats:
    """Trial-aggregated error curves for the five systems at the recorded steps."""

    ks: np.ndarray
    mean_inf: dict[str, np.ndarray]
    mean_2: dict[str, np.ndarray]
    max_inf: dict[str, np.ndarray]
    max_2: dict[str, np.ndarray]
    order_violations: np.ndarray  # per recorded row: violations in (previous row, this row]
    q_bound_violations: int
    max_abs_q: float
    q_max: float
    max_consistency_residual: float
    max_lower_identity_residual: float
    max_upper_identity_residual: float
    trials: int
    trial_order_violations: np.ndarray = None  # (T,) total over all steps, per trial in seed order
    seeds: list = field(default_factory=list)


def run_coupled_batch(spec, model, alpha, steps: int, seeds, q0, q_star, stride: int | None = None) -> CoupledStats:
    """Run ``len(seeds)`` coupled trials and aggregate in seed order."""
    batch = CoupledBatch(spec, model, alpha, q_star, q0, seeds, steps)
    stride = default_stride(spec.n) if stride is None else int(stride)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    ks, rows_inf, rows_2 = [0], [], []
    inf, two = _norms(batch)
    rows_inf.append(inf)
    rows_2.append(two)
    per_trial = batch.order_violations().astype(np.int64)
    viol_rows = [int(per_trial.sum())]
    pending = 0
    q_viol = int(np.max(np.abs(batch.q)) > batch.q_max + 1e-12)
    max_abs = float(np.max(np.abs(batch.q)))
    cons = low = up = 0.0
    for k in range(steps):
        _, diag = batch.step()
        pending += int(diag.order_violations.sum())
        per_trial += diag.order_violations
        max_abs = max(max_abs, diag.max_abs_q)
        q_viol += int(diag.max_abs_q > batch.q_max + 1e-12)
        cons = max(cons, diag.consistency_residual)
        low = max(low, diag.lower_identity_residual)
        up = max(up, diag.upper_identity_residual)
        if (k + 1) % stride == 0 or k + 1 == steps:
            inf, two = _norms(batch)
            ks.append(k + 1)
            rows_inf.append(inf)
            rows_2.append(two)
            viol_rows.append(pending)
            pending = 0
    inf = np.stack(rows_inf)  # (K, T, 5)
    two = np.stack(rows_2)

    def split(arr):
        return {name: arr[:, j] for j, name in enumerate(SYSTEMS)}

    return CoupledStats(
        ks=np.array(ks),
        mean_inf=split(inf.mean(axis=1)),
        mean_2=split(two.mean(axis=1)),
        max_inf=split(inf.max(axis=1)),
        max_2=split(two.max(axis=1)),
        order_violations=np.array(viol_rows),
        q_bound_violations=q_viol,
        max_abs_q=max_abs,
        q_max=batch.q_max,
        max_consistency_residual=cons,
        max_lower_identity_residual=low,
        max_upper_identity_residual=up,
        trials=batch.trials,
        trial_order_violations=per_trial,
        seeds=list(seeds),
    )


def combine_stats(parts) -> CoupledStats:
    """Merge batches run over disjoint seed lists, in the given order, into one aggregate."""
    parts = list(parts)
    if not parts:
        raise ValueError("nothing to combine")
    ks = parts[0].ks
    if any(not np.array_equal(p.ks, ks) for p in parts):
        raise ValueError("batches were recorded at different steps")
    total = sum(p.trials for p in parts)

    def mean(attr):
        return {s: sum(getattr(p, attr)[s] * p.trials for p in parts) / total for s in SYSTEMS}

    def peak(attr):
        return {s: np.max([getattr(p, attr)[s] for p in parts], axis=0) for s in SYSTEMS}

    return CoupledStats(
        ks=ks.copy(),
        mean_inf=mean("mean_inf"),
        mean_2=mean("mean_2"),
        max_inf=peak("max_inf"),
        max_2=peak("max_2"),
        order_violations=np.sum([p.order_violations for p in parts], axis=0),
        q_bound_violations=sum(p.q_bound_violations for p in parts),
        max_abs_q=max(p.max_abs_q for p in parts),
        q_max=parts[0].q_max,
        max_consistency_residual=max(p.max_consistency_residual for p in parts),
        max_lower_identity_residual=max(p.max_lower_identity_residual for p in parts),
        max_upper_identity_residual=max(p.max_upper_identity_residual for p in parts),
        trials=total,
        trial_order_violations=np.concatenate([p.trial_order_violations for p in parts]),
        seeds=[s for p in parts for s in p.seeds],
    )
