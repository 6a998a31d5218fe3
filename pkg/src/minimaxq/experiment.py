"""Seeded coupled-verification experiments with CSV and JSON-sidecar output."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import BoundParams, evaluate_all
from .comparison import IDENTITY_TOL, CoupledStats, run_coupled_batch
from .errors import ParameterError
from .game import GameSpec, SamplingModel, generate_random_game, read_game_file
from .learning import RNG_NAME, trial_seed
from .value_iteration import solve_optimal_q

CSV_COLUMNS = (
    "k",
    "err_orig_inf",
    "err_orig_2",
    "err_L_inf",
    "err_U_inf",
    "err_LU_2",
    "err_UL_2",
    "bound_thm1",
    "bound_thm2",
    "bound_cor1_eq4",
    "bound_cor1_eq5",
    "bound_thm4",
    "bound_thm5",
    "order_violations",
)

# (bound, system, norm) triples certified on every run
CERTIFIED = (
    ("thm1", "LU", "2"),
    ("thm2", "L", "inf"),
    ("cor1_eq4", "L", "inf"),
    ("cor1_eq5", "L", "inf"),
    ("thm4", "U", "inf"),
    ("thm5", "orig", "inf"),
    ("thm5", "orig", "2"),
)


@dataclass
class ExperimentConfig:
    game_path: str | None = None
    gen_dims: tuple[int, int, int] | None = None
    gen_seed: int = 0
    gamma: float | None = None
    alpha: float = 0.05
    steps: int = 10_000
    trials: int = 100
    base_seed: int = 0
    stride: int | None = None
    q0: str = "zeros"  # "zeros" or "random" (uniform on [-1, 1], seeded by base_seed)
    exponent_variant: str = "printed"
    vi_tol: float = 1e-12
    order_tol: float = 1e-9
    identity_tol: float = IDENTITY_TOL
    out: str | None = None

    def validate(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.steps < 0:
            raise ParameterError("steps must be >= 0")
        if (self.game_path is None) == (self.gen_dims is None):
            raise ParameterError("give exactly one of a game file or generator dims")
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0:
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.q0 not in ("zeros", "random"):
            raise ParameterError("q0 must be 'zeros' or 'random'")

    def digest(self) -> str:
        payload = {k: v for k, v in asdict(self).items() if k != "out"}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    ks: np.ndarray
    stats: CoupledStats
    bounds: dict[str, np.ndarray]
    params: BoundParams
    q_star: np.ndarray
    violations: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def rows(self):
        s = self.stats
        cols = [
            self.ks,
            s.mean_inf["orig"],
            s.mean_2["orig"],
            s.mean_inf["L"],
            s.mean_inf["U"],
            s.mean_2["LU"],
            s.mean_2["UL"],
            *(self.bounds[name] for name in ("thm1", "thm2", "cor1_eq4", "cor1_eq5", "thm4", "thm5")),
            s.order_violations,
        ]
        for j in range(len(self.ks)):
            yield [c[j] for c in cols]


def resolve_game(cfg: ExperimentConfig) -> tuple[GameSpec, SamplingModel]:
    if cfg.game_path is not None:
        spec, model = read_game_file(cfg.game_path)
    else:
        spec = generate_random_game(tuple(cfg.gen_dims), 0.9 if cfg.gamma is None else cfg.gamma, cfg.gen_seed)
        model = None
    if cfg.gamma is not None and cfg.gamma != spec.discount:
        spec = GameSpec(spec.num_states, spec.num_actions_user, spec.num_actions_adv, spec.transition, spec.reward, cfg.gamma)
    if model is None:
        model = SamplingModel.uniform(spec.dims)
    return spec, model


def initial_q(cfg: ExperimentConfig, n: int) -> np.ndarray:
    if cfg.q0 == "zeros":
        return np.zeros(n)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(cfg.base_seed), 2**32 - 1])))
    return rng.uniform(-1.0, 1.0, n)


def certify(stats: CoupledStats, bounds: dict[str, np.ndarray], identity_tol: float = IDENTITY_TOL) -> list[str]:
    """Diagnostics for every invariant or bound that failed; empty on a passing run."""
    problems = []
    ks = stats.ks
    for j in np.nonzero(stats.order_violations)[0]:
        problems.append(f"order_violation k={ks[j]} count={stats.order_violations[j]}")
    if stats.q_bound_violations:
        problems.append(f"q_max_violation steps={stats.q_bound_violations} max|Q|={stats.max_abs_q!r} q_max={stats.q_max!r}")
    for name, value in (
        ("consistency_residual", stats.max_consistency_residual),
        ("lower_identity_residual", stats.max_lower_identity_residual),
        ("upper_identity_residual", stats.max_upper_identity_residual),
    ):
        if value > identity_tol:
            problems.append(f"{name}={value!r} > {identity_tol!r}")
    for which, system, norm in CERTIFIED:
        emp = (stats.mean_inf if norm == "inf" else stats.mean_2)[system]
        bad = ks[bounds[which] < emp]
        if bad.size:
            problems.append(f"bound_violation {which} vs err_{system}_{norm} first_k={bad[0]} count={bad.size}")
    return problems


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    cfg.validate()
    spec, model = resolve_game(cfg)
    q_star = solve_optimal_q(spec, cfg.vi_tol).q_star
    q0 = initial_q(cfg, spec.n)
    seeds = [trial_seed(cfg.base_seed, i) for i in range(cfg.trials)]
    stats = run_coupled_batch(spec, model, cfg.alpha, cfg.steps, seeds, q0, q_star, stride=cfg.stride)
    params = BoundParams.from_problem(spec, model, cfg.alpha, q0, q_star, cfg.exponent_variant)
    bounds = evaluate_all(stats.ks, params)
    record = RunRecord(stats.ks, stats, bounds, params, q_star)
    record.violations = certify(stats, bounds, cfg.identity_tol)
    record.metadata = {
        "tool": "minimaxq",
        "version": __version__,
        "config": asdict(cfg),
        "config_hash": cfg.digest(),
        "rng": RNG_NAME,
        "trial_seeds": [{"entropy": list(map(int, s.entropy))} for s in seeds],
        "bound_exponent_variant": cfg.exponent_variant,
        "dims": list(spec.dims),
        "discount": spec.discount,
        "q_star": q_star.tolist(),
        "bound_params": asdict(params) | {"rho": params.rho, "q_max": params.q_max, "w_max": params.w_max},
        "max_abs_q": stats.max_abs_q,
        "max_consistency_residual": stats.max_consistency_residual,
        "max_lower_identity_residual": stats.max_lower_identity_residual,
        "max_upper_identity_residual": stats.max_upper_identity_residual,
        "violations": record.violations,
    }
    return record


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(record: RunRecord, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in record.rows():
            writer.writerow([_fmt(v) for v in row])


def write_metadata(record: RunRecord, path) -> None:
    Path(path).write_text(json.dumps(record.metadata, indent=1, sort_keys=True) + "\n")


def metadata_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".meta.json")
